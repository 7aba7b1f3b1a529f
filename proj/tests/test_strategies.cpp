#include "contaudit/strategies/run_io.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <set>

using namespace contaudit;
using namespace contaudit::strategies;
using scenario::ExperienceStream;

namespace {

// Six one-hot groups of four. Family `base` uses values base and base + 1 only.
Matrix family_rows(std::size_t n, std::uint64_t seed, int base) {
    std::mt19937_64 rng(seed);
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(n), 24);
    for (std::size_t i = 0; i < n; ++i) {
        const auto p = rng() % 4;
        for (int g = 0; g < 6; ++g)
            out(static_cast<Eigen::Index>(i), g * 4 + base + static_cast<int>(((p >> (g % 2)) + g) % 2)) = 1.0;
    }
    return out;
}

ExperienceStream stream_of(const std::vector<Matrix>& parts) {
    ExperienceStream s;
    std::vector<std::string> values;
    for (Eigen::Index j = 0; j < parts.front().cols(); ++j) values.push_back("v" + std::to_string(100 + j));
    s.encoder.vocab = ingest::Vocabulary::from_values({"x"}, {values});
    s.departments = {"all"};
    for (std::size_t i = 0; i < parts.size(); ++i) {
        scenario::Experience e;
        e.index = i + 1;
        e.rows = parts[i];
        e.department_index.assign(static_cast<std::size_t>(parts[i].rows()), 0);
        e.labels.assign(static_cast<std::size_t>(parts[i].rows()), scenario::Label::normal);
        for (Eigen::Index r = 0; r < parts[i].rows(); ++r) e.source_index.push_back(r);
        e.held_out.resize(0, parts[i].cols());
        s.experiences.push_back(std::move(e));
    }
    return s;
}

ExperienceStream mixed_stream(std::size_t M = 3, std::size_t n = 96) {
    std::vector<Matrix> parts;
    for (std::size_t i = 0; i < M; ++i) parts.push_back(family_rows(n, 10 + i, static_cast<int>(i % 3)));
    return stream_of(parts);
}

StrategyConfig small_config(StrategyKind k) {
    StrategyConfig c;
    c.kind = k;
    c.encoder_widths = {12, 4};
    c.decoder_widths = {12};
    c.train.max_epochs = 40;
    c.train.batch_size = 32;
    c.train.adam.lr = 5e-3;
    c.buffer_capacity = 60;
    c.fisher_samples = 64;
    return c;
}

bool same_bits(const nn::Autoencoder& a, const nn::Autoencoder& b) {
    const auto& x = a.parameters();
    const auto& y = b.parameters();
    return x.size() == y.size() &&
           std::memcmp(x.data(), y.data(), sizeof(double) * static_cast<std::size_t>(x.size())) == 0;
}

double mean_loss(const nn::Autoencoder& m, const Matrix& rows) { return nn::reconstruction_errors(m, rows).mean(); }

}  // namespace

TEST(Strategies, FirstSnapshotIdenticalAcrossStrategies) {
    const auto s = mixed_stream();
    const auto sel = run_strategy(s, small_config(StrategyKind::sel), 4);
    for (auto k : all_strategies()) {
        const auto r = run_strategy(s, small_config(k), 4);
        ASSERT_EQ(r.completed(), 3u);
        ASSERT_EQ(r.records.size(), 3u);
        EXPECT_TRUE(same_bits(r.snapshots[0], sel.snapshots[0])) << to_string(k);
        for (const auto& rec : r.records) EXPECT_EQ(rec.history.adam_t_at_start, 0u);
    }
    const auto other_seed = run_strategy(s, small_config(StrategyKind::sel), 5);
    EXPECT_FALSE(same_bits(other_seed.snapshots[0], sel.snapshots[0]));
}

TEST(Strategies, SingleExperienceSelIsPlainTraining) {
    const auto s = stream_of({family_rows(64, 1, 0), family_rows(64, 2, 1)});
    const auto cfg = small_config(StrategyKind::sel);
    const auto r = run_sel(s, cfg, 9);
    auto m = nn::Autoencoder::random(cfg.architecture(24), init_seed(9, 1));
    auto tc = cfg.train;
    tc.seed = train_seed(9, 1);
    nn::train(m, s.experiences[0].rows, tc);
    EXPECT_TRUE(same_bits(m, r.snapshots[0]));
}

TEST(Strategies, SelSnapshotIgnoresOtherExperiences) {
    const auto a = mixed_stream();
    auto b = a;
    std::swap(b.experiences[0].rows, b.experiences[2].rows);
    const auto ra = run_sel(a, small_config(StrategyKind::sel), 3);
    const auto rb = run_sel(b, small_config(StrategyKind::sel), 3);
    EXPECT_TRUE(same_bits(ra.snapshots[1], rb.snapshots[1]));
    EXPECT_FALSE(same_bits(ra.snapshots[0], rb.snapshots[0]));
}

TEST(Strategies, JelTrainsOnConcatenation) {
    const auto s = stream_of({family_rows(40, 1, 0), family_rows(50, 2, 1), family_rows(30, 3, 2)});
    const auto r = run_jel(s, small_config(StrategyKind::jel), 1);
    EXPECT_EQ(r.records[0].train_rows, 40u);
    EXPECT_EQ(r.records[1].train_rows, 90u);
    EXPECT_EQ(r.records[2].train_rows, 120u);
}

TEST(Strategies, EwcWithZeroLambdaReproducesSftBitwise) {
    const auto s = mixed_stream();
    const auto sft = run_sft(s, small_config(StrategyKind::sft), 6);
    const auto ewc = run_ewc(s, small_config(StrategyKind::ewc), 6, 0.0);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_TRUE(same_bits(sft.snapshots[i], ewc.snapshots[i])) << i;
    const auto ewc50 = run_ewc(s, small_config(StrategyKind::ewc), 6, 50.0);
    for (const auto& rec : ewc50.records)
        for (double p : rec.history.epoch_penalty) EXPECT_GE(p, 0.0);
    EXPECT_GT(ewc50.records[1].history.epoch_penalty.back(), 0.0);
    EXPECT_EQ(ewc50.records[0].history.epoch_penalty.back(), 0.0);
}

TEST(Strategies, ErFirstExperienceMatchesSftThenReplays) {
    const auto s = mixed_stream();
    const auto sft = run_sft(s, small_config(StrategyKind::sft), 8);
    const auto er = run_er(s, small_config(StrategyKind::er), 8, 60);
    EXPECT_TRUE(same_bits(sft.snapshots[0], er.snapshots[0]));
    EXPECT_FALSE(same_bits(sft.snapshots[1], er.snapshots[1]));
    EXPECT_EQ(er.records[0].replay_rows, 0u);
    EXPECT_EQ(er.records[1].replay_rows, 60u);
    EXPECT_EQ(er.records[2].replay_rows, 60u);
    const std::map<std::size_t, std::size_t> slots{{1, 20}, {2, 20}, {3, 20}};
    EXPECT_EQ(er.records[2].buffer_slots, slots);
    EXPECT_EQ(er.buffer->slot_sizes(), slots);
    EXPECT_THROW(run_er(s, small_config(StrategyKind::er), 8, 2), InputError);
}

TEST(Strategies, SftStationaryStreamBarelyMoves) {
    const Matrix d = family_rows(128, 5, 0);
    const auto s = stream_of({d, d, d, d});
    auto cfg = small_config(StrategyKind::sft);
    cfg.train.max_epochs = 400;
    const auto r = run_sft(s, cfg, 2);
    const double first = mean_loss(r.snapshots[0], d);
    const double untrained = mean_loss(nn::Autoencoder::random(cfg.architecture(24), init_seed(2, 1)), d);
    for (std::size_t i = 1; i < 4; ++i) {
        const double li = mean_loss(r.snapshots[i], d);
        // a tenth of what the first experience achieved
        EXPECT_LT(std::abs(li - first), 0.1 * (untrained - first)) << i;
    }
}

TEST(Strategies, HugeLambdaFreezesInformativeParameters) {
    const auto s = mixed_stream(2);
    auto cfg = small_config(StrategyKind::ewc);
    const auto sft = run_sft(s, cfg, 12);
    const auto ewc = run_ewc(s, cfg, 12, 1e9);
    ASSERT_TRUE(same_bits(sft.snapshots[0], ewc.snapshots[0]));
    const Vector f = compute_fisher(ewc.snapshots[0], s.experiences[0].rows, cfg.fisher_samples,
                                    derive_seed(12, "fisher", 1));
    auto drift = [&](const RunResult& r) {
        return ((r.snapshots[1].parameters() - r.snapshots[0].parameters()).array() * f.array().sqrt()).abs().maxCoeff();
    };
    EXPECT_LT(drift(ewc), 0.02 * drift(sft));
    EXPECT_LT(drift(ewc), 1e-5);
}

TEST(Strategies, ReplayMitigatesForgetting) {
    // Experience 1's patterns never return in later experiences.
    int wins = 0;
    for (std::uint64_t seed : {1, 2, 3}) {
        const auto s = stream_of({family_rows(96, 100 + seed, 0), family_rows(96, 200 + seed, 2),
                                  family_rows(96, 300 + seed, 2)});
        auto cfg = small_config(StrategyKind::sft);
        cfg.train.max_epochs = 80;
        const auto sft = run_sft(s, cfg, seed);
        const auto er = run_er(s, cfg, seed, 60);
        const auto& d1 = s.experiences[0].rows;
        const double l_sft = mean_loss(sft.snapshots.back(), d1), l_er = mean_loss(er.snapshots.back(), d1);
        wins += l_er < l_sft;
    }
    EXPECT_GE(wins, 2);
}

TEST(ReplayBuffer, EqualQuotas) {
    ReplayBuffer b(500);
    std::vector<Matrix> exps;
    for (std::size_t i = 1; i <= 5; ++i) {
        exps.push_back(family_rows(600, i, 0));
        // stamp the experience index into an unused column so provenance is checkable
        exps.back().col(23).setConstant(static_cast<double>(i));
        const auto before = b.slots();
        EXPECT_TRUE(b.update(exps.back(), i, 77));
        EXPECT_EQ(b.size(), (500 / i) * i);
        for (const auto& slot : b.slots()) {
            EXPECT_EQ(static_cast<std::size_t>(slot.rows.rows()), 500 / i);
            for (Eigen::Index r = 0; r < slot.rows.rows(); ++r) {
                EXPECT_EQ(slot.rows(r, 23), static_cast<double>(slot.experience));
                EXPECT_EQ(slot.rows.row(r),
                          exps[slot.experience - 1].row(static_cast<Eigen::Index>(slot.rows_in_experience[r])));
            }
        }
        // truncation keeps a subset of what the slot held
        for (std::size_t k = 0; k < before.size(); ++k) {
            std::set<std::size_t> old(before[k].rows_in_experience.begin(), before[k].rows_in_experience.end());
            for (auto r : b.slots()[k].rows_in_experience) EXPECT_TRUE(old.count(r));
        }
    }
    EXPECT_EQ(b.size(), 500u);

    ReplayBuffer three(500);
    for (std::size_t i = 1; i <= 3; ++i) three.update(family_rows(300, i, 0), i, 1);
    EXPECT_EQ(three.size(), 498u);
    for (auto [k, n] : three.slot_sizes()) EXPECT_EQ(n, 166u);
}

TEST(ReplayBuffer, SmallExperienceStoresAll) {
    ReplayBuffer b(100);
    EXPECT_FALSE(b.update(family_rows(30, 1, 0), 1, 0));
    EXPECT_EQ(b.size(), 30u);
    EXPECT_TRUE(b.update(family_rows(80, 2, 0), 2, 0));
    EXPECT_EQ(b.slot_sizes().at(1), 30u);
    EXPECT_EQ(b.slot_sizes().at(2), 50u);
    ReplayBuffer one(1);
    one.update(family_rows(3, 1, 0), 1, 0);
    EXPECT_THROW(one.update(family_rows(3, 1, 0), 2, 0), InputError);
}

TEST(ReplayBuffer, SamplerDrawsDistinctBufferRows) {
    Matrix rows(10, 1);
    for (int i = 0; i < 10; ++i) rows(i, 0) = i;
    ReplaySampler big(rows, 128, 3);
    for (int t = 0; t < 5; ++t) {
        const auto batch = big();
        ASSERT_TRUE(batch);
        ASSERT_EQ(batch->rows(), 10);
        std::set<double> vals(batch->data(), batch->data() + batch->size());
        EXPECT_EQ(vals.size(), 10u);
    }
    ReplaySampler small(rows, 4, 3);
    std::set<double> seen;
    for (int t = 0; t < 50; ++t) {
        const auto batch = small();
        ASSERT_EQ(batch->rows(), 4);
        std::set<double> vals(batch->data(), batch->data() + batch->size());
        EXPECT_EQ(vals.size(), 4u);
        seen.insert(vals.begin(), vals.end());
    }
    EXPECT_EQ(seen.size(), 10u);
    EXPECT_FALSE(ReplaySampler(Matrix(0, 1), 4, 0)());
}

TEST(Fisher, SingleRowIsSquaredGradient) {
    const auto m = nn::Autoencoder::random({24, {12, 4}, {12}, 0.4}, 1);
    const Matrix row = family_rows(1, 1, 0);
    const Vector g = nn::loss_and_gradient(m, row).gradient;
    const Vector f = compute_fisher(m, row, 1024, 0);
    EXPECT_EQ(f, g.cwiseProduct(g));
}

TEST(Fisher, NonnegativeMeanOfSquaresAndSubsampled) {
    const auto m = nn::Autoencoder::random({24, {12, 4}, {12}, 0.4}, 1);
    const Matrix data = family_rows(20, 2, 1);
    const Vector f = compute_fisher(m, data, 1024, 0);
    EXPECT_GE(f.minCoeff(), 0.0);
    Vector expect = Vector::Zero(f.size());
    Matrix one(1, 24);
    for (Eigen::Index r = 0; r < 20; ++r) {
        one.row(0) = data.row(r);
        const Vector g = nn::loss_and_gradient(m, one).gradient;
        expect += g.cwiseProduct(g);
    }
    expect /= 20.0;
    EXPECT_LT((f - expect).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_EQ(compute_fisher(m, data, 5, 7), compute_fisher(m, data, 5, 7));
    EXPECT_NE(compute_fisher(m, data, 5, 7), f);
    EXPECT_THROW(compute_fisher(m, Matrix(0, 24), 10, 0), InputError);
}

TEST(Fisher, ConvergedModelHasSmallerFisher) {
    auto m = nn::Autoencoder::random({24, {12, 4}, {12}, 0.4}, 4);
    const Matrix data = family_rows(128, 3, 0);
    const double before = compute_fisher(m, data, 1024, 0).mean();
    nn::TrainConfig tc;
    tc.max_epochs = 300;
    tc.batch_size = 32;
    tc.adam.lr = 5e-3;
    nn::train(m, data, tc);
    EXPECT_LT(compute_fisher(m, data, 1024, 0).mean(), before);
}

TEST(EwcPenalty, HandArithmetic) {
    EwcState st{Vector::Constant(1, 1.0), Vector::Constant(1, 3.0), 50.0};
    Vector theta = Vector::Constant(1, 2.0);
    Vector g = Vector::Zero(1);
    EXPECT_DOUBLE_EQ(ewc_penalty(theta, st, g), 75.0);
    EXPECT_DOUBLE_EQ(g(0), 150.0);
    g.setConstant(1.0);
    ewc_penalty(theta, st, g);
    EXPECT_DOUBLE_EQ(g(0), 151.0);
}

TEST(EwcPenalty, ZeroAtAnchorOrZeroLambdaAndQuadratic) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 1.0);
    Vector anchor(50), fisher(50), delta(50);
    for (int i = 0; i < 50; ++i) {
        anchor(i) = n(rng);
        fisher(i) = std::abs(n(rng));
        delta(i) = n(rng);
    }
    EwcState st{anchor, fisher, 50.0};
    Vector g = Vector::Zero(50);
    EXPECT_EQ(ewc_penalty(anchor, st, g), 0.0);
    EXPECT_EQ(g.cwiseAbs().maxCoeff(), 0.0);
    const double p1 = ewc_penalty(anchor + delta, st);
    const double p2 = ewc_penalty(anchor + 2.0 * delta, st);
    EXPECT_NEAR(p2, 4.0 * p1, 1e-12 * p2);
    EwcState zero{anchor, fisher, 0.0};
    EXPECT_EQ(ewc_penalty(anchor + delta, zero), 0.0);
    Vector wrong = Vector::Zero(3);
    EXPECT_THROW(ewc_penalty(anchor, st, wrong), InternalError);
}

TEST(RunIo, InterruptedRunResumesToIdenticalResult) {
    const auto s = mixed_stream(4, 64);
    const auto root = std::filesystem::temp_directory_path() / "contaudit_test_runs";
    std::filesystem::remove_all(root);
    for (auto k : {StrategyKind::sft, StrategyKind::ewc, StrategyKind::er, StrategyKind::jel}) {
        auto cfg = small_config(k);
        cfg.train.max_epochs = 15;
        const auto full = run_strategy(s, cfg, 21);
        const auto dir = root / run_name(k, 21);
        const auto identity = run_identity(cfg, 21, "stream-a");

        // interrupt after two experiences
        struct Stop {};
        RunHooks hooks;
        hooks.on_experience = [&](const RunResult& r) {
            save_run_progress(dir, r, s.size(), identity);
            if (r.completed() == 2) throw Stop{};
        };
        EXPECT_THROW(run_strategy(s, cfg, 21, {}, hooks), Stop);
        const auto partial = load_run(dir);
        EXPECT_FALSE(partial.complete);
        EXPECT_EQ(partial.result.completed(), 2u);

        const auto resumed = run_to_directory(dir, s, cfg, 21, "stream-a");
        ASSERT_EQ(resumed.completed(), 4u);
        for (std::size_t i = 0; i < 4; ++i) EXPECT_TRUE(same_bits(resumed.snapshots[i], full.snapshots[i])) << i;
        const auto done = load_run(dir);
        EXPECT_TRUE(done.complete);
        EXPECT_EQ(done.result.records.size(), 4u);
        EXPECT_EQ(done.result.records[3].history.epoch_loss, full.records[3].history.epoch_loss);
        if (k == StrategyKind::er) EXPECT_EQ(done.result.records[3].buffer_slots, full.records[3].buffer_slots);

        // a different stream identity starts over
        const auto again = run_to_directory(dir, s, cfg, 21, "stream-b");
        EXPECT_TRUE(same_bits(again.snapshots[3], full.snapshots[3]));
    }
    std::filesystem::remove(root / run_name(StrategyKind::sft, 21) / snapshot_file(3));
    EXPECT_THROW(load_run(root / run_name(StrategyKind::sft, 21)), InputError);
    std::filesystem::remove_all(root);
}

TEST(RunConfig, JsonRoundTripAndValidation) {
    auto c = small_config(StrategyKind::er);
    c.ewc_lambda = 7.5;
    const auto back = strategy_config_from_json(to_json(c), StrategyKind::er);
    EXPECT_EQ(to_json(back), to_json(c));
    EXPECT_EQ(strategy_from_string("ewc"), StrategyKind::ewc);
    EXPECT_THROW(strategy_from_string("LwF"), InputError);
    auto j = to_json(c);
    j["lambda"] = -1.0;
    EXPECT_THROW(strategy_config_from_json(j), InputError);
    j = to_json(c);
    j["batch_size"] = 0;
    EXPECT_THROW(strategy_config_from_json(j), InputError);
    j = to_json(c);
    j["lr"] = "fast";
    EXPECT_THROW(strategy_config_from_json(j), InputError);
}
