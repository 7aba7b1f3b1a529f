#ifndef CONTAUDIT_STRATEGIES_RUNNER_HPP
#define CONTAUDIT_STRATEGIES_RUNNER_HPP

#include "contaudit/scenario/stream.hpp"
#include "contaudit/strategies/ewc.hpp"
#include "contaudit/strategies/replay.hpp"

#include <nlohmann/json.hpp>

#include <chrono>

namespace contaudit::strategies {

enum class StrategyKind : std::uint8_t { sel, jel, sft, ewc, er };

inline std::string to_string(StrategyKind k) {
    switch (k) {
        case StrategyKind::sel: return "SEL";
        case StrategyKind::jel: return "JEL";
        case StrategyKind::sft: return "SFT";
        case StrategyKind::ewc: return "EWC";
        case StrategyKind::er: return "ER";
    }
    return "?";
}

inline StrategyKind strategy_from_string(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (s == "SEL") return StrategyKind::sel;
    if (s == "JEL") return StrategyKind::jel;
    if (s == "SFT") return StrategyKind::sft;
    if (s == "EWC") return StrategyKind::ewc;
    if (s == "ER") return StrategyKind::er;
    throw InputError("unknown strategy '" + s + "' (expected SEL, JEL, SFT, EWC or ER)");
}

inline const std::vector<StrategyKind>& all_strategies() {
    static const std::vector<StrategyKind> v{StrategyKind::sel, StrategyKind::jel, StrategyKind::sft,
                                             StrategyKind::ewc, StrategyKind::er};
    return v;
}

struct StrategyConfig {
    StrategyKind kind = StrategyKind::sft;
    nn::TrainConfig train;  // train.seed is replaced per experience
    double ewc_lambda = 50.0;
    std::size_t fisher_samples = 1024;
    std::size_t buffer_capacity = 500;
    std::vector<std::size_t> encoder_widths{128, 64, 32, 16, 8, 4, 2};
    std::vector<std::size_t> decoder_widths{4, 8, 16, 32, 64, 128};
    double leaky_alpha = 0.4;

    [[nodiscard]] nn::Architecture architecture(std::size_t d) const {
        nn::Architecture a{d, encoder_widths, decoder_widths, leaky_alpha};
        a.validate();
        return a;
    }

    void validate() const {
        if (!(ewc_lambda >= 0.0)) throw InputError("strategy: lambda must be >= 0");
        if (fisher_samples == 0) throw InputError("strategy: fisher_samples must be positive");
        if (buffer_capacity == 0) throw InputError("strategy: buffer_capacity must be positive");
        if (train.batch_size == 0 || train.max_epochs == 0 || train.early_stop_patience == 0)
            throw InputError("strategy: batch_size, max_epochs and patience must be positive");
        if (!(train.early_stop_rel_tol >= 0.0)) throw InputError("strategy: rel_tol must be >= 0");
        if (!(train.adam.lr > 0.0)) throw InputError("strategy: lr must be positive");
        if (!(train.adam.beta1 >= 0.0 && train.adam.beta1 < 1.0 && train.adam.beta2 >= 0.0 && train.adam.beta2 < 1.0))
            throw InputError("strategy: Adam betas must be in [0, 1)");
        if (!(train.adam.eps > 0.0)) throw InputError("strategy: Adam eps must be positive");
        if (encoder_widths.empty()) throw InputError("strategy: encoder needs at least one layer");
        (void)nn::Activation::leaky(leaky_alpha);
    }
};

/// Strategy-independent fields (everything except `kind`).
inline nlohmann::json to_json(const StrategyConfig& c) {
    return {{"lambda", c.ewc_lambda},
            {"fisher_samples", c.fisher_samples},
            {"buffer_capacity", c.buffer_capacity},
            {"max_epochs", c.train.max_epochs},
            {"batch_size", c.train.batch_size},
            {"patience", c.train.early_stop_patience},
            {"rel_tol", c.train.early_stop_rel_tol},
            {"lr", c.train.adam.lr},
            {"beta1", c.train.adam.beta1},
            {"beta2", c.train.adam.beta2},
            {"eps", c.train.adam.eps},
            {"encoder_widths", c.encoder_widths},
            {"decoder_widths", c.decoder_widths},
            {"leaky_alpha", c.leaky_alpha}};
}

inline StrategyConfig strategy_config_from_json(const nlohmann::json& j, StrategyKind kind = StrategyKind::sft) {
    try {
        StrategyConfig c;
        c.kind = kind;
        c.ewc_lambda = j.value("lambda", c.ewc_lambda);
        c.fisher_samples = j.value("fisher_samples", c.fisher_samples);
        c.buffer_capacity = j.value("buffer_capacity", c.buffer_capacity);
        c.train.max_epochs = j.value("max_epochs", c.train.max_epochs);
        c.train.batch_size = j.value("batch_size", c.train.batch_size);
        c.train.early_stop_patience = j.value("patience", c.train.early_stop_patience);
        c.train.early_stop_rel_tol = j.value("rel_tol", c.train.early_stop_rel_tol);
        c.train.adam.lr = j.value("lr", c.train.adam.lr);
        c.train.adam.beta1 = j.value("beta1", c.train.adam.beta1);
        c.train.adam.beta2 = j.value("beta2", c.train.adam.beta2);
        c.train.adam.eps = j.value("eps", c.train.adam.eps);
        c.encoder_widths = j.value("encoder_widths", c.encoder_widths);
        c.decoder_widths = j.value("decoder_widths", c.decoder_widths);
        c.leaky_alpha = j.value("leaky_alpha", c.leaky_alpha);
        c.validate();
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("run config: ") + e.what());
    }
}

struct ExperienceRecord {
    std::size_t index = 0;
    nn::TrainHistory history;
    std::size_t train_rows = 0;
    std::size_t replay_rows = 0;                    // buffer size available while training
    std::map<std::size_t, std::size_t> buffer_slots;  // after the buffer update
    double seconds = 0.0;
};

struct RunResult {
    StrategyKind kind = StrategyKind::sft;
    std::uint64_t seed = 0;
    StrategyConfig config;
    std::vector<nn::Autoencoder> snapshots;  // snapshots[i - 1] trained through experience i
    std::vector<ExperienceRecord> records;
    std::optional<ReplayBuffer> buffer;

    [[nodiscard]] std::size_t completed() const { return snapshots.size(); }
};

/// Per-experience seeds, shared by all strategies so that experience 1 is
/// trained identically everywhere.
inline std::uint64_t init_seed(std::uint64_t seed, std::size_t i) { return derive_seed(seed, "init", i); }
inline std::uint64_t train_seed(std::uint64_t seed, std::size_t i) { return derive_seed(seed, "train", i); }

struct RunHooks {
    std::function<void(const RunResult&)> on_experience;  // after each newly trained experience
};

/// Runs one strategy over the stream. `resume` may carry the first k snapshots
/// and records of an interrupted run; training continues at experience k + 1
/// and reproduces the uninterrupted run exactly.
inline RunResult run_strategy(const scenario::ExperienceStream& stream, const StrategyConfig& config,
                              std::uint64_t seed, RunResult resume = {}, const RunHooks& hooks = {}) {
    if (stream.experiences.empty()) throw InputError("run: empty stream");
    config.validate();
    const auto arch = config.architecture(stream.width());
    const std::size_t M = stream.size();
    const auto kind = config.kind;
    if (kind == StrategyKind::er && config.buffer_capacity < M)
        throw InputError("run: buffer_capacity must be >= the number of experiences");

    RunResult result = std::move(resume);
    const std::size_t resumed = result.completed();
    if (resumed > M || result.records.size() != resumed) throw InputError("run: resume state does not fit the stream");
    result.kind = kind;
    result.seed = seed;
    result.config = config;
    if (kind == StrategyKind::er) result.buffer.emplace(config.buffer_capacity);
    const bool sequential = kind == StrategyKind::sft || kind == StrategyKind::ewc || kind == StrategyKind::er;

    std::optional<nn::Autoencoder> model;
    std::optional<EwcState> ewc;
    Matrix joint(0, static_cast<Eigen::Index>(stream.width()));
    for (std::size_t i = 1; i <= M; ++i) {
        const auto& e = stream.experiences[i - 1];
        if (kind == StrategyKind::jel) joint = nn::vstack(joint, e.rows);

        if (i <= resumed) {
            model = result.snapshots[i - 1];
            if (model->architecture() != arch) throw InputError("run: resumed snapshot has a different architecture");
        } else {
            const auto t0 = std::chrono::steady_clock::now();
            if (!sequential || i == 1) model = nn::Autoencoder::random(arch, init_seed(seed, i));
            const Matrix& data = kind == StrategyKind::jel ? joint : e.rows;
            nn::TrainConfig tc = config.train;
            tc.seed = train_seed(seed, i);
            nn::TrainHooks th;
            if (kind == StrategyKind::ewc && ewc)
                th.penalty = [&ewc](const Vector& theta, Vector& grad) { return ewc_penalty(theta, *ewc, grad); };
            std::optional<ReplaySampler> sampler;
            ExperienceRecord rec;
            rec.index = i;
            rec.train_rows = static_cast<std::size_t>(data.rows());
            if (kind == StrategyKind::er && !result.buffer->empty()) {
                sampler.emplace(result.buffer->rows(), config.train.batch_size, derive_seed(seed, "replay", i));
                th.extra_batch = [&sampler] { return (*sampler)(); };
                rec.replay_rows = result.buffer->size();
            }
            rec.history = nn::train(*model, data, tc, th);
            if (rec.history.adam_t_at_start != 0) throw InternalError("optimizer state not reset");
            rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            result.snapshots.push_back(*model);
            result.records.push_back(std::move(rec));
            log()->info("{} seed {}: experience {}/{} trained on {} rows ({} epochs, loss {:.6f}, {:.1f}s)",
                        to_string(kind), seed, i, M, result.records.back().train_rows,
                        result.records.back().history.epoch_loss.size(), result.records.back().history.epoch_loss.back(),
                        result.records.back().seconds);
        }

        if (kind == StrategyKind::er) {
            if (!result.buffer->update(e.rows, i, derive_seed(seed, "buffer")))
                log()->warn("experience {} has fewer rows than the replay quota; storing all", i);
            if (i > resumed) result.records[i - 1].buffer_slots = result.buffer->slot_sizes();
        }
        if (kind == StrategyKind::ewc && i < M && i >= resumed)
            ewc = EwcState{model->parameters(),
                           compute_fisher(*model, e.rows, config.fisher_samples, derive_seed(seed, "fisher", i)),
                           config.ewc_lambda};
        if (i > resumed && hooks.on_experience) hooks.on_experience(result);
    }
    return result;
}

inline RunResult run_sel(const scenario::ExperienceStream& s, StrategyConfig c, std::uint64_t seed) {
    c.kind = StrategyKind::sel;
    return run_strategy(s, c, seed);
}
inline RunResult run_jel(const scenario::ExperienceStream& s, StrategyConfig c, std::uint64_t seed) {
    c.kind = StrategyKind::jel;
    return run_strategy(s, c, seed);
}
inline RunResult run_sft(const scenario::ExperienceStream& s, StrategyConfig c, std::uint64_t seed) {
    c.kind = StrategyKind::sft;
    return run_strategy(s, c, seed);
}
inline RunResult run_ewc(const scenario::ExperienceStream& s, StrategyConfig c, std::uint64_t seed, double lambda) {
    c.kind = StrategyKind::ewc;
    c.ewc_lambda = lambda;
    return run_strategy(s, c, seed);
}
inline RunResult run_er(const scenario::ExperienceStream& s, StrategyConfig c, std::uint64_t seed,
                        std::size_t capacity) {
    c.kind = StrategyKind::er;
    c.buffer_capacity = capacity;
    return run_strategy(s, c, seed);
}

}  // namespace contaudit::strategies

#endif  // CONTAUDIT_STRATEGIES_RUNNER_HPP
