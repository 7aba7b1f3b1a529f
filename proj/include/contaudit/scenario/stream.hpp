#ifndef CONTAUDIT_SCENARIO_STREAM_HPP
#define CONTAUDIT_SCENARIO_STREAM_HPP

#include "contaudit/ingest/encode.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace contaudit::scenario {

enum class Label : std::uint8_t { normal = 0, global_anomaly = 1, local_anomaly = 2 };

inline std::string to_string(Label l) {
    switch (l) {
        case Label::normal: return "normal";
        case Label::global_anomaly: return "global_anomaly";
        case Label::local_anomaly: return "local_anomaly";
    }
    return "?";
}

inline Label label_from_string(const std::string& s) {
    if (s == "normal") return Label::normal;
    if (s == "global_anomaly") return Label::global_anomaly;
    if (s == "local_anomaly") return Label::local_anomaly;
    throw InputError("unknown label '" + s + "'");
}

enum class DecayKind : std::uint8_t { none, linear, exponential, instant };

inline std::string to_string(DecayKind k) {
    switch (k) {
        case DecayKind::none: return "none";
        case DecayKind::linear: return "linear";
        case DecayKind::exponential: return "exponential";
        case DecayKind::instant: return "instant";
    }
    return "?";
}

inline DecayKind decay_from_string(const std::string& s) {
    if (s == "none") return DecayKind::none;
    if (s == "linear") return DecayKind::linear;
    if (s == "exponential") return DecayKind::exponential;
    if (s == "instant") return DecayKind::instant;
    throw InputError("unknown decay schedule '" + s + "'");
}

/// Share w(i) of the target department kept in experience i (1-based) of M.
///   linear      w(i) = (M - i) / (M - 1)
///   exponential w(i) = gamma^(i - 1)
///   instant     w(i) = 1 for i < cutoff, else 0   (cutoff defaults to max(2, ceil(M / 2)))
struct DecaySchedule {
    DecayKind kind = DecayKind::none;
    double gamma = 0.5;
    std::optional<std::size_t> cutoff;

    [[nodiscard]] std::size_t cutoff_for(std::size_t M) const { return cutoff.value_or(std::max<std::size_t>(2, (M + 1) / 2)); }

    void validate(std::size_t M) const {
        if (kind == DecayKind::exponential && !(gamma > 0.0 && gamma < 1.0))
            throw InputError("exponential decay needs gamma in (0, 1)");
        if (kind == DecayKind::instant && cutoff_for(M) < 2) throw InputError("instant decay cutoff must be >= 2");
        if (kind == DecayKind::linear && M < 2) throw InputError("linear decay needs M >= 2");
    }

    [[nodiscard]] double weight(std::size_t i, std::size_t M) const {
        switch (kind) {
            case DecayKind::none: return 1.0;
            case DecayKind::linear: return static_cast<double>(M - i) / static_cast<double>(M - 1);
            case DecayKind::exponential: return std::pow(gamma, static_cast<double>(i - 1));
            case DecayKind::instant: return i < cutoff_for(M) ? 1.0 : 0.0;
        }
        return 1.0;
    }

    /// floor(w(i) * count), exact in integers for the linear case.
    [[nodiscard]] std::size_t retained(std::size_t i, std::size_t M, std::size_t count) const {
        if (kind == DecayKind::linear) return (M - i) * count / (M - 1);
        if (kind == DecayKind::exponential && i == 1) return count;
        return static_cast<std::size_t>(std::floor(weight(i, M) * static_cast<double>(count)));
    }
};

/// How an anomaly row was built; kept for audit of the injection.
struct InjectionRecord {
    std::size_t row = 0;  // position inside the experience
    Label kind = Label::global_anomaly;
    std::vector<std::size_t> columns;  // perturbed categorical columns (global)
    std::int64_t copied_from = -1;     // dataset row the global anomaly was copied from
    bool relaxed = false;              // local anomaly whose combination could not be made unseen
};

struct Experience {
    std::size_t index = 0;  // 1-based
    Matrix rows;
    std::vector<int> department_index;
    std::vector<Label> labels;
    std::vector<std::int64_t> source_index;  // dataset row, -1 for injected rows
    // Target-department rows removed by decay. Never trained on; scored when the
    // target has no rows left in an experience.
    Matrix held_out;
    std::vector<std::int64_t> held_out_source;
    std::vector<InjectionRecord> injections;

    [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(rows.rows()); }

    [[nodiscard]] std::size_t count(Label l) const {
        return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), l));
    }

    [[nodiscard]] std::vector<std::size_t> rows_where(int department, Label label = Label::normal) const {
        std::vector<std::size_t> out;
        for (std::size_t r = 0; r < labels.size(); ++r)
            if (labels[r] == label && (department < 0 || department_index[r] == department)) out.push_back(r);
        return out;
    }
};

struct ExperienceStream {
    std::vector<Experience> experiences;
    ingest::Encoder encoder;
    std::vector<std::string> departments;
    std::optional<int> target_department;
    DecaySchedule schedule;
    std::map<std::string, std::uint64_t> seeds;
    double rho_lo = 1.0, rho_hi = 1.0;
    std::vector<std::string> warnings;

    [[nodiscard]] std::size_t width() const { return encoder.width(); }
    [[nodiscard]] std::size_t size() const { return experiences.size(); }
    [[nodiscard]] const Experience& last() const { return experiences.back(); }
};

inline void warn(ExperienceStream& s, const std::string& msg) {
    log()->warn("{}", msg);
    s.warnings.push_back(msg);
}

/// Splits each department's rows over M experiences without replacement:
/// experience i takes floor(rho_ik * eta_k / M) rows of department k with
/// rho_ik ~ U[rho_lo, rho_hi]. eta_k is `eta` when given, else the size of
/// department k. Exhausted pools fall back to replacement.
inline ExperienceStream build_stream(const ingest::EncodedDataset& dataset, std::size_t M, double rho_lo,
                                     double rho_hi, std::uint64_t seed, std::optional<std::size_t> eta = {}) {
    if (M < 2) throw InputError("build_stream: M must be at least 2");
    if (!(rho_lo > 0.0 && rho_lo <= rho_hi && rho_hi <= 1.0))
        throw InputError("build_stream: rho range must satisfy 0 < lo <= hi <= 1");
    if (dataset.size() == 0) throw InputError("build_stream: empty dataset");

    ExperienceStream s;
    s.encoder = dataset.encoder;
    s.departments = dataset.departments;
    s.rho_lo = rho_lo;
    s.rho_hi = rho_hi;
    s.seeds["stream"] = seed;

    const std::size_t K = dataset.departments.size();
    std::vector<std::vector<std::size_t>> pools(K);
    for (std::size_t r = 0; r < dataset.size(); ++r) pools.at(static_cast<std::size_t>(dataset.department_index[r])).push_back(r);
    for (std::size_t k = 0; k < K; ++k) {
        std::mt19937_64 rng(derive_seed(seed, "pool", k));
        std::shuffle(pools[k].begin(), pools[k].end(), rng);
    }
    std::vector<std::size_t> cursor(K, 0);
    std::mt19937_64 rho_rng(derive_seed(seed, "rho"));
    std::uniform_real_distribution<double> rho_dist(rho_lo, rho_hi);
    std::mt19937_64 fallback_rng(derive_seed(seed, "fallback"));

    for (std::size_t i = 1; i <= M; ++i) {
        Experience e;
        e.index = i;
        std::vector<std::size_t> chosen;
        std::vector<int> dept;
        for (std::size_t k = 0; k < K; ++k) {
            const double rho = rho_lo == rho_hi ? rho_lo : rho_dist(rho_rng);
            const auto eta_k = eta.value_or(pools[k].size());
            const auto n =
                static_cast<std::size_t>(std::floor(rho * static_cast<double>(eta_k) / static_cast<double>(M)));
            for (std::size_t j = 0; j < n; ++j) {
                if (cursor[k] < pools[k].size()) {
                    chosen.push_back(pools[k][cursor[k]++]);
                } else {
                    if (cursor[k] == pools[k].size())
                        warn(s, "department '" + dataset.departments[k] + "' pool exhausted in experience " +
                                    std::to_string(i) + "; sampling with replacement");
                    ++cursor[k];
                    if (pools[k].empty()) throw InputError("department '" + dataset.departments[k] + "' has no rows");
                    chosen.push_back(pools[k][fallback_rng() % pools[k].size()]);
                }
                dept.push_back(static_cast<int>(k));
            }
        }
        e.rows.resize(static_cast<Eigen::Index>(chosen.size()), static_cast<Eigen::Index>(dataset.width()));
        for (std::size_t r = 0; r < chosen.size(); ++r) {
            e.rows.row(static_cast<Eigen::Index>(r)) = dataset.rows.row(static_cast<Eigen::Index>(chosen[r]));
            e.source_index.push_back(static_cast<std::int64_t>(chosen[r]));
        }
        e.department_index = std::move(dept);
        e.labels.assign(chosen.size(), Label::normal);
        e.held_out.resize(0, static_cast<Eigen::Index>(dataset.width()));
        s.experiences.push_back(std::move(e));
    }
    return s;
}

/// Subsamples the target department in every experience to floor(w(i) * c_i)
/// rows; the removed rows move to the experience's held-out set. Other rows
/// keep their order and values.
inline ExperienceStream apply_decay(ExperienceStream s, int target, const DecaySchedule& schedule, std::uint64_t seed) {
    if (target < 0 || static_cast<std::size_t>(target) >= s.departments.size())
        throw InputError("apply_decay: unknown target department id " + std::to_string(target));
    const std::size_t M = s.size();
    schedule.validate(M);
    s.target_department = target;
    s.schedule = schedule;
    s.seeds["decay"] = seed;
    if (schedule.kind == DecayKind::none) return s;

    for (auto& e : s.experiences) {
        std::vector<std::size_t> target_rows;
        for (std::size_t r = 0; r < e.size(); ++r)
            if (e.department_index[r] == target && e.labels[r] == Label::normal) target_rows.push_back(r);
        const std::size_t keep = schedule.retained(e.index, M, target_rows.size());
        std::mt19937_64 rng(derive_seed(seed, "decay", e.index));
        std::shuffle(target_rows.begin(), target_rows.end(), rng);
        std::vector<char> drop(e.size(), 0);
        for (std::size_t j = keep; j < target_rows.size(); ++j) drop[target_rows[j]] = 1;

        Experience out;
        out.index = e.index;
        const auto removed = target_rows.size() - keep;
        out.rows.resize(static_cast<Eigen::Index>(e.size() - removed), e.rows.cols());
        out.held_out.resize(static_cast<Eigen::Index>(e.held_out.rows() + static_cast<Eigen::Index>(removed)),
                            e.rows.cols());
        out.held_out.topRows(e.held_out.rows()) = e.held_out;
        out.held_out_source = e.held_out_source;
        Eigen::Index w = 0, h = e.held_out.rows();
        for (std::size_t r = 0; r < e.size(); ++r) {
            const auto row = e.rows.row(static_cast<Eigen::Index>(r));
            if (drop[r]) {
                out.held_out.row(h++) = row;
                out.held_out_source.push_back(e.source_index[r]);
            } else {
                out.rows.row(w++) = row;
                out.department_index.push_back(e.department_index[r]);
                out.labels.push_back(e.labels[r]);
                out.source_index.push_back(e.source_index[r]);
            }
        }
        out.injections = std::move(e.injections);
        e = std::move(out);
    }
    return s;
}

}  // namespace contaudit::scenario

#endif  // CONTAUDIT_SCENARIO_STREAM_HPP
