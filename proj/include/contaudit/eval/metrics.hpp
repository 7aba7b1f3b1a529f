#ifndef CONTAUDIT_EVAL_METRICS_HPP
#define CONTAUDIT_EVAL_METRICS_HPP

#include "contaudit/nn/loss.hpp"
#include "contaudit/scenario/stream.hpp"
#include "contaudit/strategies/runner.hpp"

#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace contaudit::eval {

using scenario::Experience;
using scenario::Label;

struct DeptCell {
    std::size_t rows = 0;
    std::optional<double> loss;  // absent when rows == 0
};

/// One row of the department loss table: a snapshot scored on one experience.
struct DeptLossRow {
    std::size_t experience = 0;
    std::vector<DeptCell> cells;  // by department id
};

inline void check_width(const nn::Autoencoder& model, const Matrix& rows) {
    if (static_cast<std::size_t>(rows.cols()) != model.input_dim())
        throw InputError("evaluate: snapshot expects width " + std::to_string(model.input_dim()) + ", experience has " +
                         std::to_string(rows.cols()));
}

/// Mean reconstruction error per department over its normal-labelled rows.
inline DeptLossRow per_department_loss(const nn::Autoencoder& model, const Experience& e, std::size_t departments) {
    check_width(model, e.rows);
    DeptLossRow out{e.index, std::vector<DeptCell>(departments)};
    if (e.size() == 0) return out;
    const Vector err = nn::reconstruction_errors(model, e.rows);
    std::vector<double> sum(departments, 0.0);
    for (std::size_t r = 0; r < e.size(); ++r) {
        if (e.labels[r] != Label::normal) continue;
        const auto k = static_cast<std::size_t>(e.department_index[r]);
        if (k >= departments) throw InputError("evaluate: department id out of range");
        sum[k] += err(static_cast<Eigen::Index>(r));
        ++out.cells[k].rows;
    }
    for (std::size_t k = 0; k < departments; ++k)
        if (out.cells[k].rows > 0) out.cells[k].loss = sum[k] / static_cast<double>(out.cells[k].rows);
    return out;
}

struct TargetLoss {
    double loss = 0.0;
    std::size_t rows = 0;
    bool held_out = false;  // scored on rows removed by decay
};

/// Loss of the target department in `e`; falls back to the held-out rows
/// when decay left no target rows in the experience.
inline std::optional<TargetLoss> target_loss(const nn::Autoencoder& model, const Experience& e, int target) {
    check_width(model, e.rows);
    const auto rows = e.rows_where(target);
    if (!rows.empty()) {
        const Vector err = nn::reconstruction_errors(model, nn::gather_rows(e.rows, rows));
        double sum = 0.0;
        for (Eigen::Index r = 0; r < err.size(); ++r) sum += err(r);
        return TargetLoss{sum / static_cast<double>(rows.size()), rows.size(), false};
    }
    if (e.held_out.rows() == 0) return std::nullopt;
    check_width(model, e.held_out);
    return TargetLoss{nn::reconstruction_errors(model, e.held_out).mean(), static_cast<std::size_t>(e.held_out.rows()),
                      true};
}

struct DeltaFp {
    double value = 0.0;
    int highest = -1;  // non-target department with the highest loss
};

/// L(target) minus the highest loss among the other (present) departments.
inline DeltaFp delta_fp(const std::vector<std::optional<double>>& losses, int target) {
    if (losses.size() < 2) throw InputError("delta_fp: needs at least two departments");
    if (target < 0 || static_cast<std::size_t>(target) >= losses.size())
        throw InputError("delta_fp: target department out of range");
    const auto& t = losses[static_cast<std::size_t>(target)];
    if (!t) throw InputError("delta_fp: target department has no loss");
    DeltaFp out;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < losses.size(); ++k) {
        if (static_cast<int>(k) == target || !losses[k]) continue;
        if (*losses[k] > best) {
            best = *losses[k];
            out.highest = static_cast<int>(k);
        }
    }
    if (out.highest < 0) throw InputError("delta_fp: no non-target department has a loss");
    out.value = *t - best;
    return out;
}

struct AnomalyLosses {
    std::optional<double> target, local, global, delta_fn;
};

inline std::optional<double> mean_over(const Vector& err, const std::vector<std::size_t>& rows) {
    if (rows.empty()) return std::nullopt;
    double s = 0.0;
    for (auto r : rows) s += err(static_cast<Eigen::Index>(r));
    return s / static_cast<double>(rows.size());
}

/// L(A'), L(A_P1), L(A_P2) on the final experience; delta_fn = L(A') - L(A_P1).
inline AnomalyLosses anomaly_losses(const nn::Autoencoder& model, const Experience& last, int target) {
    check_width(model, last.rows);
    AnomalyLosses out;
    if (auto t = target_loss(model, last, target)) out.target = t->loss;
    const Vector err = last.size() ? nn::reconstruction_errors(model, last.rows) : Vector();
    out.local = mean_over(err, last.rows_where(-1, Label::local_anomaly));
    out.global = mean_over(err, last.rows_where(-1, Label::global_anomaly));
    if (!out.local) log()->warn("anomaly_losses: final experience has no local anomalies");
    if (!out.global) log()->warn("anomaly_losses: final experience has no global anomalies");
    if (out.target && out.local) out.delta_fn = *out.target - *out.local;
    return out;
}

/// Everything measured for one (strategy, seed) run.
struct RunMetrics {
    std::string strategy;
    std::uint64_t seed = 0;
    std::optional<double> delta_fp;
    std::string highest_department;  // the department Δ_FP is measured against
    bool target_held_out = false;
    AnomalyLosses anomalies;
    std::vector<DeptLossRow> table;  // snapshot i scored on experience i
    std::vector<std::optional<TargetLoss>> target_curve;

    [[nodiscard]] std::map<std::string, std::optional<double>> values() const {
        return {{"delta_fp", delta_fp},
                {"target_loss", anomalies.target},
                {"local_loss", anomalies.local},
                {"global_loss", anomalies.global},
                {"delta_fn", anomalies.delta_fn}};
    }
};

/// Scores every snapshot on its own experience and computes the final-experience metrics.
inline RunMetrics evaluate_run(const scenario::ExperienceStream& s, const std::string& strategy, std::uint64_t seed,
                               const std::vector<nn::Autoencoder>& snapshots) {
    if (snapshots.size() != s.size())
        throw InputError("evaluate: run of " + strategy + " seed " + std::to_string(seed) + " has " +
                         std::to_string(snapshots.size()) + " snapshots, stream has " + std::to_string(s.size()) +
                         " experiences (missing E_" + std::to_string(s.size()) + " snapshot)");
    RunMetrics m;
    m.strategy = strategy;
    m.seed = seed;
    for (std::size_t i = 0; i < s.size(); ++i) {
        m.table.push_back(per_department_loss(snapshots[i], s.experiences[i], s.departments.size()));
        if (s.target_department) m.target_curve.push_back(target_loss(snapshots[i], s.experiences[i], *s.target_department));
    }
    if (!s.target_department) return m;
    const int t = *s.target_department;
    const auto& final_model = snapshots.back();
    const auto& last = s.last();
    m.anomalies = anomaly_losses(final_model, last, t);
    std::vector<std::optional<double>> losses;
    for (const auto& c : m.table.back().cells) losses.push_back(c.loss);
    if (auto tl = m.target_curve.back()) {
        losses[static_cast<std::size_t>(t)] = tl->loss;
        m.target_held_out = tl->held_out;
        const auto d = delta_fp(losses, t);
        m.delta_fp = d.value;
        m.highest_department = s.departments[static_cast<std::size_t>(d.highest)];
    } else {
        log()->warn("evaluate: target department has no rows to score at E_{}", s.size());
    }
    return m;
}

inline RunMetrics evaluate_run(const scenario::ExperienceStream& s, const strategies::RunResult& r) {
    return evaluate_run(s, strategies::to_string(r.kind), r.seed, r.snapshots);
}

struct Stat {
    double mean = 0.0;
    std::optional<double> stdev;  // sample stdev, present for n >= 2
    std::size_t n = 0;
    std::vector<double> values;
};

inline Stat summarize(std::vector<double> values) {
    if (values.empty()) throw InputError("aggregate: no values");
    Stat s;
    s.n = values.size();
    // sorted so the result does not depend on seed order
    std::sort(values.begin(), values.end());
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / static_cast<double>(s.n);
    if (s.n >= 2) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.stdev = std::sqrt(ss / static_cast<double>(s.n - 1));
    }
    s.values = std::move(values);
    return s;
}

/// Per-metric mean and sample stdev across seeds of one strategy.
inline std::map<std::string, Stat> aggregate_seeds(const std::vector<RunMetrics>& runs) {
    if (runs.empty()) throw InputError("aggregate_seeds: no reports");
    std::map<std::string, std::vector<double>> values;
    std::set<std::string> keys;
    for (const auto& [k, v] : runs.front().values())
        if (v) keys.insert(k);
    for (const auto& r : runs) {
        std::set<std::string> mine;
        for (const auto& [k, v] : r.values())
            if (v) {
                mine.insert(k);
                values[k].push_back(*v);
            }
        if (mine != keys)
            throw InputError("aggregate_seeds: seed " + std::to_string(r.seed) + " of " + r.strategy +
                             " reports a different metric set");
    }
    std::map<std::string, Stat> out;
    for (auto& [k, v] : values) out[k] = summarize(std::move(v));
    return out;
}

}  // namespace contaudit::eval

#endif  // CONTAUDIT_EVAL_METRICS_HPP
