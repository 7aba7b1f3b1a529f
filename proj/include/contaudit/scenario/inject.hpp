#ifndef CONTAUDIT_SCENARIO_INJECT_HPP
#define CONTAUDIT_SCENARIO_INJECT_HPP

#include "contaudit/scenario/stream.hpp"

#include <limits>
#include <numeric>
#include <unordered_map>

namespace contaudit::scenario {

/// Per-column value counts and numeric columns of the source dataset.
struct ColumnStats {
    std::vector<std::vector<std::size_t>> counts;  // [column][value index]
    std::vector<std::vector<double>> numeric;      // sorted scaled values per numerical column

    static ColumnStats of(const ingest::EncodedDataset& ds) {
        ColumnStats st;
        const auto& enc = ds.encoder;
        for (std::size_t c = 0; c < enc.group_count(); ++c) st.counts.emplace_back(enc.vocab.size(c), 0);
        st.numeric.resize(enc.schema.numerical_columns.size());
        for (std::size_t r = 0; r < ds.size(); ++r) {
            const auto row = ds.rows.row(static_cast<Eigen::Index>(r));
            const auto idx = enc.categorical_indices(row);
            for (std::size_t c = 0; c < idx.size(); ++c) ++st.counts[c][idx[c]];
            for (std::size_t k = 0; k < st.numeric.size(); ++k)
                st.numeric[k].push_back(row(static_cast<Eigen::Index>(enc.numeric_offset() + k)));
        }
        for (auto& v : st.numeric) std::sort(v.begin(), v.end());
        return st;
    }

    /// Value indices ordered by (count ascending, index ascending).
    [[nodiscard]] std::vector<std::size_t> rarest(std::size_t column, std::size_t n) const {
        std::vector<std::size_t> order(counts[column].size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return counts[column][a] < counts[column][b]; });
        order.resize(std::min(n, order.size()));
        return order;
    }

    /// Value indices ordered by (count descending, index ascending).
    [[nodiscard]] std::vector<std::size_t> commonest(std::size_t column, std::size_t n) const {
        std::vector<std::size_t> order(counts[column].size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return counts[column][a] > counts[column][b]; });
        order.resize(std::min(n, order.size()));
        return order;
    }

    /// Linear-interpolated quantile of a numerical column.
    [[nodiscard]] double quantile(std::size_t k, double p) const {
        const auto& v = numeric.at(k);
        if (v.empty()) return 0.0;
        const double pos = p * static_cast<double>(v.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const auto hi = std::min(lo + 1, v.size() - 1);
        return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
    }
};

struct InjectionConfig {
    std::size_t global_columns = 2;  // r
    std::size_t rare_values = 3;
    std::size_t common_values = 5;
    std::size_t max_tries = 10000;
    double low_quantile = 0.001, high_quantile = 0.999;
};

namespace detail {

inline void set_group(const ingest::Encoder& enc, Eigen::Ref<RowVector> row, std::size_t column, std::size_t value) {
    const auto off = static_cast<Eigen::Index>(enc.group_offset(column));
    row.segment(off, static_cast<Eigen::Index>(enc.vocab.size(column))).setZero();
    row(off + static_cast<Eigen::Index>(value)) = 1.0;
}

inline std::string combo_key(const std::vector<std::size_t>& idx) {
    std::string k;
    for (auto v : idx) k += std::to_string(v) + ",";
    return k;
}

inline std::optional<std::size_t> department_column(const ingest::Encoder& enc) {
    for (std::size_t c = 0; c < enc.group_count(); ++c)
        if (enc.vocab.columns[c] == enc.schema.department_column) return c;
    return std::nullopt;
}

inline void append_row(Experience& e, const RowVector& row, int dept, Label label, InjectionRecord rec) {
    const auto n = e.rows.rows();
    e.rows.conservativeResize(n + 1, Eigen::NoChange);
    e.rows.row(n) = row;
    e.department_index.push_back(dept);
    e.labels.push_back(label);
    e.source_index.push_back(-1);
    rec.row = static_cast<std::size_t>(n);
    rec.kind = label;
    e.injections.push_back(std::move(rec));
}

}  // namespace detail

/// Appends `count` global anomalies to the final experience: copies of normal
/// rows with r categorical columns moved to one of the column's rarest values
/// and each numerical value set to an extreme quantile.
inline ExperienceStream inject_global_anomalies(ExperienceStream s, const ingest::EncodedDataset& source,
                                                std::size_t count, std::uint64_t seed,
                                                const InjectionConfig& cfg = {}) {
    if (count == 0) throw InputError("inject_global_anomalies: count must be >= 1");
    if (s.experiences.empty()) throw InputError("inject_global_anomalies: empty stream");
    s.seeds["global"] = seed;
    auto& last = s.experiences.back();
    const auto normals = last.rows_where(-1, Label::normal);
    if (normals.empty()) throw InputError("inject_global_anomalies: final experience has no normal rows");

    const auto& enc = s.encoder;
    const auto st = ColumnStats::of(source);
    const auto dept_col = detail::department_column(enc);
    std::vector<std::size_t> eligible;
    for (std::size_t c = 0; c < enc.group_count(); ++c) {
        if (dept_col && c == *dept_col) continue;
        if (enc.vocab.size(c) >= 2) eligible.push_back(c);
    }
    std::size_t r = cfg.global_columns;
    if (eligible.size() < r) {
        warn(s, "only " + std::to_string(eligible.size()) + " columns available for global anomalies (wanted " +
                    std::to_string(r) + ")");
        r = eligible.size();
    }
    std::vector<std::vector<std::size_t>> rare(enc.group_count());
    for (auto c : eligible) rare[c] = st.rarest(c, cfg.rare_values);

    std::mt19937_64 rng(derive_seed(seed, "global"));
    auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
    for (std::size_t a = 0; a < count; ++a) {
        const auto src = normals[pick(normals.size())];
        RowVector row = last.rows.row(static_cast<Eigen::Index>(src));
        const auto current = enc.categorical_indices(row);
        auto cols = eligible;
        std::shuffle(cols.begin(), cols.end(), rng);
        cols.resize(r);
        std::sort(cols.begin(), cols.end());
        for (auto c : cols) {
            std::vector<std::size_t> options;
            for (auto v : rare[c])
                if (v != current[c]) options.push_back(v);
            if (options.empty()) options = rare[c];
            detail::set_group(enc, row, c, options[pick(options.size())]);
        }
        for (std::size_t k = 0; k < enc.schema.numerical_columns.size(); ++k) {
            const double p = pick(2) == 0 ? cfg.low_quantile : cfg.high_quantile;
            row(static_cast<Eigen::Index>(enc.numeric_offset() + k)) = st.quantile(k, p);
        }
        detail::append_row(last, row, last.department_index[src], Label::global_anomaly,
                           {0, Label::global_anomaly, cols, last.source_index[src], false});
    }
    return s;
}

/// Appends `count` local anomalies to the final experience: every categorical
/// value is among its column's most frequent ones, but the joint combination
/// never occurs in `source`. Numerical values are drawn from the interquartile
/// range.
inline ExperienceStream inject_local_anomalies(ExperienceStream s, const ingest::EncodedDataset& source,
                                               std::size_t count, std::uint64_t seed,
                                               const InjectionConfig& cfg = {}) {
    if (count == 0) throw InputError("inject_local_anomalies: count must be >= 1");
    if (s.experiences.empty()) throw InputError("inject_local_anomalies: empty stream");
    s.seeds["local"] = seed;
    auto& last = s.experiences.back();
    const auto& enc = s.encoder;
    const auto st = ColumnStats::of(source);
    const auto dept_col = detail::department_column(enc);

    std::unordered_map<std::string, std::size_t> seen;
    for (std::size_t r = 0; r < source.size(); ++r)
        ++seen[detail::combo_key(enc.categorical_indices(source.rows.row(static_cast<Eigen::Index>(r))))];

    std::vector<std::vector<std::size_t>> common(enc.group_count());
    for (std::size_t c = 0; c < enc.group_count(); ++c) common[c] = st.commonest(c, cfg.common_values);

    std::mt19937_64 rng(derive_seed(seed, "local"));
    auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
    for (std::size_t a = 0; a < count; ++a) {
        std::vector<std::size_t> best;
        std::size_t best_count = std::numeric_limits<std::size_t>::max();
        for (std::size_t t = 0; t < cfg.max_tries && best_count > 0; ++t) {
            std::vector<std::size_t> idx;
            for (std::size_t c = 0; c < enc.group_count(); ++c) idx.push_back(common[c][pick(common[c].size())]);
            auto it = seen.find(detail::combo_key(idx));
            const std::size_t n = it == seen.end() ? 0 : it->second;
            if (n < best_count) {
                best_count = n;
                best = std::move(idx);
            }
        }
        const bool relaxed = best_count > 0;
        if (relaxed)
            warn(s, "local anomaly " + std::to_string(a) + ": no unseen combination in " +
                        std::to_string(cfg.max_tries) + " tries; using one seen " + std::to_string(best_count) +
                        " times");
        RowVector row = RowVector::Zero(static_cast<Eigen::Index>(enc.width()));
        for (std::size_t c = 0; c < best.size(); ++c) detail::set_group(enc, row, c, best[c]);
        for (std::size_t k = 0; k < enc.schema.numerical_columns.size(); ++k) {
            const double lo = st.quantile(k, 0.25), hi = st.quantile(k, 0.75);
            row(static_cast<Eigen::Index>(enc.numeric_offset() + k)) =
                lo == hi ? lo : std::uniform_real_distribution<double>(lo, hi)(rng);
        }
        int dept = static_cast<int>(pick(s.departments.size()));
        if (dept_col) {
            const auto& name = enc.vocab.values[*dept_col][best[*dept_col]];
            auto it = std::find(s.departments.begin(), s.departments.end(), name);
            if (it != s.departments.end()) dept = static_cast<int>(it - s.departments.begin());
        }
        // later anomalies avoid repeating this combination
        ++seen[detail::combo_key(best)];
        detail::append_row(last, row, dept, Label::local_anomaly, {0, Label::local_anomaly, {}, -1, relaxed});
    }
    return s;
}

}  // namespace contaudit::scenario

#endif  // CONTAUDIT_SCENARIO_INJECT_HPP
