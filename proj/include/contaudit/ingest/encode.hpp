#ifndef CONTAUDIT_INGEST_ENCODE_HPP
#define CONTAUDIT_INGEST_ENCODE_HPP

#include "contaudit/ingest/schema.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace contaudit::ingest {

/// Department names ordered by descending record count, ties lexicographic.
inline std::vector<std::string> select_top_departments(const std::vector<RawPayment>& records, std::size_t tau) {
    if (records.empty()) throw InputError("select_top_departments: no records");
    if (tau == 0) throw InputError("select_top_departments: tau must be positive");
    std::map<std::string, std::size_t> counts;
    for (const auto& r : records) ++counts[r.department];
    if (counts.size() < tau)
        throw InputError("select_top_departments: only " + std::to_string(counts.size()) +
                         " distinct departments, tau = " + std::to_string(tau));
    std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    std::vector<std::string> out;
    for (std::size_t i = 0; i < tau; ++i) out.push_back(ranked[i].first);
    return out;
}

/// Exactly eta records per department (in the given department order). Pools
/// smaller than eta are sampled with replacement and a warning is logged.
inline std::vector<RawPayment> sample_per_department(const std::vector<RawPayment>& records,
                                                     const std::vector<std::string>& departments, std::size_t eta,
                                                     std::uint64_t seed) {
    if (eta == 0) throw InputError("sample_per_department: eta must be positive");
    std::map<std::string, std::vector<std::size_t>> pools;
    for (std::size_t i = 0; i < records.size(); ++i) pools[records[i].department].push_back(i);
    std::vector<RawPayment> out;
    out.reserve(departments.size() * eta);
    for (std::size_t k = 0; k < departments.size(); ++k) {
        auto it = pools.find(departments[k]);
        if (it == pools.end() || it->second.empty())
            throw InputError("sample_per_department: no records for department '" + departments[k] + "'");
        auto pool = it->second;
        std::mt19937_64 rng(derive_seed(seed, "sample_department", k));
        std::vector<std::size_t> chosen;
        if (pool.size() >= eta) {
            std::shuffle(pool.begin(), pool.end(), rng);
            chosen.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(eta));
            std::sort(chosen.begin(), chosen.end());
        } else {
            log()->warn("department '{}' has {} records < eta = {}; sampling with replacement", departments[k],
                        pool.size(), eta);
            std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
            for (std::size_t i = 0; i < eta; ++i) chosen.push_back(pool[pick(rng)]);
        }
        for (auto i : chosen) out.push_back(records[i]);
    }
    return out;
}

/// Per categorical column: sorted distinct values and a value -> index map.
struct Vocabulary {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> values;
    std::vector<std::map<std::string, std::size_t>> index;

    [[nodiscard]] std::size_t size(std::size_t column) const { return values.at(column).size(); }
    [[nodiscard]] std::size_t width() const {
        std::size_t w = 0;
        for (const auto& v : values) w += v.size();
        return w;
    }
    [[nodiscard]] std::optional<std::size_t> find(std::size_t column, const std::string& value) const {
        const auto& m = index.at(column);
        auto it = m.find(value);
        if (it == m.end()) return std::nullopt;
        return it->second;
    }

    static Vocabulary from_values(std::vector<std::string> columns, std::vector<std::vector<std::string>> values) {
        Vocabulary v{std::move(columns), std::move(values), {}};
        for (auto& vals : v.values) {
            std::sort(vals.begin(), vals.end());
            vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
            std::map<std::string, std::size_t> m;
            for (std::size_t i = 0; i < vals.size(); ++i) m.emplace(vals[i], i);
            v.index.push_back(std::move(m));
        }
        return v;
    }
};

inline Vocabulary build_vocab(const std::vector<RawPayment>& records, const SchemaConfig& schema) {
    if (records.empty()) throw InputError("build_vocab: no records");
    std::vector<std::vector<std::string>> values(schema.categorical_columns.size());
    for (std::size_t c = 0; c < schema.categorical_columns.size(); ++c) {
        const auto& name = schema.categorical_columns[c];
        for (const auto& r : records) {
            auto it = r.categorical.find(name);
            if (it == r.categorical.end()) throw InputError("build_vocab: record lacks column '" + name + "'");
            values[c].push_back(it->second);
        }
    }
    return Vocabulary::from_values(schema.categorical_columns, std::move(values));
}

struct MinMax {
    double min = 0.0;
    double max = 0.0;
    friend bool operator==(const MinMax&, const MinMax&) = default;
};

inline std::vector<MinMax> compute_minmax(const std::vector<RawPayment>& records, const SchemaConfig& schema) {
    if (records.empty()) throw InputError("compute_minmax: no records");
    std::vector<MinMax> out;
    for (const auto& name : schema.numerical_columns) {
        MinMax mm{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
        for (const auto& r : records) {
            const double v = r.numerical.at(name);
            mm.min = std::min(mm.min, v);
            mm.max = std::max(mm.max, v);
        }
        if (mm.max == mm.min) log()->warn("numerical column '{}' is constant ({}); it encodes to 0.0", name, mm.min);
        out.push_back(mm);
    }
    return out;
}

/// One-hot + min-max encoding layout: categorical groups in schema order,
/// followed by one scaled value per numerical column.
struct Encoder {
    SchemaConfig schema;
    Vocabulary vocab;
    std::vector<MinMax> minmax;

    [[nodiscard]] std::size_t width() const { return vocab.width() + schema.numerical_columns.size(); }
    [[nodiscard]] std::size_t group_count() const { return vocab.columns.size(); }
    [[nodiscard]] std::size_t group_offset(std::size_t column) const {
        std::size_t off = 0;
        for (std::size_t c = 0; c < column; ++c) off += vocab.size(c);
        return off;
    }
    [[nodiscard]] std::size_t numeric_offset() const { return vocab.width(); }

    [[nodiscard]] double scale(std::size_t k, double v) const {
        const auto& mm = minmax.at(k);
        if (mm.max == mm.min) return 0.0;
        return std::clamp((v - mm.min) / (mm.max - mm.min), 0.0, 1.0);
    }
    [[nodiscard]] double unscale(std::size_t k, double x) const {
        const auto& mm = minmax.at(k);
        return mm.min + x * (mm.max - mm.min);
    }

    [[nodiscard]] std::size_t value_index(std::size_t column, const std::string& value) const {
        if (auto i = vocab.find(column, value)) return *i;
        if (auto m = vocab.find(column, kMissing)) return *m;
        throw InputError("encode: value '" + value + "' of column '" + vocab.columns[column] +
                         "' is not in the vocabulary");
    }

    [[nodiscard]] RowVector encode_row(const RawPayment& r) const {
        RowVector row = RowVector::Zero(static_cast<Eigen::Index>(width()));
        std::size_t off = 0;
        for (std::size_t c = 0; c < group_count(); ++c) {
            auto it = r.categorical.find(vocab.columns[c]);
            if (it == r.categorical.end()) throw InputError("encode: record lacks column '" + vocab.columns[c] + "'");
            row(static_cast<Eigen::Index>(off + value_index(c, it->second))) = 1.0;
            off += vocab.size(c);
        }
        for (std::size_t k = 0; k < schema.numerical_columns.size(); ++k) {
            auto it = r.numerical.find(schema.numerical_columns[k]);
            if (it == r.numerical.end())
                throw InputError("encode: record lacks column '" + schema.numerical_columns[k] + "'");
            row(static_cast<Eigen::Index>(off + k)) = scale(k, it->second);
        }
        return row;
    }

    /// Categorical value indices of an encoded row (argmax per group).
    [[nodiscard]] std::vector<std::size_t> categorical_indices(const Eigen::Ref<const RowVector>& row) const {
        std::vector<std::size_t> out;
        std::size_t off = 0;
        for (std::size_t c = 0; c < group_count(); ++c) {
            Eigen::Index best = 0;
            row.segment(static_cast<Eigen::Index>(off), static_cast<Eigen::Index>(vocab.size(c))).maxCoeff(&best);
            out.push_back(static_cast<std::size_t>(best));
            off += vocab.size(c);
        }
        return out;
    }

    [[nodiscard]] RawPayment decode_row(const Eigen::Ref<const RowVector>& row) const {
        RawPayment r;
        const auto idx = categorical_indices(row);
        for (std::size_t c = 0; c < group_count(); ++c) r.categorical[vocab.columns[c]] = vocab.values[c][idx[c]];
        for (std::size_t k = 0; k < schema.numerical_columns.size(); ++k)
            r.numerical[schema.numerical_columns[k]] =
                unscale(k, row(static_cast<Eigen::Index>(numeric_offset() + k)));
        if (auto it = r.categorical.find(schema.department_column); it != r.categorical.end())
            r.department = it->second;
        return r;
    }
};

struct EncodedDataset {
    Encoder encoder;
    std::vector<std::string> departments;  // department id -> name
    Matrix rows;
    std::vector<int> department_index;
    std::uint64_t seed = 0;

    [[nodiscard]] std::size_t width() const { return encoder.width(); }
    [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(rows.rows()); }
    [[nodiscard]] int department_id(const std::string& name) const {
        auto it = std::find(departments.begin(), departments.end(), name);
        if (it == departments.end()) throw InputError("unknown department '" + name + "'");
        return static_cast<int>(it - departments.begin());
    }
};

inline EncodedDataset encode(const std::vector<RawPayment>& records, const Encoder& encoder,
                             const std::vector<std::string>& departments) {
    EncodedDataset ds{encoder, departments, Matrix(static_cast<Eigen::Index>(records.size()),
                                                   static_cast<Eigen::Index>(encoder.width())),
                      {}, 0};
    std::map<std::string, int> dept_ids;
    for (std::size_t i = 0; i < departments.size(); ++i) dept_ids.emplace(departments[i], static_cast<int>(i));
    for (std::size_t i = 0; i < records.size(); ++i) {
        ds.rows.row(static_cast<Eigen::Index>(i)) = encoder.encode_row(records[i]);
        auto it = dept_ids.find(records[i].department);
        if (it == dept_ids.end()) throw InputError("encode: department '" + records[i].department + "' not selected");
        ds.department_index.push_back(it->second);
    }
    return ds;
}

/// Vocabulary and min-max statistics from `records`, then encode them.
inline EncodedDataset encode(const std::vector<RawPayment>& records, const SchemaConfig& schema,
                             const std::vector<std::string>& departments) {
    Encoder enc{schema, build_vocab(records, schema), compute_minmax(records, schema)};
    return encode(records, enc, departments);
}

}  // namespace contaudit::ingest

#endif  // CONTAUDIT_INGEST_ENCODE_HPP
