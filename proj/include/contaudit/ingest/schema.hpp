#ifndef CONTAUDIT_INGEST_SCHEMA_HPP
#define CONTAUDIT_INGEST_SCHEMA_HPP

#include "contaudit/common.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace contaudit::ingest {

/// Placeholder for empty categorical values.
inline const std::string kMissing = "⟨MISSING⟩";

struct CsvDialect {
    char delimiter = ',';
    char quote = '"';
    bool header = true;
};

struct SchemaConfig {
    std::vector<std::string> categorical_columns;
    std::vector<std::string> numerical_columns;
    std::string department_column;
    CsvDialect csv_dialect;

    void validate() const {
        if (department_column.empty()) throw InputError("schema: department_column is empty");
        if (categorical_columns.empty() && numerical_columns.empty())
            throw InputError("schema: no categorical or numerical columns");
        std::set<std::string> seen;
        for (const auto& c : categorical_columns)
            if (!seen.insert(c).second) throw InputError("schema: duplicate column '" + c + "'");
        for (const auto& c : numerical_columns)
            if (!seen.insert(c).second)
                throw InputError("schema: column '" + c + "' listed as both categorical and numerical (or twice)");
        if (std::find(numerical_columns.begin(), numerical_columns.end(), department_column) != numerical_columns.end())
            throw InputError("schema: department_column cannot be numerical");
    }
};

inline void to_json(nlohmann::json& j, const CsvDialect& d) {
    j = {{"delimiter", std::string(1, d.delimiter)}, {"quote", std::string(1, d.quote)}, {"header", d.header}};
}

inline void from_json(const nlohmann::json& j, CsvDialect& d) {
    auto one_char = [&](const char* key, char fallback) {
        if (!j.contains(key)) return fallback;
        const auto s = j.at(key).get<std::string>();
        if (s == "\\t" || s == "tab") return '\t';
        if (s.size() != 1) throw InputError(std::string("csv_dialect.") + key + " must be a single character");
        return s[0];
    };
    d.delimiter = one_char("delimiter", ',');
    d.quote = one_char("quote", '"');
    d.header = j.value("header", true);
}

inline void to_json(nlohmann::json& j, const SchemaConfig& s) {
    j = {{"categorical_columns", s.categorical_columns},
         {"numerical_columns", s.numerical_columns},
         {"department_column", s.department_column},
         {"csv_dialect", s.csv_dialect}};
}

inline void from_json(const nlohmann::json& j, SchemaConfig& s) {
    for (const char* key : {"categorical_columns", "numerical_columns", "department_column"})
        if (!j.contains(key)) throw InputError(std::string("schema: missing key '") + key + "'");
    s.categorical_columns = j.at("categorical_columns").get<std::vector<std::string>>();
    s.numerical_columns = j.at("numerical_columns").get<std::vector<std::string>>();
    s.department_column = j.at("department_column").get<std::string>();
    s.csv_dialect = j.value("csv_dialect", CsvDialect{});
    s.validate();
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw InputError("cannot read " + path.string());
    try {
        return nlohmann::json::parse(f);
    } catch (const nlohmann::json::exception& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

inline SchemaConfig load_schema(const std::filesystem::path& path) {
    try {
        return read_json_file(path).get<SchemaConfig>();
    } catch (const nlohmann::json::exception& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

struct RawPayment {
    std::map<std::string, std::string> categorical;
    std::map<std::string, double> numerical;
    std::string department;

    friend bool operator==(const RawPayment&, const RawPayment&) = default;
};

/// Splits CSV text into records, honouring quoted fields (with doubled quotes
/// and embedded delimiters/newlines). A trailing '\r' is stripped.
inline std::vector<std::vector<std::string>> parse_csv(std::istream& in, const CsvDialect& dialect) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false, field_started = false;
    char c;
    auto end_field = [&] {
        row.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_row = [&] {
        end_field();
        if (!(row.size() == 1 && row[0].empty())) rows.push_back(std::move(row));
        row.clear();
    };
    while (in.get(c)) {
        if (in_quotes) {
            if (c == dialect.quote) {
                if (in.peek() == dialect.quote) {
                    field += c;
                    in.get(c);
                } else {
                    in_quotes = false;
                }
            } else {
                field += c;
            }
        } else if (c == dialect.quote && !field_started) {
            in_quotes = true;
            field_started = true;
        } else if (c == dialect.delimiter) {
            end_field();
        } else if (c == '\n') {
            if (!field.empty() && field.back() == '\r') field.pop_back();
            end_row();
        } else {
            field += c;
            field_started = true;
        }
    }
    if (!field.empty() || !row.empty()) {
        if (!field.empty() && field.back() == '\r') field.pop_back();
        end_row();
    }
    return rows;
}

/// Lenient amount parser: trims blanks, drops '$' and thousands separators,
/// treats "(x)" as -x.
inline std::optional<double> parse_amount(std::string s) {
    s.erase(std::remove_if(s.begin(), s.end(), [](char ch) { return ch == '$' || ch == ',' || ch == ' ' || ch == '\t'; }),
            s.end());
    bool negative = false;
    if (s.size() >= 2 && s.front() == '(' && s.back() == ')') {
        negative = true;
        s = s.substr(1, s.size() - 2);
    }
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.erase(0, 1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return negative ? -v : v;
}

struct LoadResult {
    std::vector<RawPayment> records;
    std::size_t skipped = 0;     // malformed rows
    std::size_t data_rows = 0;   // rows seen after the header
};

inline LoadResult load_csv(std::istream& in, const SchemaConfig& schema, const std::string& origin = "<stream>") {
    schema.validate();
    auto rows = parse_csv(in, schema.csv_dialect);
    std::vector<std::string> header;
    std::size_t first = 0;
    if (schema.csv_dialect.header) {
        if (rows.empty()) throw InputError(origin + ": empty file (header expected)");
        header = rows[0];
        first = 1;
    } else {
        const std::size_t width = rows.empty() ? 0 : rows[0].size();
        for (std::size_t i = 0; i < width; ++i) header.push_back(std::to_string(i));
    }
    auto column_index = [&](const std::string& name) {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw InputError(origin + ": missing schema column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    };
    std::vector<std::size_t> cat_idx, num_idx;
    for (const auto& c : schema.categorical_columns) cat_idx.push_back(column_index(c));
    for (const auto& c : schema.numerical_columns) num_idx.push_back(column_index(c));
    const std::size_t dept_idx = column_index(schema.department_column);

    LoadResult out;
    for (std::size_t r = first; r < rows.size(); ++r) {
        ++out.data_rows;
        const auto& row = rows[r];
        if (row.size() != header.size()) {
            ++out.skipped;
            log()->warn("{}: row {} has {} fields, expected {}; skipped", origin, r + 1, row.size(), header.size());
            continue;
        }
        RawPayment p;
        bool ok = true;
        for (std::size_t k = 0; k < num_idx.size() && ok; ++k) {
            auto v = parse_amount(row[num_idx[k]]);
            if (!v) {
                ok = false;
                log()->warn("{}: row {} has unparsable {} '{}'; skipped", origin, r + 1,
                            schema.numerical_columns[k], row[num_idx[k]]);
            } else {
                p.numerical[schema.numerical_columns[k]] = *v;
            }
        }
        if (!ok) {
            ++out.skipped;
            continue;
        }
        for (std::size_t k = 0; k < cat_idx.size(); ++k) {
            const auto& v = row[cat_idx[k]];
            p.categorical[schema.categorical_columns[k]] = v.empty() ? kMissing : v;
        }
        p.department = row[dept_idx].empty() ? kMissing : row[dept_idx];
        out.records.push_back(std::move(p));
    }
    log()->info("{}: {} records loaded, {} malformed rows skipped", origin, out.records.size(), out.skipped);
    return out;
}

inline LoadResult load_csv(const std::filesystem::path& path, const SchemaConfig& schema) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot read CSV " + path.string());
    return load_csv(f, schema, path.string());
}

}  // namespace contaudit::ingest

#endif  // CONTAUDIT_INGEST_SCHEMA_HPP
