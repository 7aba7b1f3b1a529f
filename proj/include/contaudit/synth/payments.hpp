#ifndef CONTAUDIT_SYNTH_PAYMENTS_HPP
#define CONTAUDIT_SYNTH_PAYMENTS_HPP

// Synthetic city-payments generator used as the desk-scale fixture.
//
// Every department posts through a small set of "posting profiles" (an
// expense class, expense category, document type and payment method plus a
// vendor pool and a log-amount level). Departments differ in how many profiles
// and vendors they use, so their reconstruction difficulty differs. Each
// categorical column also has a low-probability tail of rare values.

#include "contaudit/common.hpp"
#include "contaudit/ingest/schema.hpp"

#include <array>
#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace contaudit::synth {

struct DepartmentSpec {
    std::string name;
    std::size_t records = 0;
    std::size_t profiles = 1;      // distinct posting profiles
    std::size_t vendor_pool = 2;   // vendors per profile
};

struct PaymentsConfig {
    std::vector<DepartmentSpec> departments;
    double tail_rate = 0.004;        // per-column probability of a rare value
    double malformed_rate = 0.0005;  // rows written with an unparsable amount
    std::uint64_t seed = 0;

    /// Fourteen departments; the ten largest hold 1,150..1,600 records each.
    static PaymentsConfig desk_default(std::uint64_t seed = 2022) {
        PaymentsConfig c;
        c.seed = seed;
        c.departments = {
            {"Police", 1600, 5, 6},
            {"Streets", 1560, 4, 5},
            {"Water", 1510, 3, 4},
            {"Fire", 1470, 4, 3},
            {"Public Health", 1420, 2, 4},
            {"Parks, Recreation", 1380, 3, 3},
            {"Prisons", 1330, 2, 2},
            {"Free Library", 1280, 1, 3},
            {"Fleet Management", 1220, 2, 3},
            {"Revenue", 1150, 1, 2},
            {"Records", 520, 1, 2},
            {"Licenses", 410, 2, 2},
            {"Managing Director", 300, 1, 2},
            {"Art Museum", 180, 1, 1},
        };
        return c;
    }
};

inline const std::vector<std::string>& expense_classes() {
    static const std::vector<std::string> v{"Personal Services", "Purchase of Services", "Materials and Supplies",
                                            "Equipment", "Contributions and Indemnities"};
    return v;
}

namespace detail {

struct Column {
    std::vector<std::string> common;
    std::vector<std::string> tail;
};

inline std::vector<std::string> numbered(const std::string& stem, std::size_t n, std::size_t start = 1) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(stem + " " + std::to_string(start + i));
    return out;
}

struct Profile {
    std::size_t cls, category, doc, method;
    std::vector<std::size_t> vendors;
    double log_amount;
};

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') q += '"';
        q += c;
    }
    return q + "\"";
}

}  // namespace detail

/// Schema describing the generated CSV (department also encoded as a category).
inline ingest::SchemaConfig payments_schema() {
    ingest::SchemaConfig s;
    s.categorical_columns = {"department", "expense_class", "expense_category", "document_type", "payment_method",
                             "vendor"};
    s.numerical_columns = {"amount"};
    s.department_column = "department";
    return s;
}

/// CSV text with header: payment_id,department,expense_class,expense_category,
/// document_type,payment_method,vendor,amount. Rows are emitted in shuffled order.
inline std::string generate_payments_csv(const PaymentsConfig& cfg) {
    using detail::Column;
    std::mt19937_64 rng(derive_seed(cfg.seed, "synth"));
    const Column cls{expense_classes(), {"Debt Service", "Advances"}};
    const Column category{detail::numbered("Category", 14), detail::numbered("Category", 4, 90)};
    const Column doc{{"PV", "JV", "CR", "PO", "GA"}, {"XX", "MM", "ZZ"}};
    const Column method{{"Check", "ACH", "Wire", "PCard"}, {"Cash", "Manual Draft"}};
    const Column vendor{detail::numbered("Vendor", 28), detail::numbered("Rare Vendor", 6)};

    auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 0.45);

    struct Row {
        std::string text;
        std::uint64_t key;
    };
    std::vector<Row> rows;
    std::size_t serial = 0;
    for (const auto& dept : cfg.departments) {
        std::vector<detail::Profile> profiles;
        for (std::size_t p = 0; p < dept.profiles; ++p) {
            detail::Profile pr{pick(cls.common.size()), pick(category.common.size()), pick(doc.common.size()),
                               pick(method.common.size()), {}, 5.0 + 5.0 * unit(rng)};
            for (std::size_t v = 0; v < dept.vendor_pool; ++v) pr.vendors.push_back(pick(vendor.common.size()));
            profiles.push_back(std::move(pr));
        }
        auto value = [&](const Column& col, std::size_t common_index) -> const std::string& {
            if (unit(rng) < cfg.tail_rate) return col.tail[pick(col.tail.size())];
            return col.common[common_index];
        };
        for (std::size_t i = 0; i < dept.records; ++i) {
            const auto& pr = profiles[pick(profiles.size())];
            std::ostringstream line;
            line << "P" << (100000 + serial++) << ',' << detail::csv_field(dept.name) << ','
                 << detail::csv_field(value(cls, pr.cls)) << ',' << detail::csv_field(value(category, pr.category))
                 << ',' << value(doc, pr.doc) << ',' << detail::csv_field(value(method, pr.method)) << ','
                 << detail::csv_field(value(vendor, pr.vendors[pick(pr.vendors.size())])) << ',';
            if (unit(rng) < cfg.malformed_rate) {
                line << "n/a";
            } else {
                char buf[32];
                std::snprintf(buf, sizeof buf, "%.2f", std::exp(pr.log_amount + noise(rng)));
                line << buf;
            }
            rows.push_back({line.str(), rng()});
        }
    }
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.key < b.key; });
    std::string out = "payment_id,department,expense_class,expense_category,document_type,payment_method,vendor,amount\n";
    for (const auto& r : rows) out += r.text + "\n";
    return out;
}

}  // namespace contaudit::synth

#endif  // CONTAUDIT_SYNTH_PAYMENTS_HPP
