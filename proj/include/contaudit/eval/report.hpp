#ifndef CONTAUDIT_EVAL_REPORT_HPP
#define CONTAUDIT_EVAL_REPORT_HPP

// Report files written into one directory:
//   {dataset}_{scenario}_{strategy}_{seed}.json  per-run metrics and department table
//   aggregate_{dataset}_{scenario}.csv           strategy x metric mean/std
//   anomalies_{dataset}_{scenario}.csv           strategy x {A', A_P1, A_P2, delta_fn}
//   delta_fp_{dataset}.csv                       strategy x schedule (long format)
//   loss_curves_{dataset}_{scenario}.csv         per experience, department loss of each run
//   plot_{dataset}_{scenario}.json               plot description for the loss curves
// Floats use %.6f; absent values are empty CSV fields / JSON null. Every file
// carries the config hash of the scenario it came from.

#include "contaudit/eval/metrics.hpp"
#include "contaudit/io.hpp"

#include <filesystem>
#include <sstream>

namespace contaudit::eval {

struct ScenarioReport {
    std::string dataset = "dataset";
    std::string scenario = "scenario";
    std::string schedule = "none";
    std::vector<std::string> departments;
    std::optional<int> target;
    std::vector<RunMetrics> runs;
    std::string config_hash;
};

inline int strategy_rank(const std::string& s) {
    static const std::vector<std::string> order{"SEL", "JEL", "SFT", "EWC", "ER"};
    const auto it = std::find(order.begin(), order.end(), s);
    return it == order.end() ? static_cast<int>(order.size()) : static_cast<int>(it - order.begin());
}

/// Runs grouped by strategy in SEL, JEL, SFT, EWC, ER order, seeds ascending.
inline std::vector<std::pair<std::string, std::vector<RunMetrics>>> by_strategy(std::vector<RunMetrics> runs) {
    std::sort(runs.begin(), runs.end(), [](const RunMetrics& a, const RunMetrics& b) {
        const auto ra = strategy_rank(a.strategy), rb = strategy_rank(b.strategy);
        if (ra != rb) return ra < rb;
        if (a.strategy != b.strategy) return a.strategy < b.strategy;
        return a.seed < b.seed;
    });
    std::vector<std::pair<std::string, std::vector<RunMetrics>>> out;
    for (auto& r : runs) {
        if (out.empty() || out.back().first != r.strategy) out.emplace_back(r.strategy, std::vector<RunMetrics>{});
        out.back().second.push_back(std::move(r));
    }
    return out;
}

inline std::string csv_value(const std::optional<double>& v) { return v ? io::fixed6(*v) : std::string{}; }

inline nlohmann::json json_value(const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

inline nlohmann::json run_json(const ScenarioReport& rep, const RunMetrics& m) {
    nlohmann::json metrics = nlohmann::json::object();
    for (const auto& [k, v] : m.values()) metrics[k] = json_value(v);
    nlohmann::json exps = nlohmann::json::array();
    for (std::size_t i = 0; i < m.table.size(); ++i) {
        nlohmann::json cells = nlohmann::json::array();
        for (std::size_t k = 0; k < m.table[i].cells.size(); ++k)
            cells.push_back({{"department", rep.departments.at(k)},
                             {"rows", m.table[i].cells[k].rows},
                             {"loss", json_value(m.table[i].cells[k].loss)}});
        nlohmann::json e{{"experience", m.table[i].experience}, {"departments", cells}};
        if (i < m.target_curve.size() && m.target_curve[i])
            e["target"] = {{"loss", m.target_curve[i]->loss},
                           {"rows", m.target_curve[i]->rows},
                           {"held_out", m.target_curve[i]->held_out}};
        exps.push_back(e);
    }
    return {{"dataset", rep.dataset},
            {"scenario", rep.scenario},
            {"schedule", rep.schedule},
            {"strategy", m.strategy},
            {"seed", m.seed},
            {"config_hash", rep.config_hash},
            {"target_department",
             rep.target ? nlohmann::json(rep.departments.at(static_cast<std::size_t>(*rep.target))) : nlohmann::json()},
            {"highest_department", m.highest_department},
            {"target_scored_on_held_out_rows", m.target_held_out},
            {"metrics", metrics},
            {"experiences", exps}};
}

inline void emit_report(const std::filesystem::path& out, const std::vector<ScenarioReport>& reports) {
    std::error_code ec;
    std::filesystem::create_directories(out, ec);
    if (ec) throw InputError("cannot create report directory " + out.string() + ": " + ec.message());

    static const std::vector<std::string> metric_names{"delta_fp", "target_loss", "local_loss", "global_loss",
                                                       "delta_fn"};
    std::map<std::string, std::ostringstream> delta_tables;  // by dataset
    for (const auto& rep : reports) {
        const std::string stem = rep.dataset + "_" + rep.scenario;
        const auto groups = by_strategy(rep.runs);

        for (const auto& [strategy, runs] : groups)
            for (const auto& m : runs)
                io::write_json_fixed6(out / (stem + "_" + strategy + "_" + std::to_string(m.seed) + ".json"),
                                      run_json(rep, m));

        std::ostringstream agg, anom, curves;
        agg << "dataset,scenario,schedule,strategy,seeds";
        for (const auto& k : metric_names) agg << ',' << k << "_mean," << k << "_std";
        agg << ",config_hash\n";
        anom << "strategy,seeds,target_mean,target_std,local_mean,local_std,global_mean,global_std,delta_fn_mean,"
                "delta_fn_std,config_hash\n";
        auto& dt = delta_tables[rep.dataset];
        if (dt.tellp() == 0) dt << "strategy,schedule,scenario,seeds,delta_fp_mean,delta_fp_std,config_hash\n";

        for (const auto& [strategy, runs] : groups) {
            const auto stats = aggregate_seeds(runs);
            auto mean = [&](const std::string& k) -> std::optional<double> {
                auto it = stats.find(k);
                return it == stats.end() ? std::nullopt : std::optional<double>(it->second.mean);
            };
            auto sd = [&](const std::string& k) -> std::optional<double> {
                auto it = stats.find(k);
                return it == stats.end() ? std::nullopt : it->second.stdev;
            };
            agg << rep.dataset << ',' << rep.scenario << ',' << rep.schedule << ',' << strategy << ',' << runs.size();
            for (const auto& k : metric_names) agg << ',' << csv_value(mean(k)) << ',' << csv_value(sd(k));
            agg << ',' << rep.config_hash << '\n';
            anom << strategy << ',' << runs.size();
            for (const auto* k : {"target_loss", "local_loss", "global_loss", "delta_fn"})
                anom << ',' << csv_value(mean(k)) << ',' << csv_value(sd(k));
            anom << ',' << rep.config_hash << '\n';
            dt << strategy << ',' << rep.schedule << ',' << rep.scenario << ',' << runs.size() << ','
               << csv_value(mean("delta_fp")) << ',' << csv_value(sd("delta_fp")) << ',' << rep.config_hash << '\n';
        }

        curves << "strategy,seed,experience,department,rows,loss,source,config_hash\n";
        for (const auto& [strategy, runs] : groups)
            for (const auto& m : runs)
                for (std::size_t i = 0; i < m.table.size(); ++i)
                    for (std::size_t k = 0; k < m.table[i].cells.size(); ++k) {
                        const auto& cell = m.table[i].cells[k];
                        std::size_t rows = cell.rows;
                        std::optional<double> loss = cell.loss;
                        std::string source = "experience";
                        if (!loss && rep.target && static_cast<int>(k) == *rep.target && i < m.target_curve.size() &&
                            m.target_curve[i]) {
                            rows = m.target_curve[i]->rows;
                            loss = m.target_curve[i]->loss;
                            source = "held_out";
                        }
                        curves << strategy << ',' << m.seed << ',' << m.table[i].experience << ",\""
                               << rep.departments.at(k) << "\"," << rows << ',' << csv_value(loss) << ',' << source
                               << ',' << rep.config_hash << '\n';
                    }

        io::write_text(out / ("aggregate_" + stem + ".csv"), agg.str());
        io::write_text(out / ("anomalies_" + stem + ".csv"), anom.str());
        io::write_text(out / ("loss_curves_" + stem + ".csv"), curves.str());
        nlohmann::json plot{
            {"title", "Reconstruction loss per department, " + rep.dataset + " / " + rep.scenario},
            {"data", "loss_curves_" + stem + ".csv"},
            {"kind", "line"},
            {"x", {{"column", "experience"}, {"label", "experience"}}},
            {"y", {{"column", "loss"}, {"label", "mean reconstruction loss (BCE)"}}},
            {"series", "department"},
            {"facet", "strategy"},
            {"aggregate", "mean over seed"},
            {"highlight",
             rep.target ? nlohmann::json(rep.departments.at(static_cast<std::size_t>(*rep.target))) : nlohmann::json()},
            {"config_hash", rep.config_hash}};
        io::write_json_fixed6(out / ("plot_" + stem + ".json"), plot);
    }
    for (const auto& [dataset, text] : delta_tables) io::write_text(out / ("delta_fp_" + dataset + ".csv"), text.str());
}

}  // namespace contaudit::eval

#endif  // CONTAUDIT_EVAL_REPORT_HPP
