#ifndef CONTAUDIT_PIPELINE_PIPELINE_HPP
#define CONTAUDIT_PIPELINE_PIPELINE_HPP

// prepare -> scenario -> run -> evaluate, each persisting its output so any
// stage can be re-run or resumed on its own. `full` chains them:
//   <out>/dataset/                 encoded dataset
//   <out>/streams/<scenario>/      experience streams
//   <out>/runs/<scenario>/<STRATEGY>_seed<N>/
//   <out>/reports/                 report files

#include "contaudit/eval/report.hpp"
#include "contaudit/ingest/dataset_io.hpp"
#include "contaudit/scenario/stream_io.hpp"
#include "contaudit/strategies/run_io.hpp"

#include <atomic>
#include <mutex>
#include <thread>

namespace contaudit::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

/// Applies "a.b.c=value" to `config`. The value is parsed as JSON when it
/// parses (numbers, booleans, arrays), otherwise taken as a string.
inline void apply_set(json& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw InputError("--set expects key=value, got '" + assignment + "'");
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    json* node = &config;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw InputError("--set: empty key component in '" + key + "'");
        if (!node->is_object()) {
            if (!node->is_null()) throw InputError("--set: '" + key + "' descends into a non-object");
            *node = json::object();
        }
        if (dot == std::string::npos) {
            (*node)[part] = value;
            return;
        }
        node = &(*node)[part];
        start = dot + 1;
    }
}

inline json load_config(const std::optional<fs::path>& file, const std::vector<std::string>& sets) {
    json config = file ? io::read_json(*file) : json::object();
    if (!config.is_object()) throw InputError("config must be a JSON object");
    for (const auto& s : sets) apply_set(config, s);
    return config;
}

// ---------------------------------------------------------------- prepare

struct DatasetConfig {
    std::string name = "dataset";
    fs::path csv;
    ingest::SchemaConfig schema;
    std::size_t tau = 10;
    std::size_t eta = 10000;
    std::uint64_t seed = 0;
};

inline DatasetConfig dataset_config_from_json(const json& j) {
    try {
        DatasetConfig c;
        c.name = j.value("name", c.name);
        if (!j.contains("csv")) throw InputError("dataset config: missing 'csv'");
        c.csv = j.at("csv").get<std::string>();
        if (!fs::exists(c.csv)) throw InputError("dataset config: csv file not found: " + c.csv.string());
        if (!j.contains("schema")) throw InputError("dataset config: missing 'schema'");
        const auto& s = j.at("schema");
        c.schema = s.is_string() ? ingest::load_schema(s.get<std::string>()) : s.get<ingest::SchemaConfig>();
        c.schema.validate();
        c.tau = j.value("tau", c.tau);
        c.eta = j.value("eta", c.eta);
        c.seed = j.value("seed", c.seed);
        if (c.tau == 0 || c.eta == 0) throw InputError("dataset config: tau and eta must be positive");
        if (c.name.empty() || c.name.find_first_of("/\\ ") != std::string::npos)
            throw InputError("dataset config: name must be a non-empty word");
        return c;
    } catch (const json::exception& e) {
        throw InputError(std::string("dataset config: ") + e.what());
    }
}

inline std::string dataset_name(const fs::path& dir) {
    return io::read_json(dir / "metadata.json").value("name", std::string("dataset"));
}

/// load_csv -> select_top_departments -> sample_per_department -> encode.
inline ingest::EncodedDataset cmd_prepare(const DatasetConfig& c, const fs::path& out) {
    const auto loaded = ingest::load_csv(c.csv, c.schema);
    const auto top = ingest::select_top_departments(loaded.records, c.tau);
    auto ds = ingest::encode(ingest::sample_per_department(loaded.records, top, c.eta, c.seed), c.schema, top);
    ds.seed = c.seed;
    ingest::save_dataset(out, ds);
    auto meta = io::read_json(out / "metadata.json");
    meta["name"] = c.name;
    io::write_json(out / "metadata.json", meta);
    log()->info("prepare: {} rows, {} departments, encoded width d={}", ds.size(), top.size(), ds.width());
    for (std::size_t c = 0; c < ds.encoder.group_count(); ++c)
        log()->debug("  column '{}': {} distinct values", ds.encoder.vocab.columns[c], ds.encoder.vocab.size(c));
    for (std::size_t k = 0; k < top.size(); ++k)
        log()->info("  {}: {} rows", top[k],
                    std::count(ds.department_index.begin(), ds.department_index.end(), static_cast<int>(k)));
    return ds;
}

// ---------------------------------------------------------------- scenario

inline scenario::ExperienceStream cmd_scenario(const fs::path& dataset_dir, const json& config, const fs::path& out) {
    const auto ds = ingest::load_dataset(dataset_dir);
    const auto cfg = scenario::scenario_from_json(config);
    const auto s = scenario::build_scenario(ds, cfg);
    auto recorded = scenario::to_json(cfg);
    recorded["dataset"] = dataset_name(dataset_dir);
    fs::remove_all(out);
    scenario::save_stream(out, s, recorded);
    const auto& last = s.last();
    log()->info("scenario '{}': {} experiences, E_{} holds {} rows ({} local, {} global anomalies)", cfg.name, s.size(),
                s.size(), last.size(), last.count(scenario::Label::local_anomaly),
                last.count(scenario::Label::global_anomaly));
    return s;
}

// ---------------------------------------------------------------- run

struct RunPlan {
    std::vector<strategies::StrategyKind> strategies = strategies::all_strategies();
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    strategies::StrategyConfig base;
    std::size_t jobs = 0;  // 0 = available cores
};

inline RunPlan run_plan_from_json(const json& j) {
    try {
        RunPlan p;
        p.base = strategies::strategy_config_from_json(j);
        if (j.contains("strategies")) {
            p.strategies.clear();
            const auto& s = j.at("strategies");
            if (s.is_string()) {
                p.strategies.push_back(strategies::strategy_from_string(s.get<std::string>()));
            } else {
                for (const auto& x : s) p.strategies.push_back(strategies::strategy_from_string(x.get<std::string>()));
            }
        }
        if (j.contains("strategy")) p.strategies = {strategies::strategy_from_string(j.at("strategy").get<std::string>())};
        if (j.contains("seeds")) {
            const auto& s = j.at("seeds");
            p.seeds = s.is_array() ? s.get<std::vector<std::uint64_t>>() : std::vector<std::uint64_t>{s.get<std::uint64_t>()};
        }
        p.jobs = j.value("jobs", p.jobs);
        if (p.strategies.empty()) throw InputError("run config: strategy list is empty");
        if (p.seeds.empty()) throw InputError("run config: seed list is empty");
        return p;
    } catch (const json::exception& e) {
        throw InputError(std::string("run config: ") + e.what());
    }
}

struct RunOutcome {
    std::string name;
    fs::path dir;
    bool ok = false;
    std::string error;
};

inline std::string stream_hash(const fs::path& stream_dir) {
    return io::hash_hex(fnv1a(io::read_text(stream_dir / "stream.json")));
}

/// Runs every (strategy, seed) pair into <out>/<STRATEGY>_seed<N>. Pairs run
/// concurrently on `jobs` threads; a failing pair does not stop the others.
inline std::vector<RunOutcome> cmd_run(const fs::path& stream_dir, const RunPlan& plan, const fs::path& out) {
    const auto stream = scenario::load_stream(stream_dir);
    const auto hash = stream_hash(stream_dir);
    struct Job {
        strategies::StrategyConfig cfg;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (auto k : plan.strategies)
        for (auto seed : plan.seeds) {
            auto c = plan.base;
            c.kind = k;
            jobs.push_back({c, seed});
        }
    std::vector<RunOutcome> outcomes(jobs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) {
            const auto& job = jobs[i];
            auto& o = outcomes[i];
            o.name = strategies::run_name(job.cfg.kind, job.seed);
            o.dir = out / o.name;
            try {
                strategies::run_to_directory(o.dir, stream, job.cfg, job.seed, hash);
                o.ok = true;
            } catch (const std::exception& e) {
                o.error = e.what();
                log()->error("run {} failed: {}", o.name, e.what());
            }
        }
    };
    std::size_t n = plan.jobs ? plan.jobs : std::max(1u, std::thread::hardware_concurrency());
    n = std::min(n, jobs.size());
    std::vector<std::thread> threads;
    for (std::size_t t = 1; t < n; ++t) threads.emplace_back(worker);
    worker();
    for (auto& t : threads) t.join();
    const auto failed = std::count_if(outcomes.begin(), outcomes.end(), [](const RunOutcome& o) { return !o.ok; });
    log()->info("run: {} of {} runs finished, {} failed", outcomes.size() - static_cast<std::size_t>(failed),
                outcomes.size(), failed);
    return outcomes;
}

// ---------------------------------------------------------------- evaluate

/// Run directories under `path`: the directory itself when it holds a
/// manifest, otherwise its immediate subdirectories that do (sorted).
inline std::vector<fs::path> find_runs(const fs::path& path) {
    if (fs::exists(path / "manifest.json")) return {path};
    if (!fs::is_directory(path)) throw InputError("no run directory at " + path.string());
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(path))
        if (e.is_directory() && fs::exists(e.path() / "manifest.json")) out.push_back(e.path());
    std::sort(out.begin(), out.end());
    if (out.empty()) throw InputError("no runs found under " + path.string());
    return out;
}

struct EvalInput {
    fs::path stream;
    std::vector<fs::path> runs;
};

inline eval::ScenarioReport evaluate_scenario(const EvalInput& in) {
    const auto s = scenario::load_stream(in.stream);
    const auto meta = io::read_json(in.stream / "stream.json");
    eval::ScenarioReport rep;
    const json config = meta.value("config", json::object());
    rep.dataset = config.value("dataset", std::string("dataset"));
    rep.scenario = config.value("name", in.stream.filename().string());
    rep.schedule = scenario::to_string(s.schedule.kind);
    rep.departments = s.departments;
    rep.target = s.target_department;
    std::vector<std::string> run_hashes;
    for (const auto& dir : in.runs) {
        auto loaded = strategies::load_run(dir);
        if (loaded.result.completed() != s.size())
            throw InputError("run " + dir.string() + " is missing the E_" + std::to_string(s.size()) +
                             " snapshot (" + std::to_string(loaded.result.completed()) + " of " +
                             std::to_string(s.size()) + " experiences)");
        rep.runs.push_back(eval::evaluate_run(s, loaded.result));
        run_hashes.push_back(loaded.manifest.value("config_hash", ""));
    }
    std::sort(run_hashes.begin(), run_hashes.end());
    rep.config_hash = io::config_hash({{"stream", meta.value("config_hash", "")}, {"runs", run_hashes}});
    return rep;
}

inline std::vector<eval::ScenarioReport> cmd_evaluate(const std::vector<EvalInput>& inputs, const fs::path& out) {
    std::vector<eval::ScenarioReport> reps;
    for (const auto& in : inputs) reps.push_back(evaluate_scenario(in));
    eval::emit_report(out, reps);
    log()->info("evaluate: reports written to {}", out.string());
    return reps;
}

// ---------------------------------------------------------------- full

struct PipelineConfig {
    json dataset;
    std::vector<json> scenarios;
    json run;
    fs::path out;
};

inline PipelineConfig pipeline_config_from_json(const json& j) {
    PipelineConfig p;
    if (!j.contains("dataset")) throw InputError("pipeline config: missing 'dataset'");
    p.dataset = j.at("dataset");
    if (j.contains("scenarios")) {
        for (const auto& s : j.at("scenarios")) p.scenarios.push_back(s);
    } else if (j.contains("scenario")) {
        p.scenarios.push_back(j.at("scenario"));
    }
    if (p.scenarios.empty()) throw InputError("pipeline config: no scenarios");
    std::set<std::string> names;
    for (const auto& s : p.scenarios) {
        const auto name = scenario::scenario_from_json(s).name;
        if (!names.insert(name).second) throw InputError("pipeline config: duplicate scenario name '" + name + "'");
    }
    p.run = j.value("run", json::object());
    (void)run_plan_from_json(p.run);
    (void)dataset_config_from_json(p.dataset);
    p.out = j.value("out", std::string("out"));
    return p;
}

struct FullResult {
    std::vector<RunOutcome> outcomes;
    std::vector<eval::ScenarioReport> reports;
    [[nodiscard]] bool ok() const {
        return std::all_of(outcomes.begin(), outcomes.end(), [](const RunOutcome& o) { return o.ok; });
    }
};

inline FullResult cmd_full(const PipelineConfig& p) {
    FullResult r;
    const auto dataset_dir = p.out / "dataset";
    cmd_prepare(dataset_config_from_json(p.dataset), dataset_dir);
    const auto plan = run_plan_from_json(p.run);
    std::vector<EvalInput> inputs;
    for (const auto& sc : p.scenarios) {
        const auto name = scenario::scenario_from_json(sc).name;
        const auto stream_dir = p.out / "streams" / name;
        cmd_scenario(dataset_dir, sc, stream_dir);
        const auto outcomes = cmd_run(stream_dir, plan, p.out / "runs" / name);
        EvalInput in{stream_dir, {}};
        for (const auto& o : outcomes)
            if (o.ok) in.runs.push_back(o.dir);
        r.outcomes.insert(r.outcomes.end(), outcomes.begin(), outcomes.end());
        if (!in.runs.empty()) inputs.push_back(std::move(in));
    }
    if (!inputs.empty()) r.reports = cmd_evaluate(inputs, p.out / "reports");
    return r;
}

}  // namespace contaudit::pipeline

#endif  // CONTAUDIT_PIPELINE_PIPELINE_HPP
