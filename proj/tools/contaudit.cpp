// contaudit command line: prepare, scenario, run, evaluate, full, synth.
// Exit codes: 0 success, 2 input/config error, 3 runtime failure.

#include "contaudit/pipeline/pipeline.hpp"
#include "contaudit/synth/payments.hpp"

#include "CLI11.hpp"

#include <iostream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace contaudit;

namespace {

enum Exit { ok = 0, input_error = 2, runtime_failure = 3 };

/// The `key` section of a pipeline config, or the whole object when the file
/// holds just that section.
json section(const json& config, const std::string& key) {
    if (config.contains(key) && config.at(key).is_object()) return config.at(key);
    return config;
}

template <class T>
void put(json& j, const std::string& key, const std::optional<T>& v) {
    if (v) j[key] = *v;
}

struct Common {
    std::optional<std::string> config;
    std::vector<std::string> sets;

    void add(CLI::App* app) {
        app->add_option("-c,--config", config, "JSON config file")->check(CLI::ExistingFile);
        app->add_option("--set", sets, "override a config value, key=value (dotted keys allowed)");
    }
    [[nodiscard]] json load() const {
        return pipeline::load_config(config ? std::optional<fs::path>(*config) : std::nullopt, {});
    }
    void apply_sets(json& j) const {
        for (const auto& s : sets) pipeline::apply_set(j, s);
    }
};

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream in(s);
    for (std::string item; std::getline(in, item, ',');)
        if (!item.empty()) out.push_back(item);
    return out;
}

int report_runs(const std::vector<pipeline::RunOutcome>& outcomes) {
    int failed = 0;
    for (const auto& o : outcomes)
        if (!o.ok) {
            std::cerr << "run " << o.name << " failed: " << o.error << "\n";
            ++failed;
        }
    return failed ? runtime_failure : ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Continual-learning autoencoders for auditing payment streams"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "contaudit 1.0.0");

    // prepare
    Common prep_common;
    std::string prep_out;
    std::optional<std::string> prep_csv, prep_schema, prep_name;
    std::optional<std::size_t> prep_tau, prep_eta;
    std::optional<std::uint64_t> prep_seed;
    auto* prep = app.add_subcommand("prepare", "load, select departments, sample and encode a payments CSV");
    prep_common.add(prep);
    prep->add_option("--csv", prep_csv, "payments CSV");
    prep->add_option("--schema", prep_schema, "schema JSON");
    prep->add_option("--name", prep_name, "dataset name used in report file names");
    prep->add_option("--tau", prep_tau, "number of departments");
    prep->add_option("--eta", prep_eta, "records sampled per department");
    prep->add_option("--seed", prep_seed, "sampling seed");
    prep->add_option("-o,--out", prep_out, "output dataset directory")->required();

    // scenario
    Common sc_common;
    std::string sc_dataset, sc_out;
    std::optional<std::string> sc_name, sc_schedule, sc_target;
    std::optional<std::size_t> sc_m, sc_alpha_local, sc_alpha_global;
    std::optional<std::uint64_t> sc_seed;
    auto* sc = app.add_subcommand("scenario", "split a dataset into an experience stream");
    sc_common.add(sc);
    sc->add_option("--dataset", sc_dataset, "prepared dataset directory")->required()->check(CLI::ExistingDirectory);
    sc->add_option("--name", sc_name, "scenario name (selects one entry of a pipeline config's scenario list)");
    sc->add_option("--experiences", sc_m, "number of experiences M");
    sc->add_option("--schedule", sc_schedule, "decay schedule: none, linear, exponential, instant");
    sc->add_option("--target-department", sc_target, "department to decay");
    sc->add_option("--alpha-local", sc_alpha_local, "local anomalies injected into the last experience");
    sc->add_option("--alpha-global", sc_alpha_global, "global anomalies injected into the last experience");
    sc->add_option("--seed", sc_seed, "scenario seed");
    sc->add_option("-o,--out", sc_out, "output stream directory")->required();

    // run
    Common run_common;
    std::string run_stream, run_out;
    std::optional<std::string> run_strategies, run_seeds;
    std::optional<std::size_t> run_jobs, run_epochs, run_batch, run_capacity;
    std::optional<double> run_lambda;
    auto* run = app.add_subcommand("run", "train strategies over a stream, one directory per (strategy, seed)");
    run_common.add(run);
    run->add_option("--stream", run_stream, "experience stream directory")->required()->check(CLI::ExistingDirectory);
    run->add_option("--strategies", run_strategies, "comma-separated list, e.g. SFT,ER");
    run->add_option("--seeds", run_seeds, "comma-separated seed list");
    run->add_option("-j,--jobs", run_jobs, "parallel runs (default: available cores)");
    run->add_option("--max-epochs", run_epochs, "epoch cap per experience");
    run->add_option("--batch-size", run_batch, "mini-batch size");
    run->add_option("--lambda", run_lambda, "EWC penalty weight");
    run->add_option("--buffer-capacity", run_capacity, "ER buffer capacity");
    run->add_option("-o,--out", run_out, "output directory for run directories")->required();

    // evaluate
    std::vector<std::string> ev_streams, ev_runs;
    std::string ev_out;
    auto* ev = app.add_subcommand("evaluate", "score runs and write report files");
    ev->add_option("--stream", ev_streams, "stream directory (repeat for several scenarios)")->required();
    ev->add_option("--runs", ev_runs, "run directory, or directory of runs, paired with each --stream")->required();
    ev->add_option("-o,--out", ev_out, "report directory")->required();

    // full
    Common full_common;
    std::optional<std::string> full_out;
    std::optional<std::size_t> full_jobs;
    auto* full = app.add_subcommand("full", "prepare, scenario, run and evaluate from one pipeline config");
    full_common.add(full);
    full->get_option("--config")->required();
    full->add_option("-o,--out", full_out, "output root (overrides the config's 'out')");
    full->add_option("-j,--jobs", full_jobs, "parallel runs (default: available cores)");

    // synth
    std::string syn_out;
    std::uint64_t syn_seed = 2022;
    auto* syn = app.add_subcommand("synth", "write the synthetic payments CSV used for desk-scale runs");
    syn->add_option("-o,--out", syn_out, "CSV file")->required();
    syn->add_option("--seed", syn_seed, "generator seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : input_error;
    }

    try {
        if (*prep) {
            json j = section(prep_common.load(), "dataset");
            put(j, "csv", prep_csv);
            put(j, "schema", prep_schema);
            put(j, "name", prep_name);
            put(j, "tau", prep_tau);
            put(j, "eta", prep_eta);
            put(j, "seed", prep_seed);
            prep_common.apply_sets(j);
            pipeline::cmd_prepare(pipeline::dataset_config_from_json(j), prep_out);
        } else if (*sc) {
            json loaded = sc_common.load();
            json j = loaded;
            if (loaded.contains("scenarios")) {
                const auto& list = loaded.at("scenarios");
                if (sc_name) {
                    auto it = std::find_if(list.begin(), list.end(),
                                           [&](const json& s) { return s.value("name", "") == *sc_name; });
                    if (it == list.end()) throw InputError("config has no scenario named '" + *sc_name + "'");
                    j = *it;
                } else if (list.size() == 1) {
                    j = list.front();
                } else {
                    throw InputError("config lists several scenarios; choose one with --name");
                }
            }
            put(j, "name", sc_name);
            put(j, "experiences", sc_m);
            put(j, "schedule", sc_schedule);
            put(j, "target_department", sc_target);
            put(j, "alpha_local", sc_alpha_local);
            put(j, "alpha_global", sc_alpha_global);
            put(j, "seed", sc_seed);
            sc_common.apply_sets(j);
            pipeline::cmd_scenario(sc_dataset, j, sc_out);
        } else if (*run) {
            json j = section(run_common.load(), "run");
            if (run_strategies) j["strategies"] = split_list(*run_strategies);
            if (run_seeds) {
                std::vector<std::uint64_t> seeds;
                for (const auto& s : split_list(*run_seeds)) {
                    try {
                        seeds.push_back(std::stoull(s));
                    } catch (const std::exception&) {
                        throw InputError("--seeds: '" + s + "' is not a seed");
                    }
                }
                j["seeds"] = seeds;
            }
            put(j, "jobs", run_jobs);
            put(j, "max_epochs", run_epochs);
            put(j, "batch_size", run_batch);
            put(j, "lambda", run_lambda);
            put(j, "buffer_capacity", run_capacity);
            run_common.apply_sets(j);
            return report_runs(pipeline::cmd_run(run_stream, pipeline::run_plan_from_json(j), run_out));
        } else if (*ev) {
            if (ev_streams.size() != ev_runs.size())
                throw InputError("evaluate: give one --runs per --stream");
            std::vector<pipeline::EvalInput> inputs;
            for (std::size_t i = 0; i < ev_streams.size(); ++i)
                inputs.push_back({ev_streams[i], pipeline::find_runs(ev_runs[i])});
            pipeline::cmd_evaluate(inputs, ev_out);
        } else if (*full) {
            json j = full_common.load();
            if (full_out) j["out"] = *full_out;
            if (full_jobs) j["run"]["jobs"] = *full_jobs;
            full_common.apply_sets(j);
            return report_runs(pipeline::cmd_full(pipeline::pipeline_config_from_json(j)).outcomes);
        } else if (*syn) {
            io::write_text(syn_out, synth::generate_payments_csv(synth::PaymentsConfig::desk_default(syn_seed)));
        }
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return input_error;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return runtime_failure;
    }
    return ok;
}
