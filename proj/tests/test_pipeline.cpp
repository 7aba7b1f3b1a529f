#include "contaudit/pipeline/pipeline.hpp"
#include "contaudit/synth/payments.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <sys/wait.h>
#include <unistd.h>

using namespace contaudit;
using namespace contaudit::pipeline;
using nlohmann::json;

namespace {

class TempDir {
public:
    explicit TempDir(const std::string& tag)
        : path_(fs::temp_directory_path() / ("contaudit_" + tag + "_" + std::to_string(::getpid()))) {
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    [[nodiscard]] const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& p) const { return path_ / p; }

private:
    fs::path path_;
};

struct Cli {
    int code;
    std::string output;
};

Cli cli(const std::string& args, const std::string& env = "") {
    const std::string cmd = (env.empty() ? "" : "env " + env + " ") + std::string(CONTAUDIT_CLI) + " " + args + " 2>&1";
    FILE* p = ::popen(cmd.c_str(), "r");
    if (!p) throw std::runtime_error("popen failed");
    std::string out;
    char buf[4096];
    while (std::size_t n = std::fread(buf, 1, sizeof buf, p)) out.append(buf, n);
    const int status = ::pclose(p);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::map<std::string, std::string> files_under(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = io::read_text(e.path());
    return out;
}

// Writes the synthetic CSV and schema into `dir`.
void write_fixture(const fs::path& dir) {
    io::write_text(dir / "payments.csv", synth::generate_payments_csv(synth::PaymentsConfig::desk_default(7)));
    io::write_json(dir / "schema.json", json(synth::payments_schema()));
}

json tiny_pipeline(const fs::path& dir) {
    return {{"dataset",
             {{"name", "synth"},
              {"csv", (dir / "payments.csv").string()},
              {"schema", (dir / "schema.json").string()},
              {"tau", 10},
              {"eta", 40},
              {"seed", 3}}},
            {"scenarios",
             {{{"name", "dec"}, {"experiences", 3}, {"target_department", "Revenue"}, {"schedule", "linear"},
               {"alpha_local", 0}, {"alpha_global", 0}, {"seed", 5}},
              {{"name", "ap"}, {"experiences", 3}, {"target_department", "Revenue"}, {"schedule", "linear"},
               {"alpha_local", 4}, {"alpha_global", 4}, {"seed", 5}}}},
            {"run",
             {{"strategies", {"SEL", "JEL", "SFT", "EWC", "ER"}},
              {"seeds", {1, 2}},
              {"max_epochs", 3},
              {"batch_size", 32},
              {"encoder_widths", {16, 4}},
              {"decoder_widths", {16}},
              {"buffer_capacity", 30},
              {"fisher_samples", 32},
              {"jobs", 2}}},
            {"out", (dir / "out").string()}};
}

}  // namespace

TEST(SetOverrides, NestedKeysAndValueParsing) {
    json j = {{"run", {{"seeds", {1}}}}};
    apply_set(j, "run.seeds=[1,2,3]");
    apply_set(j, "run.lambda=1e9");
    apply_set(j, "dataset.name=philly");
    apply_set(j, "scenario.schedule.kind=exponential");
    apply_set(j, "flag=true");
    EXPECT_EQ(j["run"]["seeds"], json({1, 2, 3}));
    EXPECT_DOUBLE_EQ(j["run"]["lambda"].get<double>(), 1e9);
    EXPECT_EQ(j["dataset"]["name"], "philly");
    EXPECT_EQ(j["scenario"]["schedule"]["kind"], "exponential");
    EXPECT_EQ(j["flag"], true);
    apply_set(j, "dataset.csv=a=b.csv");
    EXPECT_EQ(j["dataset"]["csv"], "a=b.csv");
}

TEST(SetOverrides, Malformed) {
    json j = {{"a", 1}};
    EXPECT_THROW(apply_set(j, "novalue"), InputError);
    EXPECT_THROW(apply_set(j, "=3"), InputError);
    EXPECT_THROW(apply_set(j, "a..b=3"), InputError);
    EXPECT_THROW(apply_set(j, "a.b=3"), InputError);  // a is a number
}

TEST(PipelineConfig, Validation) {
    TempDir tmp("cfg");
    write_fixture(tmp.path());
    auto good = tiny_pipeline(tmp.path());
    EXPECT_NO_THROW(pipeline_config_from_json(good));

    auto bad = good;
    bad["dataset"]["csv"] = (tmp / "absent.csv").string();
    EXPECT_THROW(pipeline_config_from_json(bad), InputError);
    bad = good;
    bad["run"]["seeds"] = json::array();
    EXPECT_THROW(pipeline_config_from_json(bad), InputError);
    bad = good;
    bad["scenarios"][1]["name"] = "dec";
    EXPECT_THROW(pipeline_config_from_json(bad), InputError);
    bad = good;
    bad["scenarios"][0]["schedule"] = "sideways";
    EXPECT_THROW(pipeline_config_from_json(bad), InputError);
    bad = good;
    bad.erase("dataset");
    EXPECT_THROW(pipeline_config_from_json(bad), InputError);
}

TEST(Prepare, RowCountsAndDeterminism) {
    TempDir tmp("prep");
    write_fixture(tmp.path());
    auto cfg = dataset_config_from_json(tiny_pipeline(tmp.path())["dataset"]);
    cfg.eta = 25;
    const auto a = cmd_prepare(cfg, tmp / "a");
    cmd_prepare(cfg, tmp / "b");
    EXPECT_EQ(a.size(), 250u);
    EXPECT_EQ(a.departments.size(), 10u);
    EXPECT_EQ(dataset_name(tmp / "a"), "synth");
    EXPECT_EQ(files_under(tmp / "a"), files_under(tmp / "b"));
}

TEST(Scenario, PaperShapedStream) {
    TempDir tmp("sc");
    write_fixture(tmp.path());
    auto cfg = dataset_config_from_json(tiny_pipeline(tmp.path())["dataset"]);
    cfg.eta = 100;
    cmd_prepare(cfg, tmp / "ds");
    const json sc = {{"name", "ap"},      {"experiences", 10}, {"target_department", "Revenue"},
                     {"schedule", "linear"}, {"alpha_local", 10}, {"alpha_global", 10}};
    const auto s = cmd_scenario(tmp / "ds", sc, tmp / "st1");
    ASSERT_EQ(s.size(), 10u);
    const auto& last = s.last();
    EXPECT_EQ(last.count(scenario::Label::local_anomaly) + last.count(scenario::Label::global_anomaly), 20u);
    cmd_scenario(tmp / "ds", sc, tmp / "st2");
    EXPECT_EQ(files_under(tmp / "st1"), files_under(tmp / "st2"));
    const auto meta = io::read_json(tmp / "st1" / "stream.json");
    EXPECT_EQ(meta["config"]["dataset"], "synth");
}

TEST(Run, AllPairsIsolatedFailures) {
    TempDir tmp("run");
    write_fixture(tmp.path());
    const auto p = pipeline_config_from_json(tiny_pipeline(tmp.path()));
    cmd_prepare(dataset_config_from_json(p.dataset), tmp / "ds");
    cmd_scenario(tmp / "ds", p.scenarios[0], tmp / "st");

    auto plan = run_plan_from_json(p.run);
    plan.seeds = {1, 2, 3, 4, 5};
    const auto outcomes = cmd_run(tmp / "st", plan, tmp / "runs");
    EXPECT_EQ(outcomes.size(), 25u);
    EXPECT_EQ(find_runs(tmp / "runs").size(), 25u);
    for (const auto& o : outcomes) EXPECT_TRUE(o.ok) << o.name << ": " << o.error;

    // ER cannot hold one slot per experience: that run fails, the others finish.
    auto bad = run_plan_from_json(p.run);
    bad.strategies = {strategies::StrategyKind::sft, strategies::StrategyKind::er};
    bad.seeds = {1};
    bad.base.buffer_capacity = 2;
    const auto mixed = cmd_run(tmp / "st", bad, tmp / "runs_bad");
    ASSERT_EQ(mixed.size(), 2u);
    EXPECT_TRUE(mixed[0].ok);
    EXPECT_FALSE(mixed[1].ok);
    EXPECT_NE(mixed[1].error.find("buffer_capacity"), std::string::npos);
    EXPECT_TRUE(strategies::load_run(mixed[0].dir).complete);
}

TEST(Run, ParallelMatchesSerial) {
    TempDir tmp("par");
    write_fixture(tmp.path());
    const auto p = pipeline_config_from_json(tiny_pipeline(tmp.path()));
    cmd_prepare(dataset_config_from_json(p.dataset), tmp / "ds");
    cmd_scenario(tmp / "ds", p.scenarios[1], tmp / "st");
    auto plan = run_plan_from_json(p.run);
    plan.jobs = 1;
    cmd_run(tmp / "st", plan, tmp / "serial");
    plan.jobs = 4;
    cmd_run(tmp / "st", plan, tmp / "parallel");
    // checkpoints bytewise; manifests apart from wall-clock timings
    auto strip = [](std::map<std::string, std::string> files) {
        for (auto& [name, text] : files)
            if (name.ends_with("manifest.json")) {
                auto m = json::parse(text);
                for (auto& e : m["experiences"]) e.erase("seconds");
                text = m.dump();
            }
        return files;
    };
    const auto serial = strip(files_under(tmp / "serial"));
    EXPECT_EQ(serial.size(), 10u * 4u);
    EXPECT_EQ(serial, strip(files_under(tmp / "parallel")));
}

TEST(Evaluate, AggregateShapeRerunAndMissingSnapshot) {
    TempDir tmp("ev");
    write_fixture(tmp.path());
    const auto p = pipeline_config_from_json(tiny_pipeline(tmp.path()));
    cmd_prepare(dataset_config_from_json(p.dataset), tmp / "ds");
    cmd_scenario(tmp / "ds", p.scenarios[1], tmp / "st");
    auto plan = run_plan_from_json(p.run);
    plan.seeds = {1, 2, 3, 4, 5};
    cmd_run(tmp / "st", plan, tmp / "runs");

    const std::vector<EvalInput> in{{tmp / "st", find_runs(tmp / "runs")}};
    const auto reps = cmd_evaluate(in, tmp / "r1");
    ASSERT_EQ(reps.size(), 1u);
    EXPECT_EQ(reps[0].runs.size(), 25u);
    const auto agg = io::read_text(tmp / "r1" / "aggregate_synth_ap.csv");
    EXPECT_EQ(std::count(agg.begin(), agg.end(), '\n'), 6);
    cmd_evaluate(in, tmp / "r2");
    EXPECT_EQ(files_under(tmp / "r1"), files_under(tmp / "r2"));

    fs::remove(tmp / "runs" / "ER_seed2" / strategies::snapshot_file(3));
    try {
        cmd_evaluate(in, tmp / "r3");
        FAIL() << "expected an error";
    } catch (const InputError& e) {
        EXPECT_NE(std::string(e.what()).find("snapshot_03"), std::string::npos) << e.what();
    }

    // partial run: manifest covers two of three experiences
    auto m = io::read_json(tmp / "runs" / "SFT_seed1" / "manifest.json");
    m["complete"] = false;
    m["experiences"].erase(2);
    io::write_json(tmp / "runs" / "SFT_seed1" / "manifest.json", m);
    try {
        evaluate_scenario({tmp / "st", {tmp / "runs" / "SFT_seed1"}});
        FAIL() << "expected an error";
    } catch (const InputError& e) {
        EXPECT_NE(std::string(e.what()).find("E_3 snapshot"), std::string::npos) << e.what();
    }
}

TEST(Full, ByteIdenticalReportsWithConfigHash) {
    TempDir tmp("full");
    write_fixture(tmp.path());
    auto j = tiny_pipeline(tmp.path());
    j["out"] = (tmp / "o1").string();
    const auto a = cmd_full(pipeline_config_from_json(j));
    j["out"] = (tmp / "o2").string();
    const auto b = cmd_full(pipeline_config_from_json(j));
    EXPECT_TRUE(a.ok());
    EXPECT_TRUE(b.ok());
    const auto ra = files_under(tmp / "o1" / "reports");
    EXPECT_EQ(ra, files_under(tmp / "o2" / "reports"));
    EXPECT_EQ(ra.size(), 2u * (10u + 4u) + 1u);  // per scenario: 10 run files + 4 tables; one delta_fp table
    for (const auto& [name, text] : ra) {
        ASSERT_EQ(a.reports.size(), 2u);
        const bool has = text.find(a.reports[0].config_hash) != std::string::npos ||
                         text.find(a.reports[1].config_hash) != std::string::npos;
        EXPECT_TRUE(has) << name;
    }
    EXPECT_NE(a.reports[0].config_hash, a.reports[1].config_hash);
}

TEST(Cli, ExitCodes) {
    TempDir tmp("cli");
    write_fixture(tmp.path());
    const auto csv = (tmp / "payments.csv").string();
    io::write_json(tmp / "bad_schema.json",
                   {{"categorical_columns", {"department", "cost_centre"}},
                    {"numerical_columns", {"amount"}},
                    {"department_column", "department"}});

    auto r = cli("prepare --csv " + csv + " --schema " + (tmp / "bad_schema.json").string() + " -o " +
                 (tmp / "x").string());
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.output.find("cost_centre"), std::string::npos) << r.output;

    EXPECT_EQ(cli("").code, 2);
    EXPECT_EQ(cli("frobnicate").code, 2);
    EXPECT_EQ(cli("--help").code, 0);
    EXPECT_EQ(cli("scenario --dataset " + (tmp / "nowhere").string() + " -o y").code, 2);

    r = cli("prepare --csv " + csv + " --schema " + (tmp / "schema.json").string() +
            " --name synth --eta 30 --set seed=4 -o " + (tmp / "ds").string());
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_NE(r.output.find("encoded width d="), std::string::npos);

    r = cli("scenario --dataset " + (tmp / "ds").string() +
            " --name dec --experiences 3 --schedule linear --target-department Revenue --alpha-local 0"
            " --alpha-global 0 -o " + (tmp / "st").string());
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_EQ(cli("scenario --dataset " + (tmp / "ds").string() + " --target-department Nowhere -o " +
                  (tmp / "st2").string())
                  .code,
              2);

    const std::string small = " --max-epochs 2 --set encoder_widths=[8,4] --set decoder_widths=[8] ";
    r = cli("run --stream " + (tmp / "st").string() + " --strategies SFT,ER --seeds 1 --buffer-capacity 2" + small +
            "-o " + (tmp / "runs").string());
    EXPECT_EQ(r.code, 3) << r.output;
    EXPECT_TRUE(fs::exists(tmp / "runs" / "SFT_seed1" / "manifest.json"));
    EXPECT_EQ(cli("run --stream " + (tmp / "st").string() + " --strategies FOO -o " + (tmp / "r").string()).code, 2);

    r = cli("run --stream " + (tmp / "st").string() + " --strategies SFT --seeds 1" + small + "-o " +
            (tmp / "ok").string());
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_NE(r.output.find("experience 3/3"), std::string::npos);
    r = cli("evaluate --stream " + (tmp / "st").string() + " --runs " + (tmp / "ok").string() + " -o " +
            (tmp / "rep").string());
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_TRUE(fs::exists(tmp / "rep" / "aggregate_synth_dec.csv"));

    fs::remove(tmp / "ok" / "SFT_seed1" / strategies::snapshot_file(3));
    r = cli("evaluate --stream " + (tmp / "st").string() + " --runs " + (tmp / "ok").string() + " -o " +
            (tmp / "rep2").string());
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.output.find("snapshot_03"), std::string::npos) << r.output;
}

TEST(Cli, LogLevelFromEnvironment) {
    TempDir tmp("log");
    write_fixture(tmp.path());
    const std::string args = "prepare --csv " + (tmp / "payments.csv").string() + " --schema " +
                             (tmp / "schema.json").string() + " --eta 20 -o " + (tmp / "ds").string();
    EXPECT_NE(cli(args).output.find("encoded width"), std::string::npos);
    const auto quiet = cli(args, "CONTAUDIT_LOG=error");
    EXPECT_EQ(quiet.code, 0);
    EXPECT_EQ(quiet.output.find("encoded width"), std::string::npos) << quiet.output;
    EXPECT_NE(cli(args, "CONTAUDIT_LOG=debug").output.find("[debug]"), std::string::npos);
}
