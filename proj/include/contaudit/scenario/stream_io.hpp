#ifndef CONTAUDIT_SCENARIO_STREAM_IO_HPP
#define CONTAUDIT_SCENARIO_STREAM_IO_HPP

// Stream directory:
//   stream.json             metadata: encoder, departments, target, schedule, seeds,
//                           warnings, config hash and per-experience labels
//   experience_XX.bin       rows of experience XX (float64 row-major)
//   experience_XX_held.bin  target rows removed by decay (may be empty)

#include "contaudit/ingest/dataset_io.hpp"
#include "contaudit/scenario/inject.hpp"

namespace contaudit::scenario {

struct ScenarioConfig {
    std::string name = "scenario";
    std::size_t experiences = 10;
    double rho_lo = 0.9, rho_hi = 1.0;
    std::optional<std::size_t> eta;  // rows per department; defaults to each department's size
    std::string target_department;
    DecaySchedule schedule;
    std::size_t alpha_local = 10;
    std::size_t alpha_global = 10;
    InjectionConfig injection;
    std::uint64_t seed = 0;
    std::map<std::string, std::uint64_t> seeds;  // explicit per-stage seeds override `seed`

    [[nodiscard]] std::uint64_t seed_for(const std::string& stage) const {
        if (auto it = seeds.find(stage); it != seeds.end()) return it->second;
        return derive_seed(seed, stage);
    }

    void validate() const {
        if (experiences < 2) throw InputError("scenario: experiences must be >= 2");
        if (!(rho_lo > 0.0 && rho_lo <= rho_hi && rho_hi <= 1.0))
            throw InputError("scenario: rho_range must satisfy 0 < lo <= hi <= 1");
        if (schedule.kind != DecayKind::none && target_department.empty())
            throw InputError("scenario: target_department is required for a decay schedule");
        if (injection.global_columns < 1) throw InputError("scenario: global_columns must be >= 1");
        schedule.validate(experiences);
    }
};

inline nlohmann::json schedule_to_json(const DecaySchedule& s) {
    nlohmann::json j{{"kind", to_string(s.kind)}, {"gamma", s.gamma}};
    j["cutoff"] = s.cutoff ? nlohmann::json(*s.cutoff) : nlohmann::json(nullptr);
    return j;
}

inline DecaySchedule schedule_from_json(const nlohmann::json& j) {
    DecaySchedule s;
    if (j.is_string()) {
        s.kind = decay_from_string(j.get<std::string>());
        return s;
    }
    s.kind = decay_from_string(j.at("kind").get<std::string>());
    s.gamma = j.value("gamma", 0.5);
    if (j.contains("cutoff") && !j.at("cutoff").is_null()) s.cutoff = j.at("cutoff").get<std::size_t>();
    return s;
}

inline nlohmann::json to_json(const ScenarioConfig& c) {
    return {{"name", c.name},
            {"experiences", c.experiences},
            {"rho_range", {c.rho_lo, c.rho_hi}},
            {"eta", c.eta ? nlohmann::json(*c.eta) : nlohmann::json(nullptr)},
            {"target_department", c.target_department},
            {"schedule", schedule_to_json(c.schedule)},
            {"alpha_local", c.alpha_local},
            {"alpha_global", c.alpha_global},
            {"global_columns", c.injection.global_columns},
            {"max_tries", c.injection.max_tries},
            {"seed", c.seed},
            {"seeds", c.seeds}};
}

inline ScenarioConfig scenario_from_json(const nlohmann::json& j) {
    try {
        ScenarioConfig c;
        c.name = j.value("name", c.name);
        c.experiences = j.value("experiences", c.experiences);
        if (j.contains("rho_range")) {
            const auto& r = j.at("rho_range");
            if (!r.is_array() || r.size() != 2) throw InputError("scenario: rho_range must be [lo, hi]");
            c.rho_lo = r[0].get<double>();
            c.rho_hi = r[1].get<double>();
        }
        if (j.contains("eta") && !j.at("eta").is_null()) c.eta = j.at("eta").get<std::size_t>();
        c.target_department = j.value("target_department", std::string{});
        if (j.contains("schedule")) c.schedule = schedule_from_json(j.at("schedule"));
        c.alpha_local = j.value("alpha_local", c.alpha_local);
        c.alpha_global = j.value("alpha_global", c.alpha_global);
        c.injection.global_columns = j.value("global_columns", c.injection.global_columns);
        c.injection.max_tries = j.value("max_tries", c.injection.max_tries);
        c.seed = j.value("seed", c.seed);
        if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::map<std::string, std::uint64_t>>();
        c.validate();
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("scenario config: ") + e.what());
    }
}

/// build_stream, apply_decay, then global and local injection (each skipped
/// when its count is zero).
inline ExperienceStream build_scenario(const ingest::EncodedDataset& ds, const ScenarioConfig& cfg) {
    cfg.validate();
    auto s = build_stream(ds, cfg.experiences, cfg.rho_lo, cfg.rho_hi, cfg.seed_for("stream"), cfg.eta);
    if (!cfg.target_department.empty())
        s = apply_decay(std::move(s), ds.department_id(cfg.target_department), cfg.schedule, cfg.seed_for("decay"));
    if (cfg.alpha_global > 0)
        s = inject_global_anomalies(std::move(s), ds, cfg.alpha_global, cfg.seed_for("global"), cfg.injection);
    if (cfg.alpha_local > 0)
        s = inject_local_anomalies(std::move(s), ds, cfg.alpha_local, cfg.seed_for("local"), cfg.injection);
    return s;
}

inline std::string experience_file(std::size_t i, bool held) {
    char buf[48];
    std::snprintf(buf, sizeof buf, held ? "experience_%02zu_held.bin" : "experience_%02zu.bin", i);
    return buf;
}

inline nlohmann::json stream_metadata(const ExperienceStream& s) {
    nlohmann::json meta = ingest::encoder_to_json(s.encoder);
    meta["format"] = "contaudit-stream";
    meta["version"] = 1;
    meta["d"] = s.width();
    meta["departments"] = s.departments;
    meta["target_department"] = s.target_department ? nlohmann::json(*s.target_department) : nlohmann::json(nullptr);
    meta["schedule"] = schedule_to_json(s.schedule);
    meta["seeds"] = s.seeds;
    meta["rho_range"] = {s.rho_lo, s.rho_hi};
    meta["warnings"] = s.warnings;
    nlohmann::json exps = nlohmann::json::array();
    for (const auto& e : s.experiences) {
        std::vector<std::string> labels;
        for (auto l : e.labels) labels.push_back(to_string(l));
        nlohmann::json inj = nlohmann::json::array();
        for (const auto& r : e.injections)
            inj.push_back({{"row", r.row},
                           {"kind", to_string(r.kind)},
                           {"columns", r.columns},
                           {"copied_from", r.copied_from},
                           {"relaxed", r.relaxed}});
        exps.push_back({{"index", e.index},
                        {"rows", e.size()},
                        {"department_index", e.department_index},
                        {"labels", labels},
                        {"source_index", e.source_index},
                        {"held_out_rows", e.held_out.rows()},
                        {"held_out_source", e.held_out_source},
                        {"injections", inj}});
    }
    meta["experiences"] = exps;
    return meta;
}

inline void save_stream(const std::filesystem::path& dir, const ExperienceStream& s,
                        const nlohmann::json& config = nullptr) {
    std::filesystem::create_directories(dir);
    auto meta = stream_metadata(s);
    if (!config.is_null()) {
        meta["config"] = config;
        meta["config_hash"] = io::config_hash(config);
    }
    for (const auto& e : s.experiences) {
        io::write_matrix(dir / experience_file(e.index, false), e.rows);
        io::write_matrix(dir / experience_file(e.index, true), e.held_out);
    }
    io::write_json(dir / "stream.json", meta);
}

inline ExperienceStream load_stream(const std::filesystem::path& dir) {
    const auto meta = io::read_json(dir / "stream.json");
    try {
        if (meta.value("format", "") != "contaudit-stream") throw InputError("not a stream directory: " + dir.string());
        ExperienceStream s;
        s.encoder = ingest::encoder_from_json(meta);
        s.departments = meta.at("departments").get<std::vector<std::string>>();
        if (!meta.at("target_department").is_null()) s.target_department = meta.at("target_department").get<int>();
        s.schedule = schedule_from_json(meta.at("schedule"));
        s.seeds = meta.at("seeds").get<std::map<std::string, std::uint64_t>>();
        s.rho_lo = meta.at("rho_range")[0].get<double>();
        s.rho_hi = meta.at("rho_range")[1].get<double>();
        s.warnings = meta.at("warnings").get<std::vector<std::string>>();
        const auto d = meta.at("d").get<std::size_t>();
        if (d != s.encoder.width()) throw InputError("stream metadata: d disagrees with vocabulary width");
        for (const auto& ej : meta.at("experiences")) {
            Experience e;
            e.index = ej.at("index").get<std::size_t>();
            const auto n = ej.at("rows").get<std::size_t>();
            e.department_index = ej.at("department_index").get<std::vector<int>>();
            for (const auto& l : ej.at("labels")) e.labels.push_back(label_from_string(l.get<std::string>()));
            e.source_index = ej.at("source_index").get<std::vector<std::int64_t>>();
            e.held_out_source = ej.at("held_out_source").get<std::vector<std::int64_t>>();
            for (const auto& r : ej.at("injections"))
                e.injections.push_back({r.at("row").get<std::size_t>(), label_from_string(r.at("kind")),
                                        r.at("columns").get<std::vector<std::size_t>>(),
                                        r.at("copied_from").get<std::int64_t>(), r.at("relaxed").get<bool>()});
            if (e.department_index.size() != n || e.labels.size() != n || e.source_index.size() != n)
                throw InputError("stream metadata: experience " + std::to_string(e.index) + " length mismatch");
            e.rows = io::read_matrix(dir / experience_file(e.index, false), n, d);
            e.held_out = io::read_matrix(dir / experience_file(e.index, true),
                                         ej.at("held_out_rows").get<std::size_t>(), d);
            s.experiences.push_back(std::move(e));
        }
        if (s.experiences.empty()) throw InputError("stream has no experiences: " + dir.string());
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(dir.string() + "/stream.json: " + e.what());
    }
}

}  // namespace contaudit::scenario

#endif  // CONTAUDIT_SCENARIO_STREAM_IO_HPP
