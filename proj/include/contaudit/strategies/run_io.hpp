#ifndef CONTAUDIT_STRATEGIES_RUN_IO_HPP
#define CONTAUDIT_STRATEGIES_RUN_IO_HPP

// Run directory:
//   manifest.json       strategy, seed, config, config hash, completion flag and
//                       one entry per trained experience (loss history, buffer slots)
//   snapshot_XX.ckpt    model after experience XX (nn checkpoint format)

#include "contaudit/io.hpp"
#include "contaudit/nn/checkpoint.hpp"
#include "contaudit/strategies/runner.hpp"

namespace contaudit::strategies {

inline std::string snapshot_file(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "snapshot_%02zu.ckpt", i);
    return buf;
}

inline std::string run_name(StrategyKind k, std::uint64_t seed) { return to_string(k) + "_seed" + std::to_string(seed); }

/// Identity of a run: strategy, seed, hyper-parameters and the stream it trains on.
inline nlohmann::json run_identity(const StrategyConfig& c, std::uint64_t seed, const std::string& stream_hash) {
    return {{"strategy", to_string(c.kind)}, {"seed", seed}, {"config", to_json(c)}, {"stream_hash", stream_hash}};
}

inline nlohmann::json record_to_json(const ExperienceRecord& r) {
    nlohmann::json slots = nlohmann::json::object();
    for (auto [k, v] : r.buffer_slots) slots[std::to_string(k)] = v;
    return {{"index", r.index},
            {"checkpoint", snapshot_file(r.index)},
            {"train_rows", r.train_rows},
            {"replay_rows", r.replay_rows},
            {"buffer_slots", slots},
            {"epochs", r.history.epoch_loss.size()},
            {"steps", r.history.steps},
            {"stopped_early", r.history.stopped_early},
            {"adam_t_at_start", r.history.adam_t_at_start},
            {"epoch_loss", r.history.epoch_loss},
            {"epoch_penalty", r.history.epoch_penalty},
            {"seconds", r.seconds}};
}

inline ExperienceRecord record_from_json(const nlohmann::json& j) {
    ExperienceRecord r;
    r.index = j.at("index").get<std::size_t>();
    r.train_rows = j.at("train_rows").get<std::size_t>();
    r.replay_rows = j.at("replay_rows").get<std::size_t>();
    for (const auto& [k, v] : j.at("buffer_slots").items()) r.buffer_slots[std::stoul(k)] = v.get<std::size_t>();
    r.history.steps = j.at("steps").get<std::size_t>();
    r.history.stopped_early = j.at("stopped_early").get<bool>();
    r.history.adam_t_at_start = j.at("adam_t_at_start").get<std::uint64_t>();
    r.history.epoch_loss = j.at("epoch_loss").get<std::vector<double>>();
    r.history.epoch_penalty = j.at("epoch_penalty").get<std::vector<double>>();
    r.seconds = j.at("seconds").get<double>();
    return r;
}

/// Writes the snapshot of the newest experience and rewrites the manifest.
/// The manifest is written last (via rename), so a crash never leaves it
/// pointing at a missing checkpoint.
inline void save_run_progress(const std::filesystem::path& dir, const RunResult& r, std::size_t total,
                              const nlohmann::json& identity) {
    std::filesystem::create_directories(dir);
    for (std::size_t i = 1; i <= r.completed(); ++i) {
        const auto path = dir / snapshot_file(i);
        if (i == r.completed() || !std::filesystem::exists(path))
            nn::save_checkpoint(path, r.snapshots[i - 1],
                                {{"strategy", to_string(r.kind)}, {"seed", r.seed}, {"experience", i}});
    }
    nlohmann::json exps = nlohmann::json::array();
    for (const auto& rec : r.records) exps.push_back(record_to_json(rec));
    nlohmann::json m = identity;
    m["format"] = "contaudit-run";
    m["version"] = 1;
    m["config_hash"] = io::config_hash(identity);
    m["experiences_total"] = total;
    m["complete"] = r.completed() == total;
    m["experiences"] = exps;
    const auto tmp = dir / "manifest.json.tmp";
    io::write_json(tmp, m);
    std::filesystem::rename(tmp, dir / "manifest.json");
}

struct LoadedRun {
    nlohmann::json manifest;
    RunResult result;
    bool complete = false;
};

inline LoadedRun load_run(const std::filesystem::path& dir) {
    LoadedRun out;
    out.manifest = io::read_json(dir / "manifest.json");
    try {
        const auto& m = out.manifest;
        if (m.value("format", "") != "contaudit-run") throw InputError("not a run directory: " + dir.string());
        auto& r = out.result;
        r.kind = strategy_from_string(m.at("strategy").get<std::string>());
        r.seed = m.at("seed").get<std::uint64_t>();
        r.config = strategy_config_from_json(m.at("config"), r.kind);
        for (const auto& ej : m.at("experiences")) {
            r.records.push_back(record_from_json(ej));
            const auto path = dir / ej.at("checkpoint").get<std::string>();
            if (!std::filesystem::exists(path))
                throw InputError("run " + dir.string() + ": missing snapshot " + path.filename().string());
            r.snapshots.push_back(nn::load_checkpoint(path).model);
        }
        out.complete = m.at("complete").get<bool>();
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(dir.string() + "/manifest.json: " + e.what());
    }
}

/// Runs (or resumes) one strategy/seed into `dir`. A manifest with the same
/// identity is resumed; a complete one is returned as is; a different identity
/// is discarded with a warning.
inline RunResult run_to_directory(const std::filesystem::path& dir, const scenario::ExperienceStream& stream,
                                  const StrategyConfig& config, std::uint64_t seed, const std::string& stream_hash) {
    const auto identity = run_identity(config, seed, stream_hash);
    RunResult resume;
    if (std::filesystem::exists(dir / "manifest.json")) {
        auto prior = load_run(dir);
        if (prior.manifest.value("config_hash", "") == io::config_hash(identity)) {
            if (prior.complete && prior.result.completed() == stream.size()) {
                log()->info("{}: already complete", dir.string());
                return std::move(prior.result);
            }
            log()->info("{}: resuming after experience {}", dir.string(), prior.result.completed());
            resume = std::move(prior.result);
        } else {
            log()->warn("{}: existing run has a different configuration; starting over", dir.string());
            std::filesystem::remove_all(dir);
        }
    }
    const std::size_t total = stream.size();
    RunHooks hooks;
    hooks.on_experience = [&](const RunResult& r) { save_run_progress(dir, r, total, identity); };
    return run_strategy(stream, config, seed, std::move(resume), hooks);
}

}  // namespace contaudit::strategies

#endif  // CONTAUDIT_STRATEGIES_RUN_IO_HPP
