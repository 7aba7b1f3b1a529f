#ifndef CONTAUDIT_INGEST_DATASET_IO_HPP
#define CONTAUDIT_INGEST_DATASET_IO_HPP

// Dataset directory:
//   matrix.bin     n x d float64, row-major, little-endian
//   metadata.json  {"format":"contaudit-dataset","version":1,"rows":n,"d":d,"seed":s,
//                   "schema":{...},"vocab":{"columns":[...],"values":[[...],...]},
//                   "minmax":[{"min":..,"max":..},...],"departments":[...],
//                   "department_index":[...]}

#include "contaudit/ingest/encode.hpp"
#include "contaudit/io.hpp"

namespace contaudit::ingest {

inline nlohmann::json encoder_to_json(const Encoder& e) {
    nlohmann::json mm = nlohmann::json::array();
    for (const auto& m : e.minmax) mm.push_back({{"min", m.min}, {"max", m.max}});
    return {{"schema", e.schema},
            {"vocab", {{"columns", e.vocab.columns}, {"values", e.vocab.values}}},
            {"minmax", mm}};
}

inline Encoder encoder_from_json(const nlohmann::json& j) {
    Encoder e;
    e.schema = j.at("schema").get<SchemaConfig>();
    e.vocab = Vocabulary::from_values(j.at("vocab").at("columns").get<std::vector<std::string>>(),
                                      j.at("vocab").at("values").get<std::vector<std::vector<std::string>>>());
    for (const auto& m : j.at("minmax")) e.minmax.push_back({m.at("min").get<double>(), m.at("max").get<double>()});
    if (e.minmax.size() != e.schema.numerical_columns.size())
        throw InputError("dataset metadata: minmax count does not match numerical columns");
    return e;
}

inline void save_dataset(const std::filesystem::path& dir, const EncodedDataset& ds) {
    std::filesystem::create_directories(dir);
    nlohmann::json meta = encoder_to_json(ds.encoder);
    meta["format"] = "contaudit-dataset";
    meta["version"] = 1;
    meta["rows"] = ds.size();
    meta["d"] = ds.width();
    meta["seed"] = ds.seed;
    meta["departments"] = ds.departments;
    meta["department_index"] = ds.department_index;
    io::write_matrix(dir / "matrix.bin", ds.rows);
    io::write_json(dir / "metadata.json", meta);
}

inline EncodedDataset load_dataset(const std::filesystem::path& dir) {
    const auto meta = io::read_json(dir / "metadata.json");
    try {
        if (meta.value("format", "") != "contaudit-dataset") throw InputError("not a dataset directory: " + dir.string());
        EncodedDataset ds;
        ds.encoder = encoder_from_json(meta);
        ds.departments = meta.at("departments").get<std::vector<std::string>>();
        ds.department_index = meta.at("department_index").get<std::vector<int>>();
        ds.seed = meta.at("seed").get<std::uint64_t>();
        const auto n = meta.at("rows").get<std::size_t>();
        const auto d = meta.at("d").get<std::size_t>();
        if (d != ds.encoder.width()) throw InputError("dataset metadata: d disagrees with vocabulary width");
        if (ds.department_index.size() != n) throw InputError("dataset metadata: department_index length mismatch");
        ds.rows = io::read_matrix(dir / "matrix.bin", n, d);
        return ds;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(dir.string() + "/metadata.json: " + e.what());
    }
}

}  // namespace contaudit::ingest

#endif  // CONTAUDIT_INGEST_DATASET_IO_HPP
