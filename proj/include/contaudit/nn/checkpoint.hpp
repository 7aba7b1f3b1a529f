#ifndef CONTAUDIT_NN_CHECKPOINT_HPP
#define CONTAUDIT_NN_CHECKPOINT_HPP

// Checkpoint layout (all integers little-endian):
//
//   bytes 0..7    magic "CAUDAE01"
//   bytes 8..15   u64 header length H
//   next H bytes  UTF-8 JSON header:
//                   {"format":"contaudit-autoencoder","version":1,
//                    "input_dim":d,"encoder_widths":[...],"decoder_widths":[...],
//                    "leaky_alpha":a,"parameter_count":P,
//                    "layers":[{"in":i,"out":o,"activation":"leaky_relu","alpha":a},...],
//                    "meta":{...producer seed/config...}}
//   next 8*P      float64 parameters; per layer the [out x in] weights row-major,
//                 then the out biases, layers in forward order.

#include "contaudit/nn/autoencoder.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace contaudit::nn {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

inline constexpr char kCheckpointMagic[8] = {'C', 'A', 'U', 'D', 'A', 'E', '0', '1'};

struct Checkpoint {
    Autoencoder model;
    nlohmann::json meta = nlohmann::json::object();
};

inline std::string checkpoint_bytes(const Autoencoder& model, const nlohmann::json& meta = nlohmann::json::object()) {
    const auto& arch = model.architecture();
    nlohmann::json header = {
        {"format", "contaudit-autoencoder"},
        {"version", 1},
        {"input_dim", arch.input_dim},
        {"encoder_widths", arch.encoder_widths},
        {"decoder_widths", arch.decoder_widths},
        {"leaky_alpha", arch.leaky_alpha},
        {"parameter_count", model.parameter_count()},
        {"meta", meta},
    };
    auto& layers = header["layers"] = nlohmann::json::array();
    for (std::size_t l = 0; l < model.layer_count(); ++l) {
        const auto& s = model.slots()[l];
        const auto& a = model.activation(l);
        layers.push_back({{"in", s.in}, {"out", s.out}, {"activation", to_string(a.kind)}, {"alpha", a.alpha}});
    }
    const std::string text = header.dump();
    std::string out(kCheckpointMagic, sizeof kCheckpointMagic);
    const std::uint64_t len = text.size();
    out.append(reinterpret_cast<const char*>(&len), sizeof len);
    out += text;
    out.append(reinterpret_cast<const char*>(model.parameters().data()),
               model.parameter_count() * sizeof(double));
    return out;
}

inline Checkpoint parse_checkpoint(const std::string& bytes, const std::string& origin = "<memory>") {
    auto fail = [&](const std::string& why) { return InputError("checkpoint " + origin + ": " + why); };
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0) throw fail("bad magic");
    std::uint64_t len = 0;
    std::memcpy(&len, bytes.data() + 8, sizeof len);
    if (bytes.size() < 16 + len) throw fail("truncated header");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(len));
    } catch (const nlohmann::json::exception& e) {
        throw fail(std::string("header JSON: ") + e.what());
    }
    if (header.value("format", "") != "contaudit-autoencoder" || header.value("version", 0) != 1)
        throw fail("unsupported format/version");

    Architecture arch{header.at("input_dim").get<std::size_t>(),
                      header.at("encoder_widths").get<std::vector<std::size_t>>(),
                      header.at("decoder_widths").get<std::vector<std::size_t>>(),
                      header.at("leaky_alpha").get<double>()};
    std::vector<Activation> acts;
    for (const auto& l : header.at("layers"))
        acts.push_back({activation_from_string(l.at("activation").get<std::string>()), l.at("alpha").get<double>()});
    const auto count = header.at("parameter_count").get<std::size_t>();
    if (bytes.size() != 16 + len + count * sizeof(double)) throw fail("payload size mismatch");
    Vector theta(static_cast<Eigen::Index>(count));
    std::memcpy(theta.data(), bytes.data() + 16 + len, count * sizeof(double));
    Checkpoint cp{Autoencoder::from_parts(arch, acts, std::move(theta)), header.value("meta", nlohmann::json::object())};
    const auto& slots = cp.model.slots();
    for (std::size_t l = 0; l < slots.size(); ++l) {
        const auto& j = header.at("layers").at(l);
        if (j.at("in").get<std::size_t>() != slots[l].in || j.at("out").get<std::size_t>() != slots[l].out)
            throw fail("layer " + std::to_string(l) + " shape disagrees with architecture");
    }
    return cp;
}

inline void save_checkpoint(const std::filesystem::path& path, const Autoencoder& model,
                            const nlohmann::json& meta = nlohmann::json::object()) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw InputError("cannot write checkpoint " + path.string());
    const auto bytes = checkpoint_bytes(model, meta);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw InputError("write failed for checkpoint " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot read checkpoint " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_checkpoint(ss.str(), path.string());
}

}  // namespace contaudit::nn

#endif  // CONTAUDIT_NN_CHECKPOINT_HPP
