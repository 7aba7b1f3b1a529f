#ifndef CONTAUDIT_IO_HPP
#define CONTAUDIT_IO_HPP

#include "contaudit/common.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace contaudit::io {

namespace fs = std::filesystem;

inline void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw InputError("cannot write " + path.string());
    f << text;
    if (!f) throw InputError("write failed for " + path.string());
}

inline std::string read_text(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot read " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

/// Keys are sorted (nlohmann::json objects are ordered maps), so output is stable.
inline void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

inline nlohmann::json read_json(const fs::path& path) {
    try {
        return nlohmann::json::parse(read_text(path));
    } catch (const nlohmann::json::exception& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

/// Raw row-major little-endian float64, no header.
inline void write_matrix(const fs::path& path, const Matrix& m) {
    static_assert(std::endian::native == std::endian::little);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw InputError("cannot write " + path.string());
    f.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
    if (!f) throw InputError("write failed for " + path.string());
}

inline Matrix read_matrix(const fs::path& path, std::size_t rows, std::size_t cols) {
    const std::string bytes = read_text(path);
    if (bytes.size() != rows * cols * sizeof(double))
        throw InputError(path.string() + ": expected " + std::to_string(rows) + "x" + std::to_string(cols) +
                         " float64 matrix, found " + std::to_string(bytes.size()) + " bytes");
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    std::memcpy(m.data(), bytes.data(), bytes.size());
    return m;
}

/// Fixed six-decimal rendering used by every report file.
inline std::string fixed6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

inline std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

/// JSON text in which every floating-point number is rendered with %.6f.
/// Non-finite values become null.
inline std::string dump_fixed6(const nlohmann::json& j) {
    static const std::string mark = "\x01" "f6:";
    auto convert = [](auto&& self, const nlohmann::json& v) -> nlohmann::json {
        if (v.is_number_float()) {
            const double d = v.get<double>();
            if (!std::isfinite(d)) return nullptr;
            return mark + fixed6(d);
        }
        if (v.is_object()) {
            nlohmann::json out = nlohmann::json::object();
            for (const auto& [k, x] : v.items()) out[k] = self(self, x);
            return out;
        }
        if (v.is_array()) {
            nlohmann::json out = nlohmann::json::array();
            for (const auto& x : v) out.push_back(self(self, x));
            return out;
        }
        return v;
    };
    std::string text = convert(convert, j).dump(2);
    // strip the quotes around marked numbers; the marker dumps as \u0001
    const std::string open = "\"\\u0001f6:";
    std::string out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size();) {
        if (text.compare(i, open.size(), open) == 0) {
            const auto end = text.find('"', i + open.size());
            out.append(text, i + open.size(), end - i - open.size());
            i = end + 1;
        } else {
            out += text[i++];
        }
    }
    return out + "\n";
}

inline void write_json_fixed6(const fs::path& path, const nlohmann::json& j) { write_text(path, dump_fixed6(j)); }

/// Stable hash of a JSON config (canonical compact dump).
inline std::string config_hash(const nlohmann::json& config) { return hash_hex(fnv1a(config.dump())); }

}  // namespace contaudit::io

#endif  // CONTAUDIT_IO_HPP
