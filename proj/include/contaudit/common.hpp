#ifndef CONTAUDIT_COMMON_HPP
#define CONTAUDIT_COMMON_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <cstdlib>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

namespace contaudit {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

/// Bad user input: malformed files, inconsistent shapes, unknown names.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Broken internal contract (stale cache, corrupted checkpoint layout).
class InternalError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// splitmix64 finalizer
[[nodiscard]] constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

[[nodiscard]] constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

/// Derives an independent stream seed from a base seed and a purpose tag.
[[nodiscard]] constexpr std::uint64_t derive_seed(std::uint64_t base, std::string_view tag,
                                                  std::uint64_t index = 0) noexcept {
    return mix64(mix64(base ^ fnv1a(tag)) + index);
}

/// Library logger. Level is read once from CONTAUDIT_LOG (trace..off), default "info".
inline std::shared_ptr<spdlog::logger> log() {
    static std::shared_ptr<spdlog::logger> logger = [] {
        auto l = spdlog::get("contaudit");
        if (!l) {
            l = spdlog::stderr_color_mt("contaudit");
        }
        const char* env = std::getenv("CONTAUDIT_LOG");
        l->set_level(env ? spdlog::level::from_str(env) : spdlog::level::info);
        l->set_pattern("[%H:%M:%S] [%^%l%$] %v");
        return l;
    }();
    return logger;
}

}  // namespace contaudit

#endif  // CONTAUDIT_COMMON_HPP
