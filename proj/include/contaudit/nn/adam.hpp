#ifndef CONTAUDIT_NN_ADAM_HPP
#define CONTAUDIT_NN_ADAM_HPP

#include "contaudit/common.hpp"

#include <cmath>
#include <cstdint>

namespace contaudit::nn {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    AdamConfig config;
    Vector m;
    Vector v;
    std::uint64_t t = 0;

    AdamState() = default;
    AdamState(AdamConfig cfg, Eigen::Index n)
        : config(cfg), m(Vector::Zero(n)), v(Vector::Zero(n)) {}

    void reset() {
        m.setZero();
        v.setZero();
        t = 0;
    }
};

/// One bias-corrected Adam update applied in place.
inline void adam_step(Vector& params, const Vector& grads, AdamState& state) {
    if (params.size() != grads.size() || state.m.size() != params.size() || state.v.size() != params.size())
        throw InputError("adam_step: parameter, gradient and moment sizes differ");
    const auto& c = state.config;
    state.t += 1;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.t));
    state.m.array() = c.beta1 * state.m.array() + (1.0 - c.beta1) * grads.array();
    state.v.array() = c.beta2 * state.v.array() + (1.0 - c.beta2) * grads.array().square();
    params.array() -= c.lr * (state.m.array() / bc1) / ((state.v.array() / bc2).sqrt() + c.eps);
}

}  // namespace contaudit::nn

#endif  // CONTAUDIT_NN_ADAM_HPP
