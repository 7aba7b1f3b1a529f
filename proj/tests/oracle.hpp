#ifndef CONTAUDIT_TESTS_ORACLE_HPP
#define CONTAUDIT_TESTS_ORACLE_HPP

// Straight-line reference computations used as independent oracles. They only
// read the model's flat parameter buffer and layer shapes; no Eigen products.

#include "contaudit/nn/autoencoder.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace oracle {

using contaudit::Matrix;
using contaudit::nn::ActivationKind;
using contaudit::nn::Autoencoder;

inline double act(ActivationKind k, double alpha, double z) {
    switch (k) {
        case ActivationKind::leaky_relu: return z > 0 ? z : alpha * z;
        case ActivationKind::tanh: return std::tanh(z);
        case ActivationKind::sigmoid: return 1.0 / (1.0 + std::exp(-z));
    }
    return z;
}

inline std::vector<double> forward_row(const Autoencoder& m, const std::vector<double>& theta,
                                       std::vector<double> x) {
    for (std::size_t l = 0; l < m.layer_count(); ++l) {
        const auto& s = m.slots()[l];
        const auto& a = m.activation(l);
        std::vector<double> y(s.out);
        for (std::size_t o = 0; o < s.out; ++o) {
            double z = theta[s.bias_offset + o];
            for (std::size_t i = 0; i < s.in; ++i) z += theta[s.weight_offset + o * s.in + i] * x[i];
            y[o] = act(a.kind, a.alpha, z);
        }
        x = std::move(y);
    }
    return x;
}

inline double bce_row(const std::vector<double>& r, const std::vector<double>& t) {
    double s = 0;
    for (std::size_t j = 0; j < r.size(); ++j) {
        double p = std::min(std::max(r[j], 1e-7), 1 - 1e-7);
        s += -(t[j] * std::log(p) + (1 - t[j]) * std::log(1 - p));
    }
    return s / static_cast<double>(r.size());
}

inline double batch_loss(const Autoencoder& m, const std::vector<double>& theta, const Matrix& batch) {
    double total = 0;
    for (Eigen::Index i = 0; i < batch.rows(); ++i) {
        std::vector<double> x(batch.cols());
        for (Eigen::Index j = 0; j < batch.cols(); ++j) x[j] = batch(i, j);
        total += bce_row(forward_row(m, theta, x), x);
    }
    return total / static_cast<double>(batch.rows());
}

inline std::vector<double> central_difference(const Autoencoder& m, const Matrix& batch, double h) {
    std::vector<double> theta(m.parameters().data(), m.parameters().data() + m.parameter_count());
    std::vector<double> g(theta.size());
    for (std::size_t k = 0; k < theta.size(); ++k) {
        const double keep = theta[k];
        theta[k] = keep + h;
        const double up = batch_loss(m, theta, batch);
        theta[k] = keep - h;
        const double down = batch_loss(m, theta, batch);
        theta[k] = keep;
        g[k] = (up - down) / (2 * h);
    }
    return g;
}

inline Matrix random_batch(std::size_t rows, std::size_t cols, std::uint64_t seed, bool binary = false) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Matrix b(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = binary ? (u(rng) < 0.5 ? 0.0 : 1.0) : u(rng);
    return b;
}

}  // namespace oracle

#endif
