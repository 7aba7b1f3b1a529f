#ifndef CONTAUDIT_STRATEGIES_EWC_HPP
#define CONTAUDIT_STRATEGIES_EWC_HPP

#include "contaudit/nn/train.hpp"

namespace contaudit::strategies {

struct EwcState {
    Vector anchor;
    Vector fisher;
    double lambda = 50.0;

    void validate() const {
        if (anchor.size() != fisher.size()) throw InternalError("ewc: anchor and fisher sizes differ");
        if (!(lambda >= 0.0)) throw InputError("ewc: lambda must be >= 0");
    }
};

/// Empirical diagonal Fisher: mean over rows of the squared per-row gradient of
/// the reconstruction loss. Uses min(n_samples, |data|) rows drawn without
/// replacement (all rows, in order, when they fit).
inline Vector compute_fisher(const nn::Autoencoder& model, const Matrix& data, std::size_t n_samples,
                             std::uint64_t seed) {
    if (data.rows() == 0) throw InputError("compute_fisher: empty data");
    if (n_samples == 0) throw InputError("compute_fisher: n_samples must be positive");
    const auto n = static_cast<std::size_t>(data.rows());
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (n_samples < n) {
        std::mt19937_64 rng(seed);
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(n_samples);
        std::sort(idx.begin(), idx.end());
    }
    Vector f = Vector::Zero(static_cast<Eigen::Index>(model.parameter_count()));
    Matrix row(1, data.cols());
    for (auto r : idx) {
        row.row(0) = data.row(static_cast<Eigen::Index>(r));
        f += nn::loss_and_gradient(model, row).gradient.array().square().matrix();
    }
    return f / static_cast<double>(idx.size());
}

/// sum_k lambda/2 * F_k * (theta_k - anchor_k)^2; adds lambda * F * (theta - anchor) into `grad`.
inline double ewc_penalty(const Vector& theta, const EwcState& state, Vector& grad) {
    if (theta.size() != state.anchor.size() || grad.size() != theta.size())
        throw InternalError("ewc_penalty: parameter shapes disagree");
    const Vector diff = theta - state.anchor;
    const Vector weighted = state.fisher.cwiseProduct(diff);
    grad += state.lambda * weighted;
    return 0.5 * state.lambda * weighted.dot(diff);
}

inline double ewc_penalty(const Vector& theta, const EwcState& state) {
    Vector g = Vector::Zero(theta.size());
    return ewc_penalty(theta, state, g);
}

}  // namespace contaudit::strategies

#endif  // CONTAUDIT_STRATEGIES_EWC_HPP
