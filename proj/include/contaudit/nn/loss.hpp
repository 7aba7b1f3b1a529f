#ifndef CONTAUDIT_NN_LOSS_HPP
#define CONTAUDIT_NN_LOSS_HPP

#include "contaudit/nn/autoencoder.hpp"

#include <algorithm>
#include <cmath>

namespace contaudit::nn {

inline constexpr double kClampEps = 1e-7;

struct BceResult {
    Vector per_row;  // mean over dimensions of each row
    double mean = 0.0;
};

/// Binary cross-entropy, averaged over dimensions per row and then over rows.
/// Predictions are clamped to [kClampEps, 1 - kClampEps] before the logs.
inline BceResult bce_loss(const Matrix& reconstruction, const Matrix& target) {
    if (reconstruction.rows() != target.rows() || reconstruction.cols() != target.cols())
        throw InputError("bce_loss: reconstruction and target shapes differ");
    if (reconstruction.cols() == 0) throw InputError("bce_loss: zero-width rows");
    const Eigen::Index rows = reconstruction.rows();
    const Eigen::Index cols = reconstruction.cols();
    BceResult out;
    out.per_row.resize(rows);
    for (Eigen::Index i = 0; i < rows; ++i) {
        double acc = 0.0;
        for (Eigen::Index j = 0; j < cols; ++j) {
            const double r = std::clamp(reconstruction(i, j), kClampEps, 1.0 - kClampEps);
            const double t = target(i, j);
            acc -= t * std::log(r) + (1.0 - t) * std::log(1.0 - r);
        }
        out.per_row[i] = acc / static_cast<double>(cols);
    }
    out.mean = rows > 0 ? out.per_row.mean() : 0.0;
    return out;
}

/// Anomaly score of a single encoded entry.
inline double reconstruction_error(const Autoencoder& model, const RowVector& entry) {
    if (static_cast<std::size_t>(entry.size()) != model.input_dim())
        throw InputError("entry length does not match model input_dim");
    Matrix batch = entry;
    return bce_loss(reconstruct(model, batch), batch).per_row[0];
}

/// Per-row anomaly scores of a batch; identical to scoring each row alone.
inline Vector reconstruction_errors(const Autoencoder& model, const Matrix& rows) {
    if (rows.rows() == 0) return Vector(0);
    return bce_loss(reconstruct(model, rows), rows).per_row;
}

/// Gradient of the batch-mean BCE w.r.t. every parameter, flat in the model's layout.
inline Vector backward(const Autoencoder& model, const ForwardCache& cache, const Matrix& target) {
    if (cache.revision != model.revision() || cache.pre_activations.size() != model.layer_count() ||
        cache.inputs.size() != model.layer_count() + 1)
        throw InternalError("backward: forward cache is stale or from another model");
    const Matrix& out = cache.output();
    if (out.rows() != target.rows() || out.cols() != target.cols())
        throw InputError("backward: target shape does not match the cached batch");

    const double scale = 1.0 / static_cast<double>(out.rows() * out.cols());
    // Sigmoid output with BCE: dL/dz = (r - t) / (B d); zero where the clamp is active.
    Matrix delta(out.rows(), out.cols());
    for (Eigen::Index i = 0; i < out.size(); ++i) {
        const double r = out.data()[i];
        const bool clamped = r < kClampEps || r > 1.0 - kClampEps;
        delta.data()[i] = clamped ? 0.0 : (r - target.data()[i]) * scale;
    }
    if (model.activation(model.layer_count() - 1).kind != ActivationKind::sigmoid)
        throw InternalError("backward assumes a sigmoid output layer");

    Vector grad = Vector::Zero(static_cast<Eigen::Index>(model.parameter_count()));
    for (std::size_t l = model.layer_count(); l-- > 0;) {
        const auto& s = model.slots()[l];
        WeightsMap gw(grad.data() + s.weight_offset, static_cast<Eigen::Index>(s.out),
                      static_cast<Eigen::Index>(s.in));
        BiasMap gb(grad.data() + s.bias_offset, static_cast<Eigen::Index>(s.out));
        gw.noalias() = delta.transpose() * cache.inputs[l];
        gb = delta.colwise().sum().transpose();
        if (l == 0) break;
        Matrix upstream = delta * model.layer(l).weights;
        const Matrix& z = cache.pre_activations[l - 1];
        const Matrix& a = cache.inputs[l];
        const Activation& act = model.activation(l - 1);
        for (Eigen::Index i = 0; i < upstream.size(); ++i)
            upstream.data()[i] *= act.derivative(z.data()[i], a.data()[i]);
        delta = std::move(upstream);
    }
    return grad;
}

struct LossAndGradient {
    double loss = 0.0;
    Vector gradient;
};

inline LossAndGradient loss_and_gradient(const Autoencoder& model, const Matrix& batch) {
    auto cache = forward(model, batch);
    LossAndGradient out;
    out.loss = bce_loss(cache.output(), batch).mean;
    out.gradient = backward(model, cache, batch);
    return out;
}

}  // namespace contaudit::nn

#endif  // CONTAUDIT_NN_LOSS_HPP
