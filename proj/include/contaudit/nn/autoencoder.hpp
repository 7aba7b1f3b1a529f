#ifndef CONTAUDIT_NN_AUTOENCODER_HPP
#define CONTAUDIT_NN_AUTOENCODER_HPP

#include "contaudit/common.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace contaudit::nn {

enum class ActivationKind : std::uint8_t { leaky_relu, tanh, sigmoid };

inline std::string to_string(ActivationKind k) {
    switch (k) {
        case ActivationKind::leaky_relu: return "leaky_relu";
        case ActivationKind::tanh: return "tanh";
        case ActivationKind::sigmoid: return "sigmoid";
    }
    return "?";
}

inline ActivationKind activation_from_string(const std::string& s) {
    if (s == "leaky_relu") return ActivationKind::leaky_relu;
    if (s == "tanh") return ActivationKind::tanh;
    if (s == "sigmoid") return ActivationKind::sigmoid;
    throw InputError("unknown activation '" + s + "'");
}

struct Activation {
    ActivationKind kind = ActivationKind::leaky_relu;
    double alpha = 0.0;  // leaky_relu negative slope, in (0, 1)

    static Activation leaky(double a) {
        if (!(a > 0.0 && a < 1.0)) throw InputError("leaky_relu alpha must lie in (0, 1)");
        return {ActivationKind::leaky_relu, a};
    }
    static Activation tanh() { return {ActivationKind::tanh, 0.0}; }
    static Activation sigmoid() { return {ActivationKind::sigmoid, 0.0}; }

    [[nodiscard]] double apply(double z) const {
        switch (kind) {
            case ActivationKind::leaky_relu: return z > 0.0 ? z : alpha * z;
            case ActivationKind::tanh: return std::tanh(z);
            case ActivationKind::sigmoid: {
                // Keep the output strictly inside (0, 1) even when exp saturates.
                const double s = 1.0 / (1.0 + std::exp(-z));
                return std::clamp(s, std::numeric_limits<double>::min(),
                                  1.0 - std::numeric_limits<double>::epsilon() / 2);
            }
        }
        return z;
    }

    /// d(activation)/dz given both pre-activation z and output a.
    [[nodiscard]] double derivative(double z, double a) const {
        switch (kind) {
            case ActivationKind::leaky_relu: return z > 0.0 ? 1.0 : alpha;
            case ActivationKind::tanh: return 1.0 - a * a;
            case ActivationKind::sigmoid: return a * (1.0 - a);
        }
        return 1.0;
    }

    friend bool operator==(const Activation&, const Activation&) = default;
};

/// Layer widths of a symmetric dense autoencoder. The decoder's input is the
/// bottleneck (last encoder width); `decoder_widths` lists the widths after it.
struct Architecture {
    std::size_t input_dim = 0;
    std::vector<std::size_t> encoder_widths;
    std::vector<std::size_t> decoder_widths;
    double leaky_alpha = 0.4;

    /// 128-64-32-16-8-4-2 encoder, 4-8-16-32-64-128 decoder, then input_dim.
    static Architecture audit_default(std::size_t input_dim) {
        return {input_dim, {128, 64, 32, 16, 8, 4, 2}, {4, 8, 16, 32, 64, 128}, 0.4};
    }

    /// Full chain of widths: input, encoder..., decoder..., input.
    [[nodiscard]] std::vector<std::size_t> widths() const {
        std::vector<std::size_t> w{input_dim};
        w.insert(w.end(), encoder_widths.begin(), encoder_widths.end());
        w.insert(w.end(), decoder_widths.begin(), decoder_widths.end());
        w.push_back(input_dim);
        return w;
    }

    [[nodiscard]] std::size_t layer_count() const { return widths().size() - 1; }

    [[nodiscard]] std::size_t parameter_count() const {
        const auto w = widths();
        std::size_t n = 0;
        for (std::size_t i = 0; i + 1 < w.size(); ++i) n += w[i] * w[i + 1] + w[i + 1];
        return n;
    }

    void validate() const {
        if (input_dim == 0) throw InputError("input_dim must be positive");
        if (encoder_widths.empty()) throw InputError("encoder needs at least one layer");
        for (auto w : widths())
            if (w == 0) throw InputError("layer widths must be positive");
        (void)Activation::leaky(leaky_alpha);
    }

    friend bool operator==(const Architecture&, const Architecture&) = default;
};

/// Uniform Glorot initialisation, returned as a [fan_out x fan_in] matrix.
inline Matrix init_glorot(std::size_t fan_in, std::size_t fan_out, std::uint64_t seed) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-limit, limit);
    Matrix w(static_cast<Eigen::Index>(fan_out), static_cast<Eigen::Index>(fan_in));
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
    return w;
}

using WeightsMap = Eigen::Map<Matrix>;
using ConstWeightsMap = Eigen::Map<const Matrix>;
using BiasMap = Eigen::Map<Vector>;
using ConstBiasMap = Eigen::Map<const Vector>;

/// Read-only view of one dense layer inside an Autoencoder's parameter buffer.
struct DenseLayer {
    ConstWeightsMap weights;  // [out x in]
    ConstBiasMap bias;        // [out]
    Activation activation;
};

struct LayerSlot {
    std::size_t in = 0, out = 0;
    std::size_t weight_offset = 0, bias_offset = 0;
};

/// Per-layer inputs and pre-activations of one forward call.
struct ForwardCache {
    std::vector<Matrix> inputs;          // inputs[l] feeds layer l; inputs.back() is the output
    std::vector<Matrix> pre_activations; // z_l
    std::uint64_t revision = 0;
    [[nodiscard]] const Matrix& output() const { return inputs.back(); }
};

/// Dense autoencoder. All weights and biases live in one flat buffer
/// (per layer: row-major weights then bias), so optimisers and regularisers
/// operate on plain vectors of the same layout.
class Autoencoder {
public:
    Autoencoder() = default;

    /// Zero-initialised network.
    explicit Autoencoder(Architecture arch) : arch_(std::move(arch)) {
        arch_.validate();
        const auto w = arch_.widths();
        std::size_t offset = 0;
        const std::size_t layers = w.size() - 1;
        const std::size_t encoder_layers = arch_.encoder_widths.size();
        for (std::size_t l = 0; l < layers; ++l) {
            LayerSlot s{w[l], w[l + 1], offset, offset + w[l] * w[l + 1]};
            offset = s.bias_offset + s.out;
            slots_.push_back(s);
            if (l + 1 == layers)
                acts_.push_back(Activation::sigmoid());
            else if (l + 1 == encoder_layers)
                acts_.push_back(Activation::tanh());
            else
                acts_.push_back(Activation::leaky(arch_.leaky_alpha));
        }
        theta_ = Vector::Zero(static_cast<Eigen::Index>(offset));
    }

    /// Glorot-uniform weights, zero biases; layer l uses derive_seed(seed, "glorot", l).
    static Autoencoder random(const Architecture& arch, std::uint64_t seed) {
        Autoencoder m(arch);
        for (std::size_t l = 0; l < m.layer_count(); ++l) {
            const auto& s = m.slots_[l];
            m.weights_mut(l) = init_glorot(s.in, s.out, derive_seed(seed, "glorot", l));
        }
        return m;
    }

    [[nodiscard]] const Architecture& architecture() const { return arch_; }
    [[nodiscard]] std::size_t input_dim() const { return arch_.input_dim; }
    [[nodiscard]] std::size_t layer_count() const { return slots_.size(); }
    [[nodiscard]] std::size_t encoder_layer_count() const { return arch_.encoder_widths.size(); }
    [[nodiscard]] std::size_t parameter_count() const { return static_cast<std::size_t>(theta_.size()); }
    [[nodiscard]] const std::vector<LayerSlot>& slots() const { return slots_; }
    [[nodiscard]] const Activation& activation(std::size_t l) const { return acts_.at(l); }

    [[nodiscard]] const Vector& parameters() const { return theta_; }
    /// Mutable access bumps the revision so outstanding forward caches become stale.
    Vector& parameters_mut() {
        ++revision_;
        return theta_;
    }
    [[nodiscard]] std::uint64_t revision() const { return revision_; }

    [[nodiscard]] DenseLayer layer(std::size_t l) const {
        const auto& s = slots_.at(l);
        return {ConstWeightsMap(theta_.data() + s.weight_offset, static_cast<Eigen::Index>(s.out),
                                static_cast<Eigen::Index>(s.in)),
                ConstBiasMap(theta_.data() + s.bias_offset, static_cast<Eigen::Index>(s.out)),
                acts_[l]};
    }

    WeightsMap weights_mut(std::size_t l) {
        const auto& s = slots_.at(l);
        ++revision_;
        return {theta_.data() + s.weight_offset, static_cast<Eigen::Index>(s.out),
                static_cast<Eigen::Index>(s.in)};
    }
    BiasMap bias_mut(std::size_t l) {
        const auto& s = slots_.at(l);
        ++revision_;
        return {theta_.data() + s.bias_offset, static_cast<Eigen::Index>(s.out)};
    }

    /// Bitwise parameter and structure equality (revision is ignored).
    friend bool operator==(const Autoencoder& a, const Autoencoder& b) {
        if (!(a.arch_ == b.arch_) || a.acts_ != b.acts_ || a.theta_.size() != b.theta_.size())
            return false;
        return std::equal(a.theta_.data(), a.theta_.data() + a.theta_.size(), b.theta_.data(),
                          [](double x, double y) {
                              return std::bit_cast<std::uint64_t>(x) == std::bit_cast<std::uint64_t>(y);
                          });
    }

    /// Restore from serialised parts; used by the checkpoint reader.
    static Autoencoder from_parts(const Architecture& arch, const std::vector<Activation>& acts,
                                  Vector theta) {
        Autoencoder m(arch);
        if (acts.size() != m.acts_.size()) throw InputError("activation count does not match architecture");
        if (theta.size() != m.theta_.size()) throw InputError("parameter count does not match architecture");
        m.acts_ = acts;
        m.theta_ = std::move(theta);
        return m;
    }

private:
    Architecture arch_;
    std::vector<LayerSlot> slots_;
    std::vector<Activation> acts_;
    Vector theta_;
    std::uint64_t revision_ = 0;
};

inline void check_batch(const Autoencoder& model, const Matrix& batch) {
    if (static_cast<std::size_t>(batch.cols()) != model.input_dim())
        throw InputError("batch has " + std::to_string(batch.cols()) + " columns, model expects " +
                         std::to_string(model.input_dim()));
}

/// Forward pass keeping every layer's input and pre-activation for backward().
inline ForwardCache forward(const Autoencoder& model, const Matrix& batch) {
    check_batch(model, batch);
    ForwardCache cache;
    cache.revision = model.revision();
    cache.inputs.reserve(model.layer_count() + 1);
    cache.pre_activations.reserve(model.layer_count());
    cache.inputs.push_back(batch);
    for (std::size_t l = 0; l < model.layer_count(); ++l) {
        const auto layer = model.layer(l);
        Matrix z = cache.inputs.back() * layer.weights.transpose();
        z.rowwise() += layer.bias.transpose();
        Matrix a = z.unaryExpr([&](double v) { return layer.activation.apply(v); });
        cache.pre_activations.push_back(std::move(z));
        cache.inputs.push_back(std::move(a));
    }
    return cache;
}

/// Reconstruction only.
inline Matrix reconstruct(const Autoencoder& model, const Matrix& batch) {
    check_batch(model, batch);
    Matrix a = batch;
    for (std::size_t l = 0; l < model.layer_count(); ++l) {
        const auto layer = model.layer(l);
        Matrix z = a * layer.weights.transpose();
        z.rowwise() += layer.bias.transpose();
        a = z.unaryExpr([&](double v) { return layer.activation.apply(v); });
    }
    return a;
}

}  // namespace contaudit::nn

#endif  // CONTAUDIT_NN_AUTOENCODER_HPP
