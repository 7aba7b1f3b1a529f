#ifndef CONTAUDIT_NN_TRAIN_HPP
#define CONTAUDIT_NN_TRAIN_HPP

#include "contaudit/nn/adam.hpp"
#include "contaudit/nn/loss.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <vector>

namespace contaudit::nn {

struct TrainConfig {
    std::size_t max_epochs = 500;
    std::size_t batch_size = 128;
    std::size_t early_stop_patience = 10;
    double early_stop_rel_tol = 1e-4;
    std::uint64_t seed = 0;
    AdamConfig adam;
};

/// Optional extensions of the plain reconstruction objective.
struct TrainHooks {
    /// Adds the regulariser gradient into `grad` and returns the penalty value.
    std::function<double(const Vector& params, Vector& grad)> penalty;
    /// Rows concatenated onto every data batch (experience replay). nullopt = none this step.
    std::function<std::optional<Matrix>()> extra_batch;
};

struct TrainHistory {
    std::vector<double> epoch_loss;     // mean objective (BCE + penalty) per epoch
    std::vector<double> epoch_penalty;  // mean penalty per epoch
    std::size_t steps = 0;
    bool stopped_early = false;
    std::uint64_t adam_t_at_start = 0;
};

inline Matrix gather_rows(const Matrix& data, std::span<const std::size_t> idx) {
    Matrix out(static_cast<Eigen::Index>(idx.size()), data.cols());
    for (std::size_t i = 0; i < idx.size(); ++i)
        out.row(static_cast<Eigen::Index>(i)) = data.row(static_cast<Eigen::Index>(idx[i]));
    return out;
}

inline Matrix vstack(const Matrix& top, const Matrix& bottom) {
    if (top.rows() == 0) return bottom;
    if (bottom.rows() == 0) return top;
    if (top.cols() != bottom.cols()) throw InputError("vstack: column counts differ");
    Matrix out(top.rows() + bottom.rows(), top.cols());
    out.topRows(top.rows()) = top;
    out.bottomRows(bottom.rows()) = bottom;
    return out;
}

/// True when the last `patience` epochs each improved by less than `rel_tol` (relative).
inline bool plateaued(const std::vector<double>& history, std::size_t patience, double rel_tol) {
    if (history.size() < patience + 1) return false;
    for (std::size_t k = history.size() - patience; k < history.size(); ++k) {
        const double prev = history[k - 1];
        const double rel = (prev - history[k]) / std::max(std::abs(prev), 1e-300);
        if (rel >= rel_tol) return false;
    }
    return true;
}

/// Shuffled mini-batch Adam on batch-mean BCE (+ optional penalty / replay rows).
/// A fresh optimiser state is created for every call. The shuffle of epoch e is
/// seeded from derive_seed(config.seed, "shuffle", e).
inline TrainHistory train(Autoencoder& model, const Matrix& data, const TrainConfig& config,
                          const TrainHooks& hooks = {}) {
    if (data.rows() == 0) throw InputError("train: empty data");
    check_batch(model, data);
    if (config.batch_size == 0 || config.max_epochs == 0 || config.early_stop_patience == 0)
        throw InputError("train: batch_size, max_epochs and patience must be positive");

    AdamState adam(config.adam, static_cast<Eigen::Index>(model.parameter_count()));
    TrainHistory history;
    history.adam_t_at_start = adam.t;

    const auto n = static_cast<std::size_t>(data.rows());
    std::vector<std::size_t> order(n);
    for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::mt19937_64 rng(derive_seed(config.seed, "shuffle", epoch));
        std::shuffle(order.begin(), order.end(), rng);

        double loss_sum = 0.0, penalty_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < n; start += config.batch_size) {
            const std::size_t len = std::min(config.batch_size, n - start);
            Matrix batch = gather_rows(data, std::span(order).subspan(start, len));
            if (hooks.extra_batch) {
                if (auto extra = hooks.extra_batch()) batch = vstack(batch, *extra);
            }
            auto cache = forward(model, batch);
            double loss = bce_loss(cache.output(), batch).mean;
            Vector grad = backward(model, cache, batch);
            double penalty = 0.0;
            if (hooks.penalty) penalty = hooks.penalty(model.parameters(), grad);
            adam_step(model.parameters_mut(), grad, adam);
            loss_sum += loss + penalty;
            penalty_sum += penalty;
            ++batches;
            ++history.steps;
        }
        history.epoch_loss.push_back(loss_sum / static_cast<double>(batches));
        history.epoch_penalty.push_back(penalty_sum / static_cast<double>(batches));
        log()->trace("epoch {}: loss {:.6f}", epoch + 1, history.epoch_loss.back());
        if (plateaued(history.epoch_loss, config.early_stop_patience, config.early_stop_rel_tol)) {
            history.stopped_early = true;
            break;
        }
    }
    log()->debug("train: {} epochs, {} steps, final loss {:.6f}", history.epoch_loss.size(),
                 history.steps, history.epoch_loss.back());
    return history;
}

}  // namespace contaudit::nn

#endif  // CONTAUDIT_NN_TRAIN_HPP
