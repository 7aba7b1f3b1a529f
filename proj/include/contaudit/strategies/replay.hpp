#ifndef CONTAUDIT_STRATEGIES_REPLAY_HPP
#define CONTAUDIT_STRATEGIES_REPLAY_HPP

#include "contaudit/nn/train.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <vector>

namespace contaudit::strategies {

struct ReplaySlot {
    std::size_t experience = 0;
    std::vector<std::size_t> rows_in_experience;  // provenance: row positions in that experience
    Matrix rows;
};

/// Equal per-experience quotas: after M experiences every slot holds floor(N_B / M) rows.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity = 500) : capacity_(capacity) {
        if (capacity == 0) throw InputError("replay buffer capacity must be positive");
    }

    [[nodiscard]] std::size_t capacity() const { return capacity_; }
    [[nodiscard]] const std::vector<ReplaySlot>& slots() const { return slots_; }
    [[nodiscard]] bool empty() const { return size() == 0; }

    [[nodiscard]] std::size_t size() const {
        std::size_t n = 0;
        for (const auto& s : slots_) n += static_cast<std::size_t>(s.rows.rows());
        return n;
    }

    [[nodiscard]] std::map<std::size_t, std::size_t> slot_sizes() const {
        std::map<std::size_t, std::size_t> out;
        for (const auto& s : slots_) out[s.experience] = static_cast<std::size_t>(s.rows.rows());
        return out;
    }

    /// Truncates existing slots to the new quota and stores a uniform sample of
    /// `rows` for `experience`. Returns false when the experience was smaller than the quota.
    bool update(const Matrix& rows, std::size_t experience, std::uint64_t seed) {
        const std::size_t seen = slots_.size() + 1;
        if (seen > capacity_) throw InputError("replay buffer: more experiences than capacity");
        const std::size_t q = capacity_ / seen;
        for (auto& slot : slots_) {
            if (static_cast<std::size_t>(slot.rows.rows()) <= q) continue;
            std::mt19937_64 rng(derive_seed(seed, "truncate", slot.experience));
            const auto keep = pick(static_cast<std::size_t>(slot.rows.rows()), q, rng);
            std::vector<std::size_t> prov;
            for (auto k : keep) prov.push_back(slot.rows_in_experience[k]);
            slot.rows = nn::gather_rows(slot.rows, keep);
            slot.rows_in_experience = std::move(prov);
        }
        std::mt19937_64 rng(derive_seed(seed, "store", experience));
        const auto n = static_cast<std::size_t>(rows.rows());
        const auto keep = pick(n, std::min(q, n), rng);
        slots_.push_back({experience, keep, nn::gather_rows(rows, keep)});
        return n >= q;
    }

    /// All stored rows, slot after slot.
    [[nodiscard]] Matrix rows() const {
        Matrix out(0, slots_.empty() ? 0 : slots_.front().rows.cols());
        for (const auto& s : slots_) out = nn::vstack(out, s.rows);
        return out;
    }

private:
    // Sorted uniform subset of size k from [0, n).
    static std::vector<std::size_t> pick(std::size_t n, std::size_t k, std::mt19937_64& rng) {
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(k);
        std::sort(idx.begin(), idx.end());
        return idx;
    }

    std::size_t capacity_;
    std::vector<ReplaySlot> slots_;
};

/// Uniform batch of min(batch_size, |buffer|) distinct buffer rows.
class ReplaySampler {
public:
    ReplaySampler(Matrix rows, std::size_t batch_size, std::uint64_t seed)
        : rows_(std::move(rows)), batch_(std::min(batch_size, static_cast<std::size_t>(rows_.rows()))), rng_(seed),
          idx_(static_cast<std::size_t>(rows_.rows())) {
        std::iota(idx_.begin(), idx_.end(), std::size_t{0});
    }

    std::optional<Matrix> operator()() {
        if (batch_ == 0) return std::nullopt;
        // partial Fisher-Yates over the first batch_ positions
        for (std::size_t i = 0; i < batch_; ++i) {
            std::uniform_int_distribution<std::size_t> d(i, idx_.size() - 1);
            std::swap(idx_[i], idx_[d(rng_)]);
        }
        return nn::gather_rows(rows_, std::span(idx_).first(batch_));
    }

    [[nodiscard]] const Matrix& rows() const { return rows_; }

private:
    Matrix rows_;
    std::size_t batch_;
    std::mt19937_64 rng_;
    std::vector<std::size_t> idx_;
};

}  // namespace contaudit::strategies

#endif  // CONTAUDIT_STRATEGIES_REPLAY_HPP
