#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lformer/model.hpp"

namespace lformer::train {

struct AdamConfig {
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.1;  // decoupled, scaled by lr
};

template <typename T>
struct AdamState {
    std::vector<std::vector<T>> m;  // first moment, one buffer per parameter
    std::vector<std::vector<T>> v;  // second moment
    std::int64_t step = 0;
};

template <typename T>
void init_adam(AdamState<T>& state, const std::vector<model::NamedParam<T>>& params) {
    state.m.clear();
    state.v.clear();
    for (const auto& p : params) {
        state.m.emplace_back(p.tensor.numel(), T(0));
        state.v.emplace_back(p.tensor.numel(), T(0));
    }
    state.step = 0;
}

template <typename T>
struct TrainItem {
    Tensor<T> ms_up, pan, gt;
};

// Bias-corrected Adam with decoupled weight decay over one parameter buffer.
// step is the 1-based update count; moments are computed in double.
template <typename T>
void adam_update(std::span<T> p, std::span<const T> g, std::span<T> m, std::span<T> v,
                 std::int64_t step, const AdamConfig& cfg) {
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    for (std::size_t j = 0; j < p.size(); ++j) {
        const double gj = static_cast<double>(g[j]);
        const double mj = cfg.beta1 * static_cast<double>(m[j]) + (1.0 - cfg.beta1) * gj;
        const double vj = cfg.beta2 * static_cast<double>(v[j]) + (1.0 - cfg.beta2) * gj * gj;
        m[j] = static_cast<T>(mj);
        v[j] = static_cast<T>(vj);
        const double update = cfg.lr * (mj / bc1 / (std::sqrt(vj / bc2) + cfg.eps) +
                                        cfg.weight_decay * static_cast<double>(p[j]));
        p[j] = static_cast<T>(static_cast<double>(p[j]) - update);
    }
}

// One optimizer step over a batch: per-sample tapes, gradients accumulated in
// sample order (split across workers and reduced in worker-index order when
// workers > 1), then a bias-corrected Adam update with decoupled weight decay.
// Returns the mean pre-update batch loss.
template <typename T>
T train_step(model::LFormerModel<T>& m, const std::vector<TrainItem<T>>& batch,
             AdamState<T>& state, const AdamConfig& cfg, T alpha, int workers = 1);

// Stateless with-replacement batch sampling; a pure function of (seed, step,
// slot) so resumed runs draw identical batches.
inline std::size_t batch_index(std::uint64_t seed, std::int64_t step, std::size_t slot,
                               std::size_t n) {
    return static_cast<std::size_t>(
        derive_seed(seed, 0x42a7c15ULL + static_cast<std::uint64_t>(step) * 65537ULL + slot) % n);
}

// Step-decay schedule: lr * decay_factor^(step / decay_steps); decay_steps 0
// disables decay.
inline double scheduled_lr(double base, std::int64_t step, std::int64_t decay_steps,
                           double decay_factor) {
    if (decay_steps <= 0) return base;
    double lr = base;
    for (std::int64_t s = decay_steps; s <= step; s += decay_steps) lr *= decay_factor;
    return lr;
}

struct TrainOptions {
    AdamConfig adam;
    double alpha = 0.1;
    std::size_t batch = 32;
    std::int64_t steps = 0;
    std::int64_t decay_steps = 0;
    double decay_factor = 0.1;
    std::int64_t checkpoint_every = 100;
    int workers = 1;
    std::uint64_t seed = 0;
};

struct TrainResult {
    double initial_loss = 0;  // mean loss over the full train set before step 1
    double final_loss = 0;    // same measure after the last step
    std::vector<double> batch_losses;
};

double full_set_loss(const model::LFormerModel<float>& m,
                     const std::vector<TrainItem<float>>& items, float alpha);

// Runs steps [start_step, opt.steps). With a non-empty out_dir, appends to
// <out>/loss.csv (row 0 is the initial full-set loss) and checkpoints every
// checkpoint_every steps plus once at the end. Aborts on non-finite loss with
// the last checkpoint left on disk.
TrainResult run_training(model::LFormerModel<float>& m,
                         const std::vector<TrainItem<float>>& items, const TrainOptions& opt,
                         const std::string& out_dir, AdamState<float>& state,
                         std::int64_t start_step = 0);

}  // namespace lformer::train
