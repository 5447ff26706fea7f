#include "lformer/train.hpp"

#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <thread>

#include "lformer/model_io.hpp"

namespace fs = std::filesystem;

namespace lformer::train {

namespace {

template <typename T>
void accumulate_items(const model::LFormerModel<T>& m, const std::vector<TrainItem<T>>& batch,
                      std::size_t lo, std::size_t hi, T inv_batch, T alpha,
                      std::vector<std::vector<T>>& grads, double& loss_sum) {
    auto params = m.parameters();
    for (std::size_t s = lo; s < hi; ++s) {
        Tape<T> tape;
        for (auto& p : params) {
            Tensor<T> handle = p.tensor;
            tape.watch(handle);
        }
        Tensor<T> loss =
            model::loss_forward(m, batch[s].ms_up, batch[s].pan, batch[s].gt, alpha);
        const double lv = static_cast<double>(loss.item());
        if (!std::isfinite(lv))
            throw NumericError("train_step: non-finite loss on sample " + std::to_string(s));
        loss_sum += lv;
        ops::backward(ops::scale(loss, inv_batch));
        for (std::size_t i = 0; i < params.size(); ++i) {
            if (!params[i].tensor.has_grad()) continue;
            const auto g = params[i].tensor.grad();
            auto& acc = grads[i];
            for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += g[j];
        }
        tape.clear();
    }
}

}  // namespace

template <typename T>
T train_step(model::LFormerModel<T>& m, const std::vector<TrainItem<T>>& batch,
             AdamState<T>& state, const AdamConfig& cfg, T alpha, int workers) {
    if (batch.empty()) throw ConfigError("train_step: empty batch");
    auto params = m.parameters();
    if (state.m.size() != params.size()) init_adam(state, params);

    std::vector<std::vector<T>> grads(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) grads[i].assign(params[i].tensor.numel(), T(0));
    double loss_sum = 0;
    const T inv_batch = T(1) / static_cast<T>(batch.size());
    // per-op finite guards are debug machinery; training relies on the
    // explicit per-sample loss check below
    FiniteGuardScope guard(false);

    if (workers <= 1 || batch.size() == 1) {
        accumulate_items(m, batch, 0, batch.size(), inv_batch, alpha, grads, loss_sum);
    } else {
        // Workers parallelize across samples, so the kernels run serially to
        // avoid oversubscription. Partial gradients reduce in worker order.
        kernels::ExecScope scope(kernels::Exec::serial);
        const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(workers), batch.size());
        std::vector<std::vector<std::vector<T>>> wgrads(w, grads);
        std::vector<double> wloss(w, 0.0);
        std::vector<std::exception_ptr> errors(w);
        std::vector<model::LFormerModel<T>> wmodels;
        for (std::size_t i = 0; i < w; ++i) wmodels.push_back(m.alias());
        std::vector<std::thread> threads;
        const std::size_t per = (batch.size() + w - 1) / w;
        for (std::size_t i = 0; i < w; ++i) {
            const std::size_t lo = i * per;
            const std::size_t hi = std::min(batch.size(), lo + per);
            threads.emplace_back([&, i, lo, hi]() {
                try {
                    if (lo < hi)
                        accumulate_items(wmodels[i], batch, lo, hi, inv_batch, alpha, wgrads[i],
                                         wloss[i]);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            });
        }
        for (auto& t : threads) t.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
        for (std::size_t i = 0; i < w; ++i) {
            loss_sum += wloss[i];
            for (std::size_t p = 0; p < grads.size(); ++p)
                for (std::size_t j = 0; j < grads[p].size(); ++j) grads[p][j] += wgrads[i][p][j];
        }
    }

    state.step += 1;
    for (std::size_t i = 0; i < params.size(); ++i) {
        adam_update(params[i].tensor.raw_data(), std::span<const T>(grads[i]),
                    std::span<T>(state.m[i]), std::span<T>(state.v[i]), state.step, cfg);
    }
    return static_cast<T>(loss_sum / static_cast<double>(batch.size()));
}

template float train_step<float>(model::LFormerModel<float>&, const std::vector<TrainItem<float>>&,
                                 AdamState<float>&, const AdamConfig&, float, int);
template double train_step<double>(model::LFormerModel<double>&,
                                   const std::vector<TrainItem<double>>&, AdamState<double>&,
                                   const AdamConfig&, double, int);

double full_set_loss(const model::LFormerModel<float>& m,
                     const std::vector<TrainItem<float>>& items, float alpha) {
    double total = 0;
    for (const auto& it : items)
        total += static_cast<double>(model::loss_forward(m, it.ms_up, it.pan, it.gt, alpha).item());
    return total / static_cast<double>(items.size());
}

TrainResult run_training(model::LFormerModel<float>& m, const std::vector<TrainItem<float>>& items,
                         const TrainOptions& opt, const std::string& out_dir,
                         AdamState<float>& state, std::int64_t start_step) {
    if (items.empty()) throw DataError("run_training: no training samples");
    if (state.m.size() != m.parameters().size()) {
        const std::int64_t resumed_step = state.step;
        init_adam(state, m.parameters());
        state.step = resumed_step;
    }
    TrainResult result;
    std::ofstream loss_csv;
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        loss_csv.open(out_dir + "/loss.csv", start_step == 0 ? std::ios::trunc : std::ios::app);
        if (!loss_csv) throw DataError("cannot open " + out_dir + "/loss.csv");
    }

    if (start_step == 0) {
        result.initial_loss = full_set_loss(m, items, static_cast<float>(opt.alpha));
        if (loss_csv.is_open())
            loss_csv << 0 << "," << result.initial_loss << "," << opt.adam.lr << "\n" << std::flush;
    }

    auto checkpoint = [&](std::int64_t step) {
        if (out_dir.empty()) return;
        const std::string dir = out_dir + "/ckpt_step_" + std::to_string(step);
        io::save_checkpoint(dir, m, &state, step);
        std::ofstream latest(out_dir + "/latest", std::ios::trunc);
        latest << "ckpt_step_" << step << "\n";
    };
    if (start_step == 0 && opt.steps == 0) checkpoint(0);

    AdamConfig adam = opt.adam;
    for (std::int64_t step = start_step; step < opt.steps; ++step) {
        adam.lr = scheduled_lr(opt.adam.lr, step, opt.decay_steps, opt.decay_factor);
        std::vector<TrainItem<float>> batch;
        for (std::size_t slot = 0; slot < opt.batch; ++slot)
            batch.push_back(items[batch_index(opt.seed, step, slot, items.size())]);
        const float loss = train_step(m, batch, state, adam, static_cast<float>(opt.alpha),
                                      opt.workers);
        result.batch_losses.push_back(loss);
        if (loss_csv.is_open())
            loss_csv << (step + 1) << "," << loss << "," << adam.lr << "\n" << std::flush;
        const bool last = step + 1 == opt.steps;
        if (last || (opt.checkpoint_every > 0 && (step + 1) % opt.checkpoint_every == 0))
            checkpoint(step + 1);
    }
    result.final_loss = full_set_loss(m, items, static_cast<float>(opt.alpha));
    return result;
}

}  // namespace lformer::train
