// Acceptance suite: one pass/fail line per criterion.
//
//  1. finite-difference gradient checks for every differentiable op and the
//     end-to-end loss
//  2. attention-map invariants over random configurations
//  3. metric implementations match independent naive oracles
//  4. ablation structure: parameter/FLOP relations between variants
//  5. kernel-size sweep changes parameters and FLOPs by the exact increments
//  6. toy training beats the bicubic floor and is bit-reproducible
//  7. tensor-container round trips and corruption handling
//  8. forcing the shared-map rule on the trained model raises its loss

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>
#include <unistd.h>

#include "lformer/data.hpp"
#include "lformer/metrics.hpp"
#include "lformer/model_io.hpp"
#include "lformer/profiler.hpp"
#include "lformer/train.hpp"
#include "support/checkers.hpp"
#include "support/metric_oracles.hpp"

using namespace lformer;
using testsup::grad_check;
using testsup::rand_tensor;

namespace {

int g_checks = 0;
int g_failures = 0;
std::vector<std::string> g_notes;

void expect(bool ok, const std::string& what) {
    ++g_checks;
    if (!ok) {
        ++g_failures;
        g_notes.push_back(what);
        std::printf("      FAILED: %s\n", what.c_str());
    }
}

struct SharedState {
    model::LFormerModel<float> trained;       // from criterion 6
    std::vector<train::TrainItem<float>> train_items;
    bool trained_ready = false;
};
SharedState g_state;

// ---------------------------------------------------------------------------
// 1. gradient suite
// ---------------------------------------------------------------------------

bool criterion_gradients() {
    Rng rng(1001);
    double worst = 0;
    auto track = [&](double err, const char* name) {
        worst = std::max(worst, err);
        expect(err <= 1e-5, std::string(name) + " gradient rel err " + std::to_string(err));
    };

    {
        auto a = rand_tensor<double>({3, 4}, rng);
        auto b = rand_tensor<double>({4, 5}, rng);
        auto m = rand_tensor<double>({3, 5}, rng);
        track(grad_check({a, b}, [&] { return ops::sum(ops::mul(ops::matmul(a, b), m)); }),
              "matmul");
    }
    {
        auto a = rand_tensor<double>({3, 4}, rng);
        auto b = rand_tensor<double>({5, 4}, rng);
        auto m = rand_tensor<double>({3, 5}, rng);
        track(grad_check({a, b}, [&] { return ops::sum(ops::mul(ops::matmul_nt(a, b), m)); }),
              "matmul_nt");
    }
    {
        auto x = rand_tensor<double>({4, 6}, rng);
        auto m = rand_tensor<double>({4, 6}, rng);
        track(grad_check({x}, [&] { return ops::sum(ops::mul(ops::softmax(x, 1), m)); }),
              "softmax");
    }
    {
        auto x = rand_tensor<double>({5, 4, 2}, rng);
        auto w = rand_tensor<double>({3, 3, 2, 3}, rng);
        auto b = rand_tensor<double>({3}, rng);
        auto m = rand_tensor<double>({5, 4, 3}, rng);
        track(grad_check({x, w, b}, [&] { return ops::sum(ops::mul(ops::conv2d(x, w, b), m)); }),
              "conv2d");
    }
    {
        auto x = rand_tensor<double>({4, 9}, rng);
        auto k = rand_tensor<double>({1, 5}, rng);
        auto m = rand_tensor<double>({4, 9}, rng);
        track(grad_check({x, k}, [&] { return ops::sum(ops::mul(ops::conv1d_rows(x, k), m)); }),
              "conv1d_rows");
    }
    for (ops::Pad pad : {ops::Pad::valid, ops::Pad::zero, ops::Pad::clamp}) {
        auto x = rand_tensor<double>({5, 5, 2}, rng);
        auto w = rand_tensor<double>({3, 3, 2}, rng);
        const std::size_t o = pad == ops::Pad::valid ? 3 : 5;
        auto m = rand_tensor<double>({o, o, 2}, rng);
        track(grad_check({x, w},
                         [&] { return ops::sum(ops::mul(ops::depthwise_conv2d(x, w, pad), m)); }),
              "depthwise_conv2d");
    }
    {
        auto a = rand_tensor<double>({3, 4}, rng);
        auto b = rand_tensor<double>({3, 4}, rng, 0.5, 2.0);
        auto v = rand_tensor<double>({4}, rng);
        auto m = rand_tensor<double>({3, 4}, rng);
        auto wsum = [&](Tensor<double> t) { return ops::sum(ops::mul(t, m)); };
        track(grad_check({a, b}, [&] { return wsum(ops::add(a, b)); }), "add");
        track(grad_check({a, b}, [&] { return wsum(ops::sub(a, b)); }), "sub");
        track(grad_check({a, b}, [&] { return wsum(ops::mul(a, b)); }), "mul");
        track(grad_check({a, b}, [&] { return wsum(ops::div(a, b)); }), "div");
        track(grad_check({a}, [&] { return wsum(ops::relu(a)); }), "relu");
        track(grad_check({a}, [&] { return wsum(ops::abs(a)); }), "abs");
        track(grad_check({b}, [&] { return wsum(ops::sqrt(b)); }), "sqrt");
        track(grad_check({a}, [&] { return wsum(ops::scale(a, -1.75)); }), "scale");
        track(grad_check({a}, [&] { return wsum(ops::add_scalar(a, 0.4)); }), "add_scalar");
        track(grad_check({a, v}, [&] { return wsum(ops::add_rowvec(a, v)); }), "add_rowvec");
        track(grad_check({a}, [&] { return ops::mean(ops::mul(a, m)); }), "mean");
        track(grad_check({a}, [&] { return ops::sum(ops::mul(ops::reshape(a, {12}), ops::reshape(m, {12}))); }),
              "reshape");
        track(grad_check({a}, [&] { return ops::sum(ops::mul(ops::transpose(a), ops::transpose(m))); }),
              "transpose");
        track(grad_check({a, b}, [&] {
                  auto cat = ops::concat<double>({a, b}, 1);
                  auto mm = ops::concat<double>({m, m}, 1);
                  return ops::sum(ops::mul(ops::slice(cat, 1, 2, 5), ops::slice(mm, 1, 2, 5)));
              }),
              "concat/slice");
    }
    {
        auto q = rand_tensor<double>({4, 3}, rng);
        auto k = rand_tensor<double>({4, 3}, rng);
        auto v = rand_tensor<double>({4, 3}, rng);
        auto m = rand_tensor<double>({4, 3}, rng);
        track(grad_check({q, k, v}, [&] {
                  return ops::sum(ops::mul(attention::scaled_dot_attention(q, k, v).output, m));
              }),
              "scaled_dot_attention");
    }
    {
        Rng r2(1002);
        auto base = ops::softmax(rand_tensor<double>({5, 5}, r2), 1).detach();
        auto kernel = rand_tensor<double>({1, 3}, r2);
        auto m = rand_tensor<double>({5, 5}, r2);
        track(grad_check({kernel}, [&] {
                  return ops::sum(ops::mul(attention::evolve_attention(base, kernel), m));
              }),
              "evolve_attention");
    }
    {
        auto x = rand_tensor<double>({12, 12, 1}, rng, 0.05, 0.95);
        auto y = rand_tensor<double>({12, 12, 1}, rng, 0.05, 0.95);
        track(grad_check({x, y}, [&] { return metrics::ssim_loss(x, y); }), "ssim_loss");
        track(grad_check({x, y}, [&] { return metrics::l1_loss(x, y); }), "l1_loss");
    }
    {
        auto x = rand_tensor<double>({6, 6, 2}, rng, 0.1, 0.9);
        auto m = rand_tensor<double>({6, 6, 2}, rng);
        track(grad_check({x}, [&] { return ops::sum(ops::mul(nn::sobel_apply(x), m)); }),
              "sobel_apply");
    }

    // end-to-end: full network on an 8x8 sample, 1% of parameters against
    // central differences. The structural SSIM term needs an 11x11 window, so
    // at 8x8 the loss is its L1 term; ssim_loss is covered above.
    model::LFormerConfig cfg;
    cfg.bands = 4;
    cfg.width = 16;
    cfg.blocks = 3;
    cfg.kernel = 5;
    cfg.seed = 77;
    auto m = model::build<double>(cfg);
    Rng drng(1003);
    auto ms_up = rand_tensor<double>({8, 8, 4}, drng, 0.0, 1.0);
    auto pan = rand_tensor<double>({8, 8, 1}, drng, 0.0, 1.0);
    auto gt = rand_tensor<double>({8, 8, 4}, drng, 0.0, 1.0);
    auto loss_fn = [&] { return model::loss_forward(m, ms_up, pan, gt, 0.0); };

    auto params = m.parameters();
    std::size_t total = 0;
    for (const auto& p : params) total += p.tensor.numel();
    const std::size_t n_samples = std::max<std::size_t>(1, total / 100);

    Tape<double> tape;
    for (auto& p : params) {
        Tensor<double> h = p.tensor;
        tape.watch(h);
    }
    Tensor<double> loss = loss_fn();
    ops::backward(loss);
    std::vector<std::vector<double>> grads;
    for (auto& p : params)
        grads.emplace_back(p.tensor.has_grad()
                               ? std::vector<double>(p.tensor.grad().begin(), p.tensor.grad().end())
                               : std::vector<double>(p.tensor.numel(), 0.0));
    tape.clear();

    double worst_e2e = 0;
    Rng pick(1004);
    const double h = 1e-5;
    for (std::size_t s = 0; s < n_samples; ++s) {
        std::size_t flat = static_cast<std::size_t>(pick.uniform_int(static_cast<std::int64_t>(total)));
        std::size_t pi = 0;
        while (flat >= params[pi].tensor.numel()) {
            flat -= params[pi].tensor.numel();
            ++pi;
        }
        auto raw = params[pi].tensor.raw_data();
        const double orig = raw[flat];
        raw[flat] = orig + h;
        const double fp = loss_fn().item();
        raw[flat] = orig - h;
        const double fm = loss_fn().item();
        raw[flat] = orig;
        const double fd = (fp - fm) / (2 * h);
        const double g = grads[pi][flat];
        const double rel = std::fabs(g - fd) / std::max({std::fabs(g), std::fabs(fd), 1e-4});
        worst_e2e = std::max(worst_e2e, rel);
    }
    expect(worst_e2e <= 1e-3, "end-to-end rel err " + std::to_string(worst_e2e));
    std::printf("      op suite max rel err %.2e; end-to-end max rel err %.2e over %zu of %zu params\n",
                worst, worst_e2e, n_samples, total);
    return true;
}

// ---------------------------------------------------------------------------
// 2. attention invariants
// ---------------------------------------------------------------------------

bool criterion_attention() {
    Rng rng(2001);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t t = 2 + rng.uniform_int(9);
        const std::size_t c = 1 + rng.uniform_int(8);
        const std::size_t k = 1 + 2 * rng.uniform_int(4);

        auto fp = rand_tensor<double>({t, c}, rng, -2, 2);
        auto fm = rand_tensor<double>({t, c}, rng, -2, 2);
        auto cross = attention::cross_attention_first(fp, fm);
        expect(attention::is_row_stochastic(cross.map, 1e-5), "cross-attention map not stochastic");

        std::vector<attention::QkvProjection<double>> projs;
        for (int i = 0; i < 2; ++i)
            projs.push_back(
                attention::make_qkv<double>(c, [&] { return rand_tensor<double>({c, c}, rng); }));
        for (const auto& stage : attention::cascaded_chain_reference(fp, 2, projs))
            expect(attention::is_row_stochastic(stage.map, 1e-5), "cascaded map not stochastic");

        auto kernel = rand_tensor<double>({1, k}, rng, -2, 2);
        auto evolved = attention::evolve_attention(cross.map, kernel);
        expect(attention::is_row_stochastic(evolved, 1e-5), "evolved map not stochastic");

        auto uniform = attention::evolve_attention(cross.map, Tensor<double>::zeros({1, k}));
        const double want = 1.0 / static_cast<double>(t);
        for (double v : uniform.data())
            if (std::fabs(v - want) > 1e-6) {
                expect(false, "zero-kernel evolution missed the uniform map");
                break;
            }
    }
    return true;
}

// ---------------------------------------------------------------------------
// 3. metric-oracle equivalence
// ---------------------------------------------------------------------------

bool criterion_oracles() {
    Rng rng(3001);
    auto image = [&](std::size_t h, std::size_t w, std::size_t c) {
        return rand_tensor<double>({h, w, c}, rng, 0.05, 0.95);
    };
    auto correlated = [&](const Tensor<double>& x) {
        std::vector<double> v(x.numel());
        for (std::size_t i = 0; i < v.size(); ++i)
            v[i] = std::clamp(0.7 * x.data()[i] + 0.15 + 0.2 * (rng.uniform() - 0.5), 0.0, 1.0);
        return Tensor<double>(x.shape(), std::move(v));
    };
    constexpr double kTol = 1e-6;

    for (int trial = 0; trial < 20; ++trial) {
        {
            auto x = image(32, 32, 4);
            auto y = correlated(x);
            expect(std::fabs(metrics::sam_degrees(x, y) -
                             oracle::sam_degrees(x.data().data(), y.data().data(), 1024, 4)) < kTol,
                   "sam vs oracle");
            expect(std::fabs(metrics::ergas(x, y, 4.0) -
                             oracle::ergas(x.data().data(), y.data().data(), 1024, 4, 4.0)) < kTol,
                   "ergas vs oracle");
            expect(std::fabs(metrics::psnr(x, y) -
                             oracle::psnr(x.data().data(), y.data().data(), x.numel())) < kTol,
                   "psnr vs oracle");
        }
        {
            auto x = image(16, 16, 2);
            auto y = correlated(x);
            expect(std::fabs(metrics::ssim(x, y).item() -
                             oracle::ssim(x.data().data(), y.data().data(), 16, 16, 2)) < kTol,
                   "ssim vs oracle");
        }
        {
            auto x = image(64, 64, 1);
            auto y = correlated(x);
            expect(std::fabs(metrics::q_index(x, y, 32) -
                             oracle::q_index(x.data().data(), y.data().data(), 64, 64, 32)) < kTol,
                   "q_index vs oracle");
            // c=1 q2n degenerates to q_index
            expect(std::fabs(metrics::q2n(x, y, 32) - metrics::q_index(x, y, 32)) < kTol,
                   "q2n c=1 reduction");
        }
        {
            auto x = image(64, 64, 2);
            auto y = correlated(x);
            expect(std::fabs(metrics::q2n(x, y, 32) -
                             oracle::q2n_complex(x.data().data(), y.data().data(), 64, 64, 32)) < kTol,
                   "q2n c=2 vs complex oracle");
        }
        {
            auto x = image(48, 48, 4);
            auto y = correlated(x);
            expect(std::fabs(metrics::q2n(x, y, 32) -
                             oracle::q2n_quaternion(x.data().data(), y.data().data(), 48, 48, 32)) < kTol,
                   "q2n c=4 vs quaternion oracle");
        }
        {
            const std::size_t win = 16;
            auto fused = image(64, 64, 4);
            auto ms = image(16, 16, 4);
            auto pan = image(64, 64, 1);
            auto pan_lo = image(16, 16, 1);
            const double dl = metrics::d_lambda(fused, ms, win);
            const double ds = metrics::d_s(fused, ms, pan, pan_lo, win);
            expect(std::fabs(dl - oracle::d_lambda(fused.data().data(), 64, 64, ms.data().data(),
                                                   16, 16, 4, win)) < kTol,
                   "d_lambda vs oracle");
            expect(std::fabs(ds - oracle::d_s(fused.data().data(), 64, 64, ms.data().data(), 16,
                                              16, 4, pan.data().data(), pan_lo.data().data(),
                                              win)) < kTol,
                   "d_s vs oracle");
            expect(std::fabs(metrics::hqnr(dl, ds) - (1.0 - dl) * (1.0 - ds)) < kTol,
                   "hqnr identity");
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// 4. ablation structure
// ---------------------------------------------------------------------------

bool criterion_ablation() {
    model::LFormerConfig cfg;
    cfg.bands = 4;
    cfg.width = 32;
    cfg.blocks = 5;
    cfg.kernel = 5;

    model::LFormerConfig evolved = cfg, shared = cfg, recompute = cfg;
    evolved.variant = model::Variant::evolved;
    shared.variant = model::Variant::shared;
    recompute.variant = model::Variant::recompute;

    const std::size_t pe = profiler::count_params(evolved);
    const std::size_t ps = profiler::count_params(shared);
    const std::size_t pr = profiler::count_params(recompute);
    expect(pe - ps == 20, "params(evolved) - params(shared) == (N-1)k == 20");
    expect(pr > pe, "params(recompute) > params(evolved)");

    // introspection agrees
    expect(model::build<float>(evolved).parameter_count() == pe, "evolved introspection");
    expect(model::build<float>(recompute).parameter_count() == pr, "recompute introspection");

    const std::int64_t fe = profiler::count_flops(evolved, 64, 64);
    const std::int64_t fr = profiler::count_flops(recompute, 64, 64);
    const double ratio = static_cast<double>(fr) / static_cast<double>(fe);
    expect(ratio > 2.0, "FLOP ratio recompute/evolved > 2 at T=64*64 (got " +
                            std::to_string(ratio) + ")");
    std::printf("      params: recompute %zu > evolved %zu > shared %zu; FLOP ratio %.3f\n", pr,
                pe, ps, ratio);
    return true;
}

// ---------------------------------------------------------------------------
// 5. kernel-size structure
// ---------------------------------------------------------------------------

bool criterion_kernel_sweep() {
    model::LFormerConfig base;
    base.bands = 4;
    base.width = 32;
    base.blocks = 5;

    const std::size_t ks[] = {1, 3, 5, 7};
    for (std::size_t h : {16u, 64u}) {
        const std::int64_t t = static_cast<std::int64_t>(h * h);
        std::size_t prev_params = 0;
        std::int64_t prev_flops = 0;
        std::size_t prev_k = 0;
        for (std::size_t k : ks) {
            model::LFormerConfig cfg = base;
            cfg.kernel = k;
            const std::size_t params = profiler::count_params(cfg);
            const std::int64_t flops = profiler::count_flops(cfg, h, h);
            if (prev_k != 0) {
                const std::size_t dk = k - prev_k;
                expect(params - prev_params == (base.blocks - 1) * dk,
                       "param increment (N-1)*dk at k=" + std::to_string(k));
                expect(flops - prev_flops ==
                           2 * t * t * static_cast<std::int64_t>((base.blocks - 1) * dk),
                       "flop increment 2T^2(N-1)dk at k=" + std::to_string(k));
            }
            prev_params = params;
            prev_flops = flops;
            prev_k = k;
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// 6. toy training
// ---------------------------------------------------------------------------

struct ToyRun {
    train::TrainResult result;
    std::vector<float> final_params;
    model::LFormerModel<float> model;
};

ToyRun run_toy_training(const std::vector<train::TrainItem<float>>& items) {
    model::LFormerConfig cfg;
    cfg.bands = 4;
    cfg.width = 16;
    cfg.blocks = 3;
    cfg.kernel = 5;
    cfg.seed = 42;

    ToyRun run;
    run.model = model::build<float>(cfg);
    train::TrainOptions opt;
    opt.adam.lr = 3e-4;
    opt.alpha = 0.1;
    opt.batch = 8;
    opt.steps = 300;
    opt.checkpoint_every = 0;
    opt.seed = 42;
    train::AdamState<float> state;
    run.result = train::run_training(run.model, items, opt, "", state);
    for (const auto& p : run.model.parameters())
        run.final_params.insert(run.final_params.end(), p.tensor.data().begin(),
                                p.tensor.data().end());
    return run;
}

bool criterion_training() {
    // 64 training samples and a held-out set, 32x32, 4 bands, ratio 4
    std::vector<train::TrainItem<float>> items;
    for (std::size_t i = 0; i < 64; ++i) {
        data::Sample s = data::make_sample(derive_seed(4242, i), "t", 32, 32, 4, 4, true);
        items.push_back({s.ms_up, s.pan, s.gt});
    }
    std::vector<data::Sample> held_out;
    for (std::size_t i = 0; i < 8; ++i)
        held_out.push_back(data::make_sample(derive_seed(9797, i), "v", 32, 32, 4, 4, true));

    const auto t0 = std::chrono::steady_clock::now();
    ToyRun first = run_toy_training(items);
    const auto t1 = std::chrono::steady_clock::now();
    const double run_seconds = std::chrono::duration<double>(t1 - t0).count();

    expect(first.result.final_loss < 0.5 * first.result.initial_loss,
           "final loss " + std::to_string(first.result.final_loss) + " not < half of initial " +
               std::to_string(first.result.initial_loss));

    double fused_psnr = 0, floor_psnr = 0;
    for (const auto& s : held_out) {
        Tensor<float> fused = model::forward(first.model, s.ms_up, s.pan);
        fused_psnr += metrics::psnr(fused.cast<double>(), s.gt.cast<double>());
        floor_psnr += metrics::psnr(s.ms_up.cast<double>(), s.gt.cast<double>());
    }
    fused_psnr /= static_cast<double>(held_out.size());
    floor_psnr /= static_cast<double>(held_out.size());
    expect(fused_psnr >= floor_psnr + 1.0,
           "held-out PSNR " + std::to_string(fused_psnr) + " dB not 1 dB above the bicubic floor " +
               std::to_string(floor_psnr));
    expect(run_seconds <= 600.0, "run took " + std::to_string(run_seconds) + " s (> 10 min)");

    // bit reproducibility: a second full run must match exactly
    ToyRun second = run_toy_training(items);
    expect(first.result.batch_losses == second.result.batch_losses,
           "per-step losses differ between runs");
    expect(testsup::bit_equal<float>(std::span<const float>(first.final_params),
                                     std::span<const float>(second.final_params)),
           "final parameters differ between runs");

    std::printf("      loss %.4f -> %.4f; held-out PSNR %.2f dB vs bicubic %.2f dB; %.0f s/run\n",
                first.result.initial_loss, first.result.final_loss, fused_psnr, floor_psnr,
                run_seconds);

    g_state.trained = first.model;
    g_state.train_items = items;
    g_state.trained_ready = true;
    return true;
}

// ---------------------------------------------------------------------------
// 7. container round trips
// ---------------------------------------------------------------------------

bool criterion_container() {
    namespace fs = std::filesystem;
    const fs::path dir =
        fs::temp_directory_path() / ("lformer_acc_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    const std::string path = (dir / "t.lftk").string();

    Rng rng(7001);
    for (int trial = 0; trial < 1000; ++trial) {
        Shape shape;
        const int nd = 1 + static_cast<int>(rng.uniform_int(4));
        for (int d = 0; d < nd; ++d) shape.push_back(1 + rng.uniform_int(12));
        if (trial % 2 == 0) {
            auto t = rand_tensor<float>(shape, rng, -100, 100);
            data::save_tensor(path, t);
            auto back = data::load_tensor<float>(path);
            if (!(back.shape() == shape) || !testsup::bit_equal<float>(back.data(), t.data())) {
                expect(false, "f32 round trip failed at trial " + std::to_string(trial));
                break;
            }
        } else {
            auto t = rand_tensor<double>(shape, rng, -100, 100);
            data::save_tensor(path, t);
            auto back = data::load_tensor<double>(path);
            if (!(back.shape() == shape) || !testsup::bit_equal<double>(back.data(), t.data())) {
                expect(false, "f64 round trip failed at trial " + std::to_string(trial));
                break;
            }
        }
    }

    // corrupted headers carry distinct faults
    auto t = rand_tensor<float>({4, 4}, rng);
    data::save_tensor(path, t);
    std::string good;
    {
        std::ifstream f(path, std::ios::binary);
        std::ostringstream os;
        os << f.rdbuf();
        good = os.str();
    }
    auto check_fault = [&](std::string bytes, ContainerFault want, const char* label) {
        const std::string bad = (dir / "bad.lftk").string();
        std::ofstream f(bad, std::ios::binary | std::ios::trunc);
        f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        f.close();
        try {
            (void)data::load_tensor<float>(bad);
            expect(false, std::string(label) + " accepted");
        } catch (const ContainerError& e) {
            expect(e.fault == want, std::string(label) + " raised the wrong fault");
        }
    };
    std::string bad_magic = good;
    bad_magic[0] = 'Z';
    check_fault(bad_magic, ContainerFault::bad_magic, "bad magic");
    std::string bad_version = good;
    bad_version[4] = 3;
    check_fault(bad_version, ContainerFault::bad_version, "bad version");
    std::string bad_dtype = good;
    bad_dtype[8] = 9;
    check_fault(bad_dtype, ContainerFault::bad_dtype, "bad dtype");
    check_fault(good.substr(0, good.size() - 3), ContainerFault::truncated, "truncated payload");
    check_fault(good.substr(0, 10), ContainerFault::truncated, "truncated header");

    fs::remove_all(dir);
    return true;
}

// ---------------------------------------------------------------------------
// 8. variant behavior on the trained model
// ---------------------------------------------------------------------------

bool criterion_variant_behavior() {
    if (!g_state.trained_ready) {
        expect(false, "criterion 6 training did not complete");
        return true;
    }
    double evolved_loss = 0, shared_loss = 0;
    for (const auto& it : g_state.train_items) {
        evolved_loss +=
            model::loss_forward(g_state.trained, it.ms_up, it.pan, it.gt, 0.1f).item();
        shared_loss += model::loss_forward(g_state.trained, it.ms_up, it.pan, it.gt, 0.1f,
                                           model::Variant::shared)
                           .item();
    }
    evolved_loss /= static_cast<double>(g_state.train_items.size());
    shared_loss /= static_cast<double>(g_state.train_items.size());
    expect(shared_loss > evolved_loss,
           "forced-shared loss " + std::to_string(shared_loss) + " not above evolved " +
               std::to_string(evolved_loss));
    std::printf("      train loss: evolved %.6f, forced-shared %.6f\n", evolved_loss, shared_loss);
    return true;
}

}  // namespace

int main() {
    struct Criterion {
        const char* name;
        std::function<bool()> fn;
    };
    const Criterion criteria[] = {
        {"1 gradient suite (ops <= 1e-5, end-to-end <= 1e-3)", criterion_gradients},
        {"2 attention maps row-stochastic over 100 random configurations", criterion_attention},
        {"3 metrics match independent naive oracles within 1e-6", criterion_oracles},
        {"4 ablation structure: params gap 20, FLOP ratio > 2", criterion_ablation},
        {"5 kernel sweep changes params/FLOPs by the exact increments", criterion_kernel_sweep},
        {"6 toy training halves the loss, beats bicubic by 1 dB, bit-reproducible",
         criterion_training},
        {"7 container: 1000 bit-exact round trips, distinct corruption faults",
         criterion_container},
        {"8 forced map-sharing degrades the trained model", criterion_variant_behavior},
    };

    int failed_criteria = 0;
    for (const auto& c : criteria) {
        const int before = g_failures;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            c.fn();
        } catch (const std::exception& e) {
            ++g_failures;
            g_notes.push_back(std::string("exception: ") + e.what());
            std::printf("      EXCEPTION: %s\n", e.what());
        }
        const auto t1 = std::chrono::steady_clock::now();
        const bool ok = g_failures == before;
        failed_criteria += ok ? 0 : 1;
        std::printf("[%s] criterion %s (%.1f s)\n", ok ? "PASS" : "FAIL", c.name,
                    std::chrono::duration<double>(t1 - t0).count());
    }
    std::printf("%d/8 criteria passed (%d checks, %d failures)\n", 8 - failed_criteria, g_checks,
                g_failures);
    return failed_criteria == 0 ? 0 : 1;
}
