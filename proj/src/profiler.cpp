#include "lformer/profiler.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace lformer::profiler {

namespace {

using model::Variant;

std::int64_t i64of(std::size_t v) { return static_cast<std::int64_t>(v); }

}  // namespace

FlopBreakdown count_flops_detail(const model::LFormerConfig& config, std::size_t h,
                                 std::size_t w) {
    config.validate();
    FlopBreakdown f;
    const std::int64_t t = i64of(h * w);
    const std::int64_t c = i64of(config.bands);
    const std::int64_t d = i64of(config.width);
    const std::int64_t k = i64of(config.kernel);
    const std::int64_t n = i64of(config.blocks);

    auto proj = [&](std::int64_t cin) {
        f.conv2d += 2 * t * 9 * cin * d;  // 3x3 cin -> d
        f.elementwise += t * d;           // ReLU
        f.conv2d += 2 * t * 9 * d * d;    // 3x3 d -> d
    };

    // input projections
    proj(1);  // PAN
    proj(c);  // MS

    // first cross-attention
    f.matmul_qk += 2 * t * d * t;
    f.elementwise += t * t;  // 1/sqrt(d) scale
    f.softmax += 5 * t * t;
    f.matmul_av += 2 * t * t * d;

    // Sobel branch: anchor shift (1/px), two fixed depthwise 3x3 per image,
    // then two squares, one add and one sqrt (4/px) for the magnitude
    f.depthwise += 2 * (2 * t * 9 * c);
    f.elementwise += 5 * t * c;
    f.depthwise += 2 * (2 * t * 9 * 1);
    f.elementwise += 5 * t;
    proj(c + 1);  // high-frequency projection over Cat(Sobel(M), Sobel(P))

    // remaining blocks
    for (std::int64_t i = 0; i + 1 < n; ++i) {
        // FIB: 3x3 2d -> d, ReLU, 3x3 d -> d
        f.conv2d += 2 * t * 9 * (2 * d) * d;
        f.elementwise += t * d;
        f.conv2d += 2 * t * 9 * d * d;
        // value update: 1x1 2d -> d
        f.conv2d += 2 * t * 1 * (2 * d) * d;
        switch (config.variant) {
            case Variant::evolved:
                f.conv1d += 2 * t * t * k;
                f.softmax += 5 * t * t;
                break;
            case Variant::shared:
                break;
            case Variant::recompute:
                f.token_proj += 3 * (2 * t * d * d);
                f.elementwise += 3 * t * d;  // bias rows
                f.matmul_qk += 2 * t * d * t;
                f.elementwise += t * t;  // scale
                f.softmax += 5 * t * t;
                break;
        }
        f.matmul_av += 2 * t * t * d;
    }

    // head over Cat(global, detail) + residual add
    f.conv2d += 2 * t * 9 * (2 * d) * c;
    f.elementwise += t * c;
    return f;
}

std::int64_t count_flops(const model::LFormerConfig& config, std::size_t h, std::size_t w) {
    return count_flops_detail(config, h, w).reported();
}

std::size_t count_params(const model::LFormerConfig& config) {
    config.validate();
    const std::size_t c = config.bands, d = config.width;
    const std::size_t blocks = config.blocks - 1;

    auto conv = [](std::size_t kh, std::size_t kw, std::size_t ci, std::size_t co) {
        return kh * kw * ci * co + co;
    };
    auto proj = [&](std::size_t cin) { return conv(3, 3, cin, d) + conv(3, 3, d, d); };

    std::size_t total = proj(1) + proj(c) + proj(c + 1);
    total += blocks * (conv(3, 3, 2 * d, d) + conv(3, 3, d, d));  // FIB
    total += blocks * conv(1, 1, 2 * d, d);                       // value update
    switch (config.variant) {
        case Variant::evolved:
            total += blocks * config.kernel * config.heads;
            break;
        case Variant::recompute:
            total += blocks * 3 * (d * d + d);
            break;
        case Variant::shared:
            break;
    }
    total += conv(3, 3, 2 * d, c);  // head over Cat(global, detail)
    return total;
}

std::int64_t peak_live_bytes(const model::LFormerConfig& config, std::size_t h, std::size_t w,
                             std::size_t scalar_bytes) {
    const std::int64_t t = i64of(h * w);
    const std::int64_t c = i64of(config.bands);
    const std::int64_t d = i64of(config.width);
    // Live across the block loop: inputs, detail + global features, the
    // current map; the widest moment holds one extra T x T buffer (evolution
    // logits or recomputed logits) plus the updated value tokens.
    std::int64_t peak = t * (c + 1)       // ms_up + pan
                        + 2 * t * d      // detail + global features
                        + 2 * t * t      // current map + logits/new map
                        + t * d;         // value tokens
    if (config.variant == Variant::recompute) peak += 3 * t * d;  // Q, K, V
    return peak * i64of(scalar_bytes);
}

BenchStats bench_forward(const model::LFormerModel<float>& m, const Tensor<float>& ms_up,
                         const Tensor<float>& pan, int n_warm, int n_runs) {
    if (n_runs < 3) throw ConfigError("bench_forward: need at least 3 timed runs");
    kernels::ExecScope exec(kernels::Exec::serial);
    FiniteGuardScope guard(false);
    for (int i = 0; i < n_warm; ++i) (void)model::forward(m, ms_up, pan);

    std::vector<double> ms(static_cast<std::size_t>(n_runs));
    for (int i = 0; i < n_runs; ++i) {
        const auto start = std::chrono::steady_clock::now();
        (void)model::forward(m, ms_up, pan);
        const auto stop = std::chrono::steady_clock::now();
        ms[static_cast<std::size_t>(i)] =
            std::chrono::duration<double, std::milli>(stop - start).count();
    }
    BenchStats s;
    s.runs = n_runs;
    s.samples_ms = ms;
    double sum = 0, mn = ms[0];
    for (double v : ms) {
        sum += v;
        mn = std::min(mn, v);
    }
    s.mean_ms = sum / static_cast<double>(n_runs);
    s.min_ms = mn;
    double acc = 0;
    for (double v : ms) acc += (v - s.mean_ms) * (v - s.mean_ms);
    s.std_ms = n_runs > 1 ? std::sqrt(acc / static_cast<double>(n_runs - 1)) : 0.0;
    return s;
}

std::string similarity_csv(const std::vector<std::vector<double>>& m) {
    std::ostringstream os;
    os << "map";
    for (std::size_t j = 0; j < m.size(); ++j) os << ",a" << (j + 1);
    os << "\n";
    char buf[48];
    for (std::size_t i = 0; i < m.size(); ++i) {
        os << "a" << (i + 1);
        for (std::size_t j = 0; j < m[i].size(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.9g", m[i][j]);
            os << "," << buf;
        }
        os << "\n";
    }
    return os.str();
}

std::vector<ProfileReport> compare_variants(const model::LFormerConfig& base, std::size_t h,
                                            std::size_t w,
                                            const std::vector<model::Variant>& variants,
                                            int bench_warm, int bench_runs) {
    std::vector<ProfileReport> rows;
    Tensor<float> ms_up, pan;
    if (bench_runs > 0) {
        Rng rng(base.seed ^ 0xbe9c5ull);
        std::vector<float> a(h * w * base.bands), p(h * w);
        for (auto& v : a) v = static_cast<float>(rng.uniform());
        for (auto& v : p) v = static_cast<float>(rng.uniform());
        ms_up = Tensor<float>({h, w, base.bands}, std::move(a));
        pan = Tensor<float>({h, w, 1}, std::move(p));
    }
    for (model::Variant variant : variants) {
        model::LFormerConfig cfg = base;
        cfg.variant = variant;
        ProfileReport r;
        r.variant = model::to_string(variant);
        const FlopBreakdown f = count_flops_detail(cfg, h, w);
        r.flops = f.reported();
        r.map_apply_flops = f.matmul_av;
        r.params = count_params(cfg);
        r.peak_bytes = peak_live_bytes(cfg, h, w);
        if (bench_runs > 0) {
            model::LFormerModel<float> m = model::build<float>(cfg);
            r.time = bench_forward(m, ms_up, pan, bench_warm, bench_runs);
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

std::string profile_csv(const std::vector<ProfileReport>& rows) {
    std::ostringstream os;
    os << "variant,sam,ergas,q2n,psnr,params,flops,map_apply_flops,time_ms_mean,time_ms_std,"
          "peak_bytes\n";
    char buf[48];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.9g", v);
        return std::string(buf);
    };
    for (const auto& r : rows) {
        os << r.variant << ",";
        if (r.metrics) {
            os << num(r.metrics->sam) << "," << num(r.metrics->ergas) << ","
               << num(r.metrics->q2n) << "," << num(r.metrics->psnr);
        } else {
            os << ",,,";
        }
        os << "," << r.params << "," << r.flops << "," << r.map_apply_flops;
        if (r.time.runs > 0)
            os << "," << num(r.time.mean_ms) << "," << num(r.time.std_ms);
        else
            os << ",,";
        os << "," << r.peak_bytes << "\n";
    }
    return os.str();
}

}  // namespace lformer::profiler
