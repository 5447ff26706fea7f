#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "lformer/data.hpp"

namespace fs = std::filesystem;

namespace lformer::data {

// ---------------------------------------------------------------------------
// Scene synthesis
// ---------------------------------------------------------------------------

Tensor<double> gen_scene(std::uint64_t seed, std::size_t h, std::size_t w, std::size_t c) {
    if (h < 16 || w < 16) throw ConfigError("gen_scene: minimum size is 16x16");
    Rng rng(seed);
    std::vector<double> img(h * w * c, 0.0);
    const double extent = static_cast<double>(std::min(h, w));

    const int blobs = 6 + static_cast<int>(rng.uniform_int(6));
    for (int k = 0; k < blobs; ++k) {
        const double cy = rng.uniform(0.0, static_cast<double>(h));
        const double cx = rng.uniform(0.0, static_cast<double>(w));
        const double s1 = rng.uniform(0.06, 0.25) * extent;
        const double s2 = rng.uniform(0.06, 0.25) * extent;
        const double theta = rng.uniform(0.0, 3.14159265358979323846);
        const double ct = std::cos(theta), st = std::sin(theta);
        // shared luminance factor ties the band amplitudes together
        const double lum = rng.uniform(0.3, 1.0);
        std::vector<double> spectrum(c);
        for (std::size_t b = 0; b < c; ++b) spectrum[b] = 0.35 * lum * (0.55 + 0.45 * rng.uniform());

        for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t x = 0; x < w; ++x) {
                const double dy = static_cast<double>(y) - cy;
                const double dx = static_cast<double>(x) - cx;
                const double u = (dx * ct + dy * st) / s1;
                const double v = (-dx * st + dy * ct) / s2;
                const double g = std::exp(-0.5 * (u * u + v * v));
                for (std::size_t b = 0; b < c; ++b) img[(y * w + x) * c + b] += spectrum[b] * g;
            }
        }
    }

    const int ramps = 1 + static_cast<int>(rng.uniform_int(2));
    for (int k = 0; k < ramps; ++k) {
        const double gx = rng.uniform(-1.0, 1.0);
        const double gy = rng.uniform(-1.0, 1.0);
        const double lum = rng.uniform(0.3, 1.0);
        std::vector<double> spectrum(c);
        for (std::size_t b = 0; b < c; ++b) spectrum[b] = 0.25 * lum * (0.55 + 0.45 * rng.uniform());
        for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t x = 0; x < w; ++x) {
                const double t = 0.5 + 0.5 * (gx * (static_cast<double>(x) / w - 0.5) +
                                              gy * (static_cast<double>(y) / h - 0.5));
                for (std::size_t b = 0; b < c; ++b) img[(y * w + x) * c + b] += spectrum[b] * t;
            }
        }
    }

    for (double& v : img) v = std::clamp(v, 0.0, 1.0);
    return Tensor<double>({h, w, c}, std::move(img));
}

Tensor<double> pan_from_gt(const Tensor<double>& gt, const std::vector<double>& weights) {
    if (gt.ndim() != 3) throw DimensionError("pan_from_gt expects [HxWxC]");
    const std::size_t c = gt.dim(2);
    if (weights.size() != c)
        throw ConfigError("pan_from_gt: " + std::to_string(weights.size()) + " weights for " +
                          std::to_string(c) + " bands");
    double sum = 0;
    for (double wgt : weights) {
        if (wgt < 0) throw ConfigError("pan_from_gt: weights must be nonnegative");
        sum += wgt;
    }
    if (std::fabs(sum - 1.0) > 1e-6)
        throw ConfigError("pan_from_gt: weights sum to " + std::to_string(sum) + ", expected 1");
    const std::size_t pixels = gt.dim(0) * gt.dim(1);
    std::vector<double> pan(pixels);
    const auto v = gt.data();
    for (std::size_t p = 0; p < pixels; ++p) {
        double acc = 0;
        for (std::size_t b = 0; b < c; ++b) acc += weights[b] * v[p * c + b];
        pan[p] = acc;
    }
    return Tensor<double>({gt.dim(0), gt.dim(1), 1}, std::move(pan));
}

std::vector<double> default_pan_weights(std::size_t c) {
    return std::vector<double>(c, 1.0 / static_cast<double>(c));
}

// ---------------------------------------------------------------------------
// Degradation and upsampling
// ---------------------------------------------------------------------------

namespace {

std::vector<double> gaussian_kernel(double sigma, std::size_t radius) {
    std::vector<double> k(2 * radius + 1);
    double sum = 0;
    for (std::size_t i = 0; i < k.size(); ++i) {
        const double d = static_cast<double>(i) - static_cast<double>(radius);
        k[i] = std::exp(-d * d / (2.0 * sigma * sigma));
        sum += k[i];
    }
    for (double& v : k) v /= sum;
    return k;
}

// Separable pass along one axis with edge-clamp borders.
void blur_axis(std::vector<double>& img, std::size_t h, std::size_t w, std::size_t c,
               const std::vector<double>& k, bool horizontal) {
    const std::size_t radius = k.size() / 2;
    std::vector<double> out(img.size());
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            for (std::size_t b = 0; b < c; ++b) {
                double acc = 0;
                for (std::size_t t = 0; t < k.size(); ++t) {
                    const std::ptrdiff_t off =
                        static_cast<std::ptrdiff_t>(t) - static_cast<std::ptrdiff_t>(radius);
                    std::size_t sy = y, sx = x;
                    if (horizontal) {
                        const std::ptrdiff_t xx = std::clamp<std::ptrdiff_t>(
                            static_cast<std::ptrdiff_t>(x) + off, 0, static_cast<std::ptrdiff_t>(w) - 1);
                        sx = static_cast<std::size_t>(xx);
                    } else {
                        const std::ptrdiff_t yy = std::clamp<std::ptrdiff_t>(
                            static_cast<std::ptrdiff_t>(y) + off, 0, static_cast<std::ptrdiff_t>(h) - 1);
                        sy = static_cast<std::size_t>(yy);
                    }
                    acc += k[t] * img[(sy * w + sx) * c + b];
                }
                out[(y * w + x) * c + b] = acc;
            }
        }
    }
    img.swap(out);
}

// Cubic convolution kernel, a = -0.5.
double cubic_weight(double t) {
    constexpr double a = -0.5;
    t = std::fabs(t);
    if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
    if (t < 2.0) return a * (((t - 5.0) * t + 8.0) * t - 4.0);
    return 0.0;
}

}  // namespace

Tensor<double> degrade_ms(const Tensor<double>& gt, std::size_t r) {
    if (gt.ndim() != 3) throw DimensionError("degrade_ms expects [HxWxC]");
    const std::size_t h = gt.dim(0), w = gt.dim(1), c = gt.dim(2);
    if (h % r != 0 || w % r != 0)
        throw DimensionError("degrade_ms: " + shape_str(gt.shape()) + " not divisible by ratio " +
                             std::to_string(r));
    std::vector<double> img(gt.data().begin(), gt.data().end());
    const std::vector<double> k = gaussian_kernel(static_cast<double>(r) / 2.0, 2 * r);
    blur_axis(img, h, w, c, k, true);
    blur_axis(img, h, w, c, k, false);

    const std::size_t oh = h / r, ow = w / r;
    std::vector<double> out(oh * ow * c);
    for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t x = 0; x < ow; ++x)
            for (std::size_t b = 0; b < c; ++b)
                out[(y * ow + x) * c + b] = img[((y * r) * w + (x * r)) * c + b];
    return Tensor<double>({oh, ow, c}, std::move(out));
}

Tensor<double> upsample_bicubic(const Tensor<double>& ms, std::size_t r) {
    if (ms.ndim() != 3) throw DimensionError("upsample_bicubic expects [HxWxC]");
    if (r < 1) throw ConfigError("upsample_bicubic: ratio must be >= 1");
    const std::size_t h = ms.dim(0), w = ms.dim(1), c = ms.dim(2);
    const std::size_t oh = h * r, ow = w * r;

    // horizontal pass
    std::vector<double> mid(h * ow * c);
    const auto src = ms.data();
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
            const double sx = (static_cast<double>(ox) + 0.5) / static_cast<double>(r) - 0.5;
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(std::floor(sx));
            const double fx = sx - static_cast<double>(ix);
            double wt[4];
            for (int t = 0; t < 4; ++t) wt[t] = cubic_weight(fx - static_cast<double>(t - 1));
            for (std::size_t b = 0; b < c; ++b) {
                double acc = 0;
                for (int t = 0; t < 4; ++t) {
                    const std::ptrdiff_t xx =
                        std::clamp<std::ptrdiff_t>(ix + t - 1, 0, static_cast<std::ptrdiff_t>(w) - 1);
                    acc += wt[t] * src[(y * w + static_cast<std::size_t>(xx)) * c + b];
                }
                mid[(y * ow + ox) * c + b] = acc;
            }
        }
    }

    // vertical pass
    std::vector<double> out(oh * ow * c);
    for (std::size_t oy = 0; oy < oh; ++oy) {
        const double sy = (static_cast<double>(oy) + 0.5) / static_cast<double>(r) - 0.5;
        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(std::floor(sy));
        const double fy = sy - static_cast<double>(iy);
        double wt[4];
        for (int t = 0; t < 4; ++t) wt[t] = cubic_weight(fy - static_cast<double>(t - 1));
        for (std::size_t ox = 0; ox < ow; ++ox) {
            for (std::size_t b = 0; b < c; ++b) {
                double acc = 0;
                for (int t = 0; t < 4; ++t) {
                    const std::ptrdiff_t yy =
                        std::clamp<std::ptrdiff_t>(iy + t - 1, 0, static_cast<std::ptrdiff_t>(h) - 1);
                    acc += wt[t] * mid[(static_cast<std::size_t>(yy) * ow + ox) * c + b];
                }
                out[(oy * ow + ox) * c + b] = acc;
            }
        }
    }
    return Tensor<double>({oh, ow, c}, std::move(out));
}

// ---------------------------------------------------------------------------
// Dataset assembly
// ---------------------------------------------------------------------------

Sample make_sample(std::uint64_t seed, const std::string& id, std::size_t h, std::size_t w,
                   std::size_t c, std::size_t r, bool keep_gt) {
    Tensor<double> gt = gen_scene(seed, h, w, c);
    Tensor<double> pan = pan_from_gt(gt, default_pan_weights(c));
    Tensor<double> ms = degrade_ms(gt, r);
    Tensor<double> ms_up = upsample_bicubic(ms, r);
    // cubic overshoot is clipped so every stored value stays in [0, 1]
    {
        auto raw = ms_up.raw_data();
        for (double& v : raw) v = std::clamp(v, 0.0, 1.0);
    }
    Sample s;
    s.id = id;
    if (keep_gt) s.gt = gt.cast<float>();
    s.pan = pan.cast<float>();
    s.ms = ms.cast<float>();
    s.ms_up = ms_up.cast<float>();
    return s;
}

namespace {

std::string sample_id(const std::string& split, std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "_%04zu", i);
    return split + buf;
}

}  // namespace

DatasetManifest build_dataset(const std::string& root, const DatasetSpec& spec) {
    if (fs::exists(root) && !fs::is_empty(root))
        throw DataError("output directory " + root + " exists and is not empty");
    fs::create_directories(root);

    struct SplitPlan {
        const char* name;
        std::size_t count;
        std::size_t scale;  // size multiplier relative to the base sample size
        bool has_gt;
        std::uint64_t stream_base;
    };
    const SplitPlan plans[] = {
        {"train", spec.n_train, 1, true, 0},
        {"val", spec.n_val, 1, true, 1'000'000},
        {"test", spec.n_test, 1, true, 2'000'000},
        {"test_full", spec.n_test_full, 2, false, 3'000'000},
    };

    DatasetManifest m;
    m.seed = spec.seed;
    m.bands = spec.bands;
    m.ratio = spec.ratio;
    m.height = spec.height;
    m.width = spec.width;

    for (const auto& plan : plans) {
        if (plan.count == 0) continue;
        SplitInfo info{plan.name, plan.has_gt, {}};
        for (std::size_t i = 0; i < plan.count; ++i) {
            const std::string id = sample_id(plan.name, i);
            const std::uint64_t s = derive_seed(spec.seed, plan.stream_base + i);
            Sample smp = make_sample(s, id, spec.height * plan.scale, spec.width * plan.scale,
                                     spec.bands, spec.ratio, plan.has_gt);
            const fs::path dir = fs::path(root) / plan.name / id;
            fs::create_directories(dir);
            if (plan.has_gt) save_tensor((dir / "gt.lftk").string(), smp.gt);
            save_tensor((dir / "pan.lftk").string(), smp.pan);
            save_tensor((dir / "ms.lftk").string(), smp.ms);
            save_tensor((dir / "ms_up.lftk").string(), smp.ms_up);
            info.ids.push_back(id);
        }
        m.splits.push_back(std::move(info));
    }
    write_manifest(root, m);
    return m;
}

}  // namespace lformer::data
