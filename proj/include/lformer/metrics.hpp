#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "lformer/ops.hpp"

// Training losses (differentiable, built from tape ops) and the evaluation
// metric suite (plain scalar functions computed in double).

namespace lformer::metrics {

inline constexpr double kPi = 3.14159265358979323846;

// ---------------------------------------------------------------------------
// Differentiable losses
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> l1_loss(const Tensor<T>& x, const Tensor<T>& y) {
    if (x.shape() != y.shape())
        throw DimensionError("l1_loss: " + shape_str(x.shape()) + " vs " + shape_str(y.shape()));
    return ops::mean(ops::abs(ops::sub(x, y)));
}

// 11x11 Gaussian window, sigma 1.5, normalized to sum 1, replicated per channel.
template <typename T>
Tensor<T> ssim_window(std::size_t channels, std::size_t size = 11, double sigma = 1.5) {
    std::vector<double> g(size * size);
    const double c0 = (static_cast<double>(size) - 1.0) / 2.0;
    double sum = 0;
    for (std::size_t i = 0; i < size; ++i) {
        for (std::size_t j = 0; j < size; ++j) {
            const double dy = static_cast<double>(i) - c0;
            const double dx = static_cast<double>(j) - c0;
            g[i * size + j] = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
            sum += g[i * size + j];
        }
    }
    std::vector<T> vals(size * size * channels);
    for (std::size_t i = 0; i < size * size; ++i)
        for (std::size_t c = 0; c < channels; ++c)
            vals[i * channels + c] = static_cast<T>(g[i] / sum);
    return Tensor<T>({size, size, channels}, std::move(vals));
}

// Mean SSIM over Gaussian-weighted valid windows and bands; K1=0.01, K2=0.03,
// dynamic range 1 (images are normalized to [0,1]). Differentiable in both args.
template <typename T>
Tensor<T> ssim(const Tensor<T>& x, const Tensor<T>& y, std::size_t window = 11,
               double sigma = 1.5) {
    if (x.shape() != y.shape())
        throw DimensionError("ssim: " + shape_str(x.shape()) + " vs " + shape_str(y.shape()));
    if (x.ndim() != 3) throw DimensionError("ssim expects [HxWxC], got " + shape_str(x.shape()));
    if (x.dim(0) < window || x.dim(1) < window)
        throw DimensionError("ssim: image " + shape_str(x.shape()) + " smaller than " +
                             std::to_string(window) + "x" + std::to_string(window) + " window");
    const T c1 = static_cast<T>(0.01 * 0.01);
    const T c2 = static_cast<T>(0.03 * 0.03);
    Tensor<T> win = ssim_window<T>(x.dim(2), window, sigma);

    auto blur = [&](const Tensor<T>& t) { return ops::depthwise_conv2d(t, win, ops::Pad::valid); };
    Tensor<T> mu_x = blur(x);
    Tensor<T> mu_y = blur(y);
    Tensor<T> var_x = ops::sub(blur(ops::mul(x, x)), ops::mul(mu_x, mu_x));
    Tensor<T> var_y = ops::sub(blur(ops::mul(y, y)), ops::mul(mu_y, mu_y));
    Tensor<T> cov = ops::sub(blur(ops::mul(x, y)), ops::mul(mu_x, mu_y));

    Tensor<T> num = ops::mul(ops::add_scalar(ops::scale(ops::mul(mu_x, mu_y), T(2)), c1),
                             ops::add_scalar(ops::scale(cov, T(2)), c2));
    Tensor<T> den = ops::mul(ops::add_scalar(ops::add(ops::mul(mu_x, mu_x), ops::mul(mu_y, mu_y)), c1),
                             ops::add_scalar(ops::add(var_x, var_y), c2));
    return ops::mean(ops::div(num, den));
}

template <typename T>
Tensor<T> ssim_loss(const Tensor<T>& x, const Tensor<T>& y) {
    return ops::add_scalar(ops::scale(ssim(x, y), T(-1)), T(1));
}

// ---------------------------------------------------------------------------
// Reference metrics (scalar, double precision)
// ---------------------------------------------------------------------------

// Mean spectral angle in degrees; pixels where either spectrum is the zero
// vector contribute 0.
template <typename T>
double sam_degrees(const Tensor<T>& x, const Tensor<T>& y) {
    if (x.shape() != y.shape())
        throw DimensionError("sam: " + shape_str(x.shape()) + " vs " + shape_str(y.shape()));
    if (x.ndim() != 3 || x.dim(2) < 2)
        throw DimensionError("sam needs [HxWxC] with C >= 2, got " + shape_str(x.shape()));
    const std::size_t pixels = x.dim(0) * x.dim(1);
    const std::size_t c = x.dim(2);
    const auto xv = x.data();
    const auto yv = y.data();
    double total = 0;
    for (std::size_t p = 0; p < pixels; ++p) {
        double dot = 0, nx = 0, ny = 0;
        for (std::size_t b = 0; b < c; ++b) {
            const double a = xv[p * c + b];
            const double bb = yv[p * c + b];
            dot += a * bb;
            nx += a * a;
            ny += bb * bb;
        }
        if (nx == 0 || ny == 0) continue;
        // exactly parallel spectra contribute a clean zero angle
        if (dot > 0 && dot * dot >= nx * ny) continue;
        double cosv = dot / std::sqrt(nx * ny);
        cosv = std::clamp(cosv, -1.0, 1.0);
        total += std::acos(cosv);
    }
    return total / static_cast<double>(pixels) * (180.0 / kPi);
}

// 100/ratio * sqrt(mean over bands of (RMSE_b / mean_b)^2), mean_b taken from
// the reference image.
template <typename T>
double ergas(const Tensor<T>& fused, const Tensor<T>& reference, double ratio) {
    if (fused.shape() != reference.shape())
        throw DimensionError("ergas: " + shape_str(fused.shape()) + " vs " +
                             shape_str(reference.shape()));
    if (fused.ndim() != 3) throw DimensionError("ergas expects [HxWxC]");
    const std::size_t pixels = fused.dim(0) * fused.dim(1);
    const std::size_t c = fused.dim(2);
    const auto fv = fused.data();
    const auto rv = reference.data();
    double acc = 0;
    for (std::size_t b = 0; b < c; ++b) {
        double mse = 0, mu = 0;
        for (std::size_t p = 0; p < pixels; ++p) {
            const double d = static_cast<double>(fv[p * c + b]) - rv[p * c + b];
            mse += d * d;
            mu += rv[p * c + b];
        }
        mse /= static_cast<double>(pixels);
        mu /= static_cast<double>(pixels);
        if (mu == 0) throw NumericError("ergas: reference band " + std::to_string(b) + " has zero mean");
        acc += mse / (mu * mu);
    }
    return 100.0 / ratio * std::sqrt(acc / static_cast<double>(c));
}

// 10 log10(peak^2 / MSE); identical inputs give +infinity.
template <typename T>
double psnr(const Tensor<T>& x, const Tensor<T>& y, double peak = 1.0) {
    if (x.shape() != y.shape())
        throw DimensionError("psnr: " + shape_str(x.shape()) + " vs " + shape_str(y.shape()));
    const auto xv = x.data();
    const auto yv = y.data();
    double mse = 0;
    for (std::size_t i = 0; i < xv.size(); ++i) {
        const double d = static_cast<double>(xv[i]) - yv[i];
        mse += d * d;
    }
    mse /= static_cast<double>(xv.size());
    if (mse == 0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / mse);
}

// ---------------------------------------------------------------------------
// Universal image quality index family
// ---------------------------------------------------------------------------

// Q over one window: 4 sigma_xy mean_x mean_y / ((sigma_x^2 + sigma_y^2)(mean_x^2 + mean_y^2)).
// Population (1/n) moments; the n vs n-1 choice cancels in the ratio.
// Returns nullopt when the denominator vanishes.
inline std::optional<double> q_window(const double* x, const double* y, std::size_t n) {
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double vx = 0, vy = 0, cxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        vx += dx * dx;
        vy += dy * dy;
        cxy += dx * dy;
    }
    vx /= static_cast<double>(n);
    vy /= static_cast<double>(n);
    cxy /= static_cast<double>(n);
    const double den = (vx + vy) * (mx * mx + my * my);
    if (den == 0) return std::nullopt;
    return 4.0 * cxy * mx * my / den;
}

// Mean Q over stride-1 sliding windows of a single band; degenerate windows
// are skipped. Accepts [HxW] or [HxWx1].
template <typename T>
double q_index(const Tensor<T>& x, const Tensor<T>& y, std::size_t window = 32) {
    if (x.shape() != y.shape())
        throw DimensionError("q_index: " + shape_str(x.shape()) + " vs " + shape_str(y.shape()));
    if (x.ndim() == 3 && x.dim(2) != 1) throw DimensionError("q_index is single-band");
    const std::size_t h = x.dim(0), w = x.dim(1);
    if (h < window || w < window)
        throw DimensionError("q_index: image " + shape_str(x.shape()) + " smaller than window " +
                             std::to_string(window));
    const auto xv = x.data();
    const auto yv = y.data();
    const std::size_t n = window * window;
    std::vector<double> bx(n), by(n);
    double total = 0;
    std::size_t used = 0;
    for (std::size_t y0 = 0; y0 + window <= h; ++y0) {
        for (std::size_t x0 = 0; x0 + window <= w; ++x0) {
            std::size_t t = 0;
            for (std::size_t i = 0; i < window; ++i)
                for (std::size_t j = 0; j < window; ++j, ++t) {
                    bx[t] = xv[(y0 + i) * w + (x0 + j)];
                    by[t] = yv[(y0 + i) * w + (x0 + j)];
                }
            if (auto q = q_window(bx.data(), by.data(), n)) {
                total += *q;
                ++used;
            }
        }
    }
    if (used == 0) throw NumericError("q_index: every window is degenerate");
    return total / static_cast<double>(used);
}

// ---------------------------------------------------------------------------
// Hypercomplex Q2n. Pixels become 2^n-dimensional hypercomplex numbers
// (bands zero-padded to the next power of two) multiplied by the
// Cayley-Dickson rule; each window yields a modulus-based Q value.
// ---------------------------------------------------------------------------

namespace hypercomplex {

// (a, b)(c, d) = (a c - d* b, d a + b c*), recursive on half vectors.
inline void cd_mult(const double* a, const double* b, double* out, std::size_t d);

inline void cd_conj(const double* a, double* out, std::size_t d) {
    out[0] = a[0];
    for (std::size_t i = 1; i < d; ++i) out[i] = -a[i];
}

inline void cd_mult(const double* a, const double* b, double* out, std::size_t d) {
    if (d == 1) {
        out[0] = a[0] * b[0];
        return;
    }
    if (d == 2) {  // complex product
        out[0] = a[0] * b[0] - b[1] * a[1];
        out[1] = b[1] * a[0] + a[1] * b[0];
        return;
    }
    const std::size_t h = d / 2;
    const double* a1 = a;
    const double* a2 = a + h;
    const double* b1 = b;
    const double* b2 = b + h;
    constexpr std::size_t kStack = 16;  // halves up to 16 (32-band images) stay off the heap
    double s1[kStack], s2[kStack], sc[kStack];
    std::vector<double> v1, v2, vc;
    double *t1 = s1, *t2 = s2, *conj_buf = sc;
    if (h > kStack) {
        v1.resize(h);
        v2.resize(h);
        vc.resize(h);
        t1 = v1.data();
        t2 = v2.data();
        conj_buf = vc.data();
    }
    // out1 = a1 b1 - conj(b2) a2
    cd_mult(a1, b1, t1, h);
    cd_conj(b2, conj_buf, h);
    cd_mult(conj_buf, a2, t2, h);
    for (std::size_t i = 0; i < h; ++i) out[i] = t1[i] - t2[i];
    // out2 = b2 a1 + a2 conj(b1)
    cd_mult(b2, a1, t1, h);
    cd_conj(b1, conj_buf, h);
    cd_mult(a2, conj_buf, t2, h);
    for (std::size_t i = 0; i < h; ++i) out[h + i] = t1[i] + t2[i];
}

inline double modulus(const double* a, std::size_t d) {
    double s = 0;
    for (std::size_t i = 0; i < d; ++i) s += a[i] * a[i];
    return std::sqrt(s);
}

inline std::size_t next_pow2(std::size_t v) {
    std::size_t p = 1;
    while (p < v) p *= 2;
    return p;
}

}  // namespace hypercomplex

// Q value of one window of hypercomplex pixels zs, ws (n pixels, dim d each):
// 4 |sigma_zw| |mean_z| |mean_w| / ((sigma_z^2 + sigma_w^2)(|mean_z|^2 + |mean_w|^2)).
inline std::optional<double> q2n_window(const std::vector<double>& zs, const std::vector<double>& ws,
                                        std::size_t n, std::size_t d) {
    namespace hc = hypercomplex;
    std::vector<double> mz(d, 0), mw(d, 0);
    for (std::size_t p = 0; p < n; ++p)
        for (std::size_t i = 0; i < d; ++i) {
            mz[i] += zs[p * d + i];
            mw[i] += ws[p * d + i];
        }
    for (std::size_t i = 0; i < d; ++i) {
        mz[i] /= static_cast<double>(n);
        mw[i] /= static_cast<double>(n);
    }
    std::vector<double> cov(d, 0), dz(d), dw(d), cw(d), prod(d);
    double var_z = 0, var_w = 0;
    for (std::size_t p = 0; p < n; ++p) {
        for (std::size_t i = 0; i < d; ++i) {
            dz[i] = zs[p * d + i] - mz[i];
            dw[i] = ws[p * d + i] - mw[i];
            var_z += dz[i] * dz[i];
            var_w += dw[i] * dw[i];
        }
        hc::cd_conj(dw.data(), cw.data(), d);
        hc::cd_mult(dz.data(), cw.data(), prod.data(), d);
        for (std::size_t i = 0; i < d; ++i) cov[i] += prod[i];
    }
    var_z /= static_cast<double>(n);
    var_w /= static_cast<double>(n);
    for (std::size_t i = 0; i < d; ++i) cov[i] /= static_cast<double>(n);

    const double mod_mz = hc::modulus(mz.data(), d);
    const double mod_mw = hc::modulus(mw.data(), d);
    const double den = (var_z + var_w) * (mod_mz * mod_mz + mod_mw * mod_mw);
    if (den == 0) return std::nullopt;
    return 4.0 * hc::modulus(cov.data(), d) * mod_mz * mod_mw / den;
}

template <typename T>
double q2n(const Tensor<T>& x, const Tensor<T>& y, std::size_t window = 32) {
    if (x.shape() != y.shape())
        throw DimensionError("q2n: " + shape_str(x.shape()) + " vs " + shape_str(y.shape()));
    if (x.ndim() != 3) throw DimensionError("q2n expects [HxWxC], got " + shape_str(x.shape()));
    const std::size_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
    if (h < window || w < window)
        throw DimensionError("q2n: image " + shape_str(x.shape()) + " smaller than window " +
                             std::to_string(window));
    const std::size_t d = hypercomplex::next_pow2(c);
    const std::size_t n = window * window;
    const auto xv = x.data();
    const auto yv = y.data();
    std::vector<double> zs(n * d, 0), ws(n * d, 0);
    double total = 0;
    std::size_t used = 0;
    for (std::size_t y0 = 0; y0 + window <= h; ++y0) {
        for (std::size_t x0 = 0; x0 + window <= w; ++x0) {
            std::size_t t = 0;
            for (std::size_t i = 0; i < window; ++i)
                for (std::size_t j = 0; j < window; ++j, ++t) {
                    const std::size_t p = (y0 + i) * w + (x0 + j);
                    for (std::size_t b = 0; b < c; ++b) {
                        zs[t * d + b] = xv[p * c + b];
                        ws[t * d + b] = yv[p * c + b];
                    }
                    for (std::size_t b = c; b < d; ++b) {
                        zs[t * d + b] = 0;
                        ws[t * d + b] = 0;
                    }
                }
            if (auto q = q2n_window(zs, ws, n, d)) {
                total += *q;
                ++used;
            }
        }
    }
    if (used == 0) throw NumericError("q2n: every window is degenerate");
    return total / static_cast<double>(used);
}

// ---------------------------------------------------------------------------
// No-reference indices
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> band(const Tensor<T>& img, std::size_t b) {
    const std::size_t h = img.dim(0), w = img.dim(1), c = img.dim(2);
    std::vector<T> vals(h * w);
    const auto v = img.data();
    for (std::size_t p = 0; p < h * w; ++p) vals[p] = v[p * c + b];
    return Tensor<T>({h, w}, std::move(vals));
}

// Spectral distortion: mean absolute difference between inter-band Q values of
// the fused image and of the low-resolution MS.
template <typename T>
double d_lambda(const Tensor<T>& fused, const Tensor<T>& ms_lowres, std::size_t window = 32) {
    if (fused.ndim() != 3 || ms_lowres.ndim() != 3 || fused.dim(2) != ms_lowres.dim(2))
        throw DimensionError("d_lambda: band mismatch " + shape_str(fused.shape()) + " vs " +
                             shape_str(ms_lowres.shape()));
    const std::size_t c = fused.dim(2);
    if (c < 2) throw DimensionError("d_lambda needs at least 2 bands");
    std::vector<Tensor<T>> fb, mb;
    for (std::size_t b = 0; b < c; ++b) {
        fb.push_back(band(fused, b));
        mb.push_back(band(ms_lowres, b));
    }
    double acc = 0;
    for (std::size_t i = 0; i < c; ++i)
        for (std::size_t j = 0; j < c; ++j) {
            if (i == j) continue;
            acc += std::fabs(q_index(fb[i], fb[j], window) - q_index(mb[i], mb[j], window));
        }
    return acc / static_cast<double>(c * (c - 1));
}

// Spatial distortion: per band, |Q(fused_b, pan) - Q(ms_b, pan_degraded)|.
template <typename T>
double d_s(const Tensor<T>& fused, const Tensor<T>& ms_lowres, const Tensor<T>& pan,
           const Tensor<T>& pan_degraded, std::size_t window = 32) {
    if (fused.ndim() != 3 || ms_lowres.ndim() != 3 || fused.dim(2) != ms_lowres.dim(2))
        throw DimensionError("d_s: band mismatch");
    const std::size_t c = fused.dim(2);
    Tensor<T> pan2 = pan.ndim() == 3 ? band(pan, 0) : pan;
    Tensor<T> panl2 = pan_degraded.ndim() == 3 ? band(pan_degraded, 0) : pan_degraded;
    double acc = 0;
    for (std::size_t b = 0; b < c; ++b) {
        acc += std::fabs(q_index(band(fused, b), pan2, window) -
                         q_index(band(ms_lowres, b), panl2, window));
    }
    return acc / static_cast<double>(c);
}

inline double hqnr(double dl, double ds) { return (1.0 - dl) * (1.0 - ds); }

// ---------------------------------------------------------------------------
// Per-split report, serialized as CSV with trailing mean and std rows.
// ---------------------------------------------------------------------------

struct MetricRow {
    std::string id;
    // NaN marks a metric that was not computed for this row.
    double sam = std::numeric_limits<double>::quiet_NaN();
    double ergas = std::numeric_limits<double>::quiet_NaN();
    double psnr = std::numeric_limits<double>::quiet_NaN();
    double ssim = std::numeric_limits<double>::quiet_NaN();
    double q2n = std::numeric_limits<double>::quiet_NaN();
    double d_lambda = std::numeric_limits<double>::quiet_NaN();
    double d_s = std::numeric_limits<double>::quiet_NaN();
    double hqnr = std::numeric_limits<double>::quiet_NaN();
};

struct MetricReport {
    std::vector<MetricRow> rows;

    MetricRow aggregate_mean() const;
    MetricRow aggregate_std() const;
    std::string to_csv() const;
    void write_csv(const std::string& path) const;
};

}  // namespace lformer::metrics
