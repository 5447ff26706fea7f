#pragma once

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <vector>

#include "lformer/common.hpp"

// Data-parallel compute kernels. Every kernel parallelizes over independent
// output elements only, and each output element accumulates in a fixed order,
// so results are bit-identical between serial and parallel execution and
// across any thread count. Whole-tensor reductions stay serial for the same
// reason; they are O(n) and never dominate.

namespace lformer::kernels {

using i64 = std::int64_t;

enum class Exec { serial, parallel };

namespace detail {
inline std::atomic<Exec> g_exec{Exec::parallel};
}

inline Exec exec_mode() { return detail::g_exec.load(std::memory_order_relaxed); }
inline void set_exec_mode(Exec m) { detail::g_exec.store(m, std::memory_order_relaxed); }

struct ExecScope {
    explicit ExecScope(Exec m) : prev_(exec_mode()) { set_exec_mode(m); }
    ~ExecScope() { set_exec_mode(prev_); }
    ExecScope(const ExecScope&) = delete;
    ExecScope& operator=(const ExecScope&) = delete;

private:
    Exec prev_;
};

template <typename F>
void parallel_for(i64 n, F&& body) {
    if (exec_mode() == Exec::parallel && n > 1) {
#pragma omp parallel for schedule(static)
        for (i64 i = 0; i < n; ++i) body(i);
    } else {
        for (i64 i = 0; i < n; ++i) body(i);
    }
}

// ---------------------------------------------------------------------------
// matmul family: c[m x n], optionally accumulating into c.
// ---------------------------------------------------------------------------

// c = a[m x k] * b[k x n]. Narrow outputs (n small, the attention-apply and
// value shapes) process rows in tiles of 8 so each b row is loaded once per
// tile instead of once per row; every output element still accumulates over k
// in ascending order, so both paths produce identical bits.
template <typename T>
void matmul_nn(const T* a, const T* b, T* c, i64 m, i64 k, i64 n, bool accumulate = false) {
    if (n <= 32 && m >= 64 && k >= 64) {
        constexpr i64 kTile = 8;
        parallel_for((m + kTile - 1) / kTile, [=](i64 ti) {
            const i64 i0 = ti * kTile;
            const i64 i1 = std::min(m, i0 + kTile);
            if (!accumulate) std::fill(c + i0 * n, c + i1 * n, T(0));
            for (i64 kk = 0; kk < k; ++kk) {
                const T* brow = b + kk * n;
                for (i64 i = i0; i < i1; ++i) {
                    const T av = a[i * k + kk];
                    T* crow = c + i * n;
                    for (i64 j = 0; j < n; ++j) crow[j] += av * brow[j];
                }
            }
        });
        return;
    }
    parallel_for(m, [=](i64 i) {
        T* crow = c + i * n;
        if (!accumulate) std::fill(crow, crow + n, T(0));
        const T* arow = a + i * k;
        for (i64 kk = 0; kk < k; ++kk) {
            const T av = arow[kk];
            const T* brow = b + kk * n;
            for (i64 j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    });
}

// c = a[m x k] * b^T, b given as [n x k]. Skinny inner dimensions (attention
// logits: k is the channel width, n the token count) go through a transposed
// copy of b so the inner loop is a long contiguous axpy; either path
// accumulates taps in ascending k order, so results stay deterministic.
template <typename T>
void matmul_nt(const T* a, const T* b, T* c, i64 m, i64 k, i64 n, bool accumulate = false) {
    if (k <= 64 && n >= 4 * k && m * n >= (1 << 14)) {
        std::vector<T> bt(static_cast<std::size_t>(k) * n);
        for (i64 j = 0; j < n; ++j)
            for (i64 kk = 0; kk < k; ++kk) bt[kk * n + j] = b[j * k + kk];
        matmul_nn(a, bt.data(), c, m, k, n, accumulate);
        return;
    }
    parallel_for(m, [=](i64 i) {
        const T* arow = a + i * k;
        T* crow = c + i * n;
        for (i64 j = 0; j < n; ++j) {
            const T* brow = b + j * k;
            T a0(0), a1(0), a2(0), a3(0);
            i64 kk = 0;
            for (; kk + 4 <= k; kk += 4) {
                a0 += arow[kk] * brow[kk];
                a1 += arow[kk + 1] * brow[kk + 1];
                a2 += arow[kk + 2] * brow[kk + 2];
                a3 += arow[kk + 3] * brow[kk + 3];
            }
            T acc = (a0 + a1) + (a2 + a3);
            for (; kk < k; ++kk) acc += arow[kk] * brow[kk];
            crow[j] = accumulate ? crow[j] + acc : acc;
        }
    });
}

// c = a^T * b, a given as [k x m], b as [k x n]. Columns of a are walked in
// tiles of 128 so the k-major pass streams a exactly once while the output
// tile stays cache-resident; per output element the k order is ascending, so
// the tiling does not change a single bit.
template <typename T>
void matmul_tn(const T* a, const T* b, T* c, i64 m, i64 k, i64 n, bool accumulate = false) {
    constexpr i64 kTile = 128;
    parallel_for((m + kTile - 1) / kTile, [=](i64 ti) {
        const i64 i0 = ti * kTile;
        const i64 i1 = std::min(m, i0 + kTile);
        if (!accumulate) std::fill(c + i0 * n, c + i1 * n, T(0));
        for (i64 kk = 0; kk < k; ++kk) {
            const T* arow = a + kk * m;
            const T* brow = b + kk * n;
            for (i64 i = i0; i < i1; ++i) {
                const T av = arow[i];
                T* crow = c + i * n;
                for (i64 j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    });
}

// ---------------------------------------------------------------------------
// conv2d, HWC layout, stride 1, zero "same" padding, cross-correlation.
// Weights are [kh x kw x ci x co].
// ---------------------------------------------------------------------------

template <typename T>
void conv2d_fwd(const T* x, const T* w, const T* bias, T* out, i64 h, i64 wd, i64 ci, i64 co,
                i64 kh, i64 kw) {
    const i64 ph = kh / 2, pw = kw / 2;
    parallel_for(h, [=](i64 y) {
        for (i64 x0 = 0; x0 < wd; ++x0) {
            T* orow = out + (y * wd + x0) * co;
            if (bias)
                std::copy(bias, bias + co, orow);
            else
                std::fill(orow, orow + co, T(0));
            for (i64 ky = 0; ky < kh; ++ky) {
                const i64 yy = y + ky - ph;
                if (yy < 0 || yy >= h) continue;
                for (i64 kx = 0; kx < kw; ++kx) {
                    const i64 xx = x0 + kx - pw;
                    if (xx < 0 || xx >= wd) continue;
                    const T* xpix = x + (yy * wd + xx) * ci;
                    const T* wrow = w + ((ky * kw + kx) * ci) * co;
                    for (i64 c = 0; c < ci; ++c) {
                        const T xv = xpix[c];
                        const T* wc = wrow + c * co;
                        for (i64 o = 0; o < co; ++o) orow[o] += xv * wc[o];
                    }
                }
            }
        }
    });
}

template <typename T>
void conv2d_grad_x(const T* dout, const T* w, T* dx, i64 h, i64 wd, i64 ci, i64 co, i64 kh,
                   i64 kw) {
    const i64 ph = kh / 2, pw = kw / 2;
    parallel_for(h, [=](i64 y) {
        for (i64 x0 = 0; x0 < wd; ++x0) {
            T* drow = dx + (y * wd + x0) * ci;
            for (i64 ky = 0; ky < kh; ++ky) {
                const i64 yy = y - ky + ph;  // output position that read (y, x0) via (ky, kx)
                if (yy < 0 || yy >= h) continue;
                for (i64 kx = 0; kx < kw; ++kx) {
                    const i64 xx = x0 - kx + pw;
                    if (xx < 0 || xx >= wd) continue;
                    const T* gpix = dout + (yy * wd + xx) * co;
                    const T* wrow = w + ((ky * kw + kx) * ci) * co;
                    for (i64 c = 0; c < ci; ++c) {
                        const T* wc = wrow + c * co;
                        T acc(0);
                        for (i64 o = 0; o < co; ++o) acc += gpix[o] * wc[o];
                        drow[c] += acc;
                    }
                }
            }
        }
    });
}

template <typename T>
void conv2d_grad_w(const T* x, const T* dout, T* dw, i64 h, i64 wd, i64 ci, i64 co, i64 kh,
                   i64 kw) {
    const i64 ph = kh / 2, pw = kw / 2;
    parallel_for(kh * kw * ci, [=](i64 idx) {
        const i64 ky = idx / (kw * ci);
        const i64 kx = (idx / ci) % kw;
        const i64 c = idx % ci;
        T* dwrow = dw + idx * co;
        for (i64 y = 0; y < h; ++y) {
            const i64 yy = y + ky - ph;
            if (yy < 0 || yy >= h) continue;
            for (i64 x0 = 0; x0 < wd; ++x0) {
                const i64 xx = x0 + kx - pw;
                if (xx < 0 || xx >= wd) continue;
                const T xv = x[(yy * wd + xx) * ci + c];
                const T* gpix = dout + (y * wd + x0) * co;
                for (i64 o = 0; o < co; ++o) dwrow[o] += xv * gpix[o];
            }
        }
    });
}

template <typename T>
void conv2d_grad_b(const T* dout, T* db, i64 pixels, i64 co) {
    parallel_for(co, [=](i64 o) {
        T acc(0);
        for (i64 p = 0; p < pixels; ++p) acc += dout[p * co + o];
        db[o] += acc;
    });
}

// ---------------------------------------------------------------------------
// Depthwise conv2d: one kh x kw kernel per channel, weights [kh x kw x c].
// ---------------------------------------------------------------------------

enum class Pad { valid, zero, clamp };

inline i64 depthwise_out_dim(i64 in, i64 k, Pad pad) { return pad == Pad::valid ? in - k + 1 : in; }

template <typename T>
void depthwise_fwd(const T* x, const T* w, T* out, i64 h, i64 wd, i64 c, i64 kh, i64 kw, Pad pad) {
    const i64 oh = depthwise_out_dim(h, kh, pad);
    const i64 ow = depthwise_out_dim(wd, kw, pad);
    const i64 ph = pad == Pad::valid ? 0 : kh / 2;
    const i64 pw = pad == Pad::valid ? 0 : kw / 2;
    parallel_for(oh, [=](i64 y) {
        for (i64 x0 = 0; x0 < ow; ++x0) {
            T* opix = out + (y * ow + x0) * c;
            std::fill(opix, opix + c, T(0));
            for (i64 ky = 0; ky < kh; ++ky) {
                i64 yy = y + ky - ph;
                if (pad == Pad::clamp)
                    yy = std::clamp<i64>(yy, 0, h - 1);
                else if (yy < 0 || yy >= h)
                    continue;
                for (i64 kx = 0; kx < kw; ++kx) {
                    i64 xx = x0 + kx - pw;
                    if (pad == Pad::clamp)
                        xx = std::clamp<i64>(xx, 0, wd - 1);
                    else if (xx < 0 || xx >= wd)
                        continue;
                    const T* xpix = x + (yy * wd + xx) * c;
                    const T* wpix = w + (ky * kw + kx) * c;
                    for (i64 ch = 0; ch < c; ++ch) opix[ch] += xpix[ch] * wpix[ch];
                }
            }
        }
    });
}

// Scatter form; channels are independent, so the parallel axis is the channel.
template <typename T>
void depthwise_grad_x(const T* dout, const T* w, T* dx, i64 h, i64 wd, i64 c, i64 kh, i64 kw,
                      Pad pad) {
    const i64 oh = depthwise_out_dim(h, kh, pad);
    const i64 ow = depthwise_out_dim(wd, kw, pad);
    const i64 ph = pad == Pad::valid ? 0 : kh / 2;
    const i64 pw = pad == Pad::valid ? 0 : kw / 2;
    parallel_for(c, [=](i64 ch) {
        for (i64 y = 0; y < oh; ++y) {
            for (i64 x0 = 0; x0 < ow; ++x0) {
                const T g = dout[(y * ow + x0) * c + ch];
                for (i64 ky = 0; ky < kh; ++ky) {
                    i64 yy = y + ky - ph;
                    if (pad == Pad::clamp)
                        yy = std::clamp<i64>(yy, 0, h - 1);
                    else if (yy < 0 || yy >= h)
                        continue;
                    for (i64 kx = 0; kx < kw; ++kx) {
                        i64 xx = x0 + kx - pw;
                        if (pad == Pad::clamp)
                            xx = std::clamp<i64>(xx, 0, wd - 1);
                        else if (xx < 0 || xx >= wd)
                            continue;
                        dx[(yy * wd + xx) * c + ch] += g * w[(ky * kw + kx) * c + ch];
                    }
                }
            }
        }
    });
}

template <typename T>
void depthwise_grad_w(const T* x, const T* dout, T* dw, i64 h, i64 wd, i64 c, i64 kh, i64 kw,
                      Pad pad) {
    const i64 oh = depthwise_out_dim(h, kh, pad);
    const i64 ow = depthwise_out_dim(wd, kw, pad);
    const i64 ph = pad == Pad::valid ? 0 : kh / 2;
    const i64 pw = pad == Pad::valid ? 0 : kw / 2;
    parallel_for(kh * kw * c, [=](i64 idx) {
        const i64 ky = idx / (kw * c);
        const i64 kx = (idx / c) % kw;
        const i64 ch = idx % c;
        T acc(0);
        for (i64 y = 0; y < oh; ++y) {
            for (i64 x0 = 0; x0 < ow; ++x0) {
                i64 yy = y + ky - ph;
                i64 xx = x0 + kx - pw;
                if (pad == Pad::clamp) {
                    yy = std::clamp<i64>(yy, 0, h - 1);
                    xx = std::clamp<i64>(xx, 0, wd - 1);
                } else if (yy < 0 || yy >= h || xx < 0 || xx >= wd) {
                    continue;
                }
                acc += x[(yy * wd + xx) * c + ch] * dout[(y * ow + x0) * c + ch];
            }
        }
        dw[idx] += acc;
    });
}

// ---------------------------------------------------------------------------
// Row-wise 1-D convolution: the same 1 x kw kernel applied to every row,
// zero "same" padding along the row.
// ---------------------------------------------------------------------------

namespace detail {

// One row, generic width: taps accumulate in ascending order per element.
template <typename T>
void conv1d_row_any(const T* xrow, const T* k, T* orow, i64 len, i64 kw) {
    const i64 p = kw / 2;
    for (i64 j = 0; j < len; ++j) {
        T acc(0);
        const i64 t0 = std::max<i64>(0, p - j);
        const i64 t1 = std::min<i64>(kw, len + p - j);
        for (i64 t = t0; t < t1; ++t) acc += xrow[j + t - p] * k[t];
        orow[j] = acc;
    }
}

// One row, compile-time width: the interior loop is a fixed stencil the
// vectorizer handles well; borders fall back to the guarded form. Tap order
// matches conv1d_row_any exactly.
template <typename T, int KW>
void conv1d_row_fixed(const T* xrow, const T* k, T* orow, i64 len) {
    constexpr i64 p = KW / 2;
    if (len < KW) {
        conv1d_row_any(xrow, k, orow, len, KW);
        return;
    }
    for (i64 j = 0; j < p; ++j) {
        T acc(0);
        for (i64 t = p - j; t < KW; ++t) acc += xrow[j + t - p] * k[t];
        orow[j] = acc;
    }
    for (i64 j = p; j < len - p; ++j) {
        T acc(0);
        for (int t = 0; t < KW; ++t) acc += xrow[j + t - p] * k[t];
        orow[j] = acc;
    }
    for (i64 j = len - p; j < len; ++j) {
        T acc(0);
        const i64 t1 = len + p - j;
        for (i64 t = 0; t < t1; ++t) acc += xrow[j + t - p] * k[t];
        orow[j] = acc;
    }
}

}  // namespace detail

template <typename T>
void conv1d_rows_fwd(const T* x, const T* k, T* out, i64 rows, i64 len, i64 kw) {
    parallel_for(rows, [=](i64 r) {
        const T* xrow = x + r * len;
        T* orow = out + r * len;
        switch (kw) {
            case 1: detail::conv1d_row_fixed<T, 1>(xrow, k, orow, len); break;
            case 3: detail::conv1d_row_fixed<T, 3>(xrow, k, orow, len); break;
            case 5: detail::conv1d_row_fixed<T, 5>(xrow, k, orow, len); break;
            case 7: detail::conv1d_row_fixed<T, 7>(xrow, k, orow, len); break;
            default: detail::conv1d_row_any(xrow, k, orow, len, kw); break;
        }
    });
}

// dx[i] += sum_t dout[i - t + p] k[t]: the same correlation with the kernel
// reversed, so it reuses the row stencils with a flipped tap table.
template <typename T>
void conv1d_rows_grad_x(const T* dout, const T* k, T* dx, i64 rows, i64 len, i64 kw) {
    T rev[16];
    std::vector<T> rev_big;
    const T* krev = rev;
    if (kw <= 16) {
        for (i64 t = 0; t < kw; ++t) rev[t] = k[kw - 1 - t];
    } else {
        rev_big.resize(static_cast<std::size_t>(kw));
        for (i64 t = 0; t < kw; ++t) rev_big[static_cast<std::size_t>(t)] = k[kw - 1 - t];
        krev = rev_big.data();
    }
    std::vector<T> tmp(static_cast<std::size_t>(rows) * len);
    conv1d_rows_fwd(dout, krev, tmp.data(), rows, len, kw);
    T* tp = tmp.data();
    parallel_for(rows * len, [=](i64 i) { dx[i] += tp[i]; });
}

template <typename T>
void conv1d_rows_grad_k(const T* x, const T* dout, T* dk, i64 rows, i64 len, i64 kw) {
    const i64 p = kw / 2;
    parallel_for(kw, [=](i64 t) {
        T acc(0);
        for (i64 r = 0; r < rows; ++r) {
            const T* xrow = x + r * len;
            const T* grow = dout + r * len;
            const i64 j0 = std::max<i64>(0, p - t);
            const i64 j1 = std::min<i64>(len, len + p - t);
            for (i64 j = j0; j < j1; ++j) acc += xrow[j + t - p] * grow[j];
        }
        dk[t] += acc;
    });
}

// ---------------------------------------------------------------------------
// Softmax over strided slices (outer x len x inner view of the buffer).
//
// The float path uses a polynomial exp (Cephes coefficients, ~2 ulp) because
// libm expf does not vectorize without fast-math; the double path keeps
// std::exp, which the reference-grade tests rely on.
// ---------------------------------------------------------------------------

inline float poly_expf(float x) {
    x = std::min(x, 88.0f);
    x = std::max(x, -87.0f);
    const float fx = std::floor(x * 1.44269504088896341f + 0.5f);
    x -= fx * 0.693359375f;
    x -= fx * -2.12194440e-4f;
    float y = 1.9875691500e-4f;
    y = y * x + 1.3981999507e-3f;
    y = y * x + 8.3334519073e-3f;
    y = y * x + 4.1665795894e-2f;
    y = y * x + 1.6666665459e-1f;
    y = y * x + 5.0000001201e-1f;
    y = y * (x * x) + x + 1.0f;
    const std::int32_t pow2 = (static_cast<std::int32_t>(fx) + 127) << 23;
    return y * std::bit_cast<float>(pow2);
}

template <typename T>
T softmax_exp(T x) {
    if constexpr (std::is_same_v<T, float>)
        return poly_expf(x);
    else
        return std::exp(x);
}

template <typename T>
void softmax_strided(const T* x, T* out, i64 outer, i64 len, i64 inner) {
    if (inner == 1) {  // contiguous rows: let the exp loop vectorize
        parallel_for(outer, [=](i64 o) {
            const T* xs = x + o * len;
            T* os = out + o * len;
            T mx = xs[0];
#pragma omp simd reduction(max : mx)
            for (i64 i = 0; i < len; ++i) mx = std::max(mx, xs[i]);
            T sum(0);
#pragma omp simd reduction(+ : sum)
            for (i64 i = 0; i < len; ++i) {
                const T e = softmax_exp(xs[i] - mx);
                os[i] = e;
                sum += e;
            }
            const T inv = T(1) / sum;
            for (i64 i = 0; i < len; ++i) os[i] *= inv;
        });
        return;
    }
    parallel_for(outer * inner, [=](i64 s) {
        const i64 o = s / inner;
        const i64 in = s % inner;
        const T* xs = x + o * len * inner + in;
        T* os = out + o * len * inner + in;
        T mx = xs[0];
        for (i64 i = 1; i < len; ++i) mx = std::max(mx, xs[i * inner]);
        T sum(0);
        for (i64 i = 0; i < len; ++i) {
            const T e = softmax_exp(xs[i * inner] - mx);
            os[i * inner] = e;
            sum += e;
        }
        const T inv = T(1) / sum;
        for (i64 i = 0; i < len; ++i) os[i * inner] *= inv;
    });
}

// dx += y .* (dy - <dy, y>) per slice
template <typename T>
void softmax_grad_strided(const T* y, const T* dy, T* dx, i64 outer, i64 len, i64 inner) {
    parallel_for(outer * inner, [=](i64 s) {
        const i64 o = s / inner;
        const i64 in = s % inner;
        const T* ys = y + o * len * inner + in;
        const T* dys = dy + o * len * inner + in;
        T* dxs = dx + o * len * inner + in;
        T dot(0);
        for (i64 i = 0; i < len; ++i) dot += dys[i * inner] * ys[i * inner];
        for (i64 i = 0; i < len; ++i) dxs[i * inner] += ys[i * inner] * (dys[i * inner] - dot);
    });
}

// ---------------------------------------------------------------------------
// Elementwise maps. Reductions are intentionally serial (see file comment).
// ---------------------------------------------------------------------------

template <typename T, typename F>
void map1(const T* x, T* out, i64 n, F f) {
    parallel_for(n, [=](i64 i) { out[i] = f(x[i]); });
}

template <typename T, typename F>
void map2(const T* a, const T* b, T* out, i64 n, F f) {
    parallel_for(n, [=](i64 i) { out[i] = f(a[i], b[i]); });
}

template <typename T>
T reduce_sum(const T* x, i64 n) {
    T acc(0);
    for (i64 i = 0; i < n; ++i) acc += x[i];
    return acc;
}

}  // namespace lformer::kernels
