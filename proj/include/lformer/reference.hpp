#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

// Plain nested-loop reference implementations, kept deliberately naive and
// independent of kernels.hpp. Tests check the optimized kernels against these,
// and the kernel benchmark uses them as the serial baseline.

namespace lformer::reference {

using i64 = std::int64_t;

template <typename T>
void matmul(const T* a, const T* b, T* c, i64 m, i64 k, i64 n) {
    for (i64 i = 0; i < m; ++i) {
        for (i64 j = 0; j < n; ++j) {
            T acc(0);
            for (i64 kk = 0; kk < k; ++kk) acc += a[i * k + kk] * b[kk * n + j];
            c[i * n + j] = acc;
        }
    }
}

template <typename T>
void conv2d(const T* x, const T* w, const T* bias, T* out, i64 h, i64 wd, i64 ci, i64 co, i64 kh,
            i64 kw) {
    const i64 ph = kh / 2, pw = kw / 2;
    for (i64 y = 0; y < h; ++y) {
        for (i64 x0 = 0; x0 < wd; ++x0) {
            for (i64 o = 0; o < co; ++o) {
                T acc = bias ? bias[o] : T(0);
                for (i64 ky = 0; ky < kh; ++ky) {
                    for (i64 kx = 0; kx < kw; ++kx) {
                        const i64 yy = y + ky - ph;
                        const i64 xx = x0 + kx - pw;
                        if (yy < 0 || yy >= h || xx < 0 || xx >= wd) continue;
                        for (i64 c = 0; c < ci; ++c)
                            acc += x[(yy * wd + xx) * ci + c] * w[((ky * kw + kx) * ci + c) * co + o];
                    }
                }
                out[(y * wd + x0) * co + o] = acc;
            }
        }
    }
}

template <typename T>
void conv1d_rows(const T* x, const T* k, T* out, i64 rows, i64 len, i64 kw) {
    const i64 p = kw / 2;
    for (i64 r = 0; r < rows; ++r) {
        for (i64 j = 0; j < len; ++j) {
            T acc(0);
            for (i64 t = 0; t < kw; ++t) {
                const i64 src = j + t - p;
                if (src < 0 || src >= len) continue;
                acc += x[r * len + src] * k[t];
            }
            out[r * len + j] = acc;
        }
    }
}

// Scaled dot-product attention, one query row at a time: logits, stable
// softmax, then the weighted sum of value rows.
template <typename T>
void attention(const T* q, const T* kmat, const T* v, T* out, T* map, i64 t, i64 c) {
    const T scale = T(1) / std::sqrt(static_cast<T>(c));
    std::vector<T> row(static_cast<std::size_t>(t));
    for (i64 i = 0; i < t; ++i) {
        T mx = -std::numeric_limits<T>::infinity();
        for (i64 j = 0; j < t; ++j) {
            T s(0);
            for (i64 d = 0; d < c; ++d) s += q[i * c + d] * kmat[j * c + d];
            s *= scale;
            row[j] = s;
            if (s > mx) mx = s;
        }
        T sum(0);
        for (i64 j = 0; j < t; ++j) {
            row[j] = std::exp(row[j] - mx);
            sum += row[j];
        }
        for (i64 j = 0; j < t; ++j) {
            row[j] /= sum;
            if (map) map[i * t + j] = row[j];
        }
        for (i64 d = 0; d < c; ++d) {
            T acc(0);
            for (i64 j = 0; j < t; ++j) acc += row[j] * v[j * c + d];
            out[i * c + d] = acc;
        }
    }
}

}  // namespace lformer::reference
