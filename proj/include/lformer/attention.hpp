#pragma once

#include <cmath>
#include <vector>

#include "lformer/ops.hpp"

// Scaled dot-product attention, cross-modality attention, the cascaded
// reference chain, and attention-map evolution by learned 1-d convolution.
//
// An attention map is a [T x T] row-stochastic tensor: entry (i, j) is the
// weight query i places on key j. Every path below produces rows that sum to 1.

namespace lformer::attention {

template <typename T>
struct AttentionOut {
    Tensor<T> output;  // [T x C]
    Tensor<T> map;     // [T x T], row-stochastic
};

// Y = softmax(Q K^T / sqrt(C)) V. The scale uses the embedding width C.
template <typename T>
AttentionOut<T> scaled_dot_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v) {
    if (q.ndim() != 2 || k.ndim() != 2 || v.ndim() != 2 || q.shape() != k.shape() ||
        k.shape() != v.shape())
        throw DimensionError("scaled_dot_attention: Q " + shape_str(q.shape()) + ", K " +
                             shape_str(k.shape()) + ", V " + shape_str(v.shape()) +
                             " must be identical [TxC]");
    const T inv_sqrt_d = T(1) / std::sqrt(static_cast<T>(q.dim(1)));
    Tensor<T> logits = ops::scale(ops::matmul_nt(q, k), inv_sqrt_d);
    Tensor<T> map = ops::softmax(logits, 1);
    return {ops::matmul(map, v), map};
}

// First-block cross attention: PAN tokens query, MS tokens act as key and value.
template <typename T>
AttentionOut<T> cross_attention_first(const Tensor<T>& f_pan, const Tensor<T>& f_ms) {
    return scaled_dot_attention(f_pan, f_ms, f_ms);
}

// A_{i+1} = softmax(A_i * C1_i): every row of the map is convolved with the
// learned 1 x k kernel along the key axis, then renormalized row-wise.
template <typename T>
Tensor<T> evolve_attention(const Tensor<T>& map, const Tensor<T>& kernel) {
    if (map.ndim() != 2 || map.dim(0) != map.dim(1))
        throw DimensionError("evolve_attention: map must be square, got " + shape_str(map.shape()));
    return ops::softmax(ops::conv1d_rows(map, kernel), 1);
}

// Token-space linear maps for Q, K, V (1x1 convolutions over tokens).
template <typename T>
struct QkvProjection {
    Tensor<T> wq, bq;  // [C x C], [C]
    Tensor<T> wk, bk;
    Tensor<T> wv, bv;
};

template <typename T, typename InitF>
QkvProjection<T> make_qkv(std::size_t c, InitF init_mat) {
    QkvProjection<T> p;
    p.wq = init_mat();
    p.bq = Tensor<T>::zeros({c});
    p.wk = init_mat();
    p.bk = Tensor<T>::zeros({c});
    p.wv = init_mat();
    p.bv = Tensor<T>::zeros({c});
    return p;
}

template <typename T>
struct QkvTokens {
    Tensor<T> q, k, v;
};

template <typename T>
QkvTokens<T> qkv_apply(const QkvProjection<T>& p, const Tensor<T>& x) {
    return {ops::add_rowvec(ops::matmul(x, p.wq), p.bq),
            ops::add_rowvec(ops::matmul(x, p.wk), p.bk),
            ops::add_rowvec(ops::matmul(x, p.wv), p.bv)};
}

// The plain N-cascaded chain: each stage projects the previous output to
// fresh Q/K/V and recomputes full dot-product attention. Kept as the
// reference/ablation path the evolved chain is compared against.
template <typename T>
std::vector<AttentionOut<T>> cascaded_chain_reference(const Tensor<T>& x, std::size_t n,
                                                      const std::vector<QkvProjection<T>>& projs) {
    if (n < 1) throw ConfigError("cascaded_chain_reference: need at least one stage");
    if (projs.size() < n)
        throw ConfigError("cascaded_chain_reference: " + std::to_string(projs.size()) +
                          " projections for " + std::to_string(n) + " stages");
    std::vector<AttentionOut<T>> stages;
    Tensor<T> y = x;
    for (std::size_t r = 0; r < n; ++r) {
        QkvTokens<T> t = qkv_apply(projs[r], y);
        stages.push_back(scaled_dot_attention(t.q, t.k, t.v));
        y = stages.back().output;
    }
    return stages;
}

// Cosine similarity of two flattened maps; 1 when identical.
template <typename T>
T attention_cosine_similarity(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape() != b.shape())
        throw DimensionError("attention_cosine_similarity: " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
    const auto av = a.data();
    const auto bv = b.data();
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < av.size(); ++i) {
        dot += static_cast<double>(av[i]) * bv[i];
        na += static_cast<double>(av[i]) * av[i];
        nb += static_cast<double>(bv[i]) * bv[i];
    }
    if (na == 0 || nb == 0)
        throw NumericError("attention_cosine_similarity: zero-norm attention map");
    return static_cast<T>(dot / (std::sqrt(na) * std::sqrt(nb)));
}

// Row-stochastic check used by tests and debug assertions.
template <typename T>
bool is_row_stochastic(const Tensor<T>& map, T tol) {
    if (map.ndim() != 2) return false;
    const std::size_t rows = map.dim(0), cols = map.dim(1);
    const auto v = map.data();
    for (std::size_t r = 0; r < rows; ++r) {
        T sum(0);
        for (std::size_t c0 = 0; c0 < cols; ++c0) {
            const T e = v[r * cols + c0];
            if (e < T(0) || e > T(1) + tol) return false;
            sum += e;
        }
        if (std::fabs(static_cast<double>(sum - T(1))) > static_cast<double>(tol)) return false;
    }
    return true;
}

}  // namespace lformer::attention
