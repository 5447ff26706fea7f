#pragma once

#include <cmath>
#include <vector>

#include "lformer/ops.hpp"

// Reusable layers: convolution parameter bundles, projection and residual
// blocks, Sobel high-pass extraction, fan-in initialization, token flattening.

namespace lformer::nn {

// Fan-in scaled uniform init: values in (-sqrt(6/fan_in), sqrt(6/fan_in)).
template <typename T>
Tensor<T> uniform_init(Shape shape, std::size_t fan_in, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::vector<T> vals(shape_numel(shape));
    for (auto& v : vals) v = static_cast<T>(rng.uniform(-bound, bound));
    return Tensor<T>(std::move(shape), std::move(vals));
}

template <typename T>
struct Conv2d {
    Tensor<T> w;  // [kh x kw x ci x co]
    Tensor<T> b;  // [co]
};

template <typename T>
Conv2d<T> make_conv2d(std::size_t kh, std::size_t kw, std::size_t ci, std::size_t co, Rng& rng,
                      bool zero_init = false) {
    Conv2d<T> c;
    if (zero_init)
        c.w = Tensor<T>::zeros({kh, kw, ci, co});
    else
        c.w = uniform_init<T>({kh, kw, ci, co}, kh * kw * ci, rng);
    c.b = Tensor<T>::zeros({co});
    return c;
}

template <typename T>
Tensor<T> conv_forward(const Conv2d<T>& c, const Tensor<T>& x) {
    return ops::conv2d(x, c.w, c.b);
}

// Proj(.): two 3x3 convs with a ReLU in between, channels cin -> d -> d.
// Spatial size is preserved (stride 1, same padding).
template <typename T>
struct ProjectionBlock {
    Conv2d<T> c1, c2;
};

template <typename T>
ProjectionBlock<T> make_projection(std::size_t cin, std::size_t d, Rng& rng) {
    return {make_conv2d<T>(3, 3, cin, d, rng), make_conv2d<T>(3, 3, d, d, rng)};
}

template <typename T>
Tensor<T> proj_forward(const ProjectionBlock<T>& p, const Tensor<T>& x) {
    return conv_forward(p.c2, ops::relu(conv_forward(p.c1, x)));
}

// RCB: conv -> ReLU -> conv plus identity skip; input and output widths match.
template <typename T>
struct ResidualConvBlock {
    Conv2d<T> c1, c2;
};

template <typename T>
ResidualConvBlock<T> make_rcb(std::size_t d, Rng& rng) {
    return {make_conv2d<T>(3, 3, d, d, rng), make_conv2d<T>(3, 3, d, d, rng)};
}

template <typename T>
Tensor<T> rcb_forward(const ResidualConvBlock<T>& b, const Tensor<T>& x) {
    return ops::add(x, conv_forward(b.c2, ops::relu(conv_forward(b.c1, x))));
}

// ---------------------------------------------------------------------------
// Sobel high-pass: per-channel gradient magnitude with fixed kernels.
// Border handling replicates edge pixels so a constant image maps to exact zero.
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> sobel_kernel_x(std::size_t channels) {
    static const T gx[9] = {-1, 0, 1, -2, 0, 2, -1, 0, 1};
    std::vector<T> vals(9 * channels);
    for (std::size_t i = 0; i < 9; ++i)
        for (std::size_t c = 0; c < channels; ++c) vals[i * channels + c] = gx[i];
    return Tensor<T>({3, 3, channels}, std::move(vals));
}

template <typename T>
Tensor<T> sobel_kernel_y(std::size_t channels) {
    static const T gy[9] = {-1, -2, -1, 0, 0, 0, 1, 2, 1};  // Gx transposed
    std::vector<T> vals(9 * channels);
    for (std::size_t i = 0; i < 9; ++i)
        for (std::size_t c = 0; c < channels; ++c) vals[i * channels + c] = gy[i];
    return Tensor<T>({3, 3, channels}, std::move(vals));
}

template <typename T>
Tensor<T> sobel_apply(const Tensor<T>& x) {
    if (x.ndim() != 3) throw DimensionError("sobel_apply expects [HxWxC], got " + shape_str(x.shape()));
    const std::size_t c = x.dim(2);
    // The kernels are zero-sum, so shifting by any constant leaves the exact
    // response unchanged; anchoring on the first pixel makes constant images
    // cancel bit-exactly instead of leaving accumulation-order residue.
    Tensor<T> shifted = ops::add_scalar(x, -x.data()[0]);
    Tensor<T> gx = ops::depthwise_conv2d(shifted, sobel_kernel_x<T>(c), ops::Pad::clamp);
    Tensor<T> gy = ops::depthwise_conv2d(shifted, sobel_kernel_y<T>(c), ops::Pad::clamp);
    return ops::sqrt(ops::add(ops::mul(gx, gx), ops::mul(gy, gy)));
}

// ---------------------------------------------------------------------------
// Token views: [H x W x C] <-> [HW x C], row-major pixel order. Both are
// zero-copy reshapes.
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> flatten_tokens(const Tensor<T>& x) {
    if (x.ndim() != 3) throw DimensionError("flatten_tokens expects [HxWxC], got " + shape_str(x.shape()));
    return ops::reshape(x, {x.dim(0) * x.dim(1), x.dim(2)});
}

template <typename T>
Tensor<T> unflatten_tokens(const Tensor<T>& t, std::size_t h, std::size_t w) {
    if (t.ndim() != 2) throw DimensionError("unflatten_tokens expects [TxC], got " + shape_str(t.shape()));
    if (t.dim(0) != h * w)
        throw DimensionError("unflatten_tokens: " + std::to_string(t.dim(0)) + " tokens cannot fill " +
                             std::to_string(h) + "x" + std::to_string(w));
    return ops::reshape(t, {h, w, t.dim(1)});
}

}  // namespace lformer::nn
