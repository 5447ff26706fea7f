#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lformer/flops.hpp"
#include "lformer/kernels.hpp"
#include "lformer/tensor.hpp"

// Differentiable operations over Tensor<T>. Forward work goes through the
// kernels layer; when an input carries gradient a backward rule is recorded on
// its tape. Gradients accumulate, so one tensor may feed many ops.

namespace lformer::ops {

using kernels::i64;

namespace detail {

using lformer::detail::common_tape;
using lformer::detail::guard_finite;

template <typename T>
bool maybe_track(Tensor<T>& out, std::initializer_list<const Tensor<T>*> ins, Tape<T>*& tape) {
    tape = common_tape<T>(ins);
    if (!tape) return false;
    bool any = false;
    for (const Tensor<T>* t : ins) any = any || (t->defined() && t->requires_grad());
    if (!any) return false;
    out.set_requires_grad(true);
    return true;
}

template <typename T>
void axpy_grad(std::vector<T>& dst, std::span<const T> src, T scale) {
    T* d = dst.data();
    const T* s = src.data();
    kernels::parallel_for(static_cast<i64>(dst.size()), [=](i64 i) { d[i] += scale * s[i]; });
}

inline void check_same_shape(const char* op, const Shape& a, const Shape& b) {
    if (a != b)
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " +
                             shape_str(b));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise
// ---------------------------------------------------------------------------

template <typename T, typename FwdF, typename BwdF>
Tensor<T> unary_map(const char* name, const Tensor<T>& x, FwdF fwd, BwdF dfdx) {
    std::vector<T> vals(x.numel());
    kernels::map1(x.data().data(), vals.data(), static_cast<i64>(vals.size()), fwd);
    flops::add_elementwise(static_cast<std::int64_t>(x.numel()));
    Tensor<T> out(x.shape(), std::move(vals));
    detail::guard_finite<T>(name, out.data());
    Tape<T>* tape = nullptr;
    if (detail::maybe_track(out, {&x}, tape)) {
        auto xn = x.node();
        auto on = out.node();
        tape->record(
            [xn, on, dfdx]() {
                if (on->grad.empty()) return;
                xn->ensure_grad();
                const T* g = on->grad.data();
                const T* xv = xn->values->data();
                T* dx = xn->grad.data();
                kernels::parallel_for(static_cast<i64>(xn->grad.size()),
                                      [=](i64 i) { dx[i] += g[i] * dfdx(xv[i]); });
            },
            {xn, on});
    }
    return out;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
    return unary_map(
        "relu", x, [](T v) { return v > T(0) ? v : T(0); },
        [](T v) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> abs(const Tensor<T>& x) {
    return unary_map(
        "abs", x, [](T v) { return v < T(0) ? -v : v; },
        [](T v) { return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)); });
}

// Domain x >= 0. The derivative at 0 uses the one-sided subgradient 0 so that
// gradient magnitudes stay finite on exactly-flat inputs.
template <typename T>
Tensor<T> sqrt(const Tensor<T>& x) {
    return unary_map(
        "sqrt", x, [](T v) { return std::sqrt(v); },
        [](T v) { return v > T(0) ? T(0.5) / std::sqrt(v) : T(0); });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T c) {
    return unary_map(
        "scale", x, [c](T v) { return c * v; }, [c](T) { return c; });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& x, T c) {
    return unary_map(
        "add_scalar", x, [c](T v) { return v + c; }, [](T) { return T(1); });
}

template <typename T, typename FwdF, typename DaF, typename DbF>
Tensor<T> binary_map(const char* name, const Tensor<T>& a, const Tensor<T>& b, FwdF fwd, DaF dfda,
                     DbF dfdb) {
    detail::check_same_shape(name, a.shape(), b.shape());
    std::vector<T> vals(a.numel());
    kernels::map2(a.data().data(), b.data().data(), vals.data(), static_cast<i64>(vals.size()),
                  fwd);
    flops::add_elementwise(static_cast<std::int64_t>(a.numel()));
    Tensor<T> out(a.shape(), std::move(vals));
    detail::guard_finite<T>(name, out.data());
    Tape<T>* tape = nullptr;
    if (detail::maybe_track(out, {&a, &b}, tape)) {
        auto an = a.node();
        auto bn = b.node();
        auto on = out.node();
        tape->record(
            [an, bn, on, dfda, dfdb]() {
                if (on->grad.empty()) return;
                const T* g = on->grad.data();
                const T* av = an->values->data();
                const T* bv = bn->values->data();
                const i64 n = static_cast<i64>(on->grad.size());
                if (an->requires_grad) {
                    an->ensure_grad();
                    T* da = an->grad.data();
                    kernels::parallel_for(n, [=](i64 i) { da[i] += g[i] * dfda(av[i], bv[i]); });
                }
                if (bn->requires_grad) {
                    bn->ensure_grad();
                    T* db = bn->grad.data();
                    kernels::parallel_for(n, [=](i64 i) { db[i] += g[i] * dfdb(av[i], bv[i]); });
                }
            },
            {an, bn, on});
    }
    return out;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    return binary_map(
        "add", a, b, [](T x, T y) { return x + y; }, [](T, T) { return T(1); },
        [](T, T) { return T(1); });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    return binary_map(
        "sub", a, b, [](T x, T y) { return x - y; }, [](T, T) { return T(1); },
        [](T, T) { return T(-1); });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    return binary_map(
        "mul", a, b, [](T x, T y) { return x * y; }, [](T, T y) { return y; },
        [](T x, T) { return x; });
}

template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
    return binary_map(
        "div", a, b, [](T x, T y) { return x / y; }, [](T, T y) { return T(1) / y; },
        [](T x, T y) { return -x / (y * y); });
}

// x[R x C] + v[C], broadcast over rows.
template <typename T>
Tensor<T> add_rowvec(const Tensor<T>& x, const Tensor<T>& v) {
    if (x.ndim() != 2 || v.numel() != x.dim(1))
        throw DimensionError("add_rowvec: " + shape_str(x.shape()) + " vs " + shape_str(v.shape()));
    const i64 rows = static_cast<i64>(x.dim(0));
    const i64 cols = static_cast<i64>(x.dim(1));
    std::vector<T> vals(x.numel());
    {
        const T* xs = x.data().data();
        const T* vs = v.data().data();
        T* o = vals.data();
        kernels::parallel_for(rows, [=](i64 r) {
            for (i64 c = 0; c < cols; ++c) o[r * cols + c] = xs[r * cols + c] + vs[c];
        });
    }
    flops::add_elementwise(static_cast<std::int64_t>(x.numel()));
    Tensor<T> out(x.shape(), std::move(vals));
    detail::guard_finite<T>("add_rowvec", out.data());
    Tape<T>* tape = nullptr;
    if (detail::maybe_track(out, {&x, &v}, tape)) {
        auto xn = x.node();
        auto vn = v.node();
        auto on = out.node();
        tape->record(
            [xn, vn, on, rows, cols]() {
                if (on->grad.empty()) return;
                const T* g = on->grad.data();
                if (xn->requires_grad) {
                    xn->ensure_grad();
                    detail::axpy_grad(xn->grad, std::span<const T>(g, xn->grad.size()), T(1));
                }
                if (vn->requires_grad) {
                    vn->ensure_grad();
                    T* dv = vn->grad.data();
                    kernels::parallel_for(cols, [=](i64 c) {
                        T acc(0);
                        for (i64 r = 0; r < rows; ++r) acc += g[r * cols + c];
                        dv[c] += acc;
                    });
                }
            },
            {xn, vn, on});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
    flops::add_elementwise(static_cast<std::int64_t>(x.numel()));
    Tensor<T> out = Tensor<T>::scalar(kernels::reduce_sum(x.data().data(), static_cast<i64>(x.numel())));
    detail::guard_finite<T>("sum", out.data());
    Tape<T>* tape = nullptr;
    if (detail::maybe_track(out, {&x}, tape)) {
        auto xn = x.node();
        auto on = out.node();
        tape->record(
            [xn, on]() {
                if (on->grad.empty()) return;
                xn->ensure_grad();
                const T g = on->grad[0];
                T* dx = xn->grad.data();
                kernels::parallel_for(static_cast<i64>(xn->grad.size()),
                                      [=](i64 i) { dx[i] += g; });
            },
            {xn, on});
    }
    return out;
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
    const T inv = T(1) / static_cast<T>(x.numel());
    flops::add_elementwise(static_cast<std::int64_t>(x.numel()));
    Tensor<T> out =
        Tensor<T>::scalar(kernels::reduce_sum(x.data().data(), static_cast<i64>(x.numel())) * inv);
    detail::guard_finite<T>("mean", out.data());
    Tape<T>* tape = nullptr;
    if (detail::maybe_track(out, {&x}, tape)) {
        auto xn = x.node();
        auto on = out.node();
        tape->record(
            [xn, on, inv]() {
                if (on->grad.empty()) return;
                xn->ensure_grad();
                const T g = on->grad[0] * inv;
                T* dx = xn->grad.data();
                kernels::parallel_for(static_cast<i64>(xn->grad.size()),
                                      [=](i64 i) { dx[i] += g; });
            },
            {xn, on});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Shape ops
// ---------------------------------------------------------------------------

// Zero-copy: the result shares the value buffer.
template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
    if (shape_numel(shape) != x.numel())
        throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                             shape_str(shape));
    Tensor<T> out = x.detach();
    out.node()->shape = std::move(shape);
    Tape<T>* tape = nullptr;
    if (detail::maybe_track(out, {&x}, tape)) {
        auto xn = x.node();
        auto on = out.node();
        tape->record(
            [xn, on]() {
                if (on->grad.empty()) return;
                xn->ensure_grad();
                detail::axpy_grad(xn->grad, std::span<const T>(on->grad.data(), on->grad.size()),
                                  T(1));
            },
            {xn, on});
    }
    return out;
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& x) {
    if (x.ndim() != 2) throw DimensionError("transpose expects a 2-d tensor, got " + shape_str(x.shape()));
    const i64 r = static_cast<i64>(x.dim(0));
    const i64 c = static_cast<i64>(x.dim(1));
    std::vector<T> vals(x.numel());
    {
        const T* xs = x.data().data();
        T* o = vals.data();
        kernels::parallel_for(c, [=](i64 j) {
            for (i64 i = 0; i < r; ++i) o[j * r + i] = xs[i * c + j];
        });
    }
    Tensor<T> out(Shape{x.dim(1), x.dim(0)}, std::move(vals));
    Tape<T>* tape = nullptr;
    if (detail::maybe_track(out, {&x}, tape)) {
        auto xn = x.node();
        auto on = out.node();
        tape->record(
            [xn, on, r, c]() {
                if (on->grad.empty()) return;
                xn->ensure_grad();
                const T* g = on->grad.data();
                T* dx = xn->grad.data();
                kernels::parallel_for(r, [=](i64 i) {
                    for (i64 j = 0; j < c; ++j) dx[i * c + j] += g[j * r + i];
                });
            },
            {xn, on});
    }
    return out;
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& xs, std::size_t axis) {
    if (xs.empty()) throw DimensionError("concat of zero tensors");
    const Shape& s0 = xs[0].shape();
    if (axis >= s0.size()) throw DimensionError("concat: axis out of range");
    Shape out_shape = s0;
    std::size_t total = 0;
    for (const auto& x : xs) {
        const Shape& s = x.shape();
        if (s.size() != s0.size()) throw DimensionError("concat: rank mismatch");
        for (std::size_t d = 0; d < s.size(); ++d)
            if (d != axis && s[d] != s0[d])
                throw DimensionError("concat: shape mismatch " + shape_str(s0) + " vs " +
                                     shape_str(s));
        total += s[axis];
    }
    out_shape[axis] = total;

    std::size_t outer = 1, inner = 1;
    for (std::size_t d = 0; d < axis; ++d) outer *= s0[d];
    for (std::size_t d = axis + 1; d < s0.size(); ++d) inner *= s0[d];

    std::vector<T> vals(shape_numel(out_shape));
    std::size_t off = 0;
    for (const auto& x : xs) {
        const std::size_t len = x.dim(axis) * inner;
        const T* src = x.data().data();
        T* dst = vals.data();
        const std::size_t stride = total * inner;
        kernels::parallel_for(static_cast<i64>(outer), [=](i64 o) {
            std::copy(src + o * len, src + (o + 1) * len, dst + o * stride + off);
        });
        off += len;
    }
    Tensor<T> out(out_shape, std::move(vals));

    Tape<T>* tape = nullptr;
    bool any_grad = false;
    for (const auto& x : xs) {
        if (x.tape()) {
            if (tape && tape != x.tape()) throw Error("op mixes tensors from two different tapes");
            tape = x.tape();
        }
        any_grad = any_grad || x.requires_grad();
    }
    if (tape && any_grad) {
        out.set_requires_grad(true);
        std::vector<std::shared_ptr<lformer::detail::TensorNode<T>>> nodes;
        for (const auto& x : xs) nodes.push_back(x.node());
        auto on = out.node();
        auto in_nodes = nodes;
        nodes.push_back(on);
        const std::size_t total_inner = total * inner;
        tape->record(
            [in_nodes, on, outer, inner, total_inner, axis]() {
                if (on->grad.empty()) return;
                const T* g = on->grad.data();
                std::size_t off2 = 0;
                for (const auto& xn : in_nodes) {
                    const std::size_t len = xn->shape[axis] * inner;
                    if (xn->requires_grad) {
                        xn->ensure_grad();
                        T* dx = xn->grad.data();
                        const std::size_t o2 = off2;
                        kernels::parallel_for(static_cast<i64>(outer), [=](i64 o) {
                            const T* gs = g + o * total_inner + o2;
                            T* ds = dx + o * len;
                            for (std::size_t i = 0; i < len; ++i) ds[i] += gs[i];
                        });
                    }
                    off2 += len;
                }
            },
            nodes);
    }
    return out;
}

template <typename T>
Tensor<T> slice(const Tensor<T>& x, std::size_t axis, std::size_t start, std::size_t count) {
    const Shape& s = x.shape();
    if (axis >= s.size()) throw DimensionError("slice: axis out of range");
    if (start + count > s[axis])
        throw DimensionError("slice: range [" + std::to_string(start) + ", " +
                             std::to_string(start + count) + ") exceeds dim " +
                             std::to_string(s[axis]));
    Shape out_shape = s;
    out_shape[axis] = count;
    std::size_t outer = 1, inner = 1;
    for (std::size_t d = 0; d < axis; ++d) outer *= s[d];
    for (std::size_t d = axis + 1; d < s.size(); ++d) inner *= s[d];
    const std::size_t in_stride = s[axis] * inner;
    const std::size_t out_stride = count * inner;
    const std::size_t off = start * inner;

    std::vector<T> vals(shape_numel(out_shape));
    {
        const T* src = x.data().data();
        T* dst = vals.data();
        kernels::parallel_for(static_cast<i64>(outer), [=](i64 o) {
            std::copy(src + o * in_stride + off, src + o * in_stride + off + out_stride,
                      dst + o * out_stride);
        });
    }
    Tensor<T> out(out_shape, std::move(vals));
    Tape<T>* tape = nullptr;
    if (detail::maybe_track(out, {&x}, tape)) {
        auto xn = x.node();
        auto on = out.node();
        tape->record(
            [xn, on, outer, in_stride, out_stride, off]() {
                if (on->grad.empty()) return;
                xn->ensure_grad();
                const T* g = on->grad.data();
                T* dx = xn->grad.data();
                kernels::parallel_for(static_cast<i64>(outer), [=](i64 o) {
                    T* ds = dx + o * in_stride + off;
                    const T* gs = g + o * out_stride;
                    for (std::size_t i = 0; i < out_stride; ++i) ds[i] += gs[i];
                });
            },
            {xn, on});
    }
    return out;
}

// ---------------------------------------------------------------------------
// matmul
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0))
        throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                             shape_str(b.shape()));
    const i64 m = static_cast<i64>(a.dim(0));
    const i64 k = static_cast<i64>(a.dim(1));
    const i64 n = static_cast<i64>(b.dim(1));
    std::vector<T> vals(static_cast<std::size_t>(m * n));
    kernels::matmul_nn(a.data().data(), b.data().data(), vals.data(), m, k, n);
    flops::add_matmul(2 * m * k * n);
    Tensor<T> out(Shape{a.dim(0), b.dim(1)}, std::move(vals));
    detail::guard_finite<T>("matmul", out.data());
    Tape<T>* tape = nullptr;
    if (detail::maybe_track(out, {&a, &b}, tape)) {
        auto an = a.node();
        auto bn = b.node();
        auto on = out.node();
        tape->record(
            [an, bn, on, m, k, n]() {
                if (on->grad.empty()) return;
                const T* g = on->grad.data();
                if (an->requires_grad) {
                    an->ensure_grad();
                    kernels::matmul_nt(g, bn->values->data(), an->grad.data(), m, n, k, true);
                }
                if (bn->requires_grad) {
                    bn->ensure_grad();
                    kernels::matmul_tn(an->values->data(), g, bn->grad.data(), k, m, n, true);
                }
            },
            {an, bn, on});
    }
    return out;
}

// a[m x k] * b[n x k]^T without materializing the transpose.
template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(1))
        throw DimensionError("matmul_nt: incompatible shapes " + shape_str(a.shape()) + " x " +
                             shape_str(b.shape()) + "^T");
    const i64 m = static_cast<i64>(a.dim(0));
    const i64 k = static_cast<i64>(a.dim(1));
    const i64 n = static_cast<i64>(b.dim(0));
    std::vector<T> vals(static_cast<std::size_t>(m * n));
    kernels::matmul_nt(a.data().data(), b.data().data(), vals.data(), m, k, n);
    flops::add_matmul(2 * m * k * n);
    Tensor<T> out(Shape{a.dim(0), b.dim(0)}, std::move(vals));
    detail::guard_finite<T>("matmul_nt", out.data());
    Tape<T>* tape = nullptr;
    if (detail::maybe_track(out, {&a, &b}, tape)) {
        auto an = a.node();
        auto bn = b.node();
        auto on = out.node();
        tape->record(
            [an, bn, on, m, k, n]() {
                if (on->grad.empty()) return;
                const T* g = on->grad.data();  // [m x n]
                if (an->requires_grad) {
                    an->ensure_grad();  // da += g * b  ([m x n] x [n x k])
                    kernels::matmul_nn(g, bn->values->data(), an->grad.data(), m, n, k, true);
                }
                if (bn->requires_grad) {
                    bn->ensure_grad();  // db += g^T * a ([n x m] x [m x k])
                    kernels::matmul_tn(g, an->values->data(), bn->grad.data(), n, m, k, true);
                }
            },
            {an, bn, on});
    }
    return out;
}

// ---------------------------------------------------------------------------
// softmax along an axis (max-subtracted)
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis) {
    const Shape& s = x.shape();
    if (axis >= s.size()) throw DimensionError("softmax: axis out of range for " + shape_str(s));
    i64 outer = 1, inner = 1;
    for (std::size_t d = 0; d < axis; ++d) outer *= static_cast<i64>(s[d]);
    for (std::size_t d = axis + 1; d < s.size(); ++d) inner *= static_cast<i64>(s[d]);
    const i64 len = static_cast<i64>(s[axis]);

    if (finite_guard_enabled()) detail::guard_finite<T>("softmax input", x.data());
    std::vector<T> vals(x.numel());
    kernels::softmax_strided(x.data().data(), vals.data(), outer, len, inner);
    flops::add_softmax(5 * static_cast<std::int64_t>(x.numel()));
    Tensor<T> out(s, std::move(vals));
    detail::guard_finite<T>("softmax", out.data());
    Tape<T>* tape = nullptr;
    if (detail::maybe_track(out, {&x}, tape)) {
        auto xn = x.node();
        auto on = out.node();
        tape->record(
            [xn, on, outer, len, inner]() {
                if (on->grad.empty()) return;
                xn->ensure_grad();
                kernels::softmax_grad_strided(on->values->data(), on->grad.data(), xn->grad.data(),
                                              outer, len, inner);
            },
            {xn, on});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Convolutions
// ---------------------------------------------------------------------------

// x[H x W x Cin], w[kh x kw x Cin x Cout], optional bias[Cout]; stride 1,
// zero "same" padding, cross-correlation (no kernel flip).
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias = {}) {
    if (x.ndim() != 3 || w.ndim() != 4)
        throw DimensionError("conv2d: expected x[HxWxC], w[khxkwxCixCo], got " +
                             shape_str(x.shape()) + " and " + shape_str(w.shape()));
    if (x.dim(2) != w.dim(2))
        throw DimensionError("conv2d: input channels " + shape_str(x.shape()) +
                             " do not match weights " + shape_str(w.shape()));
    if (w.dim(0) % 2 == 0 || w.dim(1) % 2 == 0)
        throw ConfigError("conv2d: kernel sides must be odd, got " + shape_str(w.shape()));
    if (bias.defined() && bias.numel() != w.dim(3))
        throw DimensionError("conv2d: bias " + shape_str(bias.shape()) + " vs weights " +
                             shape_str(w.shape()));
    const i64 h = static_cast<i64>(x.dim(0)), wd = static_cast<i64>(x.dim(1));
    const i64 ci = static_cast<i64>(x.dim(2)), co = static_cast<i64>(w.dim(3));
    const i64 kh = static_cast<i64>(w.dim(0)), kw = static_cast<i64>(w.dim(1));

    std::vector<T> vals(static_cast<std::size_t>(h * wd * co));
    kernels::conv2d_fwd(x.data().data(), w.data().data(),
                        bias.defined() ? bias.data().data() : nullptr, vals.data(), h, wd, ci, co,
                        kh, kw);
    flops::add_conv2d(2 * h * wd * kh * kw * ci * co);
    Tensor<T> out(Shape{x.dim(0), x.dim(1), w.dim(3)}, std::move(vals));
    detail::guard_finite<T>("conv2d", out.data());

    Tape<T>* tape = nullptr;
    bool track = bias.defined() ? detail::maybe_track(out, {&x, &w, &bias}, tape)
                                : detail::maybe_track(out, {&x, &w}, tape);
    if (track) {
        auto xn = x.node();
        auto wn = w.node();
        auto bn = bias.defined() ? bias.node() : nullptr;
        auto on = out.node();
        tape->record(
            [xn, wn, bn, on, h, wd, ci, co, kh, kw]() {
                if (on->grad.empty()) return;
                const T* g = on->grad.data();
                if (xn->requires_grad) {
                    xn->ensure_grad();
                    kernels::conv2d_grad_x(g, wn->values->data(), xn->grad.data(), h, wd, ci, co,
                                           kh, kw);
                }
                if (wn->requires_grad) {
                    wn->ensure_grad();
                    kernels::conv2d_grad_w(xn->values->data(), g, wn->grad.data(), h, wd, ci, co,
                                           kh, kw);
                }
                if (bn && bn->requires_grad) {
                    bn->ensure_grad();
                    kernels::conv2d_grad_b(g, bn->grad.data(), h * wd, co);
                }
            },
            {xn, wn, bn, on});
    }
    return out;
}

using kernels::Pad;

// x[H x W x C], w[kh x kw x C]; one kernel per channel.
template <typename T>
Tensor<T> depthwise_conv2d(const Tensor<T>& x, const Tensor<T>& w, Pad pad) {
    if (x.ndim() != 3 || w.ndim() != 3 || x.dim(2) != w.dim(2))
        throw DimensionError("depthwise_conv2d: " + shape_str(x.shape()) + " vs " +
                             shape_str(w.shape()));
    if (pad != Pad::valid && (w.dim(0) % 2 == 0 || w.dim(1) % 2 == 0))
        throw ConfigError("depthwise_conv2d: same padding needs odd kernel sides");
    const i64 h = static_cast<i64>(x.dim(0)), wd = static_cast<i64>(x.dim(1));
    const i64 c = static_cast<i64>(x.dim(2));
    const i64 kh = static_cast<i64>(w.dim(0)), kw = static_cast<i64>(w.dim(1));
    const i64 oh = kernels::depthwise_out_dim(h, kh, pad);
    const i64 ow = kernels::depthwise_out_dim(wd, kw, pad);
    if (oh <= 0 || ow <= 0)
        throw DimensionError("depthwise_conv2d: image " + shape_str(x.shape()) +
                             " smaller than kernel " + shape_str(w.shape()));

    std::vector<T> vals(static_cast<std::size_t>(oh * ow * c));
    kernels::depthwise_fwd(x.data().data(), w.data().data(), vals.data(), h, wd, c, kh, kw, pad);
    flops::add_depthwise(2 * oh * ow * kh * kw * c);
    Tensor<T> out(Shape{static_cast<std::size_t>(oh), static_cast<std::size_t>(ow), x.dim(2)},
                  std::move(vals));
    detail::guard_finite<T>("depthwise_conv2d", out.data());

    Tape<T>* tape = nullptr;
    if (detail::maybe_track(out, {&x, &w}, tape)) {
        auto xn = x.node();
        auto wn = w.node();
        auto on = out.node();
        tape->record(
            [xn, wn, on, h, wd, c, kh, kw, pad]() {
                if (on->grad.empty()) return;
                const T* g = on->grad.data();
                if (xn->requires_grad) {
                    xn->ensure_grad();
                    kernels::depthwise_grad_x(g, wn->values->data(), xn->grad.data(), h, wd, c, kh,
                                              kw, pad);
                }
                if (wn->requires_grad) {
                    wn->ensure_grad();
                    kernels::depthwise_grad_w(xn->values->data(), g, wn->grad.data(), h, wd, c, kh,
                                              kw, pad);
                }
            },
            {xn, wn, on});
    }
    return out;
}

// x[R x L], k[1 x kw] (or flat [kw]); the same kernel convolves every row,
// zero "same" padding along the row axis.
template <typename T>
Tensor<T> conv1d_rows(const Tensor<T>& x, const Tensor<T>& k) {
    if (x.ndim() != 2) throw DimensionError("conv1d_rows: expected 2-d input, got " + shape_str(x.shape()));
    if (k.ndim() > 2 || (k.ndim() == 2 && k.dim(0) != 1))
        throw DimensionError("conv1d_rows: kernel must be [1 x k], got " + shape_str(k.shape()));
    const i64 kw = static_cast<i64>(k.numel());
    if (kw % 2 == 0)
        throw ConfigError("conv1d_rows: kernel size must be odd, got " + std::to_string(kw));
    const i64 rows = static_cast<i64>(x.dim(0));
    const i64 len = static_cast<i64>(x.dim(1));

    std::vector<T> vals(x.numel());
    kernels::conv1d_rows_fwd(x.data().data(), k.data().data(), vals.data(), rows, len, kw);
    flops::add_conv1d(2 * rows * len * kw);
    Tensor<T> out(x.shape(), std::move(vals));
    detail::guard_finite<T>("conv1d_rows", out.data());

    Tape<T>* tape = nullptr;
    if (detail::maybe_track(out, {&x, &k}, tape)) {
        auto xn = x.node();
        auto kn = k.node();
        auto on = out.node();
        tape->record(
            [xn, kn, on, rows, len, kw]() {
                if (on->grad.empty()) return;
                const T* g = on->grad.data();
                if (xn->requires_grad) {
                    xn->ensure_grad();
                    kernels::conv1d_rows_grad_x(g, kn->values->data(), xn->grad.data(), rows, len,
                                                kw);
                }
                if (kn->requires_grad) {
                    kn->ensure_grad();
                    kernels::conv1d_rows_grad_k(xn->values->data(), g, kn->grad.data(), rows, len,
                                                kw);
                }
            },
            {xn, kn, on});
    }
    return out;
}

// ---------------------------------------------------------------------------
// backward entry point
// ---------------------------------------------------------------------------

template <typename T>
void backward(const Tensor<T>& root) {
    if (root.numel() != 1)
        throw DimensionError("backward: root must be scalar, got " + shape_str(root.shape()));
    Tape<T>* tape = root.tape();
    if (!tape) {
        if (!root.requires_grad()) throw Error("backward: root records no gradient information");
        root.node()->ensure_grad();
        root.node()->grad[0] = T(1);
        return;
    }
    tape->backward(root);
}

}  // namespace lformer::ops
