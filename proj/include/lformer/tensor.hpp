#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <utility>
#include <vector>

#include "lformer/common.hpp"

namespace lformer {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << "]";
    return os.str();
}

template <typename T>
class Tape;

namespace detail {

template <typename T>
struct TensorNode {
    Shape shape;
    std::shared_ptr<std::vector<T>> values;
    std::vector<T> grad;  // empty until a backward pass reaches this node
    bool requires_grad = false;
    Tape<T>* tape = nullptr;

    std::size_t numel() const { return values ? values->size() : 0; }

    void ensure_grad() {
        if (grad.size() != numel()) grad.assign(numel(), T(0));
    }
};

}  // namespace detail

// Dense row-major N-d float tensor. Handles share node storage; values are
// immutable after creation except for leaf buffers updated by the optimizer
// between tapes. One tape (and everything recorded on it) stays on one thread.
template <typename T>
class Tensor {
public:
    using Node = detail::TensorNode<T>;

    Tensor() = default;

    Tensor(Shape shape, std::vector<T> data) {
        if (shape_numel(shape) != data.size())
            throw DimensionError("tensor data size " + std::to_string(data.size()) +
                                 " does not match shape " + shape_str(shape));
        tune_allocator();
        node_ = std::make_shared<Node>();
        node_->shape = std::move(shape);
        node_->values = std::make_shared<std::vector<T>>(std::move(data));
    }

    static Tensor zeros(Shape shape) {
        std::size_t n = shape_numel(shape);
        return Tensor(std::move(shape), std::vector<T>(n, T(0)));
    }

    static Tensor full(Shape shape, T v) {
        std::size_t n = shape_numel(shape);
        return Tensor(std::move(shape), std::vector<T>(n, v));
    }

    static Tensor scalar(T v) { return Tensor(Shape{1}, std::vector<T>{v}); }

    bool defined() const { return node_ != nullptr; }

    const Shape& shape() const { return node_->shape; }
    std::size_t ndim() const { return node_->shape.size(); }
    std::size_t numel() const { return node_->numel(); }
    std::size_t dim(std::size_t i) const { return node_->shape.at(i); }

    std::span<const T> data() const { return {node_->values->data(), node_->values->size()}; }

    // Mutable storage access, for optimizer updates and loaders. The node must
    // not be attached to a live tape.
    std::span<T> raw_data() {
        if (node_->tape)
            throw Error("raw_data() on a tensor attached to a tape");
        return {node_->values->data(), node_->values->size()};
    }

    bool requires_grad() const { return node_->requires_grad; }
    Tensor& set_requires_grad(bool on) {
        node_->requires_grad = on;
        return *this;
    }

    bool has_grad() const { return node_->grad.size() == numel() && numel() > 0; }
    std::span<const T> grad() const { return {node_->grad.data(), node_->grad.size()}; }

    Tensor grad_tensor() const {
        if (!has_grad()) throw Error("grad_tensor() on a tensor without gradient");
        return Tensor(node_->shape, node_->grad);
    }

    Tape<T>* tape() const { return node_->tape; }

    T item() const {
        if (numel() != 1) throw DimensionError("item() on non-scalar tensor " + shape_str(shape()));
        return (*node_->values)[0];
    }

    T at(std::initializer_list<std::size_t> idx) const {
        if (idx.size() != ndim()) throw DimensionError("at(): rank mismatch");
        std::size_t off = 0;
        std::size_t i = 0;
        for (std::size_t v : idx) {
            off = off * node_->shape[i] + v;
            ++i;
        }
        return (*node_->values)[off];
    }

    // Fresh node over the same value buffer. Used to hand shared parameters to
    // per-worker tapes without copying.
    Tensor alias() const {
        Tensor t;
        t.node_ = std::make_shared<Node>();
        t.node_->shape = node_->shape;
        t.node_->values = node_->values;
        t.node_->requires_grad = node_->requires_grad;
        return t;
    }

    Tensor detach() const {
        Tensor t = alias();
        t.node_->requires_grad = false;
        return t;
    }

    Tensor clone() const { return Tensor(node_->shape, *node_->values); }

    template <typename U>
    Tensor<U> cast() const {
        std::vector<U> out(numel());
        const auto src = data();
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<U>(src[i]);
        return Tensor<U>(node_->shape, std::move(out));
    }

    std::shared_ptr<Node> node() const { return node_; }

private:
    std::shared_ptr<Node> node_;
};

// Reverse-mode tape: an ordered log of backward rules. Recording order is the
// topological order of the forward pass, so backward is a single reverse sweep.
template <typename T>
class Tape {
public:
    Tape() { tune_allocator(); }
    ~Tape() { clear(); }
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Attach a leaf (typically a parameter) so ops involving it record here.
    void watch(Tensor<T>& t) {
        auto node = t.node();
        if (node->tape == this) return;
        if (node->tape)
            throw Error("tensor is already attached to another tape");
        node->tape = this;
        node->requires_grad = true;
        tracked_.push_back(node);
    }

    // Registers a backward rule. Gradient-carrying nodes get attached to this
    // tape; plain constants stay detached so they remain shareable.
    void record(std::function<void()> backward_rule,
                const std::vector<std::shared_ptr<detail::TensorNode<T>>>& nodes) {
        for (const auto& n : nodes) {
            if (!n || !n->requires_grad) continue;
            if (n->tape == nullptr) {
                n->tape = this;
                tracked_.push_back(n);
            } else if (n->tape != this) {
                throw Error("op mixes tensors from two different tapes");
            }
        }
        ops_.push_back(std::move(backward_rule));
    }

    std::size_t size() const { return ops_.size(); }

    void backward(const Tensor<T>& root) {
        if (root.numel() != 1)
            throw DimensionError("backward() root must be scalar, got " + shape_str(root.shape()));
        auto node = root.node();
        node->ensure_grad();
        node->grad[0] = T(1);
        for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
    }

    // Drops recorded ops, detaches every touched node and wipes their grads.
    void clear() {
        ops_.clear();
        for (auto& n : tracked_) {
            n->tape = nullptr;
            n->grad.clear();
            n->grad.shrink_to_fit();
        }
        tracked_.clear();
    }

private:
    std::vector<std::function<void()>> ops_;
    std::vector<std::shared_ptr<detail::TensorNode<T>>> tracked_;
};

namespace detail {

template <typename T>
Tape<T>* common_tape(std::initializer_list<const Tensor<T>*> ts) {
    Tape<T>* tape = nullptr;
    for (const Tensor<T>* t : ts) {
        if (!t->defined()) continue;
        Tape<T>* other = t->tape();
        if (!other) continue;
        if (tape && tape != other) throw Error("op mixes tensors from two different tapes");
        tape = other;
    }
    return tape;
}

template <typename T>
void guard_finite(const char* op, std::span<const T> out) {
    if (!finite_guard_enabled()) return;
    for (T v : out) {
        if (!std::isfinite(static_cast<double>(v)))
            throw NumericError(std::string(op) + " produced a non-finite value");
    }
}

}  // namespace detail

}  // namespace lformer
