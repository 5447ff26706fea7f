#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "lformer/ops.hpp"

// Shared test utilities: deterministic random tensors and the central
// finite-difference gradient checker.

namespace testsup {

using lformer::Rng;
using lformer::Shape;
using lformer::Tensor;

template <typename T>
Tensor<T> rand_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    std::vector<T> vals(lformer::shape_numel(shape));
    for (auto& v : vals) v = static_cast<T>(rng.uniform(lo, hi));
    return Tensor<T>(std::move(shape), std::move(vals));
}

// Checks tape gradients of a scalar loss against central finite differences
// (step h) for every element of every input. loss_fn must rebuild the graph
// from the *same* tensor handles each call. Returns the max relative error
// with denominator max(|g|, |fd|, 1e-4).
template <typename LossFn>
double grad_check(std::vector<Tensor<double>> inputs, LossFn loss_fn, double h = 1e-5) {
    lformer::Tape<double> tape;
    for (auto& t : inputs) tape.watch(t);
    lformer::Tensor<double> loss = loss_fn();
    lformer::ops::backward(loss);
    std::vector<std::vector<double>> grads;
    for (auto& t : inputs) {
        if (t.has_grad())
            grads.emplace_back(t.grad().begin(), t.grad().end());
        else
            grads.emplace_back(t.numel(), 0.0);
    }
    tape.clear();

    double max_rel = 0;
    for (std::size_t ti = 0; ti < inputs.size(); ++ti) {
        auto raw = inputs[ti].raw_data();
        for (std::size_t j = 0; j < raw.size(); ++j) {
            const double orig = raw[j];
            raw[j] = orig + h;
            const double fp = loss_fn().item();
            raw[j] = orig - h;
            const double fm = loss_fn().item();
            raw[j] = orig;
            const double fd = (fp - fm) / (2.0 * h);
            const double g = grads[ti][j];
            const double denom = std::max({std::fabs(g), std::fabs(fd), 1e-4});
            max_rel = std::max(max_rel, std::fabs(g - fd) / denom);
        }
    }
    return max_rel;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
    return m;
}

template <typename T>
bool bit_equal(std::span<const T> a, std::span<const T> b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (std::memcmp(&a[i], &b[i], sizeof(T)) != 0) return false;
    return true;
}

}  // namespace testsup
