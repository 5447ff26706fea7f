#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "lformer/ops.hpp"
#include "lformer/reference.hpp"
#include "support/checkers.hpp"

using namespace lformer;
using testsup::rand_tensor;

TEST_CASE("matmul identity and hand-evaluated product") {
    Tensor<double> eye({2, 2}, {1, 0, 0, 1});
    Tensor<double> b({2, 2}, {5, 6, 7, 8});
    auto out = ops::matmul(eye, b);
    for (std::size_t i = 0; i < 4; ++i) CHECK(out.data()[i] == doctest::Approx(b.data()[i]));

    Tensor<double> a({2, 2}, {1, 2, 3, 4});
    auto c = ops::matmul(a, b);
    CHECK(c.at({0, 0}) == doctest::Approx(19));
    CHECK(c.at({0, 1}) == doctest::Approx(22));
    CHECK(c.at({1, 0}) == doctest::Approx(43));
    CHECK(c.at({1, 1}) == doctest::Approx(50));
}

TEST_CASE("matmul shape mismatch names both shapes") {
    Tensor<double> a({2, 3}, std::vector<double>(6, 1));
    Tensor<double> b({2, 2}, std::vector<double>(4, 1));
    CHECK_THROWS_WITH_AS(ops::matmul(a, b), doctest::Contains("[2x3]"), DimensionError);
}

TEST_CASE("gradient of sum(A*B) wrt A equals ones * B^T") {
    Rng rng(7);
    auto a = rand_tensor<double>({3, 4}, rng);
    auto b = rand_tensor<double>({4, 5}, rng);
    Tape<double> tape;
    tape.watch(a);
    ops::backward(ops::sum(ops::matmul(a, b)));
    // d/dA sum(AB) = ones(3x5) B^T: row-independent, entry (i,k) = sum_j B[k][j]
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t k = 0; k < 4; ++k) {
            double expect = 0;
            for (std::size_t j = 0; j < 5; ++j) expect += b.at({k, j});
            CHECK(a.grad()[i * 4 + k] == doctest::Approx(expect).epsilon(1e-12));
        }
}

TEST_CASE("softmax matches exp-normalize and is shift invariant") {
    Tensor<double> two({2}, {0, 0});
    auto s2 = ops::softmax(two, 0);
    CHECK(s2.data()[0] == doctest::Approx(0.5));
    CHECK(s2.data()[1] == doctest::Approx(0.5));

    Tensor<double> x({3}, {1, 2, 3});
    auto s = ops::softmax(x, 0);
    CHECK(s.data()[0] == doctest::Approx(0.09003057).epsilon(1e-6));
    CHECK(s.data()[1] == doctest::Approx(0.24472847).epsilon(1e-6));
    CHECK(s.data()[2] == doctest::Approx(0.66524096).epsilon(1e-6));

    Tensor<double> shifted({3}, {1 + 17.5, 2 + 17.5, 3 + 17.5});
    auto ss = ops::softmax(shifted, 0);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(ss.data()[i] == doctest::Approx(s.data()[i]).epsilon(1e-12));
}

TEST_CASE("softmax slices sum to one on random shapes and axes") {
    Rng rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t a = 2 + rng.uniform_int(4), b = 2 + rng.uniform_int(4),
                          c = 2 + rng.uniform_int(4);
        auto x = rand_tensor<double>({a, b, c}, rng, -4, 4);
        const std::size_t axis = static_cast<std::size_t>(rng.uniform_int(3));
        auto y = ops::softmax(x, axis);
        for (double v : y.data()) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
        // sum along axis == 1 for every slice
        const auto& s = x.shape();
        std::size_t outer = 1, inner = 1;
        for (std::size_t d = 0; d < axis; ++d) outer *= s[d];
        for (std::size_t d = axis + 1; d < 3; ++d) inner *= s[d];
        for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t in = 0; in < inner; ++in) {
                double sum = 0;
                for (std::size_t i = 0; i < s[axis]; ++i)
                    sum += y.data()[o * s[axis] * inner + i * inner + in];
                CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
            }
    }
}

TEST_CASE("softmax rejects NaN input") {
    Tensor<double> x({2}, {std::numeric_limits<double>::quiet_NaN(), 0.0});
    CHECK_THROWS_AS(ops::softmax(x, 0), NumericError);
}

TEST_CASE("elementwise suite examples") {
    Tensor<double> x({2}, {-1, 2});
    auto r = ops::relu(x);
    CHECK(r.data()[0] == 0);
    CHECK(r.data()[1] == 2);

    Tensor<double> m({4}, {1, 2, 3, 4});
    CHECK(ops::mean(m).item() == doctest::Approx(2.5));
    CHECK(ops::sum(m).item() == doctest::Approx(10));

    Tensor<double> a({2, 3}, std::vector<double>(6, 1));
    Tensor<double> b({2, 5}, std::vector<double>(10, 2));
    auto cat = ops::concat<double>({a, b}, 1);
    CHECK(cat.shape() == Shape{2, 8});
    CHECK(cat.at({1, 2}) == 1);
    CHECK(cat.at({1, 3}) == 2);

    auto sl = ops::slice(cat, 1, 3, 5);
    CHECK(sl.shape() == Shape{2, 5});
    CHECK(sl.at({0, 0}) == 2);

    CHECK_THROWS_AS(ops::add(a, b), DimensionError);
}

TEST_CASE("reshape round trip is the identity on data") {
    Rng rng(11);
    auto x = rand_tensor<double>({3, 4, 5}, rng);
    auto y = ops::reshape(ops::reshape(x, {60}), {3, 4, 5});
    CHECK(y.shape() == x.shape());
    CHECK(testsup::bit_equal<double>(x.data(), y.data()));
}

TEST_CASE("transpose is its own inverse") {
    Rng rng(12);
    auto x = rand_tensor<double>({3, 7}, rng);
    auto tt = ops::transpose(ops::transpose(x));
    CHECK(testsup::bit_equal<double>(x.data(), tt.data()));
}

TEST_CASE("backward on trivial graphs") {
    Rng rng(5);
    auto x = rand_tensor<double>({4, 3}, rng);

    SUBCASE("root = sum(x) gives ones") {
        Tape<double> tape;
        tape.watch(x);
        ops::backward(ops::sum(x));
        for (double g : x.grad()) CHECK(g == doctest::Approx(1.0));
    }
    SUBCASE("root = sum(x*x) gives 2x") {
        Tape<double> tape;
        tape.watch(x);
        ops::backward(ops::sum(ops::mul(x, x)));
        for (std::size_t i = 0; i < x.numel(); ++i)
            CHECK(x.grad()[i] == doctest::Approx(2 * x.data()[i]).epsilon(1e-12));
    }
    SUBCASE("non-scalar root rejected") {
        Tape<double> tape;
        tape.watch(x);
        auto y = ops::mul(x, x);
        CHECK_THROWS_AS(ops::backward(y), DimensionError);
    }
}

TEST_CASE("finite guard catches NaN produced by an op") {
    FiniteGuardScope guard(true);
    Tensor<double> x({2}, {-4.0, 1.0});
    CHECK_THROWS_AS(ops::sqrt(x), NumericError);  // sqrt of negative -> NaN
    FiniteGuardScope off(false);
    CHECK_NOTHROW(ops::sqrt(x));
}

TEST_CASE("tensors refuse to join two different tapes") {
    Tensor<double> a({2}, {1, 2});
    Tensor<double> b({2}, {3, 4});
    Tape<double> t1, t2;
    t1.watch(a);
    t2.watch(b);
    CHECK_THROWS_AS(ops::add(a, b), Error);
}
