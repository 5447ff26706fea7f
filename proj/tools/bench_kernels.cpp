// Kernel benchmark: naive reference vs the tuned kernels in serial and
// OpenMP-parallel mode, on the shapes the model actually runs. The serial and
// parallel columns are bit-identical by construction; the speedup column is
// parallel vs serial.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include <omp.h>

#include "lformer/common.hpp"
#include "lformer/kernels.hpp"
#include "lformer/reference.hpp"

using namespace lformer;
using kernels::i64;

namespace {

using Clock = std::chrono::steady_clock;

template <typename F>
double time_ms(F&& f, int reps) {
    f();  // warm
    const auto t0 = Clock::now();
    for (int i = 0; i < reps; ++i) f();
    const auto t1 = Clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

std::vector<float> randv(std::size_t n, Rng& rng) {
    std::vector<float> v(n);
    for (auto& x : v) x = static_cast<float>(rng.uniform(-1, 1));
    return v;
}

struct Row {
    std::string name;
    double naive_ms, serial_ms, parallel_ms;
    bool bit_equal;
};

void print_row(const Row& r) {
    std::printf("%-28s %10.3f %10.3f %10.3f %8.2fx   %s\n", r.name.c_str(), r.naive_ms,
                r.serial_ms, r.parallel_ms, r.serial_ms / r.parallel_ms,
                r.bit_equal ? "bit-equal" : "DIFFERS");
}

bool same_bits(const std::vector<float>& a, const std::vector<float>& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * 4) == 0;
}

}  // namespace

int main(int argc, char** argv) {
    tune_allocator();
    int reps = 10;
    i64 t = 1024, d = 32;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--reps") == 0 && i + 1 < argc) reps = std::atoi(argv[++i]);
        if (std::strcmp(argv[i], "--tokens") == 0 && i + 1 < argc) t = std::atoll(argv[++i]);
        if (std::strcmp(argv[i], "--width") == 0 && i + 1 < argc) d = std::atoll(argv[++i]);
    }
    std::printf("tokens %lld, width %lld, %d reps, %d OpenMP threads\n\n",
                static_cast<long long>(t), static_cast<long long>(d), reps,
                omp_get_max_threads());
    std::printf("%-28s %10s %10s %10s %9s\n", "kernel", "naive", "serial", "omp", "speedup");

    Rng rng(17);
    const auto q = randv(t * d, rng), k = randv(t * d, rng), v = randv(t * d, rng);
    const auto map = randv(t * t, rng);
    const auto kern = randv(5, rng);
    std::vector<float> out_serial, out_parallel, out_naive;

    auto bench = [&](const std::string& name, std::size_t out_size, auto kernel_fn,
                     auto naive_fn) {
        Row r;
        r.name = name;
        out_naive.assign(out_size, 0.0f);
        r.naive_ms = time_ms([&] { naive_fn(out_naive.data()); }, reps);
        {
            kernels::ExecScope scope(kernels::Exec::serial);
            out_serial.assign(out_size, 0.0f);
            r.serial_ms = time_ms([&] { kernel_fn(out_serial.data()); }, reps);
        }
        {
            kernels::ExecScope scope(kernels::Exec::parallel);
            out_parallel.assign(out_size, 0.0f);
            r.parallel_ms = time_ms([&] { kernel_fn(out_parallel.data()); }, reps);
        }
        r.bit_equal = same_bits(out_serial, out_parallel);
        print_row(r);
    };

    bench(
        "matmul QK^T [TxD]x[TxD]^T", t * t,
        [&](float* out) { kernels::matmul_nt(q.data(), k.data(), out, t, d, t); },
        [&](float* out) {
            // naive via explicit transpose-free triple loop
            for (i64 i = 0; i < t; ++i)
                for (i64 j = 0; j < t; ++j) {
                    float acc = 0;
                    for (i64 kk = 0; kk < d; ++kk) acc += q[i * d + kk] * k[j * d + kk];
                    out[i * t + j] = acc;
                }
        });

    bench(
        "matmul AV [TxT]x[TxD]", t * d,
        [&](float* out) { kernels::matmul_nn(map.data(), v.data(), out, t, t, d); },
        [&](float* out) { reference::matmul(map.data(), v.data(), out, t, t, d); });

    bench(
        "softmax rows [TxT]", t * t,
        [&](float* out) { kernels::softmax_strided(map.data(), out, t, t, 1); },
        [&](float* out) {
            for (i64 r0 = 0; r0 < t; ++r0) {
                const float* xs = map.data() + r0 * t;
                float* os = out + r0 * t;
                float mx = xs[0];
                for (i64 i = 1; i < t; ++i) mx = std::max(mx, xs[i]);
                float sum = 0;
                for (i64 i = 0; i < t; ++i) {
                    os[i] = std::exp(xs[i] - mx);
                    sum += os[i];
                }
                for (i64 i = 0; i < t; ++i) os[i] /= sum;
            }
        });

    bench(
        "evolve conv1d [TxT] k=5", t * t,
        [&](float* out) { kernels::conv1d_rows_fwd(map.data(), kern.data(), out, t, t, 5); },
        [&](float* out) { reference::conv1d_rows(map.data(), kern.data(), out, t, t, 5); });

    const i64 hw = 32;
    const auto img = randv(hw * hw * d, rng);
    const auto wts = randv(9 * d * d, rng);
    bench(
        "conv2d 3x3 DxD 32x32", hw * hw * d,
        [&](float* out) {
            kernels::conv2d_fwd(img.data(), wts.data(), (const float*)nullptr, out, hw, hw, d, d,
                                3, 3);
        },
        [&](float* out) {
            reference::conv2d(img.data(), wts.data(), (const float*)nullptr, out, hw, hw, d, d, 3,
                              3);
        });

    const i64 at = 256;  // full attention incl. softmax at a smaller size
    const auto q2 = randv(at * d, rng), k2 = randv(at * d, rng), v2 = randv(at * d, rng);
    std::vector<float> map_buf(at * at);
    bench(
        "attention fwd [256xD]", at * d,
        [&](float* out) {
            std::vector<float> logits(at * at);
            kernels::matmul_nt(q2.data(), k2.data(), logits.data(), at, d, at);
            const float scale = 1.0f / std::sqrt(static_cast<float>(d));
            kernels::map1(logits.data(), logits.data(), at * at,
                          [scale](float x) { return x * scale; });
            kernels::softmax_strided(logits.data(), map_buf.data(), at, at, 1);
            kernels::matmul_nn(map_buf.data(), v2.data(), out, at, at, d);
        },
        [&](float* out) {
            reference::attention(q2.data(), k2.data(), v2.data(), out, map_buf.data(), at, d);
        });

    return 0;
}
