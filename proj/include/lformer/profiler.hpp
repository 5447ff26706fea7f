#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lformer/model.hpp"

// Analytic parameter and FLOP accounting, wall-time benchmarking, and
// attention-map similarity reports.
//
// FLOP convention (fixed, mirrored by the runtime meter): one multiply-
// accumulate is 2 FLOPs; conv2d costs 2 H W kh kw Cin Cout; matmul 2 m k n;
// softmax 5 FLOPs/element; the attention-evolution conv 2 T^2 k; remaining
// elementwise ops 1 FLOP/element; bias adds and data movement are free.
// The reported per-variant figure covers the learned layers and the
// attention-map production path. The map application A (x) V costs the same
// 2 T^2 d in every variant and is carried separately as map_apply_flops.

namespace lformer::profiler {

struct FlopBreakdown {
    std::int64_t conv2d = 0;
    std::int64_t depthwise = 0;
    std::int64_t conv1d = 0;      // evolution kernels
    std::int64_t matmul_qk = 0;   // attention-map production matmuls
    std::int64_t token_proj = 0;  // recompute-variant QKV projections
    std::int64_t softmax = 0;
    std::int64_t elementwise = 0;
    std::int64_t matmul_av = 0;   // map application, equal across variants

    std::int64_t reported() const {
        return conv2d + depthwise + conv1d + matmul_qk + token_proj + softmax + elementwise;
    }
    std::int64_t total() const { return reported() + matmul_av; }
    std::int64_t matmul_all() const { return matmul_qk + token_proj + matmul_av; }
};

// Walks the forward schedule of the configured model at h x w input size.
FlopBreakdown count_flops_detail(const model::LFormerConfig& config, std::size_t h, std::size_t w);

std::int64_t count_flops(const model::LFormerConfig& config, std::size_t h, std::size_t w);

// Closed-form trainable parameter count; must equal model introspection.
std::size_t count_params(const model::LFormerConfig& config);

template <typename T>
std::size_t count_params(const model::LFormerModel<T>& m) {
    return m.parameter_count();
}

// Analytic peak of simultaneously live forward tensors, in bytes.
std::int64_t peak_live_bytes(const model::LFormerConfig& config, std::size_t h, std::size_t w,
                             std::size_t scalar_bytes = 4);

// ---------------------------------------------------------------------------
// Wall-time benchmark: single execution thread, finite guards off.
// ---------------------------------------------------------------------------

struct BenchStats {
    double mean_ms = 0;
    double std_ms = 0;
    double min_ms = 0;
    int runs = 0;
    std::vector<double> samples_ms;
};

BenchStats bench_forward(const model::LFormerModel<float>& m, const Tensor<float>& ms_up,
                         const Tensor<float>& pan, int n_warm, int n_runs);

// ---------------------------------------------------------------------------
// Attention-map similarity (pairwise cosine over a forward trace)
// ---------------------------------------------------------------------------

template <typename T>
std::vector<std::vector<double>> similarity_matrix(const model::ForwardTrace<T>& trace) {
    const std::size_t n = trace.attention_maps.size();
    if (n < 2) throw ConfigError("similarity_matrix: trace needs at least two attention maps");
    std::vector<std::vector<double>> m(n, std::vector<double>(n, 1.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double s = attention::attention_cosine_similarity(trace.attention_maps[i],
                                                                    trace.attention_maps[j]);
            m[i][j] = s;
            m[j][i] = s;
        }
    return m;
}

std::string similarity_csv(const std::vector<std::vector<double>>& m);

// ---------------------------------------------------------------------------
// Variant comparison (Table-style rows)
// ---------------------------------------------------------------------------

struct MetricSummary {
    double sam = 0, ergas = 0, q2n = 0, psnr = 0;
};

struct ProfileReport {
    std::string variant;
    std::size_t params = 0;
    std::int64_t flops = 0;
    std::int64_t map_apply_flops = 0;
    BenchStats time;
    std::int64_t peak_bytes = 0;
    std::optional<MetricSummary> metrics;
};

// One row per requested variant at identical (c, d, N, k, H, W). With
// bench_runs > 0 each variant is also timed on a deterministic random input.
std::vector<ProfileReport> compare_variants(const model::LFormerConfig& base, std::size_t h,
                                            std::size_t w,
                                            const std::vector<model::Variant>& variants,
                                            int bench_warm = 0, int bench_runs = 0);

std::string profile_csv(const std::vector<ProfileReport>& rows);

}  // namespace lformer::profiler
