#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "lformer/flops.hpp"
#include "lformer/profiler.hpp"
#include "support/checkers.hpp"

using namespace lformer;
using model::LFormerConfig;
using model::Variant;
using testsup::rand_tensor;

TEST_CASE("count_params: closed form equals introspection across a random sweep") {
    Rng rng(70);
    const Variant variants[] = {Variant::evolved, Variant::recompute, Variant::shared};
    for (int trial = 0; trial < 50; ++trial) {
        LFormerConfig cfg;
        cfg.bands = 1 + rng.uniform_int(8);
        cfg.width = 1 + rng.uniform_int(24);
        cfg.blocks = 1 + rng.uniform_int(6);
        cfg.kernel = 1 + 2 * rng.uniform_int(4);
        cfg.variant = variants[rng.uniform_int(3)];
        cfg.seed = trial;
        auto m = model::build<float>(cfg);
        CHECK(profiler::count_params(cfg) == m.parameter_count());
    }
}

TEST_CASE("single 3x3 conv with bias has 10 parameters") {
    // kh*kw*ci*co + co with everything 1-sized except the 3x3 kernel
    Rng rng(71);
    auto conv = nn::make_conv2d<float>(3, 3, 1, 1, rng);
    CHECK(conv.w.numel() + conv.b.numel() == 10);
}

TEST_CASE("flop meter: 1x1 conv on 4x4 single-channel image counts 32 FLOPs") {
    Tensor<float> x({4, 4, 1}, std::vector<float>(16, 1.0f));
    Tensor<float> w({1, 1, 1, 1}, {1.0f});
    flops::MeterScope scope;
    flops::reset();
    (void)ops::conv2d(x, w);
    CHECK(flops::meter().conv2d == 32);
}

TEST_CASE("analytic count matches the instrumented forward exactly") {
    for (Variant variant : {Variant::evolved, Variant::recompute, Variant::shared}) {
        LFormerConfig cfg;
        cfg.bands = 3;
        cfg.width = 8;
        cfg.blocks = 3;
        cfg.kernel = 5;
        cfg.variant = variant;
        cfg.seed = 3;
        auto m = model::build<float>(cfg);
        Rng rng(72);
        auto ms_up = rand_tensor<float>({8, 8, 3}, rng, 0, 1);
        auto pan = rand_tensor<float>({8, 8, 1}, rng, 0, 1);

        flops::MeterScope scope;
        flops::reset();
        (void)model::forward(m, ms_up, pan);
        const auto& meter = flops::meter();
        const profiler::FlopBreakdown analytic = profiler::count_flops_detail(cfg, 8, 8);

        CHECK(analytic.conv2d == meter.conv2d);
        CHECK(analytic.depthwise == meter.depthwise);
        CHECK(analytic.conv1d == meter.conv1d);
        CHECK(analytic.matmul_all() == meter.matmul);
        CHECK(analytic.softmax == meter.softmax);
        CHECK(analytic.elementwise == meter.elementwise);
    }
}

TEST_CASE("variant orderings and exact structural gaps") {
    LFormerConfig cfg;
    cfg.bands = 4;
    cfg.width = 32;
    cfg.blocks = 5;
    cfg.kernel = 5;

    LFormerConfig evolved = cfg, recompute = cfg, shared = cfg;
    evolved.variant = Variant::evolved;
    recompute.variant = Variant::recompute;
    shared.variant = Variant::shared;

    const std::size_t pe = profiler::count_params(evolved);
    const std::size_t pr = profiler::count_params(recompute);
    const std::size_t ps = profiler::count_params(shared);
    CHECK(pr > pe);
    CHECK(pe > ps);
    CHECK(pe - ps == 4 * 5);                     // (N-1)*k
    CHECK(pr - ps == 4 * 3 * (32 * 32 + 32));  // (N-1)*3*(d^2+d)

    const std::size_t h = 32, w = 32;
    const std::int64_t t = static_cast<std::int64_t>(h * w);
    const std::int64_t fe = profiler::count_flops(evolved, h, w);
    const std::int64_t fr = profiler::count_flops(recompute, h, w);
    const std::int64_t fs = profiler::count_flops(shared, h, w);
    CHECK(fr > fe);
    CHECK(fe > fs);
    CHECK(fe - fs == 4 * (2 * t * t * 5 + 5 * t * t));  // evolution conv + re-softmax

    // map application cost identical in every variant
    CHECK(profiler::count_flops_detail(evolved, h, w).matmul_av ==
          profiler::count_flops_detail(shared, h, w).matmul_av);
    CHECK(profiler::count_flops_detail(evolved, h, w).matmul_av ==
          profiler::count_flops_detail(recompute, h, w).matmul_av);

    // recompute/evolved ratio strictly increases with N
    double prev = 0;
    for (std::size_t n = 1; n <= 6; ++n) {
        LFormerConfig ce = evolved, cr = recompute;
        ce.blocks = n;
        cr.blocks = n;
        const double ratio = static_cast<double>(profiler::count_flops(cr, h, w)) /
                             static_cast<double>(profiler::count_flops(ce, h, w));
        CHECK(ratio > prev);
        prev = ratio;
    }

    // FLOPs monotone in image size
    std::int64_t last = 0;
    for (std::size_t size : {8u, 16u, 32u, 64u}) {
        const std::int64_t f = profiler::count_flops(evolved, size, size);
        CHECK(f > last);
        last = f;
    }
}

TEST_CASE("per-block attention-path asymmetry holds for C >= 8, k <= 7") {
    // evolution costs 2T^2k (+5T^2 softmax); recomputing the map costs
    // 2T^2C + 6TC^2 (+T^2 scale + 5T^2 softmax); evolution must be cheaper
    for (std::int64_t t : {16, 64, 256, 1024}) {
        for (std::int64_t c : {8, 16, 32, 64}) {
            for (std::int64_t k : {1, 3, 5, 7}) {
                const std::int64_t evolve_cost = 2 * t * t * k + 5 * t * t;
                const std::int64_t recompute_cost =
                    2 * t * t * c + 6 * t * c * c + t * t + 5 * t * t;
                CHECK(evolve_cost < recompute_cost);
            }
        }
    }
}

TEST_CASE("bench_forward: timing stats, recompute slower than evolved") {
    LFormerConfig cfg;
    cfg.bands = 4;
    cfg.width = 32;
    cfg.blocks = 5;
    cfg.kernel = 5;
    cfg.seed = 11;

    Rng rng(73);
    auto ms_up = rand_tensor<float>({32, 32, 4}, rng, 0, 1);  // T = 1024
    auto pan = rand_tensor<float>({32, 32, 1}, rng, 0, 1);

    auto evolved = model::build<float>(cfg);
    cfg.variant = Variant::recompute;
    auto recompute = model::build<float>(cfg);

    const auto se = profiler::bench_forward(evolved, ms_up, pan, 1, 5);
    const auto sr = profiler::bench_forward(recompute, ms_up, pan, 1, 5);
    CHECK(se.runs == 5);
    CHECK(se.min_ms > 0);
    CHECK(sr.min_ms > se.min_ms);  // machine-relative, structurally ~1.5x more work

    // repeated runs vary by less than 50% around the median
    std::vector<double> sorted = se.samples_ms;
    std::sort(sorted.begin(), sorted.end());
    const double median = sorted[sorted.size() / 2];
    for (double v : se.samples_ms) {
        CHECK(v > 0.5 * median);
        CHECK(v < 1.5 * median);
    }

    CHECK_THROWS_AS(profiler::bench_forward(evolved, ms_up, pan, 0, 2), ConfigError);
}

TEST_CASE("similarity matrix: diagonal, symmetry, CSV shape") {
    LFormerConfig cfg;
    cfg.bands = 3;
    cfg.width = 8;
    cfg.blocks = 4;
    cfg.kernel = 3;
    cfg.variant = Variant::recompute;
    cfg.seed = 2;
    auto m = model::build<float>(cfg);
    Rng rng(74);
    auto ms_up = rand_tensor<float>({8, 8, 3}, rng, 0, 1);
    auto pan = rand_tensor<float>({8, 8, 1}, rng, 0, 1);
    model::ForwardTrace<float> trace;
    (void)model::forward(m, ms_up, pan, &trace);

    const auto sim = profiler::similarity_matrix(trace);
    REQUIRE(sim.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(sim[i][i] == 1.0);
        for (std::size_t j = 0; j < 4; ++j) {
            CHECK(std::fabs(sim[i][j] - sim[j][i]) < 1e-7);
            CHECK(sim[i][j] >= -1.0000001);
            CHECK(sim[i][j] <= 1.0000001);
        }
    }

    const std::string csv = profiler::similarity_csv(sim);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);  // header + 4 rows
    CHECK(csv.rfind("map,a1,a2,a3,a4\n", 0) == 0);
}

TEST_CASE("compare_variants emits one row per variant with consistent orderings") {
    LFormerConfig cfg;
    cfg.bands = 4;
    cfg.width = 16;
    cfg.blocks = 3;
    cfg.kernel = 5;
    auto rows = profiler::compare_variants(
        cfg, 16, 16, {Variant::recompute, Variant::shared, Variant::evolved});
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].variant == "recompute");
    CHECK(rows[1].variant == "shared");
    CHECK(rows[2].variant == "evolved");
    CHECK(rows[0].params > rows[2].params);
    CHECK(rows[2].params > rows[1].params);
    CHECK(rows[2].params - rows[1].params == 2 * 5);
    CHECK(rows[0].flops > rows[2].flops);
    for (const auto& r : rows) {
        CHECK(r.flops >= 0);
        CHECK(r.peak_bytes > 0);
    }

    const std::string csv = profiler::profile_csv(rows);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
    CHECK(csv.rfind("variant,sam,ergas,q2n,psnr,params,flops", 0) == 0);
}
