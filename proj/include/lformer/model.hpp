#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lformer/attention.hpp"
#include "lformer/metrics.hpp"
#include "lformer/nn.hpp"

// The full pan-sharpening network: dual-branch feature extraction, a first
// cross-attention block, N-1 further blocks whose attention maps are evolved
// (or recomputed / shared, for the ablation variants), feature-integration
// blocks, and a residual reconstruction head.

namespace lformer::model {

enum class Variant { evolved, recompute, shared };

inline Variant variant_from_string(const std::string& s) {
    if (s == "evolved") return Variant::evolved;
    if (s == "recompute") return Variant::recompute;
    if (s == "shared") return Variant::shared;
    throw ConfigError("unknown variant '" + s + "' (expected evolved|recompute|shared)");
}

inline std::string to_string(Variant v) {
    switch (v) {
        case Variant::evolved: return "evolved";
        case Variant::recompute: return "recompute";
        case Variant::shared: return "shared";
    }
    return "?";
}

struct LFormerConfig {
    std::size_t bands = 4;   // c: multispectral band count
    std::size_t width = 32;  // d: feature width after projection
    std::size_t blocks = 5;  // N
    std::size_t kernel = 5;  // k: evolution kernel size (1 x k)
    Variant variant = Variant::evolved;
    std::size_t ratio = 4;  // MS -> PAN upsampling factor
    std::size_t heads = 1;  // reserved; only 1 is supported
    std::uint64_t seed = 0;

    void validate() const {
        if (bands < 1) throw ConfigError("config: bands must be >= 1");
        if (width < 1) throw ConfigError("config: width must be >= 1");
        if (blocks < 1) throw ConfigError("config: blocks must be >= 1");
        if (kernel % 2 == 0) throw ConfigError("config: evolution kernel size must be odd");
        if (ratio < 1) throw ConfigError("config: ratio must be >= 1");
        if (heads != 1) throw ConfigError("config: only heads=1 is supported");
    }
};

template <typename T>
struct NamedParam {
    std::string name;
    Tensor<T> tensor;
};

// FIB: Cat(global, detail) -> 3x3 conv -> ReLU -> 3x3 conv, output width d.
template <typename T>
struct FiBlock {
    nn::Conv2d<T> c1, c2;
};

template <typename T>
Tensor<T> fib_forward(const FiBlock<T>& fib, const Tensor<T>& f_global, const Tensor<T>& f_detail) {
    if (f_global.shape() != f_detail.shape())
        throw DimensionError("fib_forward: " + shape_str(f_global.shape()) + " vs " +
                             shape_str(f_detail.shape()));
    Tensor<T> cat = ops::concat<T>({f_global, f_detail}, 2);
    return nn::conv_forward(fib.c2, ops::relu(nn::conv_forward(fib.c1, cat)));
}

template <typename T>
struct LFormerModel {
    LFormerConfig config;
    nn::ProjectionBlock<T> proj_pan;  // P   -> d
    nn::ProjectionBlock<T> proj_ms;   // M   -> d
    nn::ProjectionBlock<T> proj_hf;   // Cat(Sobel(M), Sobel(P)) -> d
    std::vector<FiBlock<T>> fib;                     // N-1
    std::vector<nn::Conv2d<T>> value_proj;           // N-1, 1x1 conv 2d -> d
    std::vector<Tensor<T>> evolve_kernels;           // N-1 x [1 x k]   (evolved)
    std::vector<attention::QkvProjection<T>> qkv;    // N-1             (recompute)
    nn::Conv2d<T> head;  // 3x3 over Cat(F_N^g, F_{N-1}^d), 2d -> c, zero-init

    std::vector<NamedParam<T>> parameters() const;
    std::size_t parameter_count() const;

    // Structural copy whose tensors share the underlying buffers; used to hand
    // read-only parameters to per-worker tapes.
    LFormerModel alias() const;
};

template <typename T>
LFormerModel<T> build(const LFormerConfig& config) {
    config.validate();
    Rng rng(config.seed);
    const std::size_t c = config.bands, d = config.width;

    LFormerModel<T> m;
    m.config = config;
    m.proj_pan = nn::make_projection<T>(1, d, rng);
    m.proj_ms = nn::make_projection<T>(c, d, rng);
    m.proj_hf = nn::make_projection<T>(c + 1, d, rng);
    for (std::size_t i = 0; i + 1 < config.blocks; ++i) {
        m.fib.push_back({nn::make_conv2d<T>(3, 3, 2 * d, d, rng), nn::make_conv2d<T>(3, 3, d, d, rng)});
        m.value_proj.push_back(nn::make_conv2d<T>(1, 1, 2 * d, d, rng));
        switch (config.variant) {
            case Variant::evolved:
                m.evolve_kernels.push_back(nn::uniform_init<T>({1, config.kernel}, config.kernel, rng));
                break;
            case Variant::recompute:
                m.qkv.push_back(attention::make_qkv<T>(d, [&] { return nn::uniform_init<T>({d, d}, d, rng); }));
                break;
            case Variant::shared:
                break;
        }
    }
    m.head = nn::make_conv2d<T>(3, 3, 2 * d, c, rng, /*zero_init=*/true);
    return m;
}

template <typename T>
std::vector<NamedParam<T>> LFormerModel<T>::parameters() const {
    std::vector<NamedParam<T>> out;
    auto add_conv = [&](const std::string& name, const nn::Conv2d<T>& conv) {
        out.push_back({name + ".w", conv.w});
        out.push_back({name + ".b", conv.b});
    };
    auto add_proj = [&](const std::string& name, const nn::ProjectionBlock<T>& p) {
        add_conv(name + ".c1", p.c1);
        add_conv(name + ".c2", p.c2);
    };
    add_proj("proj_pan", proj_pan);
    add_proj("proj_ms", proj_ms);
    add_proj("proj_hf", proj_hf);
    for (std::size_t i = 0; i < fib.size(); ++i) {
        const std::string blk = "block" + std::to_string(i + 1);
        add_conv(blk + ".fib.c1", fib[i].c1);
        add_conv(blk + ".fib.c2", fib[i].c2);
        add_conv(blk + ".value", value_proj[i]);
        if (config.variant == Variant::evolved) {
            out.push_back({blk + ".evolve", evolve_kernels[i]});
        } else if (config.variant == Variant::recompute) {
            out.push_back({blk + ".wq", qkv[i].wq});
            out.push_back({blk + ".bq", qkv[i].bq});
            out.push_back({blk + ".wk", qkv[i].wk});
            out.push_back({blk + ".bk", qkv[i].bk});
            out.push_back({blk + ".wv", qkv[i].wv});
            out.push_back({blk + ".bv", qkv[i].bv});
        }
    }
    add_conv("head", head);
    return out;
}

template <typename T>
std::size_t LFormerModel<T>::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : parameters()) n += p.tensor.numel();
    return n;
}

template <typename T>
LFormerModel<T> LFormerModel<T>::alias() const {
    LFormerModel<T> m;
    m.config = config;
    auto ac = [](const nn::Conv2d<T>& conv) { return nn::Conv2d<T>{conv.w.alias(), conv.b.alias()}; };
    m.proj_pan = {ac(proj_pan.c1), ac(proj_pan.c2)};
    m.proj_ms = {ac(proj_ms.c1), ac(proj_ms.c2)};
    m.proj_hf = {ac(proj_hf.c1), ac(proj_hf.c2)};
    for (const auto& f : fib) m.fib.push_back({ac(f.c1), ac(f.c2)});
    for (const auto& v : value_proj) m.value_proj.push_back(ac(v));
    for (const auto& k : evolve_kernels) m.evolve_kernels.push_back(k.alias());
    for (const auto& q : qkv)
        m.qkv.push_back({q.wq.alias(), q.bq.alias(), q.wk.alias(), q.bk.alias(), q.wv.alias(),
                         q.bv.alias()});
    m.head = ac(head);
    return m;
}

// ---------------------------------------------------------------------------
// Forward
// ---------------------------------------------------------------------------

template <typename T>
struct ForwardTrace {
    std::vector<Tensor<T>> attention_maps;    // A_1 .. A_N
    std::vector<Tensor<T>> global_features;   // F_1^g .. F_N^g (token form)
    std::vector<Tensor<T>> detail_features;   // F_0^d .. F_{N-1}^d (image form)
    Tensor<T> output;
};

// variant_override lets an evolved-trained model run with the 'shared' rule
// (identical remaining weights), which is how the ablation is measured.
template <typename T>
Tensor<T> forward(const LFormerModel<T>& m, const Tensor<T>& ms_up, const Tensor<T>& pan,
                  ForwardTrace<T>* trace = nullptr,
                  std::optional<Variant> variant_override = std::nullopt) {
    if (ms_up.ndim() != 3 || pan.ndim() != 3 || pan.dim(2) != 1)
        throw DimensionError("forward: expected ms_up[HxWxC] and pan[HxWx1]");
    if (ms_up.dim(0) != pan.dim(0) || ms_up.dim(1) != pan.dim(1))
        throw DimensionError("forward: misaligned inputs " + shape_str(ms_up.shape()) + " vs " +
                             shape_str(pan.shape()));
    if (ms_up.dim(2) != m.config.bands)
        throw DimensionError("forward: model expects " + std::to_string(m.config.bands) +
                             " bands, got " + shape_str(ms_up.shape()));
    const std::size_t h = ms_up.dim(0), w = ms_up.dim(1);
    const Variant variant = variant_override.value_or(m.config.variant);
    if (variant != m.config.variant && variant != Variant::shared)
        throw ConfigError("forward: only the 'shared' rule can override a built variant");

    // projections and first cross-attention (PAN queries, MS keys/values)
    Tensor<T> f_pan = nn::flatten_tokens(nn::proj_forward(m.proj_pan, pan));
    Tensor<T> f_ms = nn::flatten_tokens(nn::proj_forward(m.proj_ms, ms_up));
    attention::AttentionOut<T> first = attention::cross_attention_first(f_pan, f_ms);

    // high-frequency branch
    Tensor<T> hf = ops::concat<T>({nn::sobel_apply(ms_up), nn::sobel_apply(pan)}, 2);
    Tensor<T> f_detail = nn::proj_forward(m.proj_hf, hf);  // F_0^d

    Tensor<T> map = first.map;
    Tensor<T> f_global = first.output;
    if (trace) {
        trace->attention_maps.push_back(map);
        trace->global_features.push_back(f_global);
        trace->detail_features.push_back(f_detail);
    }

    for (std::size_t i = 0; i + 1 < m.config.blocks; ++i) {
        Tensor<T> global_img = nn::unflatten_tokens(f_global, h, w);
        Tensor<T> detail = fib_forward(m.fib[i], global_img, f_detail);  // F_i^d
        Tensor<T> value_img =
            nn::conv_forward(m.value_proj[i], ops::concat<T>({global_img, detail}, 2));
        Tensor<T> value = nn::flatten_tokens(value_img);  // V_{i+1}

        switch (variant) {
            case Variant::evolved:
                map = attention::evolve_attention(map, m.evolve_kernels[i]);
                f_global = ops::matmul(map, value);  // F_{i+1}^g
                break;
            case Variant::shared:
                map = first.map;  // reused by reference, no renormalization
                f_global = ops::matmul(map, value);
                break;
            case Variant::recompute: {
                // Q, K, V are fresh token projections of the updated value
                attention::QkvTokens<T> t = attention::qkv_apply(m.qkv[i], value);
                attention::AttentionOut<T> att = attention::scaled_dot_attention(t.q, t.k, t.v);
                map = att.map;
                f_global = att.output;
                break;
            }
        }
        f_detail = detail;
        if (trace) {
            trace->attention_maps.push_back(map);
            trace->global_features.push_back(f_global);
            trace->detail_features.push_back(f_detail);
        }
    }

    // reconstruction over both branches: attention-refined global features and
    // the integrated high-frequency detail
    Tensor<T> head_in = ops::concat<T>({nn::unflatten_tokens(f_global, h, w), f_detail}, 2);
    Tensor<T> residual = nn::conv_forward(m.head, head_in);
    Tensor<T> out = ops::add(residual, ms_up);
    if (trace) trace->output = out;
    return out;
}

// L_total = L1(H_s, GT) + alpha * (1 - SSIM(H_s, GT))
template <typename T>
Tensor<T> loss_terms(const Tensor<T>& fused, const Tensor<T>& gt, T alpha) {
    Tensor<T> l1 = metrics::l1_loss(fused, gt);
    if (alpha == T(0)) return l1;
    return ops::add(l1, ops::scale(metrics::ssim_loss(fused, gt), alpha));
}

template <typename T>
Tensor<T> loss_forward(const LFormerModel<T>& m, const Tensor<T>& ms_up, const Tensor<T>& pan,
                       const Tensor<T>& gt, T alpha,
                       std::optional<Variant> variant_override = std::nullopt) {
    if (!gt.defined()) throw DataError("loss_forward: sample has no ground truth");
    Tensor<T> fused = forward(m, ms_up, pan, static_cast<ForwardTrace<T>*>(nullptr), variant_override);
    return loss_terms(fused, gt, alpha);
}

}  // namespace lformer::model
