#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lformer/tensor.hpp"

// Synthetic scene generation, reduced-resolution degradation, bicubic
// upsampling, the .lftk tensor container, dataset layout and PPM export.

namespace lformer::data {

// One aligned tuple. gt is undefined for full-resolution splits.
struct Sample {
    std::string id;
    Tensor<float> gt;     // [H x W x c]
    Tensor<float> pan;    // [H x W x 1]
    Tensor<float> ms;     // [H/r x W/r x c]
    Tensor<float> ms_up;  // [H x W x c]
};

struct SplitInfo {
    std::string name;
    bool has_gt = true;
    std::vector<std::string> ids;
};

struct DatasetManifest {
    std::uint64_t seed = 0;
    std::size_t bands = 0;
    std::size_t ratio = 0;
    std::size_t height = 0;  // base (reduced-resolution) sample size
    std::size_t width = 0;
    std::vector<SplitInfo> splits;

    const SplitInfo* find(const std::string& name) const;
    const SplitInfo& at(const std::string& name) const;
};

// ---------------------------------------------------------------------------
// Scene synthesis (double precision; cast to float32 at save time)
// ---------------------------------------------------------------------------

// Random anisotropic Gaussian blobs plus linear ramps. Band amplitudes share a
// per-blob luminance factor so bands correlate, as multispectral imagery does.
// Deterministic per seed; values clipped to [0, 1].
Tensor<double> gen_scene(std::uint64_t seed, std::size_t h, std::size_t w, std::size_t c);

// Pixelwise weighted band sum; weights must be nonnegative and sum to 1.
Tensor<double> pan_from_gt(const Tensor<double>& gt, const std::vector<double>& weights);
std::vector<double> default_pan_weights(std::size_t c);

// Per-band separable Gaussian blur (sigma r/2, radius 2r, truncated kernel
// renormalized to sum 1, edge-clamp borders) followed by top-left decimation.
Tensor<double> degrade_ms(const Tensor<double>& gt, std::size_t r);

// Separable cubic-convolution upsampling (a = -0.5), edge clamping.
Tensor<double> upsample_bicubic(const Tensor<double>& ms, std::size_t r);

// ---------------------------------------------------------------------------
// .lftk container: little-endian; magic "LFTK", version u32 = 1,
// dtype u32 (0 = f32, 1 = f64), ndim u32, ndim x u64 dims, row-major payload.
// ---------------------------------------------------------------------------

enum class Dtype : std::uint32_t { f32 = 0, f64 = 1 };

template <typename T>
void save_tensor(const std::string& path, const Tensor<T>& t);

template <typename T>
Tensor<T> load_tensor(const std::string& path);

Dtype peek_dtype(const std::string& path);

// ---------------------------------------------------------------------------
// Dataset building and loading
// ---------------------------------------------------------------------------

struct DatasetSpec {
    std::uint64_t seed = 0;
    std::size_t n_train = 0;
    std::size_t n_val = 0;
    std::size_t n_test = 0;
    std::size_t n_test_full = 0;  // GT-less split at doubled size
    std::size_t height = 64;
    std::size_t width = 64;
    std::size_t bands = 4;
    std::size_t ratio = 4;
};

// Generates every split under root (which must not already contain files) and
// writes <root>/manifest.txt. Per-sample seeds are derived from the base seed
// and the sample index, so generation order is irrelevant.
DatasetManifest build_dataset(const std::string& root, const DatasetSpec& spec);

DatasetManifest load_manifest(const std::string& root);
void write_manifest(const std::string& root, const DatasetManifest& m);

Sample load_sample(const std::string& root, const std::string& split, const std::string& id,
                   bool has_gt);

// Builds one sample in memory (used by build_dataset and tests).
Sample make_sample(std::uint64_t seed, const std::string& id, std::size_t h, std::size_t w,
                   std::size_t c, std::size_t r, bool keep_gt);

// ---------------------------------------------------------------------------
// PPM export (P6, 8-bit) of a 1- or 3-band slice. With normalize, the slice is
// min-max scaled; otherwise values are clamped to [0, 1].
// ---------------------------------------------------------------------------

template <typename T>
void write_ppm(const std::string& path, const Tensor<T>& img, bool normalize = false);

}  // namespace lformer::data
