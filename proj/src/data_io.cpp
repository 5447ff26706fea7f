#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "lformer/data.hpp"

namespace fs = std::filesystem;

namespace lformer::data {

namespace {

constexpr char kMagic[4] = {'L', 'F', 'T', 'K'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const unsigned char* p) {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

std::uint64_t get_u64(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

template <typename T>
constexpr Dtype dtype_of();
template <>
constexpr Dtype dtype_of<float>() {
    return Dtype::f32;
}
template <>
constexpr Dtype dtype_of<double>() {
    return Dtype::f64;
}

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ContainerError(ContainerFault::io, "cannot open " + path);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

struct Header {
    Dtype dtype;
    Shape shape;
    std::size_t payload_offset;
};

Header parse_header(const std::string& bytes, const std::string& path) {
    if (bytes.size() < 16)
        throw ContainerError(ContainerFault::truncated, path + ": file shorter than header");
    if (std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw ContainerError(ContainerFault::bad_magic, path + ": bad magic");
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    const std::uint32_t version = get_u32(p + 4);
    if (version != kVersion)
        throw ContainerError(ContainerFault::bad_version,
                             path + ": unsupported version " + std::to_string(version));
    const std::uint32_t dt = get_u32(p + 8);
    if (dt > 1)
        throw ContainerError(ContainerFault::bad_dtype, path + ": unknown dtype " + std::to_string(dt));
    const std::uint32_t ndim = get_u32(p + 12);
    const std::size_t header_size = 16 + static_cast<std::size_t>(ndim) * 8;
    if (bytes.size() < header_size)
        throw ContainerError(ContainerFault::truncated, path + ": truncated dimension list");
    Header h;
    h.dtype = static_cast<Dtype>(dt);
    for (std::uint32_t i = 0; i < ndim; ++i)
        h.shape.push_back(static_cast<std::size_t>(get_u64(p + 16 + 8 * i)));
    h.payload_offset = header_size;
    return h;
}

}  // namespace

template <typename T>
void save_tensor(const std::string& path, const Tensor<T>& t) {
    std::string out;
    out.reserve(16 + t.ndim() * 8 + t.numel() * sizeof(T));
    out.append(kMagic, 4);
    put_u32(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(dtype_of<T>()));
    put_u32(out, static_cast<std::uint32_t>(t.ndim()));
    for (std::size_t d : t.shape()) put_u64(out, static_cast<std::uint64_t>(d));
    for (T v : t.data()) {
        if constexpr (sizeof(T) == 4) {
            std::uint32_t bits;
            std::memcpy(&bits, &v, 4);
            put_u32(out, bits);
        } else {
            std::uint64_t bits;
            std::memcpy(&bits, &v, 8);
            put_u64(out, bits);
        }
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw ContainerError(ContainerFault::io, "cannot open " + path + " for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw ContainerError(ContainerFault::io, "short write to " + path);
}

template <typename T>
Tensor<T> load_tensor(const std::string& path) {
    const std::string bytes = read_file(path);
    const Header h = parse_header(bytes, path);
    if (h.dtype != dtype_of<T>())
        throw ContainerError(ContainerFault::bad_dtype,
                             path + ": dtype does not match the requested element type");
    const std::size_t n = shape_numel(h.shape);
    if (bytes.size() != h.payload_offset + n * sizeof(T))
        throw ContainerError(ContainerFault::truncated,
                             path + ": payload size mismatch (" + std::to_string(bytes.size()) +
                                 " bytes on disk)");
    std::vector<T> vals(n);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + h.payload_offset;
    for (std::size_t i = 0; i < n; ++i) {
        if constexpr (sizeof(T) == 4) {
            const std::uint32_t bits = get_u32(p + 4 * i);
            std::memcpy(&vals[i], &bits, 4);
        } else {
            const std::uint64_t bits = get_u64(p + 8 * i);
            std::memcpy(&vals[i], &bits, 8);
        }
    }
    return Tensor<T>(h.shape, std::move(vals));
}

Dtype peek_dtype(const std::string& path) {
    return parse_header(read_file(path), path).dtype;
}

template void save_tensor<float>(const std::string&, const Tensor<float>&);
template void save_tensor<double>(const std::string&, const Tensor<double>&);
template Tensor<float> load_tensor<float>(const std::string&);
template Tensor<double> load_tensor<double>(const std::string&);

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

const SplitInfo* DatasetManifest::find(const std::string& name) const {
    for (const auto& s : splits)
        if (s.name == name) return &s;
    return nullptr;
}

const SplitInfo& DatasetManifest::at(const std::string& name) const {
    const SplitInfo* s = find(name);
    if (!s) throw DataError("dataset has no split named '" + name + "'");
    return *s;
}

void write_manifest(const std::string& root, const DatasetManifest& m) {
    std::ostringstream os;
    os << "version=1\n";
    os << "seed=" << m.seed << "\n";
    os << "bands=" << m.bands << "\n";
    os << "ratio=" << m.ratio << "\n";
    os << "height=" << m.height << "\n";
    os << "width=" << m.width << "\n";
    for (const auto& s : m.splits) {
        os << "split=" << s.name << "\n";
        os << "gt." << s.name << "=" << (s.has_gt ? 1 : 0) << "\n";
        for (const auto& id : s.ids) os << "id." << s.name << "=" << id << "\n";
    }
    std::ofstream f(root + "/manifest.txt", std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write manifest under " + root);
    f << os.str();
}

DatasetManifest load_manifest(const std::string& root) {
    std::ifstream f(root + "/manifest.txt");
    if (!f) throw DataError("no manifest.txt under " + root);
    DatasetManifest m;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw DataError(root + "/manifest.txt:" + std::to_string(lineno) + ": expected key=value");
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        if (key == "version") {
            if (value != "1") throw DataError("unsupported manifest version " + value);
        } else if (key == "seed") {
            m.seed = std::stoull(value);
        } else if (key == "bands") {
            m.bands = std::stoul(value);
        } else if (key == "ratio") {
            m.ratio = std::stoul(value);
        } else if (key == "height") {
            m.height = std::stoul(value);
        } else if (key == "width") {
            m.width = std::stoul(value);
        } else if (key == "split") {
            m.splits.push_back({value, true, {}});
        } else if (key.rfind("gt.", 0) == 0) {
            SplitInfo* s = const_cast<SplitInfo*>(m.find(key.substr(3)));
            if (!s) throw DataError("manifest references unknown split " + key.substr(3));
            s->has_gt = value == "1";
        } else if (key.rfind("id.", 0) == 0) {
            SplitInfo* s = const_cast<SplitInfo*>(m.find(key.substr(3)));
            if (!s) throw DataError("manifest references unknown split " + key.substr(3));
            s->ids.push_back(value);
        } else {
            throw DataError("manifest: unknown key '" + key + "'");
        }
    }
    // invariants: unique ids, referenced files present
    for (const auto& s : m.splits) {
        std::vector<std::string> sorted = s.ids;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
            throw DataError("manifest: duplicate sample id in split " + s.name);
        for (const auto& id : s.ids) {
            const fs::path dir = fs::path(root) / s.name / id;
            for (const char* name : {"pan.lftk", "ms.lftk", "ms_up.lftk"})
                if (!fs::exists(dir / name))
                    throw DataError("missing file " + (dir / name).string());
            if (s.has_gt && !fs::exists(dir / "gt.lftk"))
                throw DataError("missing file " + (dir / "gt.lftk").string());
        }
    }
    return m;
}

Sample load_sample(const std::string& root, const std::string& split, const std::string& id,
                   bool has_gt) {
    const fs::path dir = fs::path(root) / split / id;
    if (!fs::exists(dir)) throw DataError("no sample directory " + dir.string());
    Sample s;
    s.id = id;
    s.pan = load_tensor<float>((dir / "pan.lftk").string());
    s.ms = load_tensor<float>((dir / "ms.lftk").string());
    s.ms_up = load_tensor<float>((dir / "ms_up.lftk").string());
    if (has_gt) s.gt = load_tensor<float>((dir / "gt.lftk").string());
    return s;
}

// ---------------------------------------------------------------------------
// PPM
// ---------------------------------------------------------------------------

template <typename T>
void write_ppm(const std::string& path, const Tensor<T>& img, bool normalize) {
    if (img.ndim() != 2 && img.ndim() != 3)
        throw DimensionError("write_ppm expects [HxW] or [HxWxC], got " + shape_str(img.shape()));
    const std::size_t c = img.ndim() == 3 ? img.dim(2) : 1;
    if (c != 1 && c != 3)
        throw DimensionError("write_ppm supports 1- or 3-band slices, got " + shape_str(img.shape()));
    const std::size_t h = img.dim(0), w = img.dim(1);
    const auto v = img.data();

    double lo = 0.0, hi = 1.0;
    if (normalize) {
        lo = static_cast<double>(v[0]);
        hi = static_cast<double>(v[0]);
        for (T x : v) {
            lo = std::min(lo, static_cast<double>(x));
            hi = std::max(hi, static_cast<double>(x));
        }
        if (hi <= lo) hi = lo + 1.0;
    }
    const double scale = 255.0 / (hi - lo);

    std::string out = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
    out.reserve(out.size() + h * w * 3);
    for (std::size_t p = 0; p < h * w; ++p) {
        for (std::size_t ch = 0; ch < 3; ++ch) {
            const std::size_t src = c == 3 ? p * 3 + ch : p;
            double val = (static_cast<double>(v[src]) - lo) * scale;
            val = std::clamp(val, 0.0, 255.0);
            out.push_back(static_cast<char>(static_cast<unsigned char>(val + 0.5)));
        }
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot open " + path + " for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

template void write_ppm<float>(const std::string&, const Tensor<float>&, bool);
template void write_ppm<double>(const std::string&, const Tensor<double>&, bool);

}  // namespace lformer::data
