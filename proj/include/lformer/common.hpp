#pragma once

#include <atomic>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace lformer {

// ---------------------------------------------------------------------------
// Error taxonomy. The CLI maps these onto stable exit codes, so library code
// should throw the most specific type that applies.
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape/axis mismatches between tensors.
struct DimensionError : Error {
    using Error::Error;
};

// Invalid configuration values (even kernel sizes, unknown variants, ...).
struct ConfigError : Error {
    using Error::Error;
};

// File and dataset problems: missing files, malformed containers, manifests.
struct DataError : Error {
    using Error::Error;
};

// NaN/Inf escapes and other numeric failures.
struct NumericError : Error {
    using Error::Error;
};

enum class ContainerFault {
    bad_magic,
    bad_version,
    bad_dtype,
    truncated,
    io,
};

struct ContainerError : DataError {
    ContainerError(ContainerFault f, const std::string& msg) : DataError(msg), fault(f) {}
    ContainerFault fault;
};

// ---------------------------------------------------------------------------
// Numeric guard. When enabled, every forward op scans its output for NaN/Inf.
// The benchmark harness disables it so timings do not pay the validation cost.
// ---------------------------------------------------------------------------

namespace detail {
inline std::atomic<bool> g_finite_guard{true};
}

inline bool finite_guard_enabled() { return detail::g_finite_guard.load(std::memory_order_relaxed); }
inline void set_finite_guard(bool on) { detail::g_finite_guard.store(on, std::memory_order_relaxed); }

// RAII toggle used by benchmarks and tests.
struct FiniteGuardScope {
    explicit FiniteGuardScope(bool on) : prev_(finite_guard_enabled()) { set_finite_guard(on); }
    ~FiniteGuardScope() { set_finite_guard(prev_); }
    FiniteGuardScope(const FiniteGuardScope&) = delete;
    FiniteGuardScope& operator=(const FiniteGuardScope&) = delete;

private:
    bool prev_;
};

// Tensor buffers are multi-megabyte and short-lived; with default glibc
// settings they churn through mmap/munmap and the page faults dominate the
// kernels. Raising the thresholds keeps them on the reusable heap.
void tune_allocator();

// ---------------------------------------------------------------------------
// Deterministic RNG. splitmix64 gives portable bit streams; uniform doubles
// are produced by explicit bit scaling instead of std::uniform_real_distribution,
// whose output is implementation-defined.
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Mixes a stream id into a base seed; used to derive independent per-sample
// and per-step streams so generation order never matters.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    return splitmix64(base ^ (0x9e3779b97f4a7c15ULL + splitmix64(stream)));
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(splitmix64(seed ^ 0x6a09e667f3bcc908ULL)) {}

    std::uint64_t next_u64() {
        state_ = splitmix64(state_);
        return state_;
    }

    // [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // [0, n)
    std::int64_t uniform_int(std::int64_t n) {
        return static_cast<std::int64_t>(uniform() * static_cast<double>(n)) % n;
    }

private:
    std::uint64_t state_;
};

}  // namespace lformer
