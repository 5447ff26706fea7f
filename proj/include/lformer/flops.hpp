#pragma once

#include <cstdint>

// Runtime FLOP tally. When enabled, each op adds its cost under the fixed
// convention (1 multiply-accumulate = 2 FLOPs, softmax = 5 FLOPs/element,
// other elementwise = 1 FLOP/element; bias adds and data movement are free).
// Counters are bumped by the op-dispatch thread only; enable this from
// single-threaded (op-level) code.

namespace lformer::flops {

struct Meter {
    std::int64_t conv2d = 0;
    std::int64_t depthwise = 0;
    std::int64_t conv1d = 0;
    std::int64_t matmul = 0;
    std::int64_t softmax = 0;
    std::int64_t elementwise = 0;

    std::int64_t total() const {
        return conv2d + depthwise + conv1d + matmul + softmax + elementwise;
    }
    void reset() { *this = Meter{}; }
};

namespace detail {
inline bool g_enabled = false;
inline Meter g_meter;
}  // namespace detail

inline bool enabled() { return detail::g_enabled; }
inline void set_enabled(bool on) { detail::g_enabled = on; }
inline Meter& meter() { return detail::g_meter; }
inline void reset() { detail::g_meter.reset(); }

inline void add_conv2d(std::int64_t v) {
    if (detail::g_enabled) detail::g_meter.conv2d += v;
}
inline void add_depthwise(std::int64_t v) {
    if (detail::g_enabled) detail::g_meter.depthwise += v;
}
inline void add_conv1d(std::int64_t v) {
    if (detail::g_enabled) detail::g_meter.conv1d += v;
}
inline void add_matmul(std::int64_t v) {
    if (detail::g_enabled) detail::g_meter.matmul += v;
}
inline void add_softmax(std::int64_t v) {
    if (detail::g_enabled) detail::g_meter.softmax += v;
}
inline void add_elementwise(std::int64_t v) {
    if (detail::g_enabled) detail::g_meter.elementwise += v;
}

struct MeterScope {
    explicit MeterScope(bool on = true) : prev_(enabled()) { set_enabled(on); }
    ~MeterScope() { set_enabled(prev_); }
    MeterScope(const MeterScope&) = delete;
    MeterScope& operator=(const MeterScope&) = delete;

private:
    bool prev_;
};

}  // namespace lformer::flops
