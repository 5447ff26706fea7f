#include "lformer/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace lformer::metrics {

namespace {

constexpr const char* kColumns[] = {"sam", "ergas", "psnr", "ssim", "q2n", "d_lambda", "d_s", "hqnr"};

double MetricRow::*field(std::size_t i) {
    static double MetricRow::*fields[] = {&MetricRow::sam,  &MetricRow::ergas,   &MetricRow::psnr,
                                          &MetricRow::ssim, &MetricRow::q2n,     &MetricRow::d_lambda,
                                          &MetricRow::d_s,  &MetricRow::hqnr};
    return fields[i];
}

std::string cell(double v) {
    if (std::isnan(v)) return "";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

}  // namespace

MetricRow MetricReport::aggregate_mean() const {
    MetricRow out;
    out.id = "mean";
    for (std::size_t i = 0; i < 8; ++i) {
        double sum = 0;
        std::size_t n = 0;
        for (const auto& r : rows) {
            const double v = r.*field(i);
            if (std::isnan(v)) continue;
            sum += v;
            ++n;
        }
        if (n > 0) out.*field(i) = sum / static_cast<double>(n);
    }
    return out;
}

MetricRow MetricReport::aggregate_std() const {
    const MetricRow m = aggregate_mean();
    MetricRow out;
    out.id = "std";
    for (std::size_t i = 0; i < 8; ++i) {
        const double mu = m.*field(i);
        if (std::isnan(mu)) continue;
        double acc = 0;
        std::size_t n = 0;
        for (const auto& r : rows) {
            const double v = r.*field(i);
            if (std::isnan(v)) continue;
            acc += (v - mu) * (v - mu);
            ++n;
        }
        out.*field(i) = n > 1 ? std::sqrt(acc / static_cast<double>(n - 1)) : 0.0;
    }
    return out;
}

std::string MetricReport::to_csv() const {
    std::ostringstream os;
    os << "id";
    for (const char* c : kColumns) os << "," << c;
    os << "\n";
    auto emit = [&](const MetricRow& r) {
        os << r.id;
        for (std::size_t i = 0; i < 8; ++i) os << "," << cell(r.*field(i));
        os << "\n";
    };
    for (const auto& r : rows) emit(r);
    emit(aggregate_mean());
    emit(aggregate_std());
    return os.str();
}

void MetricReport::write_csv(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open " + path + " for writing");
    f << to_csv();
}

}  // namespace lformer::metrics
