#include "nrrange/resample.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nrrange {

namespace {

constexpr double kPhasesPerSample = 4096.0;
// Kernel taps per side, in units of the lower-rate sample period. Kaiser's
// length formula gives ~40 for 80 dB over a 0.125-Nyquist transition; 48 leaves margin.
constexpr double kHalfTapsLowRate = 48.0;

double kaiser_beta(double atten_db) {
    if (atten_db > 50.0) return 0.1102 * (atten_db - 8.7);
    if (atten_db >= 21.0)
        return 0.5842 * std::pow(atten_db - 21.0, 0.4) + 0.07886 * (atten_db - 21.0);
    return 0.0;
}

}  // namespace

Resampler::Resampler(double ratio, double stopband_db) : ratio_(ratio) {
    if (!(ratio > 0.0) || !std::isfinite(ratio))
        throw std::domain_error("Resampler: ratio must be positive and finite");
    step_ = 1.0 / ratio;
    const double stretch = std::max(1.0, step_);  // kernel dilation when decimating
    half_width_ = kHalfTapsLowRate * stretch;
    table_resolution_ = kPhasesPerSample;

    // Cutoff at the lower Nyquist, in cycles per input sample.
    const double fc = 0.5 / stretch;
    const double beta = kaiser_beta(stopband_db);
    const double norm = std::cyl_bessel_i(0.0, beta);
    const auto n = static_cast<std::size_t>(std::ceil(half_width_ * table_resolution_)) + 2;
    table_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / table_resolution_;
        const double x = t / half_width_;
        if (x >= 1.0) {
            table_[i] = 0.0;
            continue;
        }
        const double arg = kPi * 2.0 * fc * t;
        const double sinc = t == 0.0 ? 1.0 : std::sin(arg) / arg;
        const double window = std::cyl_bessel_i(0.0, beta * std::sqrt(1.0 - x * x)) / norm;
        table_[i] = 2.0 * fc * sinc * window;
    }
}

double Resampler::kernel(double t) const {
    const double pos = std::abs(t) * table_resolution_;
    const auto i = static_cast<std::size_t>(pos);
    if (i + 1 >= table_.size()) return 0.0;
    const double frac = pos - static_cast<double>(i);
    return table_[i] + frac * (table_[i + 1] - table_[i]);
}

cf64 Resampler::sample_at(std::span<const cf64> in, double t) const {
    const auto lo = static_cast<std::ptrdiff_t>(std::ceil(t - half_width_));
    const auto hi = static_cast<std::ptrdiff_t>(std::floor(t + half_width_));
    const std::ptrdiff_t first = std::max<std::ptrdiff_t>(lo, 0);
    const std::ptrdiff_t last = std::min<std::ptrdiff_t>(hi, static_cast<std::ptrdiff_t>(in.size()) - 1);
    cf64 acc{};
    for (std::ptrdiff_t n = first; n <= last; ++n) acc += in[n] * kernel(t - static_cast<double>(n));
    return acc;
}

std::vector<cf64> Resampler::process(std::span<const cf64> in) const {
    if (in.empty()) return {};
    const auto count = static_cast<std::size_t>(std::floor((in.size() - 1) * ratio_ + 1e-9)) + 1;
    std::vector<cf64> out(count);
    for (std::size_t m = 0; m < count; ++m) out[m] = sample_at(in, static_cast<double>(m) * step_);
    return out;
}

std::vector<cf64> resample(std::span<const cf64> in, double in_rate_hz, double out_rate_hz) {
    if (!(in_rate_hz > 0.0) || !(out_rate_hz > 0.0))
        throw std::domain_error("resample: rates must be positive");
    if (in_rate_hz == out_rate_hz) return {in.begin(), in.end()};
    return Resampler(out_rate_hz / in_rate_hz).process(in);
}

}  // namespace nrrange
