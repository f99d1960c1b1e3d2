#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace nrrange {

using cf64 = std::complex<double>;
using cf32 = std::complex<float>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr double kSpeedOfLight = 299792458.0;  // m/s

// Error taxonomy. Input validation throws std::domain_error / std::length_error /
// std::out_of_range directly; the types below carry pipeline-level failures that
// the CLI maps onto exit codes.

/// No SSB could be located in a capture. Carries the detector trace so callers can
/// inspect why.
class DetectionError : public std::runtime_error {
public:
    DetectionError(const std::string& what, std::vector<float> metric_trace = {},
                   double peak_ratio = 0.0)
        : std::runtime_error(what), trace_(std::move(metric_trace)), peak_ratio_(peak_ratio) {}

    const std::vector<float>& metric_trace() const noexcept { return trace_; }
    double peak_ratio() const noexcept { return peak_ratio_; }

private:
    std::vector<float> trace_;
    double peak_ratio_;
};

/// Malformed IQ payload (odd byte count, bad datatype).
class FormatError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Missing or contradictory sidecar metadata.
class MetadataError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Wraps an angle into (-pi, pi].
inline double wrap_phase(double rad) {
    double w = std::remainder(rad, kTwoPi);
    if (w <= -kPi) w += kTwoPi;
    return w;
}

}  // namespace nrrange
