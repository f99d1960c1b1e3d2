#pragma once

// Received-signal model r(k) = e^{j(2pi k df/N + phi)} sum_l h_l s(k - tau_l) + n(k),
// plus sampling-clock offset and trajectory-driven time-varying channels.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "nrrange/common.hpp"
#include "nrrange/nr_grid.hpp"

namespace nrrange {

struct PathComponent {
    cf64 gain{1.0, 0.0};
    double delay = 0.0;  // samples, fractional allowed
};

/// Ordered CIR; paths()[0] is the first-arrived path.
class MultipathChannel {
public:
    /// Throws std::domain_error unless delays are >= 0, finite and strictly increasing.
    explicit MultipathChannel(std::vector<PathComponent> paths);
    static MultipathChannel identity();

    const std::vector<PathComponent>& paths() const noexcept { return paths_; }
    std::size_t size() const noexcept { return paths_.size(); }
    double max_delay() const noexcept { return paths_.back().delay; }
    /// sum_l |h_l|^2
    double power_gain() const;
    /// Same profile with every delay shifted by `offset` samples.
    MultipathChannel delayed(double offset) const;

private:
    std::vector<PathComponent> paths_;
};

struct Impairments {
    double cfo_norm = 0.0;  // CFO / subcarrier spacing
    double phase0 = 0.0;    // rad
    double sto = 0.0;       // samples, added to every path delay
    double sco_ppm = 0.0;
    std::optional<double> snr_db;  // nullopt = noiseless

    void validate() const;
};

/// Radial distance to the gNB over time, sampled at the SSB period.
struct Trajectory {
    std::vector<std::pair<double, double>> waypoints;  // (time s, radial distance m)
    double carrier_freq_hz = 2565e6;
    double ssb_period_s = 0.02;

    static constexpr double kMaxRadialSpeed = 3.0;  // m/s, pedestrian bound

    void validate() const;
    double wavelength_m() const { return kSpeedOfLight / carrier_freq_hz; }
    double duration_s() const { return waypoints.back().first - waypoints.front().first; }
    /// Linear interpolation between waypoints; throws std::out_of_range outside the span.
    double radial_distance(double t) const;
    /// Number of SSB epochs whose time lies within the span.
    std::size_t epoch_count() const;
};

struct EpochChannel {
    MultipathChannel channel;
    double carrier_phase_offset = 0.0;  // rad applied to the first path
};

/// First path delayed by r(t)/c * fs and rotated by -2pi r(t)/lambda; later paths
/// keep the static profile.
EpochChannel trajectory_to_channel(const Trajectory& traj, std::size_t epoch_index,
                                   const MultipathChannel& static_multipath,
                                   double sample_rate_hz);

/// Linear convolution with the CIR, output truncated to `out_len` samples
/// (defaults to the input length). Integer delays are shifted exactly in time;
/// fractional delays use a frequency-domain phase ramp on a zero-padded block.
std::vector<cf64> apply_multipath(std::span<const cf64> samples, const MultipathChannel& chan,
                                  std::optional<std::size_t> out_len = std::nullopt);

/// Full impairment model on a sample block. Noise power is referenced to the mean
/// clean received power over the samples where the input is non-zero (the SSB
/// symbols of a burst capture). Deterministic for a given seed.
std::vector<cf64> apply_channel(std::span<const cf64> samples, const MultipathChannel& chan,
                                const Impairments& imp, const Numerology& num,
                                std::uint64_t seed);

/// Capture-scale variant with a channel that may change every `segment_len`
/// samples (one SSB period for trajectories). Multipath runs per segment with
/// overlap-add; SCO, CFO and noise are applied over the whole capture with
/// per-segment noise streams derived from `seed`.
using ChannelSchedule = std::function<MultipathChannel(std::size_t segment)>;
std::vector<cf32> apply_channel_segmented(std::span<const cf32> samples, std::size_t segment_len,
                                          const ChannelSchedule& schedule,
                                          const Impairments& imp, const Numerology& num,
                                          std::uint64_t seed);

/// One received SSB epoch synthesized in isolation: `guard` zeros, the SSB
/// waveform, `guard` zeros, passed through `chan`. CFO phase follows the absolute
/// sample index epoch_index * period_samples so it stays continuous across
/// epochs; noise uses a stream derived from (seed, epoch_index). The SSB's first
/// CP sample sits at index `guard`.
std::vector<cf64> simulate_epoch(std::span<const cf64> ssb_waveform, const MultipathChannel& chan,
                                 const Impairments& imp, const Numerology& num,
                                 std::size_t epoch_index, std::size_t period_samples,
                                 std::uint64_t seed, int guard = 64);

}  // namespace nrrange
