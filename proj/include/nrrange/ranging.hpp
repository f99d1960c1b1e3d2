#pragma once

// Multipath acquisition (order-recursive LS matching pursuit), per-path DLL
// tracking with an early-minus-late power discriminator, LS coefficient refresh,
// and carrier-phase range accumulation.
//
// Delay convention: a path at delay tau (samples) multiplies pilot p by
// e^{-j2pi p tau/N}, p being the signed FFT bin of the pilot.

#include <cstddef>
#include <span>
#include <vector>

#include "nrrange/common.hpp"

namespace nrrange {

/// c(p) e^{-j2pi p tau/N}
std::vector<cf64> delayed_replica(std::span<const cf64> replica, std::span<const double> bins,
                                  double delay, int n_fft = 256);

struct AcquisitionConfig {
    double delta_tau = 0.1;
    int n_tau = 180;
    int max_paths = 6;
    double power_threshold = 0.8;
    /// Coordinate-descent passes over the retained delays after each new atom.
    int refine_passes = 2;

    double delay(int index) const { return index * delta_tau; }
    void validate() const;
};

struct AcquiredPath {
    double delay = 0.0;
    cf64 coeff{};
};

struct AcquisitionResult {
    std::vector<AcquiredPath> paths;  // ascending delay
    double residual_power_fraction = 1.0;
    /// ||residual||^2 / ||d||^2 after each retained atom.
    std::vector<double> residual_history;
};

/// Throws std::domain_error on all-zero pilots or mismatched lengths.
AcquisitionResult acquire_multipaths(std::span<const cf64> received, std::span<const cf64> replica,
                                     std::span<const double> bins, const AcquisitionConfig& cfg = {},
                                     int n_fft = 256);

/// |a_tau^H d| / ||a_tau||^2 on the acquisition grid (the matched-filter CIR).
std::vector<double> delay_profile(std::span<const cf64> received, std::span<const cf64> replica,
                                  std::span<const double> bins, const AcquisitionConfig& cfg = {},
                                  int n_fft = 256);

/// R(x) = (1/Np) sum_p z(p) conj(c(p) e^{-j2pi p x/N}) at x = tau - xi, tau, tau + xi.
struct Correlators {
    cf64 early;
    cf64 prompt;
    cf64 late;
};
Correlators correlate(std::span<const cf64> z, std::span<const cf64> replica,
                      std::span<const double> bins, double delay, double xi, int n_fft = 256);

/// a = (|R_late|^2 - |R_early|^2) / k_norm; positive when the true path is later
/// than the replica. Throws std::domain_error when k_norm is zero.
double emlp_discriminator(const Correlators& corr, double k_norm);
/// Same, from the residual pilots and the replica already shifted to the current
/// delay estimate.
double emlp_discriminator(std::span<const cf64> z, std::span<const cf64> shifted_replica,
                          std::span<const double> bins, double xi, double k_norm, int n_fft = 256);

/// h = (c^H c)^{-1} c^H z. Throws std::domain_error for a zero replica or length mismatch.
cf64 update_channel_coeff(std::span<const cf64> replica, std::span<const cf64> z);

struct DllConfig {
    double xi = 0.5;
    double loop_bandwidth_hz = 25.0;
    double update_period_s = 0.02;
    int loss_of_lock_epochs = 10;
    double max_loop_gain = 0.5;
    /// Paths after the first are dropped below this share of tracked power...
    double drop_power_fraction = 0.05;
    /// ...for this many consecutive epochs.
    int drop_epochs = 10;

    /// 4 B_L T, clamped to max_loop_gain.
    double loop_gain() const;
    double effective_bandwidth_hz() const { return loop_gain() / (4.0 * update_period_s); }
    void validate() const;
};

struct DllTrackState {
    int path_index = 0;
    double delay = 0.0;
    cf64 coeff{};
    double xi = 0.5;
    double loop_bandwidth_hz = 0.0;  // effective, after clamping
    double loop_gain = 0.0;
    double loop_memory = 0.0;        // last filtered correction
    double k_norm = 0.0;
    double update_period_s = 0.02;
    double discriminator = 0.0;
    int out_of_range_epochs = 0;
    int weak_epochs = 0;
    bool locked = true;
};

DllTrackState init_dll(int path_index, const AcquiredPath& path, const DllConfig& cfg);

/// One tracking epoch for one path. `earlier` are the paths j < l, already
/// updated this epoch; their contributions are removed from the pilots before
/// the discriminator and the coefficient refresh.
DllTrackState dll_step(const DllTrackState& state, std::span<const cf64> received,
                       std::span<const cf64> replica, std::span<const double> bins,
                       std::span<const DllTrackState> earlier, const DllConfig& cfg, int n_fft = 256);

/// Runs dll_step over all tracked paths in delay order and prunes weak later paths.
class MultipathTracker {
public:
    MultipathTracker(const AcquisitionResult& acq, const DllConfig& cfg, int n_fft = 256);

    void step(std::span<const cf64> received, std::span<const cf64> replica,
              std::span<const double> bins);
    /// Moves every tracked delay by the same amount (window re-centering).
    void shift_delays(double offset);

    const std::vector<DllTrackState>& paths() const noexcept { return paths_; }
    const DllTrackState& first_path() const { return paths_.front(); }
    bool first_path_locked() const { return paths_.front().locked; }

private:
    DllConfig cfg_;
    int n_fft_;
    std::vector<DllTrackState> paths_;
};

struct RangeEpoch {
    std::size_t epoch = 0;
    double toa_samples = 0.0;
    double phase_rad = 0.0;
    double delta_m = 0.0;
    double cumulative_m = 0.0;
    bool locked = true;
};

/// delta = wrap(phi_i - phi_{i-1}) / 2pi * lambda; positive when the range shrinks.
double carrier_phase_delta(double phase_prev, double phase_cur, double wavelength_m);

class RangeTrack {
public:
    explicit RangeTrack(double wavelength_m);

    double wavelength_m() const noexcept { return wavelength_m_; }
    const std::vector<RangeEpoch>& epochs() const noexcept { return epochs_; }
    bool empty() const noexcept { return epochs_.empty(); }
    double cumulative_m() const { return epochs_.empty() ? 0.0 : epochs_.back().cumulative_m; }

    /// Appends an epoch; the first one records delta = 0.
    const RangeEpoch& append(std::size_t epoch, double toa_samples, double phase_rad, bool locked = true);

private:
    double wavelength_m_;
    std::vector<RangeEpoch> epochs_;
};

/// Functional form: the track with one more epoch.
RangeTrack carrier_phase_range(RangeTrack track, std::size_t epoch, double toa_samples,
                               double phase_rad, bool locked = true);

/// Hatch smoothing: s_i = toa_i/m + (m-1)/m (s_{i-1} - delta_i/c * fs), m = min(i+1, M).
/// ToA in samples, deltas in metres.
std::vector<double> phase_smooth_toa(std::span<const double> toa_samples,
                                     std::span<const double> delta_m, int window,
                                     double sample_rate_hz);

}  // namespace nrrange
