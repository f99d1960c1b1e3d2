#pragma once

// Coarse synchronization: PSS/SSS search, cell identity, fractional CFO, and
// DM-RS extraction from a located SSB.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "nrrange/common.hpp"
#include "nrrange/nr_grid.hpp"

namespace nrrange {

struct SyncConfig {
    /// Peak-to-mean ratio of the normalized PSS metric required for detection.
    double pss_threshold = 20.0;
    /// Peak-to-mean ratio over the 336 SSS candidates.
    double sss_threshold = 10.0;
    /// FFT windows start this many samples early inside the CP.
    int fft_backoff = 8;

    void validate(const Numerology& num) const;
};

struct PssDetection {
    std::ptrdiff_t pss_lag = 0;    // first useful sample of the PSS symbol
    std::ptrdiff_t ssb_start = 0;  // first CP sample of SSB symbol 0
    int m2 = 0;
    double peak_metric = 0.0;      // normalized |c|^2 / (E_s E_r), in [0, 1]
    double threshold_ratio = 0.0;  // peak over mean metric
    std::vector<float> metric_trace;  // metric of the winning m2 at every searched lag
};

struct SssDetection {
    int m1 = 0;
    double peak_metric = 0.0;
    double threshold_ratio = 0.0;
};

struct CoarseSyncResult {
    std::ptrdiff_t ssb_start = 0;
    int m2_hat = 0;
    int m1_hat = 0;
    CellIdentity cell{0, 0};
    double peak_metric = 0.0;
    double cfo_hat_norm = 0.0;
    double threshold_ratio = 0.0;
    double sss_metric = 0.0;
    std::vector<float> metric_trace;
};

/// Time-domain PSS replica (useful part only, N samples, unit energy).
const std::vector<cf64>& pss_replica(int m2, const Numerology& num);

/// Exhaustive normalized correlation of the three PSS replicas over lags
/// [0, max_lag], computed blockwise by FFT overlap-save. Lags whose SSB would
/// start before the capture are skipped. Throws DetectionError below threshold.
PssDetection detect_pss(std::span<const cf64> samples, const Numerology& num,
                        const SyncConfig& cfg = {}, std::optional<std::size_t> max_lag = {});
PssDetection detect_pss(std::span<const cf32> samples, const Numerology& num,
                        const SyncConfig& cfg = {}, std::optional<std::size_t> max_lag = {});

/// Normalized PSS metric at one lag (same definition as detect_pss).
double pss_metric_at(std::span<const cf32> samples, std::ptrdiff_t lag, int m2, const Numerology& num);
double pss_metric_at(std::span<const cf64> samples, std::ptrdiff_t lag, int m2, const Numerology& num);

/// SSS search on symbol 2, equalized by the PSS on symbol 0 (same subcarriers),
/// over the 336 m1 candidates for the given m2. Throws DetectionError below threshold.
SssDetection detect_sss(std::span<const cf64> samples, std::ptrdiff_t ssb_start, int m2,
                        const Numerology& num, const SyncConfig& cfg = {}, double cfo_norm = 0.0);
SssDetection detect_sss(std::span<const cf32> samples, std::ptrdiff_t ssb_start, int m2,
                        const Numerology& num, const SyncConfig& cfg = {}, double cfo_norm = 0.0);

/// N_ID^cell = 3 m1 + m2; throws std::domain_error out of range.
CellIdentity compute_cell_id(int m1, int m2);

/// Fractional CFO in subcarrier units from the CP/tail correlation of the four
/// SSB symbols: -angle(sum r(k) r*(k+N)) / 2pi. Valid for |cfo| < 0.5.
double estimate_cfo(std::span<const cf64> samples, std::ptrdiff_t ssb_start, const Numerology& num);
double estimate_cfo(std::span<const cf32> samples, std::ptrdiff_t ssb_start, const Numerology& num);

/// PSS, CFO and SSS in sequence.
CoarseSyncResult coarse_sync(std::span<const cf64> samples, const Numerology& num,
                             const SyncConfig& cfg = {}, std::optional<std::size_t> max_lag = {});
CoarseSyncResult coarse_sync(std::span<const cf32> samples, const Numerology& num,
                             const SyncConfig& cfg = {}, std::optional<std::size_t> max_lag = {});

/// Received DM-RS paired with the local replica. `received[i]` is the
/// demodulated value at replica position i.
struct PilotObservation {
    std::vector<cf64> received;
    PilotSet replica;
    std::vector<double> bins;  // signed FFT bin per pilot
};

/// Demodulates the SSB whose symbol 0 CP starts at `ssb_start`, with windows
/// `backoff` samples early, after removing cfo_norm with phase zero at
/// `cfo_reference` (defaults to ssb_start). A path at delay d relative to
/// ssb_start appears at delay d + backoff. Throws std::length_error when the SSB
/// runs past either end of the capture.
PilotObservation extract_dmrs(std::span<const cf64> samples, std::ptrdiff_t ssb_start,
                              const CellIdentity& cell, const Numerology& num, int backoff,
                              double cfo_norm = 0.0,
                              std::optional<std::ptrdiff_t> cfo_reference = {}, int ssb_index = 0);
PilotObservation extract_dmrs(std::span<const cf32> samples, std::ptrdiff_t ssb_start,
                              const CellIdentity& cell, const Numerology& num, int backoff,
                              double cfo_norm = 0.0,
                              std::optional<std::ptrdiff_t> cfo_reference = {}, int ssb_index = 0);
PilotObservation extract_dmrs(std::span<const cf64> samples, const CoarseSyncResult& sync,
                              const Numerology& num, int backoff);

}  // namespace nrrange
