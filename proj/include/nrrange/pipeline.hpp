#pragma once

// Receiver chain over a capture: coarse sync, multipath acquisition on the first
// SSB, per-epoch DLL tracking every SSB period, carrier-phase ranging and
// Hatch smoothing.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "nrrange/iq_io.hpp"
#include "nrrange/nr_grid.hpp"
#include "nrrange/ranging.hpp"
#include "nrrange/sync.hpp"

namespace nrrange {

struct PipelineConfig {
    Numerology num;
    SyncConfig sync;
    AcquisitionConfig acq;
    DllConfig dll;
    double carrier_freq_hz = 2565e6;
    double ssb_period_s = 0.02;
    int smoothing_window = 100;
    /// Per-epoch anchor search half-width around the dead-reckoned position.
    int recenter_window = 2;
    bool reacquire_on_loss = true;
    std::uint64_t seed = 0;  // recorded for provenance; the receiver is deterministic

    double wavelength_m() const { return kSpeedOfLight / carrier_freq_hz; }
    std::size_t period_samples() const;
    void validate() const;
};

nlohmann::json config_to_json(const PipelineConfig& cfg);

struct EpochDiagnostics {
    std::size_t epoch = 0;
    std::ptrdiff_t anchor = 0;      // first CP sample of SSB symbol 0
    std::ptrdiff_t window_start = 0;  // anchor - fft_backoff; delays are relative to this
    int recenter_shift = 0;
    bool reacquired = false;
    std::vector<double> cir;  // delay_profile on the acquisition grid
    std::vector<DllTrackState> paths;
};

struct AcquisitionRecord {
    std::size_t epoch = 0;
    AcquisitionResult result;
};

struct PipelineResult {
    CoarseSyncResult sync;
    std::vector<AcquisitionRecord> acquisitions;
    RangeTrack track{kSpeedOfLight / 2565e6};
    std::vector<double> smoothed_toa_samples;
    std::vector<EpochDiagnostics> epochs;
    std::vector<std::string> stage_trace;
    double sample_rate_hz = 0.0;
    std::size_t input_samples = 0;
};

/// Acquisition, tracking and ranging over a stream of per-epoch pilot
/// observations. Independent of where the observations come from, so it serves
/// both full captures and per-epoch simulations.
class EpochTracker {
public:
    explicit EpochTracker(const PipelineConfig& cfg);

    /// `window_start` is the absolute sample index of the FFT window start of SSB
    /// symbol 0; `recenter_shift` is how far that window moved relative to pure
    /// dead reckoning since the previous epoch.
    const EpochDiagnostics& process(std::size_t epoch, const PilotObservation& obs,
                                    std::ptrdiff_t window_start, int recenter_shift = 0);

    const RangeTrack& track() const noexcept { return track_; }
    const std::vector<EpochDiagnostics>& epochs() const noexcept { return epochs_; }
    const std::vector<AcquisitionRecord>& acquisitions() const noexcept { return acquisitions_; }
    const std::vector<std::string>& stage_trace() const noexcept { return trace_; }
    /// First-path delay of the latest epoch relative to its window start.
    double first_path_delay() const;

    /// Hatch-smoothed ToA (absolute samples); smoothing runs on the ToA relative
    /// to each epoch's nominal position epoch * period.
    std::vector<double> smoothed_toa() const;
    /// ToA relative to epoch * period, the quantity that is smoothed.
    std::vector<double> relative_toa() const;

private:
    void enter(const std::string& stage);
    void acquire(std::size_t epoch, const PilotObservation& obs, EpochDiagnostics& diag);

    PipelineConfig cfg_;
    std::optional<MultipathTracker> tracker_;
    RangeTrack track_;
    std::vector<EpochDiagnostics> epochs_;
    std::vector<AcquisitionRecord> acquisitions_;
    std::vector<std::string> trace_;
    std::vector<std::string> cycle_;
};

/// Throws DetectionError when no SSB is found; std::length_error when the
/// capture holds no complete SSB after the detected position.
PipelineResult run_pipeline(std::span<const cf32> samples, const PipelineConfig& cfg);

/// Resamples to the numerology rate first when the recording differs.
PipelineResult run_pipeline(const IqRecording& rec, const PipelineConfig& cfg);

}  // namespace nrrange
