#include "nrrange/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <spdlog/spdlog.h>

#include "nrrange/resample.hpp"

namespace nrrange {

using nlohmann::json;

std::size_t PipelineConfig::period_samples() const {
    return static_cast<std::size_t>(std::llround(ssb_period_s * num.sample_rate_hz()));
}

void PipelineConfig::validate() const {
    num.validate();
    sync.validate(num);
    acq.validate();
    dll.validate();
    if (!(carrier_freq_hz > 0.0)) throw std::domain_error("PipelineConfig: carrier_freq_hz must be positive");
    if (!(ssb_period_s > 0.0)) throw std::domain_error("PipelineConfig: ssb_period_s must be positive");
    if (std::abs(dll.update_period_s - ssb_period_s) > 1e-12)
        throw std::domain_error("PipelineConfig: DLL update period must equal the SSB period");
    if (smoothing_window < 1) throw std::domain_error("PipelineConfig: smoothing_window must be >= 1");
    if (recenter_window < 0) throw std::domain_error("PipelineConfig: recenter_window must be >= 0");
    if (period_samples() < static_cast<std::size_t>(num.ssb_length()))
        throw std::domain_error("PipelineConfig: SSB period shorter than one SSB");
}

json config_to_json(const PipelineConfig& cfg) {
    json j;
    j["numerology"] = {{"scs_hz", cfg.num.scs_hz},
                       {"fft_size", cfg.num.fft_size},
                       {"cp_len_normal", cfg.num.cp_len_normal},
                       {"cp_len_first", cfg.num.cp_len_first},
                       {"sample_rate_hz", cfg.num.sample_rate_hz()}};
    j["sync"] = {{"pss_threshold", cfg.sync.pss_threshold},
                 {"sss_threshold", cfg.sync.sss_threshold},
                 {"fft_backoff", cfg.sync.fft_backoff}};
    j["acquisition"] = {{"delta_tau", cfg.acq.delta_tau},
                        {"n_tau", cfg.acq.n_tau},
                        {"max_paths", cfg.acq.max_paths},
                        {"power_threshold", cfg.acq.power_threshold},
                        {"refine_passes", cfg.acq.refine_passes}};
    j["dll"] = {{"xi", cfg.dll.xi},
                {"loop_bandwidth_hz", cfg.dll.loop_bandwidth_hz},
                {"effective_bandwidth_hz", cfg.dll.effective_bandwidth_hz()},
                {"loop_gain", cfg.dll.loop_gain()},
                {"update_period_s", cfg.dll.update_period_s},
                {"loss_of_lock_epochs", cfg.dll.loss_of_lock_epochs},
                {"max_loop_gain", cfg.dll.max_loop_gain},
                {"drop_power_fraction", cfg.dll.drop_power_fraction},
                {"drop_epochs", cfg.dll.drop_epochs}};
    j["carrier_freq_hz"] = cfg.carrier_freq_hz;
    j["wavelength_m"] = cfg.wavelength_m();
    j["ssb_period_s"] = cfg.ssb_period_s;
    j["smoothing_window"] = cfg.smoothing_window;
    j["recenter_window"] = cfg.recenter_window;
    j["reacquire_on_loss"] = cfg.reacquire_on_loss;
    j["seed"] = cfg.seed;
    return j;
}

EpochTracker::EpochTracker(const PipelineConfig& cfg) : cfg_(cfg), track_(cfg.wavelength_m()) {
    cfg_.validate();
}

void EpochTracker::enter(const std::string& stage) {
    if (std::find(cycle_.begin(), cycle_.end(), stage) != cycle_.end()) return;
    cycle_.push_back(stage);
    trace_.push_back(stage);
}

void EpochTracker::acquire(std::size_t epoch, const PilotObservation& obs, EpochDiagnostics& diag) {
    cycle_.clear();
    enter("multipath_acquisition");
    AcquisitionResult acq = acquire_multipaths(obs.received, obs.replica.values, obs.bins, cfg_.acq,
                                               cfg_.num.fft_size);
    tracker_.emplace(acq, cfg_.dll, cfg_.num.fft_size);
    diag.reacquired = !acquisitions_.empty();
    acquisitions_.push_back({epoch, std::move(acq)});
}

const EpochDiagnostics& EpochTracker::process(std::size_t epoch, const PilotObservation& obs,
                                              std::ptrdiff_t window_start, int recenter_shift) {
    EpochDiagnostics diag;
    diag.epoch = epoch;
    diag.window_start = window_start;
    diag.anchor = window_start + cfg_.sync.fft_backoff;
    diag.recenter_shift = recenter_shift;
    epochs_.push_back({});

    if (!tracker_) {
        acquire(epoch, obs, diag);
    } else {
        enter("multipath_tracking");
        tracker_->shift_delays(-static_cast<double>(recenter_shift));
        tracker_->step(obs.received, obs.replica.values, obs.bins);
        if (!tracker_->first_path_locked() && cfg_.reacquire_on_loss) {
            spdlog::warn("epoch {}: first path lost lock, re-acquiring", epoch);
            acquire(epoch, obs, diag);
        } else {
            enter("carrier_phase_ranging");
        }
    }

    const auto& first = tracker_->first_path();
    const double toa = static_cast<double>(window_start) + first.delay;
    track_.append(epoch, toa, std::arg(first.coeff), first.locked);

    diag.cir = delay_profile(obs.received, obs.replica.values, obs.bins, cfg_.acq, cfg_.num.fft_size);
    diag.paths = tracker_->paths();
    epochs_.back() = std::move(diag);
    return epochs_.back();
}

double EpochTracker::first_path_delay() const {
    if (!tracker_) throw std::logic_error("EpochTracker: no epoch processed yet");
    return tracker_->first_path().delay;
}

std::vector<double> EpochTracker::relative_toa() const {
    const auto period = static_cast<double>(cfg_.period_samples());
    std::vector<double> out;
    out.reserve(track_.epochs().size());
    for (const auto& e : track_.epochs()) out.push_back(e.toa_samples - static_cast<double>(e.epoch) * period);
    return out;
}

std::vector<double> EpochTracker::smoothed_toa() const {
    const auto period = static_cast<double>(cfg_.period_samples());
    const auto rel = relative_toa();
    std::vector<double> deltas;
    deltas.reserve(rel.size());
    for (const auto& e : track_.epochs()) deltas.push_back(e.delta_m);
    auto out = phase_smooth_toa(rel, deltas, cfg_.smoothing_window, cfg_.num.sample_rate_hz());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] += static_cast<double>(track_.epochs()[i].epoch) * period;
    return out;
}

PipelineResult run_pipeline(std::span<const cf32> samples, const PipelineConfig& cfg) {
    cfg.validate();
    const Numerology& num = cfg.num;
    const auto period = static_cast<std::ptrdiff_t>(cfg.period_samples());
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(samples.size());
    const int backoff = cfg.sync.fft_backoff;

    PipelineResult result;
    result.sample_rate_hz = num.sample_rate_hz();
    result.input_samples = samples.size();
    result.track = RangeTrack(cfg.wavelength_m());
    result.stage_trace.push_back("coarse_sync");

    const auto max_lag = static_cast<std::size_t>(period + num.ssb_length());
    result.sync = coarse_sync(samples, num, cfg.sync, max_lag);
    const CoarseSyncResult& sync = result.sync;
    spdlog::info("coarse sync: ssb_start {} cell {} (m1 {}, m2 {}) cfo {:.4f} peak/mean {:.1f}",
                 sync.ssb_start, sync.cell.cell_id(), sync.m1_hat, sync.m2_hat, sync.cfo_hat_norm,
                 sync.threshold_ratio);

    // Earliest complete burst on the dead-reckoned grid.
    std::ptrdiff_t a0 = sync.ssb_start;
    while (a0 - period - backoff >= 0) a0 -= period;

    EpochTracker tracker(cfg);
    std::ptrdiff_t anchor = a0;
    for (std::size_t epoch = 0;; ++epoch) {
        const std::ptrdiff_t dead = epoch == 0 ? a0 : anchor + period;
        int shift = 0;
        if ((epoch > 0 || a0 != sync.ssb_start) && cfg.recenter_window > 0) {
            double best = -1.0;
            for (int s = -cfg.recenter_window; s <= cfg.recenter_window; ++s) {
                const double m = pss_metric_at(samples, dead + s + num.cp_len_normal, sync.m2_hat, num);
                if (m > best) {
                    best = m;
                    shift = s;
                }
            }
        }
        anchor = dead + shift;
        if (anchor - backoff + num.ssb_length() > n) break;
        if (anchor - backoff < 0) continue;  // burst too close to the capture start

        // CFO derotation is referenced to each burst's own anchor. A phase ramp carried
        // across epochs would turn the estimate's noise into an apparent range rate.
        const PilotObservation obs = extract_dmrs(samples, anchor, sync.cell, num, backoff, sync.cfo_hat_norm);
        tracker.process(epoch, obs, anchor - backoff, shift);
    }
    if (tracker.track().empty()) throw std::length_error("run_pipeline: no complete SSB in the capture");

    for (const auto& stage : tracker.stage_trace()) result.stage_trace.push_back(stage);
    result.track = tracker.track();
    result.smoothed_toa_samples = tracker.smoothed_toa();
    result.epochs = tracker.epochs();
    result.acquisitions = tracker.acquisitions();
    spdlog::info("tracked {} epochs, cumulative carrier-phase range {:.4f} m", result.track.epochs().size(),
                 result.track.cumulative_m());
    return result;
}

PipelineResult run_pipeline(const IqRecording& rec, const PipelineConfig& cfg) {
    const double target = cfg.num.sample_rate_hz();
    if (rec.meta.sample_rate_hz == target) return run_pipeline(std::span<const cf32>(rec.samples), cfg);

    spdlog::info("resampling capture from {} Hz to {} Hz", rec.meta.sample_rate_hz, target);
    const std::vector<cf64> wide(rec.samples.begin(), rec.samples.end());
    const auto converted = resample(wide, rec.meta.sample_rate_hz, target);
    const std::vector<cf32> narrow(converted.begin(), converted.end());
    return run_pipeline(std::span<const cf32>(narrow), cfg);
}

}  // namespace nrrange
