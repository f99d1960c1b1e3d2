#include "nrrange/sync.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <stdexcept>

#include "nrrange/fft.hpp"

namespace nrrange {

namespace {

constexpr std::size_t kCorrBlock = 8192;

template <typename Sample>
std::ptrdiff_t ssize(std::span<const Sample> s) {
    return static_cast<std::ptrdiff_t>(s.size());
}

// Spectra of the three replicas zero-padded to the overlap-save block.
const std::array<std::vector<cf64>, 3>& replica_spectra(const Numerology& num) {
    thread_local std::map<int, std::array<std::vector<cf64>, 3>> cache;
    auto it = cache.find(num.fft_size);
    if (it != cache.end()) return it->second;
    std::array<std::vector<cf64>, 3> spectra;
    for (int m2 = 0; m2 < 3; ++m2) {
        const auto& rep = pss_replica(m2, num);
        std::vector<cf64> buf(kCorrBlock);
        std::copy(rep.begin(), rep.end(), buf.begin());
        cached_fft(kCorrBlock, FftDirection::Forward).execute(buf, buf);
        for (auto& x : buf) x = std::conj(x);
        spectra[m2] = std::move(buf);
    }
    return cache.emplace(num.fft_size, std::move(spectra)).first->second;
}

template <typename Sample>
PssDetection detect_pss_impl(std::span<const Sample> samples, const Numerology& num,
                             const SyncConfig& cfg, std::optional<std::size_t> max_lag) {
    num.validate();
    const std::ptrdiff_t n = num.fft_size;
    const std::ptrdiff_t cp = num.cp_len_normal;
    const std::ptrdiff_t lag_lo = cp;
    std::ptrdiff_t lag_hi = ssize(samples) - (num.ssb_length() - cp);
    if (max_lag) lag_hi = std::min(lag_hi, static_cast<std::ptrdiff_t>(*max_lag));
    if (lag_hi < lag_lo) throw DetectionError("no SSB detected: capture shorter than one SSB");
    const auto count = static_cast<std::size_t>(lag_hi - lag_lo + 1);

    // Sliding window energy with a floor so silent stretches score zero.
    std::vector<double> prefix(samples.size() + 1, 0.0);
    for (std::size_t k = 0; k < samples.size(); ++k) prefix[k + 1] = prefix[k] + std::norm(cf64(samples[k]));
    const double mean_window = prefix.back() / static_cast<double>(samples.size()) * static_cast<double>(n);
    const double energy_floor = 1e-9 * mean_window;

    std::array<std::vector<float>, 3> metric;
    for (auto& m : metric) m.assign(count, 0.0f);

    const auto& spectra = replica_spectra(num);
    const std::ptrdiff_t valid = static_cast<std::ptrdiff_t>(kCorrBlock) - n + 1;
    std::vector<cf64> block(kCorrBlock), prod(kCorrBlock);
    const Fft& fwd = cached_fft(kCorrBlock, FftDirection::Forward);
    const Fft& inv = cached_fft(kCorrBlock, FftDirection::Inverse);
    const double inv_len = 1.0 / static_cast<double>(kCorrBlock);

    for (std::ptrdiff_t k0 = lag_lo; k0 <= lag_hi; k0 += valid) {
        for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(kCorrBlock); ++j)
            block[j] = k0 + j < ssize(samples) ? cf64(samples[k0 + j]) : cf64{};
        fwd.execute(block, block);
        const std::ptrdiff_t outputs = std::min(valid, lag_hi - k0 + 1);
        for (int m2 = 0; m2 < 3; ++m2) {
            for (std::size_t i = 0; i < kCorrBlock; ++i) prod[i] = block[i] * spectra[m2][i];
            inv.execute(prod, prod);
            for (std::ptrdiff_t j = 0; j < outputs; ++j) {
                const std::ptrdiff_t lag = k0 + j;
                const double energy = prefix[lag + n] - prefix[lag];
                if (energy <= energy_floor) continue;
                metric[m2][lag - lag_lo] = static_cast<float>(std::norm(prod[j] * inv_len) / energy);
            }
        }
    }

    PssDetection best;
    std::size_t best_idx = 0;
    float best_val = -1.0f;
    for (int m2 = 0; m2 < 3; ++m2) {
        const auto it = std::max_element(metric[m2].begin(), metric[m2].end());
        if (*it > best_val) {
            best_val = *it;
            best_idx = static_cast<std::size_t>(it - metric[m2].begin());
            best.m2 = m2;
        }
    }
    double mean = 0.0;
    for (float v : metric[best.m2]) mean += v;
    mean /= static_cast<double>(count);

    best.pss_lag = lag_lo + static_cast<std::ptrdiff_t>(best_idx);
    best.ssb_start = best.pss_lag - cp;
    best.peak_metric = best_val;
    best.threshold_ratio = mean > 0.0 ? best_val / mean : 0.0;
    best.metric_trace = std::move(metric[best.m2]);
    if (!(best.threshold_ratio >= cfg.pss_threshold))
        throw DetectionError("no SSB detected: PSS peak-to-mean " + std::to_string(best.threshold_ratio) +
                                 " below threshold " + std::to_string(cfg.pss_threshold),
                             std::move(best.metric_trace), best.threshold_ratio);
    return best;
}

template <typename Sample>
double pss_metric_at_impl(std::span<const Sample> samples, std::ptrdiff_t lag, int m2,
                          const Numerology& num) {
    const auto& rep = pss_replica(m2, num);
    const auto n = static_cast<std::ptrdiff_t>(rep.size());
    if (lag < 0 || lag + n > ssize(samples)) return 0.0;
    cf64 acc{};
    double energy = 0.0;
    for (std::ptrdiff_t k = 0; k < n; ++k) {
        const cf64 x(samples[lag + k]);
        acc += x * std::conj(rep[k]);
        energy += std::norm(x);
    }
    return energy > 0.0 ? std::norm(acc) / energy : 0.0;
}

// Copies the SSB span starting `backoff` samples before ssb_start, derotating the
// CFO with zero phase at `reference`, and demodulates the first `symbols` symbols.
template <typename Sample>
ResourceGrid demod_ssb(std::span<const Sample> samples, std::ptrdiff_t ssb_start, int backoff,
                       double cfo_norm, std::ptrdiff_t reference, const Numerology& num,
                       int symbols) {
    const std::ptrdiff_t first = ssb_start - backoff;
    const std::ptrdiff_t len = static_cast<std::ptrdiff_t>(symbols) * num.symbol_length();
    if (first < 0 || first + len > ssize(samples))
        throw std::length_error("SSB window runs past the capture bounds");
    std::vector<cf64> local(static_cast<std::size_t>(len));
    const double w = -kTwoPi * cfo_norm / num.fft_size;
    for (std::ptrdiff_t k = 0; k < len; ++k) {
        const cf64 x(samples[first + k]);
        if (cfo_norm == 0.0) {
            local[k] = x;
        } else {
            const double arg = w * static_cast<double>(first + k - reference);
            local[k] = x * cf64(std::cos(arg), std::sin(arg));
        }
    }
    return ofdm_demodulate(std::span<const cf64>(local), num, 0, kSsbSubcarriers, symbols);
}

template <typename Sample>
SssDetection detect_sss_impl(std::span<const Sample> samples, std::ptrdiff_t ssb_start, int m2,
                             const Numerology& num, const SyncConfig& cfg, double cfo_norm) {
    if (m2 < 0 || m2 > 2) throw std::domain_error("detect_sss: m2 out of range");
    const int backoff = static_cast<int>(std::clamp<std::ptrdiff_t>(ssb_start, 0, cfg.fft_backoff));
    const ResourceGrid grid = demod_ssb(samples, ssb_start, backoff, cfo_norm, ssb_start, num, 3);

    const SyncSequence pss = generate_pss(m2);
    std::array<cf64, kSyncSeqLength> y2{}, h{};
    double e2 = 0.0, eh = 0.0;
    for (int i = 0; i < kSyncSeqLength; ++i) {
        y2[i] = grid.at(2, kSyncFirstSubcarrier + i);
        h[i] = grid.at(0, kSyncFirstSubcarrier + i) * pss[i];
        e2 += std::norm(y2[i]);
        eh += std::norm(h[i]);
    }
    if (e2 * eh <= 0.0) throw DetectionError("SSS not detected: empty SSS symbol");

    SssDetection best;
    double sum = 0.0;
    best.peak_metric = -1.0;
    for (int m1 = 0; m1 < 336; ++m1) {
        const SyncSequence sss = generate_sss(m1, m2);
        cf64 acc{};
        for (int i = 0; i < kSyncSeqLength; ++i) acc += y2[i] * std::conj(h[i]) * sss[i];
        const double metric = std::norm(acc) / (e2 * eh);
        sum += metric;
        if (metric > best.peak_metric) {
            best.peak_metric = metric;
            best.m1 = m1;
        }
    }
    const double mean = sum / 336.0;
    best.threshold_ratio = mean > 0.0 ? best.peak_metric / mean : 0.0;
    if (!(best.threshold_ratio >= cfg.sss_threshold))
        throw DetectionError("SSS not detected: peak-to-mean " + std::to_string(best.threshold_ratio) +
                                 " below threshold " + std::to_string(cfg.sss_threshold),
                             {}, best.threshold_ratio);
    return best;
}

template <typename Sample>
double estimate_cfo_impl(std::span<const Sample> samples, std::ptrdiff_t ssb_start,
                         const Numerology& num) {
    const std::ptrdiff_t n = num.fft_size;
    if (ssb_start < 0 || ssb_start + num.ssb_length() > ssize(samples))
        throw std::length_error("estimate_cfo: SSB runs past the capture bounds");
    cf64 acc{};
    for (int s = 0; s < kSsbSymbols; ++s) {
        const std::ptrdiff_t sym = ssb_start + static_cast<std::ptrdiff_t>(s) * num.symbol_length();
        for (std::ptrdiff_t k = 0; k < num.cp_len_normal; ++k)
            acc += cf64(samples[sym + k]) * std::conj(cf64(samples[sym + k + n]));
    }
    if (acc == cf64{}) return 0.0;
    return -std::arg(acc) / kTwoPi;
}

template <typename Sample>
CoarseSyncResult coarse_sync_impl(std::span<const Sample> samples, const Numerology& num,
                                  const SyncConfig& cfg, std::optional<std::size_t> max_lag) {
    cfg.validate(num);
    PssDetection pss = detect_pss_impl(samples, num, cfg, max_lag);
    const double cfo = estimate_cfo_impl(samples, pss.ssb_start, num);
    const SssDetection sss = detect_sss_impl(samples, pss.ssb_start, pss.m2, num, cfg, cfo);

    CoarseSyncResult out;
    out.ssb_start = pss.ssb_start;
    out.m2_hat = pss.m2;
    out.m1_hat = sss.m1;
    out.cell = compute_cell_id(sss.m1, pss.m2);
    out.peak_metric = pss.peak_metric;
    out.cfo_hat_norm = cfo;
    out.threshold_ratio = pss.threshold_ratio;
    out.sss_metric = sss.peak_metric;
    out.metric_trace = std::move(pss.metric_trace);
    return out;
}

template <typename Sample>
PilotObservation extract_dmrs_impl(std::span<const Sample> samples, std::ptrdiff_t ssb_start,
                                   const CellIdentity& cell, const Numerology& num, int backoff,
                                   double cfo_norm, std::optional<std::ptrdiff_t> cfo_reference,
                                   int ssb_index) {
    if (backoff < 0 || backoff > num.cp_len_normal)
        throw std::domain_error("extract_dmrs: backoff must lie within the CP");
    const ResourceGrid grid = demod_ssb(samples, ssb_start, backoff, cfo_norm,
                                        cfo_reference.value_or(ssb_start), num, kSsbSymbols);
    PilotObservation obs;
    obs.replica = generate_pbch_dmrs(cell, ssb_index, false);
    obs.received = gather_pilots(grid, obs.replica);
    obs.bins = obs.replica.frequency_bins();
    return obs;
}

}  // namespace

void SyncConfig::validate(const Numerology& num) const {
    if (!(pss_threshold > 0.0) || !(sss_threshold > 0.0))
        throw std::domain_error("SyncConfig: thresholds must be positive");
    if (fft_backoff < 0 || fft_backoff > num.cp_len_normal)
        throw std::domain_error("SyncConfig: fft_backoff must lie within the CP");
}

const std::vector<cf64>& pss_replica(int m2, const Numerology& num) {
    if (m2 < 0 || m2 > 2) throw std::domain_error("pss_replica: m2 out of range");
    thread_local std::map<std::pair<int, int>, std::vector<cf64>> cache;
    const auto key = std::make_pair(num.fft_size, m2);
    if (auto it = cache.find(key); it != cache.end()) return it->second;

    ResourceGrid grid(kSsbSubcarriers, 1);
    const SyncSequence pss = generate_pss(m2);
    for (int i = 0; i < kSyncSeqLength; ++i) grid.at(0, kSyncFirstSubcarrier + i) = pss[i];
    const auto symbol = ofdm_modulate(grid, num);
    std::vector<cf64> useful(symbol.begin() + num.cp_len_normal, symbol.end());
    double energy = 0.0;
    for (const auto& x : useful) energy += std::norm(x);
    const double scale = 1.0 / std::sqrt(energy);
    for (auto& x : useful) x *= scale;
    return cache.emplace(key, std::move(useful)).first->second;
}

PssDetection detect_pss(std::span<const cf64> samples, const Numerology& num, const SyncConfig& cfg,
                        std::optional<std::size_t> max_lag) {
    return detect_pss_impl(samples, num, cfg, max_lag);
}
PssDetection detect_pss(std::span<const cf32> samples, const Numerology& num, const SyncConfig& cfg,
                        std::optional<std::size_t> max_lag) {
    return detect_pss_impl(samples, num, cfg, max_lag);
}

double pss_metric_at(std::span<const cf32> samples, std::ptrdiff_t lag, int m2, const Numerology& num) {
    return pss_metric_at_impl(samples, lag, m2, num);
}
double pss_metric_at(std::span<const cf64> samples, std::ptrdiff_t lag, int m2, const Numerology& num) {
    return pss_metric_at_impl(samples, lag, m2, num);
}

SssDetection detect_sss(std::span<const cf64> samples, std::ptrdiff_t ssb_start, int m2,
                        const Numerology& num, const SyncConfig& cfg, double cfo_norm) {
    return detect_sss_impl(samples, ssb_start, m2, num, cfg, cfo_norm);
}
SssDetection detect_sss(std::span<const cf32> samples, std::ptrdiff_t ssb_start, int m2,
                        const Numerology& num, const SyncConfig& cfg, double cfo_norm) {
    return detect_sss_impl(samples, ssb_start, m2, num, cfg, cfo_norm);
}

CellIdentity compute_cell_id(int m1, int m2) { return CellIdentity(m1, m2); }

double estimate_cfo(std::span<const cf64> samples, std::ptrdiff_t ssb_start, const Numerology& num) {
    return estimate_cfo_impl(samples, ssb_start, num);
}
double estimate_cfo(std::span<const cf32> samples, std::ptrdiff_t ssb_start, const Numerology& num) {
    return estimate_cfo_impl(samples, ssb_start, num);
}

CoarseSyncResult coarse_sync(std::span<const cf64> samples, const Numerology& num,
                             const SyncConfig& cfg, std::optional<std::size_t> max_lag) {
    return coarse_sync_impl(samples, num, cfg, max_lag);
}
CoarseSyncResult coarse_sync(std::span<const cf32> samples, const Numerology& num,
                             const SyncConfig& cfg, std::optional<std::size_t> max_lag) {
    return coarse_sync_impl(samples, num, cfg, max_lag);
}

PilotObservation extract_dmrs(std::span<const cf64> samples, std::ptrdiff_t ssb_start,
                              const CellIdentity& cell, const Numerology& num, int backoff,
                              double cfo_norm, std::optional<std::ptrdiff_t> cfo_reference,
                              int ssb_index) {
    return extract_dmrs_impl(samples, ssb_start, cell, num, backoff, cfo_norm, cfo_reference, ssb_index);
}
PilotObservation extract_dmrs(std::span<const cf32> samples, std::ptrdiff_t ssb_start,
                              const CellIdentity& cell, const Numerology& num, int backoff,
                              double cfo_norm, std::optional<std::ptrdiff_t> cfo_reference,
                              int ssb_index) {
    return extract_dmrs_impl(samples, ssb_start, cell, num, backoff, cfo_norm, cfo_reference, ssb_index);
}
PilotObservation extract_dmrs(std::span<const cf64> samples, const CoarseSyncResult& sync,
                              const Numerology& num, int backoff) {
    return extract_dmrs_impl(samples, sync.ssb_start, sync.cell, num, backoff, sync.cfo_hat_norm,
                             std::nullopt, 0);
}

}  // namespace nrrange
