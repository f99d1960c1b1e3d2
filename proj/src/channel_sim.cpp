#include "nrrange/channel_sim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "nrrange/fft.hpp"
#include "nrrange/resample.hpp"
#include "nrrange/rng.hpp"

namespace nrrange {

namespace {

constexpr std::size_t kFractionalGuard = 256;

bool all_integer_delays(const MultipathChannel& chan) {
    return std::all_of(chan.paths().begin(), chan.paths().end(),
                       [](const PathComponent& p) { return p.delay == std::floor(p.delay); });
}

double active_power(std::span<const cf64> clean, std::span<const cf64> reference) {
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t k = 0; k < clean.size(); ++k) {
        if (reference[k] == cf64{}) continue;
        acc += std::norm(clean[k]);
        ++count;
    }
    return count ? acc / static_cast<double>(count) : 0.0;
}

void rotate_cfo(std::span<cf64> buf, const Impairments& imp, const Numerology& num,
                double first_index) {
    if (imp.cfo_norm == 0.0 && imp.phase0 == 0.0) return;
    const double n = num.fft_size;
    for (std::size_t k = 0; k < buf.size(); ++k) {
        const double arg = kTwoPi * (first_index + static_cast<double>(k)) * imp.cfo_norm / n +
                           imp.phase0;
        buf[k] *= cf64(std::cos(arg), std::sin(arg));
    }
}

double noise_variance(double signal_power, const Impairments& imp) {
    return signal_power / std::pow(10.0, *imp.snr_db / 10.0);
}

}  // namespace

MultipathChannel::MultipathChannel(std::vector<PathComponent> paths) : paths_(std::move(paths)) {
    if (paths_.empty()) throw std::domain_error("MultipathChannel: at least one path required");
    for (std::size_t l = 0; l < paths_.size(); ++l) {
        const auto& p = paths_[l];
        if (!std::isfinite(p.delay) || p.delay < 0.0)
            throw std::domain_error("MultipathChannel: delays must be finite and >= 0");
        if (!std::isfinite(p.gain.real()) || !std::isfinite(p.gain.imag()))
            throw std::domain_error("MultipathChannel: gains must be finite");
        if (l > 0 && !(p.delay > paths_[l - 1].delay))
            throw std::domain_error("MultipathChannel: delays must be strictly increasing");
    }
}

MultipathChannel MultipathChannel::identity() { return MultipathChannel({PathComponent{}}); }

double MultipathChannel::power_gain() const {
    double p = 0.0;
    for (const auto& path : paths_) p += std::norm(path.gain);
    return p;
}

MultipathChannel MultipathChannel::delayed(double offset) const {
    auto shifted = paths_;
    for (auto& p : shifted) p.delay += offset;
    return MultipathChannel(std::move(shifted));
}

void Impairments::validate() const {
    if (!(std::abs(cfo_norm) < 0.5)) throw std::domain_error("Impairments: |cfo_norm| must be < 0.5");
    if (!std::isfinite(sco_ppm)) throw std::domain_error("Impairments: sco_ppm must be finite");
    if (!std::isfinite(phase0) || !std::isfinite(sto))
        throw std::domain_error("Impairments: phase0 and sto must be finite");
    if (snr_db && !std::isfinite(*snr_db)) throw std::domain_error("Impairments: snr_db must be finite");
}

void Trajectory::validate() const {
    if (waypoints.empty()) throw std::domain_error("Trajectory: no waypoints");
    if (!(carrier_freq_hz > 0.0) || !(ssb_period_s > 0.0))
        throw std::domain_error("Trajectory: carrier and period must be positive");
    for (std::size_t i = 1; i < waypoints.size(); ++i) {
        const double dt = waypoints[i].first - waypoints[i - 1].first;
        if (!(dt > 0.0)) throw std::domain_error("Trajectory: waypoint times must increase");
        const double speed = std::abs(waypoints[i].second - waypoints[i - 1].second) / dt;
        if (speed > kMaxRadialSpeed + 1e-9)
            throw std::domain_error("Trajectory: radial speed exceeds 3 m/s");
    }
}

double Trajectory::radial_distance(double t) const {
    const double t0 = waypoints.front().first;
    const double t1 = waypoints.back().first;
    constexpr double slack = 1e-9;
    if (t < t0 - slack || t > t1 + slack) throw std::out_of_range("Trajectory: time outside span");
    if (t <= t0) return waypoints.front().second;
    if (t >= t1) return waypoints.back().second;
    const auto it = std::upper_bound(waypoints.begin(), waypoints.end(), t,
                                     [](double v, const auto& w) { return v < w.first; });
    const auto& b = *it;
    const auto& a = *(it - 1);
    const double u = (t - a.first) / (b.first - a.first);
    return a.second + u * (b.second - a.second);
}

std::size_t Trajectory::epoch_count() const {
    return static_cast<std::size_t>(std::floor(duration_s() / ssb_period_s + 1e-9)) + 1;
}

EpochChannel trajectory_to_channel(const Trajectory& traj, std::size_t epoch_index,
                                   const MultipathChannel& static_multipath,
                                   double sample_rate_hz) {
    const double t = traj.waypoints.front().first + static_cast<double>(epoch_index) * traj.ssb_period_s;
    const double r = traj.radial_distance(t);
    const double phase = -kTwoPi * r / traj.wavelength_m();

    auto paths = static_multipath.paths();
    paths[0].delay += r / kSpeedOfLight * sample_rate_hz;
    paths[0].gain *= std::polar(1.0, phase);
    return EpochChannel{MultipathChannel(std::move(paths)), phase};
}

std::vector<cf64> apply_multipath(std::span<const cf64> samples, const MultipathChannel& chan,
                                  std::optional<std::size_t> out_len) {
    const std::size_t n = samples.size();
    const std::size_t len = out_len.value_or(n);
    std::vector<cf64> out(len);

    if (all_integer_delays(chan)) {
        for (const auto& path : chan.paths()) {
            const auto shift = static_cast<std::size_t>(path.delay);
            for (std::size_t k = shift; k < len && k - shift < n; ++k)
                out[k] += path.gain * samples[k - shift];
        }
        return out;
    }

    const auto m = fft_friendly_size(std::max(n, len) + static_cast<std::size_t>(std::ceil(chan.max_delay())) +
                                     kFractionalGuard);
    std::vector<cf64> buf(m);
    std::copy(samples.begin(), samples.end(), buf.begin());
    cached_fft(m, FftDirection::Forward).execute(buf, buf);

    const double md = static_cast<double>(m);
    for (std::size_t i = 0; i < m; ++i) {
        cf64 response{};
        if (m % 2 == 0 && i == m / 2) {
            // Nyquist bin: average of the +-m/2 ramps keeps the response symmetric.
            for (const auto& path : chan.paths()) response += path.gain * std::cos(kPi * path.delay);
        } else {
            const double f = i < m / 2 + (m % 2) ? static_cast<double>(i) : static_cast<double>(i) - md;
            for (const auto& path : chan.paths())
                response += path.gain * std::polar(1.0, -kTwoPi * f * path.delay / md);
        }
        buf[i] *= response;
    }
    cached_fft(m, FftDirection::Inverse).execute(buf, buf);
    for (std::size_t k = 0; k < len; ++k) out[k] = buf[k] / md;
    return out;
}

std::vector<cf64> apply_channel(std::span<const cf64> samples, const MultipathChannel& chan,
                                const Impairments& imp, const Numerology& num,
                                std::uint64_t seed) {
    if (samples.empty()) throw std::length_error("apply_channel: empty input");
    imp.validate();

    const MultipathChannel effective = imp.sto != 0.0 ? chan.delayed(imp.sto) : chan;
    std::vector<cf64> out = apply_multipath(samples, effective);

    if (imp.sco_ppm != 0.0) {
        const double rate = 1.0 + imp.sco_ppm * 1e-6;
        const Resampler resampler(1.0 / rate);
        std::vector<cf64> warped(out.size());
        for (std::size_t k = 0; k < out.size(); ++k)
            warped[k] = resampler.sample_at(out, static_cast<double>(k) * rate);
        out = std::move(warped);
    }

    const double signal_power = active_power(out, samples);
    rotate_cfo(out, imp, num, 0.0);

    if (imp.snr_db) {
        const double var = noise_variance(signal_power, imp);
        ComplexGaussian noise(seed);
        for (auto& x : out) x += noise(var);
    }
    return out;
}

std::vector<cf32> apply_channel_segmented(std::span<const cf32> samples, std::size_t segment_len,
                                          const ChannelSchedule& schedule,
                                          const Impairments& imp, const Numerology& num,
                                          std::uint64_t seed) {
    if (samples.empty()) throw std::length_error("apply_channel_segmented: empty input");
    if (segment_len == 0) throw std::domain_error("apply_channel_segmented: zero segment length");
    imp.validate();

    const std::size_t n = samples.size();
    std::vector<cf64> clean(n);
    std::vector<cf64> chunk;
    for (std::size_t seg = 0, start = 0; start < n; ++seg, start += segment_len) {
        const std::size_t len = std::min(segment_len, n - start);
        MultipathChannel chan = schedule(seg);
        if (imp.sto != 0.0) chan = chan.delayed(imp.sto);
        const std::size_t tail = static_cast<std::size_t>(std::ceil(chan.max_delay())) + 1;
        const std::size_t out_len = std::min(len + tail, n - start);

        chunk.resize(len);
        bool any = false;
        for (std::size_t k = 0; k < len; ++k) {
            chunk[k] = cf64(samples[start + k]);
            any = any || chunk[k] != cf64{};
        }
        if (!any) continue;
        const auto y = apply_multipath(chunk, chan, out_len);
        for (std::size_t k = 0; k < out_len; ++k) clean[start + k] += y[k];
    }

    if (imp.sco_ppm != 0.0) {
        const double rate = 1.0 + imp.sco_ppm * 1e-6;
        const Resampler resampler(1.0 / rate);
        std::vector<cf64> warped(n);
        for (std::size_t k = 0; k < n; ++k) {
            const double t = static_cast<double>(k) * rate;
            // Skip the kernel evaluation over silent stretches.
            const auto c = static_cast<std::size_t>(std::min(t, static_cast<double>(n - 1)));
            if (clean[c] == cf64{} && (c + 1 >= n || clean[c + 1] == cf64{}) &&
                (c == 0 || clean[c - 1] == cf64{}))
                continue;
            warped[k] = resampler.sample_at(clean, t);
        }
        clean = std::move(warped);
    }

    double acc = 0.0;
    std::size_t active = 0;
    for (std::size_t k = 0; k < n; ++k) {
        if (samples[k] == cf32{}) continue;
        acc += std::norm(clean[k]);
        ++active;
    }
    const double signal_power = active ? acc / static_cast<double>(active) : 0.0;
    const double var = imp.snr_db ? noise_variance(signal_power, imp) : 0.0;

    std::vector<cf32> out(n);
    for (std::size_t seg = 0, start = 0; start < n; ++seg, start += segment_len) {
        const std::size_t len = std::min(segment_len, n - start);
        std::span<cf64> block(clean.data() + start, len);
        rotate_cfo(block, imp, num, static_cast<double>(start));
        if (imp.snr_db) {
            ComplexGaussian noise(derive_seed(seed, seg));
            for (auto& x : block) x += noise(var);
        }
        for (std::size_t k = 0; k < len; ++k) out[start + k] = cf32(block[k]);
    }
    return out;
}

std::vector<cf64> simulate_epoch(std::span<const cf64> ssb_waveform, const MultipathChannel& chan,
                                 const Impairments& imp, const Numerology& num,
                                 std::size_t epoch_index, std::size_t period_samples,
                                 std::uint64_t seed, int guard) {
    if (guard < 0) throw std::domain_error("simulate_epoch: negative guard");
    imp.validate();
    const auto g = static_cast<std::size_t>(guard);
    std::vector<cf64> tx(ssb_waveform.size() + 2 * g);
    std::copy(ssb_waveform.begin(), ssb_waveform.end(), tx.begin() + guard);

    const MultipathChannel effective = imp.sto != 0.0 ? chan.delayed(imp.sto) : chan;
    std::vector<cf64> rx = apply_multipath(tx, effective);
    const double signal_power = active_power(rx, tx);

    const double origin = static_cast<double>(epoch_index) * static_cast<double>(period_samples) -
                          static_cast<double>(guard);
    rotate_cfo(rx, imp, num, origin);
    if (imp.snr_db) {
        const double var = noise_variance(signal_power, imp);
        ComplexGaussian noise(derive_seed(seed, epoch_index));
        for (auto& x : rx) x += noise(var);
    }
    return rx;
}

}  // namespace nrrange
