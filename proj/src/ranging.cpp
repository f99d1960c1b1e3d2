#include "nrrange/ranging.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <Eigen/Dense>
#include <spdlog/spdlog.h>

#include "nrrange/analysis.hpp"

namespace nrrange {

namespace {

using Eigen::MatrixXcd;
using Eigen::VectorXcd;

void check_lengths(std::size_t a, std::size_t b, const char* what) {
    if (a != b) throw std::domain_error(std::string(what) + ": pilot and replica lengths differ");
}

MatrixXcd dictionary(std::span<const cf64> replica, std::span<const double> bins,
                     const AcquisitionConfig& cfg, int n_fft) {
    const auto np = static_cast<Eigen::Index>(replica.size());
    MatrixXcd a(np, cfg.n_tau);
    for (int j = 0; j < cfg.n_tau; ++j) {
        const double tau = cfg.delay(j);
        for (Eigen::Index p = 0; p < np; ++p)
            a(p, j) = replica[p] * std::polar(1.0, -kTwoPi * bins[p] * tau / n_fft);
    }
    return a;
}

MatrixXcd columns(const MatrixXcd& a, const std::vector<int>& idx) {
    MatrixXcd out(a.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = a.col(idx[k]);
    return out;
}

struct Fit {
    VectorXcd coeff;
    VectorXcd residual;
};

Fit least_squares(const MatrixXcd& a, const std::vector<int>& idx, const VectorXcd& d) {
    if (idx.empty()) return {VectorXcd(0), d};
    const MatrixXcd as = columns(a, idx);
    Fit f;
    f.coeff = as.colPivHouseholderQr().solve(d);
    f.residual = d - as * f.coeff;
    return f;
}

// Best new atom given a fixed set: maximizes the residual-power reduction
// |a^H r|^2 / ||P_perp a||^2 (order-recursive selection). Returns -1 when every
// candidate lies in the span of `fixed`.
int best_atom(const MatrixXcd& a, const Eigen::VectorXd& col_norm2, const std::vector<int>& fixed,
              const VectorXcd& residual) {
    Eigen::VectorXd captured = Eigen::VectorXd::Zero(a.cols());
    if (!fixed.empty()) {
        const MatrixXcd as = columns(a, fixed);
        Eigen::HouseholderQR<MatrixXcd> qr(as);
        const MatrixXcd q = qr.householderQ() * MatrixXcd::Identity(a.rows(), as.cols());
        captured = (q.adjoint() * a).colwise().squaredNorm().transpose();
    }
    const VectorXcd corr = a.adjoint() * residual;
    int best = -1;
    double best_score = -1.0;
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
        if (std::find(fixed.begin(), fixed.end(), static_cast<int>(j)) != fixed.end()) continue;
        const double den = col_norm2(j) - captured(j);
        if (den <= 1e-9 * col_norm2(j)) continue;
        const double score = std::norm(corr(j)) / den;
        if (score > best_score) {
            best_score = score;
            best = static_cast<int>(j);
        }
    }
    return best;
}

}  // namespace

std::vector<cf64> delayed_replica(std::span<const cf64> replica, std::span<const double> bins,
                                  double delay, int n_fft) {
    check_lengths(replica.size(), bins.size(), "delayed_replica");
    std::vector<cf64> out(replica.size());
    for (std::size_t p = 0; p < replica.size(); ++p)
        out[p] = replica[p] * std::polar(1.0, -kTwoPi * bins[p] * delay / n_fft);
    return out;
}

void AcquisitionConfig::validate() const {
    if (!(delta_tau > 0.0) || delta_tau > 0.5) throw std::domain_error("AcquisitionConfig: delta_tau must lie in (0, 0.5]");
    if (!(power_threshold > 0.0) || power_threshold > 1.0)
        throw std::domain_error("AcquisitionConfig: power_threshold must lie in (0, 1]");
    if (max_paths < 1) throw std::domain_error("AcquisitionConfig: max_paths must be >= 1");
    if (n_tau < 1) throw std::domain_error("AcquisitionConfig: n_tau must be >= 1");
    if (refine_passes < 0) throw std::domain_error("AcquisitionConfig: refine_passes must be >= 0");
}

AcquisitionResult acquire_multipaths(std::span<const cf64> received, std::span<const cf64> replica,
                                     std::span<const double> bins, const AcquisitionConfig& cfg,
                                     int n_fft) {
    cfg.validate();
    check_lengths(received.size(), replica.size(), "acquire_multipaths");
    check_lengths(bins.size(), replica.size(), "acquire_multipaths");
    if (received.size() < static_cast<std::size_t>(cfg.max_paths))
        throw std::domain_error("acquire_multipaths: fewer pilots than max_paths");

    const VectorXcd d = Eigen::Map<const VectorXcd>(received.data(), static_cast<Eigen::Index>(received.size()));
    const double total = d.squaredNorm();
    if (!(total > 0.0)) throw std::domain_error("acquire_multipaths: all-zero pilots");

    const MatrixXcd a = dictionary(replica, bins, cfg, n_fft);
    const Eigen::VectorXd col_norm2 = a.colwise().squaredNorm().transpose();

    AcquisitionResult out;
    std::vector<int> sel;
    Fit fit = least_squares(a, sel, d);
    while (static_cast<int>(sel.size()) < cfg.max_paths) {
        const int j = best_atom(a, col_norm2, sel, fit.residual);
        if (j < 0) break;
        sel.push_back(j);

        for (int pass = 0; pass < cfg.refine_passes && sel.size() > 1; ++pass) {
            bool moved = false;
            for (std::size_t l = 0; l < sel.size(); ++l) {
                std::vector<int> others = sel;
                others.erase(others.begin() + static_cast<std::ptrdiff_t>(l));
                const Fit partial = least_squares(a, others, d);
                const int k = best_atom(a, col_norm2, others, partial.residual);
                if (k >= 0 && k != sel[l]) {
                    sel[l] = k;
                    moved = true;
                }
            }
            if (!moved) break;
        }

        fit = least_squares(a, sel, d);
        const double frac = fit.residual.squaredNorm() / total;
        out.residual_history.push_back(frac);
        if (1.0 - frac >= cfg.power_threshold) break;
    }

    out.residual_power_fraction = fit.residual.squaredNorm() / total;
    for (std::size_t k = 0; k < sel.size(); ++k)
        out.paths.push_back({cfg.delay(sel[k]), fit.coeff(static_cast<Eigen::Index>(k))});
    std::sort(out.paths.begin(), out.paths.end(),
              [](const AcquiredPath& x, const AcquiredPath& y) { return x.delay < y.delay; });
    return out;
}

std::vector<double> delay_profile(std::span<const cf64> received, std::span<const cf64> replica,
                                  std::span<const double> bins, const AcquisitionConfig& cfg,
                                  int n_fft) {
    cfg.validate();
    check_lengths(received.size(), replica.size(), "delay_profile");
    check_lengths(bins.size(), replica.size(), "delay_profile");
    double norm2 = 0.0;
    for (const auto& c : replica) norm2 += std::norm(c);
    if (!(norm2 > 0.0)) throw std::domain_error("delay_profile: zero replica");
    std::vector<double> out(static_cast<std::size_t>(cfg.n_tau));
    for (int j = 0; j < cfg.n_tau; ++j) {
        const double tau = cfg.delay(j);
        cf64 acc{};
        for (std::size_t p = 0; p < replica.size(); ++p)
            acc += received[p] * std::conj(replica[p]) * std::polar(1.0, kTwoPi * bins[p] * tau / n_fft);
        out[j] = std::abs(acc) / norm2;
    }
    return out;
}

Correlators correlate(std::span<const cf64> z, std::span<const cf64> replica,
                      std::span<const double> bins, double delay, double xi, int n_fft) {
    check_lengths(z.size(), replica.size(), "correlate");
    check_lengths(bins.size(), replica.size(), "correlate");
    Correlators c{};
    for (std::size_t p = 0; p < z.size(); ++p) {
        const cf64 zc = z[p] * std::conj(replica[p]);
        const double w = kTwoPi * bins[p] / n_fft;
        c.early += zc * std::polar(1.0, w * (delay - xi));
        c.prompt += zc * std::polar(1.0, w * delay);
        c.late += zc * std::polar(1.0, w * (delay + xi));
    }
    const double inv = 1.0 / static_cast<double>(z.size());
    c.early *= inv;
    c.prompt *= inv;
    c.late *= inv;
    return c;
}

double emlp_discriminator(const Correlators& corr, double k_norm) {
    if (k_norm == 0.0 || !std::isfinite(k_norm)) throw std::domain_error("emlp_discriminator: k_norm must be non-zero");
    return (std::norm(corr.late) - std::norm(corr.early)) / k_norm;
}

double emlp_discriminator(std::span<const cf64> z, std::span<const cf64> shifted_replica,
                          std::span<const double> bins, double xi, double k_norm, int n_fft) {
    return emlp_discriminator(correlate(z, shifted_replica, bins, 0.0, xi, n_fft), k_norm);
}

cf64 update_channel_coeff(std::span<const cf64> replica, std::span<const cf64> z) {
    check_lengths(replica.size(), z.size(), "update_channel_coeff");
    cf64 num{};
    double den = 0.0;
    for (std::size_t p = 0; p < z.size(); ++p) {
        num += std::conj(replica[p]) * z[p];
        den += std::norm(replica[p]);
    }
    if (!(den > 0.0)) throw std::domain_error("update_channel_coeff: zero-norm replica");
    return num / den;
}

double DllConfig::loop_gain() const { return std::min(4.0 * loop_bandwidth_hz * update_period_s, max_loop_gain); }

void DllConfig::validate() const {
    if (!(xi > 0.0) || xi > 0.5) throw std::domain_error("DllConfig: xi must lie in (0, 0.5]");
    if (!(loop_bandwidth_hz > 0.0) || !(update_period_s > 0.0))
        throw std::domain_error("DllConfig: bandwidth and update period must be positive");
    if (!(max_loop_gain > 0.0) || max_loop_gain > 1.0)
        throw std::domain_error("DllConfig: max_loop_gain must lie in (0, 1]");
    if (loss_of_lock_epochs < 1 || drop_epochs < 1)
        throw std::domain_error("DllConfig: epoch counts must be >= 1");
    if (drop_power_fraction < 0.0 || drop_power_fraction >= 1.0)
        throw std::domain_error("DllConfig: drop_power_fraction must lie in [0, 1)");
}

DllTrackState init_dll(int path_index, const AcquiredPath& path, const DllConfig& cfg) {
    cfg.validate();
    const double requested = 4.0 * cfg.loop_bandwidth_hz * cfg.update_period_s;
    if (requested > cfg.max_loop_gain)
        spdlog::info("DLL loop gain 4*B_L*T = {:.3f} clamped to {:.3f} (effective B_L = {:.3f} Hz)",
                     requested, cfg.max_loop_gain, cfg.effective_bandwidth_hz());
    DllTrackState s;
    s.path_index = path_index;
    s.delay = path.delay;
    s.coeff = path.coeff;
    s.xi = cfg.xi;
    s.loop_gain = cfg.loop_gain();
    s.loop_bandwidth_hz = cfg.effective_bandwidth_hz();
    s.update_period_s = cfg.update_period_s;
    return s;
}

DllTrackState dll_step(const DllTrackState& state, std::span<const cf64> received,
                       std::span<const cf64> replica, std::span<const double> bins,
                       std::span<const DllTrackState> earlier, const DllConfig& cfg, int n_fft) {
    check_lengths(received.size(), replica.size(), "dll_step");
    std::vector<cf64> z(received.begin(), received.end());
    for (const auto& e : earlier) {
        const auto atom = delayed_replica(replica, bins, e.delay, n_fft);
        for (std::size_t p = 0; p < z.size(); ++p) z[p] -= e.coeff * atom[p];
    }

    double amp2 = 0.0;
    for (const auto& c : replica) amp2 += std::norm(c);
    amp2 /= static_cast<double>(replica.size());

    DllTrackState next = state;
    next.k_norm = std::norm(state.coeff) * discriminator_gain(state.xi, std::sqrt(amp2));
    // A path whose coefficient has collapsed carries no timing information: hold
    // the delay and count the epoch as outside the pull-in range.
    const bool trackable = next.k_norm > std::numeric_limits<double>::min();
    next.discriminator =
        trackable ? emlp_discriminator(correlate(z, replica, bins, state.delay, state.xi, n_fft), next.k_norm) : 0.0;
    next.loop_memory = state.loop_gain * next.discriminator;
    next.delay = state.delay + next.loop_memory;
    next.coeff = update_channel_coeff(delayed_replica(replica, bins, next.delay, n_fft), z);

    const bool outside = !trackable || std::abs(next.discriminator) > 2.0 * state.xi;
    next.out_of_range_epochs = outside ? state.out_of_range_epochs + 1 : 0;
    next.locked = next.out_of_range_epochs < cfg.loss_of_lock_epochs;
    return next;
}

MultipathTracker::MultipathTracker(const AcquisitionResult& acq, const DllConfig& cfg, int n_fft)
    : cfg_(cfg), n_fft_(n_fft) {
    if (acq.paths.empty()) throw std::domain_error("MultipathTracker: no acquired paths");
    for (std::size_t l = 0; l < acq.paths.size(); ++l)
        paths_.push_back(init_dll(static_cast<int>(l), acq.paths[l], cfg));
}

void MultipathTracker::step(std::span<const cf64> received, std::span<const cf64> replica,
                            std::span<const double> bins) {
    for (std::size_t l = 0; l < paths_.size(); ++l)
        paths_[l] = dll_step(paths_[l], received, replica, bins,
                             std::span<const DllTrackState>(paths_.data(), l), cfg_, n_fft_);

    double total = 0.0;
    for (const auto& p : paths_) total += std::norm(p.coeff);
    for (std::size_t l = 1; l < paths_.size(); ++l) {
        auto& p = paths_[l];
        p.weak_epochs = std::norm(p.coeff) < cfg_.drop_power_fraction * total ? p.weak_epochs + 1 : 0;
    }
    const auto keep_end = std::remove_if(paths_.begin() + 1, paths_.end(), [&](const DllTrackState& p) {
        return p.weak_epochs >= cfg_.drop_epochs || !p.locked;
    });
    paths_.erase(keep_end, paths_.end());
    for (std::size_t l = 0; l < paths_.size(); ++l) paths_[l].path_index = static_cast<int>(l);
}

void MultipathTracker::shift_delays(double offset) {
    for (auto& p : paths_) p.delay += offset;
}

double carrier_phase_delta(double phase_prev, double phase_cur, double wavelength_m) {
    return wrap_phase(phase_cur - phase_prev) / kTwoPi * wavelength_m;
}

RangeTrack::RangeTrack(double wavelength_m) : wavelength_m_(wavelength_m) {
    if (!(wavelength_m > 0.0)) throw std::domain_error("RangeTrack: wavelength must be positive");
}

const RangeEpoch& RangeTrack::append(std::size_t epoch, double toa_samples, double phase_rad, bool locked) {
    RangeEpoch e;
    e.epoch = epoch;
    e.toa_samples = toa_samples;
    e.phase_rad = phase_rad;
    e.locked = locked;
    if (!epochs_.empty()) {
        e.delta_m = carrier_phase_delta(epochs_.back().phase_rad, phase_rad, wavelength_m_);
        e.cumulative_m = epochs_.back().cumulative_m + e.delta_m;
    }
    epochs_.push_back(e);
    return epochs_.back();
}

RangeTrack carrier_phase_range(RangeTrack track, std::size_t epoch, double toa_samples,
                               double phase_rad, bool locked) {
    track.append(epoch, toa_samples, phase_rad, locked);
    return track;
}

std::vector<double> phase_smooth_toa(std::span<const double> toa_samples,
                                     std::span<const double> delta_m, int window,
                                     double sample_rate_hz) {
    if (toa_samples.size() != delta_m.size()) throw std::domain_error("phase_smooth_toa: series lengths differ");
    if (window < 1) throw std::domain_error("phase_smooth_toa: window must be >= 1");
    std::vector<double> out(toa_samples.size());
    for (std::size_t i = 0; i < toa_samples.size(); ++i) {
        if (i == 0) {
            out[0] = toa_samples[0];
            continue;
        }
        const double m = static_cast<double>(std::min<std::size_t>(i + 1, static_cast<std::size_t>(window)));
        const double predicted = out[i - 1] - delta_m[i] / kSpeedOfLight * sample_rate_hz;
        out[i] = toa_samples[i] / m + (m - 1.0) / m * predicted;
    }
    return out;
}

}  // namespace nrrange
