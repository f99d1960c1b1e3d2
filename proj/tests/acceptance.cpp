// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit if any fails.
//
// usage: nrrange_acceptance <nrrange-cli> <test-data-dir>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include <spdlog/spdlog.h>

#include "nrrange/analysis.hpp"
#include "nrrange/iq_io.hpp"
#include "nrrange/ranging.hpp"
#include "nrrange/rng.hpp"
#include "nrrange/scenario.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace nrrange;
using namespace nrtest;

namespace {

std::string g_cli;
fs::path g_data;
fs::path g_work;

struct Outcome {
    bool pass;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

int run_cli(const std::string& args) {
    const std::string cmd = "\"" + g_cli + "\" --log-level warn " + args + " > /dev/null";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

// 1. Cell identity arithmetic.
Outcome ac1() {
    const auto t0 = Clock::now();
    bool ok = compute_cell_id(200, 2).cell_id() == 602;
    int bad = 0;
    for (int id = 0; id < 1008; ++id) {
        const CellIdentity c = CellIdentity::from_cell_id(id);
        if (compute_cell_id(c.m1(), c.m2()).cell_id() != id) ++bad;
    }
    const double t = seconds_since(t0);
    ok = ok && bad == 0 && t < 1.0;
    return {ok, fmt("(200,2)->%d, round-trip failures %d/1008, %.3f s", compute_cell_id(200, 2).cell_id(), bad, t)};
}

// 2. ACF closed forms.
Outcome ac2() {
    const auto t0 = Clock::now();
    const AcfParams p;
    double worst_approx = 0.0, worst_brute = 0.0;
    for (int i = 0; i <= 800; ++i) {
        const double eps = -2.0 + 4.0 * i / 800.0;
        const cf64 exact = ideal_acf_exact(p, eps);
        worst_approx = std::max(worst_approx, std::abs(ideal_acf_approx(p, eps) - exact));
        cf64 brute{};
        for (int n = 0; n < p.n_p; ++n)
            brute += p.amp * std::polar(1.0, kTwoPi * (p.p0 + p.kappa * n) * eps / p.n_fft);
        brute /= static_cast<double>(p.n_p);
        worst_brute = std::max(worst_brute, std::abs(brute - exact));
    }
    const double t = seconds_since(t0);
    const bool ok = p.beta() == 0.9375 && worst_approx < 0.01 * p.amp && worst_brute <= 1e-12 && t < 1.0;
    return {ok, fmt("beta=%.6g, max|approx-exact|=%.3g, max|exact-brute|=%.3g, %.3f s", p.beta(), worst_approx,
                    worst_brute, t)};
}

// 3. S-curve against the modulated-grid correlator chain; k_d against finite differences.
Outcome ac3() {
    const auto t0 = Clock::now();
    const SsbSource src;
    const double xi = 0.5;

    // Pilots of SSB symbol 1 (60 REs, spacing 4) after a full OFDM round trip.
    const PilotSet layout = generate_pbch_dmrs(src.cell, 0, false).symbol(1);
    const ResourceGrid rx = ofdm_demodulate(std::span<const cf64>(src.wave), src.num, 0);
    const std::vector<cf64> received = gather_pilots(rx, layout);
    const std::vector<double> bins = layout.frequency_bins();

    AcfParams params;
    params.p0 = layout.subcarriers.front() - kSsbSubcarriers / 2;

    double worst = 0.0, peak = 0.0;
    std::vector<double> sim(401), ref(401);
    for (int i = 0; i < 401; ++i) {
        const double eps = -2.0 + 4.0 * i / 400.0;
        const auto z = delayed_replica(received, bins, eps);
        const Correlators c = correlate(z, layout.values, bins, 0.0, xi);
        sim[i] = std::norm(c.late) - std::norm(c.early);
        ref[i] = s_curve_exact(params, eps, xi);
        peak = std::max(peak, std::abs(ref[i]));
    }
    for (int i = 0; i < 401; ++i) worst = std::max(worst, std::abs(sim[i] - ref[i]) / peak);

    const double h = 1e-5;
    const double kd = discriminator_gain(xi);
    const double fd = (s_curve(h, xi) - s_curve(-h, xi)) / (2 * h);
    const double slope_norm = fd / kd;
    const double t = seconds_since(t0);
    const bool ok = worst <= 1e-6 && std::abs(kd - fd) / fd < 1e-3 && std::abs(slope_norm - 1.0) < 5e-3 && t < 10.0;
    return {ok, fmt("max rel S error %.3g over 401 pts, k_d=%.8g fd=%.8g, normalized slope %.6f, %.2f s", worst, kd, fd,
                    slope_norm, t)};
}

// 4. LS-MP against the exhaustive two-delay LS grid search.
struct GridFit {
    double tau1, tau2;
};

GridFit exhaustive_two_path(const std::vector<cf64>& d, const std::vector<cf64>& replica,
                            const std::vector<double>& bins, const AcquisitionConfig& cfg) {
    const int n = cfg.n_tau;
    const std::size_t np = d.size();
    std::vector<std::vector<cf64>> atoms(n);
    std::vector<cf64> proj(n);
    for (int i = 0; i < n; ++i) {
        atoms[i].resize(np);
        for (std::size_t k = 0; k < np; ++k)
            atoms[i][k] = replica[k] * std::polar(1.0, -kTwoPi * bins[k] * cfg.delay(i) / 256.0);
        cf64 s{};
        for (std::size_t k = 0; k < np; ++k) s += std::conj(atoms[i][k]) * d[k];
        proj[i] = s;
    }
    double energy = 0.0;
    for (auto x : d) energy += std::norm(x);

    double best = std::numeric_limits<double>::infinity();
    GridFit fit{0, 0};
    for (int i = 0; i < n; ++i) {
        const double gii = [&] { double s = 0; for (auto x : atoms[i]) s += std::norm(x); return s; }();
        for (int j = i + 1; j < n; ++j) {
            double gjj = 0;
            cf64 gij{};
            for (std::size_t k = 0; k < np; ++k) {
                gjj += std::norm(atoms[j][k]);
                gij += std::conj(atoms[i][k]) * atoms[j][k];
            }
            // [gii gij; conj(gij) gjj] [h1; h2] = [pi; pj]
            const double det = gii * gjj - std::norm(gij);
            if (det <= 1e-9 * gii * gjj) continue;
            const cf64 h1 = (gjj * proj[i] - gij * proj[j]) / det;
            const cf64 h2 = (gii * proj[j] - std::conj(gij) * proj[i]) / det;
            // Residual energy after the LS fit: ||d||^2 - Re(h^H p).
            const double resid = energy - (std::conj(h1) * proj[i] + std::conj(h2) * proj[j]).real();
            if (resid < best) {
                best = resid;
                fit = {cfg.delay(i), cfg.delay(j)};
            }
        }
    }
    return fit;
}

Outcome ac4() {
    const auto t0 = Clock::now();
    const SsbSource src;
    const PilotSet pilots = generate_pbch_dmrs(src.cell, 0, false);
    const auto bins = pilots.frequency_bins();
    AcquisitionConfig cfg;
    cfg.max_paths = 2;
    cfg.power_threshold = 1.0;  // always retain two atoms

    std::mt19937_64 rng(20240404);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int agree = 0, monotone_fail = 0, iterations = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const double tau1 = 1.0 + 9.0 * u(rng);
        const double tau2 = tau1 + 1.5 + 4.0 * u(rng);
        const cf64 h1 = std::polar(1.0, kTwoPi * u(rng));
        const cf64 h2 = std::polar(std::pow(10.0, -6.0 * u(rng) / 20.0), kTwoPi * u(rng));
        const double noise_var = (std::norm(h1) + std::norm(h2)) / std::pow(10.0, 1.5);
        ComplexGaussian noise(derive_seed(77, trial));
        std::vector<cf64> d(pilots.size());
        const auto a1 = delayed_replica(pilots.values, bins, tau1);
        const auto a2 = delayed_replica(pilots.values, bins, tau2);
        for (std::size_t k = 0; k < d.size(); ++k) d[k] = h1 * a1[k] + h2 * a2[k] + noise(noise_var);

        const auto mp = acquire_multipaths(d, pilots.values, bins, cfg);
        const auto oracle = exhaustive_two_path(d, pilots.values, bins, cfg);
        if (mp.paths.size() == 2 && std::abs(mp.paths[0].delay - oracle.tau1) <= 0.2 + 1e-9 &&
            std::abs(mp.paths[1].delay - oracle.tau2) <= 0.2 + 1e-9)
            ++agree;

        // Monotone residual, also under the default stopping rule.
        const auto dflt = acquire_multipaths(d, pilots.values, bins, AcquisitionConfig{});
        for (const AcquisitionResult* res : {&mp, &dflt}) {
            const auto& hist = res->residual_history;
            for (std::size_t k = 1; k < hist.size(); ++k) {
                ++iterations;
                if (hist[k] > hist[k - 1] + 1e-12) ++monotone_fail;
            }
        }
    }
    const double t = seconds_since(t0);
    const bool ok = agree >= 95 && monotone_fail == 0 && t < 120.0;
    return {ok, fmt("%d/100 within 0.2 sample of the 2-D LS oracle, residual increases %d/%d, %.1f s", agree,
                    monotone_fail, iterations, t)};
}

// 5. DLL convergence and loop-bandwidth jitter ordering.
Outcome ac5() {
    const auto t0 = Clock::now();
    const SsbSource src;
    PipelineConfig cfg;
    const EpochRunner runner(src, cfg);
    const double true_delay = 3.37;
    const MultipathChannel chan({{std::polar(0.8, 0.7), true_delay}});
    const double in_window = true_delay + cfg.sync.fft_backoff;

    auto track = [&](const DllConfig& dll, double init_error, const Impairments& imp, std::size_t epochs,
                     std::uint64_t seed) {
        AcquisitionResult acq;
        acq.paths = {{in_window + init_error, std::polar(0.8, 0.7)}};
        MultipathTracker tracker(acq, dll);
        std::vector<double> delays;
        for (std::size_t e = 0; e < epochs; ++e) {
            const auto obs = runner.observe(chan, imp, e, seed);
            tracker.step(obs.received, obs.replica.values, obs.bins);
            delays.push_back(tracker.first_path().delay - in_window);
        }
        return delays;
    };

    DllConfig static_dll;  // 25 Hz, clamped gain 0.5
    const auto conv = track(static_dll, 0.3, Impairments{}, 50, 1);
    const double final_err = std::abs(conv.back());

    Impairments noisy;
    noisy.snr_db = 10.0;
    DllConfig dynamic_dll;
    dynamic_dll.loop_bandwidth_hz = 0.5;
    const auto fast = track(static_dll, 0.0, noisy, 1000, 5);
    const auto slow = track(dynamic_dll, 0.0, noisy, 1000, 5);
    const double sd_fast = stddev(fast), sd_slow = stddev(slow);
    const double t = seconds_since(t0);
    const bool ok = final_err < 0.01 && sd_slow < sd_fast && t < 60.0;
    return {ok, fmt("error after 50 epochs %.2e, jitter 0.5 Hz %.4f < static %.4f samples, %.1f s", final_err, sd_slow,
                    sd_fast, t)};
}

// 6. Static ranging: Hatch smoothing reduces ToA spread.
Outcome ac6() {
    const auto t0 = Clock::now();
    const SsbSource src;
    PipelineConfig cfg;
    const EpochRunner runner(src, cfg);
    Impairments imp;
    imp.snr_db = 10.0;
    const auto chan = desk_channel();
    const auto tracker = runner.run(1000, [&](std::size_t) { return chan; }, imp, 606);

    const auto raw = tracker.relative_toa();
    const auto smoothed = tracker.smoothed_toa();
    const auto period = static_cast<double>(cfg.period_samples());
    std::vector<double> r, s;
    for (std::size_t i = static_cast<std::size_t>(cfg.smoothing_window); i < raw.size(); ++i) {
        r.push_back(raw[i]);
        s.push_back(smoothed[i] - static_cast<double>(i) * period);
    }
    const double sd_raw = stddev(r), sd_smooth = stddev(s);
    const double t = seconds_since(t0);
    const bool ok = sd_smooth < sd_raw && sd_raw < 1.0 && t < 60.0;
    const double m_per_sample = kSpeedOfLight / src.num.sample_rate_hz();
    return {ok, fmt("1-sigma raw %.4f samples (%.3f m), smoothed %.4f samples (%.3f m), %.1f s", sd_raw,
                    sd_raw * m_per_sample, sd_smooth, sd_smooth * m_per_sample, t)};
}

// Shared by 7 and 8: cumulative carrier-phase range over a trajectory.
double trajectory_run(const SsbSource& src, const Trajectory& traj, double snr_db, std::uint64_t seed,
                      double* truth) {
    PipelineConfig cfg;
    cfg.dll.loop_bandwidth_hz = 0.5;
    const EpochRunner runner(src, cfg);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto base = desk_channel(1.5, kTwoPi * u(rng));
    Impairments imp;
    imp.snr_db = snr_db;
    const std::size_t epochs = traj.epoch_count();
    const auto tracker = runner.run(
        epochs, [&](std::size_t e) { return trajectory_to_channel(traj, e, base, src.num.sample_rate_hz()).channel; },
        imp, seed);
    *truth = traj.radial_distance(traj.waypoints.front().first) -
             traj.radial_distance(traj.waypoints.front().first + static_cast<double>(epochs - 1) * traj.ssb_period_s);
    return tracker.track().cumulative_m();
}

Outcome ac7() {
    const auto t0 = Clock::now();
    const SsbSource src;
    Trajectory walk;
    walk.waypoints = {{0.0, 10.0}, {7.2, 2.8}};  // B to A, 1 m/s
    int within = 0;
    double worst = 0.0, truth = 0.0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        const double err = std::abs(trajectory_run(src, walk, 10.0, seed, &truth) - 7.2);
        if (err <= 0.8) ++within;
        worst = std::max(worst, err);
    }
    const double t = seconds_since(t0);
    const bool ok = within >= 95 && std::abs(truth - 7.2) < 1e-9 && t < 300.0;
    return {ok, fmt("%d/100 runs within 0.8 m of 7.2 m (worst %.4f m), %.1f s", within, worst, t)};
}

// 8. Closed loop returns to zero.
Outcome ac8() {
    const auto t0 = Clock::now();
    const SsbSource src;
    Trajectory loop;
    loop.waypoints = {{0.0, 10.0}, {15.0, 2.8}, {30.0, 10.0}};
    double truth = 0.0;
    const double cum = trajectory_run(src, loop, 15.0, 31, &truth);
    const double t = seconds_since(t0);
    const bool ok = std::abs(cum) < 0.5 && std::abs(truth) < 1e-9 && t < 120.0;
    return {ok, fmt("30 s round trip, cumulative %.4f m, %.1f s", cum, t)};
}

// 9. Full-capture exactness over random cells.
Outcome ac9() {
    const auto t0 = Clock::now();
    const Numerology num = Numerology::nr();
    std::mt19937_64 rng(909);
    std::uniform_int_distribution<int> cell_dist(0, 1007);
    std::uniform_int_distribution<int> offset_dist(200, 150000);
    std::uniform_real_distribution<double> frac(0.0, 4.0);
    int good = 0;
    double worst = 0.0;
    std::string first_failure;
    for (int trial = 0; trial < 20; ++trial) {
        Scenario s;
        s.cell_id = cell_dist(rng);
        s.first_ssb_offset = static_cast<std::size_t>(offset_dist(rng));
        s.duration_s = 0.1;
        s.impairments.sto = frac(rng);
        const auto rx = impair_capture(generate_ssb_capture(s, num), s, num);
        const ScenarioTruth truth = scenario_truth(s, num);

        PipelineConfig cfg;
        const PipelineResult res = run_pipeline(std::span<const cf32>(rx), cfg);
        const auto period = static_cast<double>(cfg.period_samples());
        const double injected = static_cast<double>(truth.ssb_start) + truth.first_path_delay;
        double err = 0.0;
        for (const auto& e : res.track.epochs()) {
            const double first_burst = e.toa_samples - static_cast<double>(e.epoch) * period;
            err = std::max(err, std::abs(first_burst - injected));
        }
        worst = std::max(worst, err);
        const bool cell_ok = res.sync.m1_hat == truth.cell.m1() && res.sync.m2_hat == truth.cell.m2();
        if (cell_ok && err <= 0.05 && !res.track.empty()) {
            ++good;
        } else if (first_failure.empty()) {
            first_failure = fmt(" (first failure: cell %d, err %.4f, detected %d)", s.cell_id, err,
                                res.sync.cell.cell_id());
        }
    }
    const double t = seconds_since(t0);
    const bool ok = good == 20 && t < 60.0;
    return {ok, fmt("%d/20 cells exact, worst ToA error %.4f samples, %.1f s%s", good, worst, t,
                    first_failure.c_str())};
}

// 10. Receiver throughput through the CLI.
Outcome ac10() {
    const Numerology num = Numerology::nr();
    Scenario s;
    s.seed = 1010;
    s.duration_s = 1.0;
    s.channel = desk_channel();
    s.impairments.snr_db = 10.0;
    s.impairments.cfo_norm = 0.03;
    const auto rx = impair_capture(generate_ssb_capture(s, num), s, num);
    const fs::path capture = g_work / "ac10" / "capture.cf32";
    write_iq(capture, rx, scenario_metadata(s, num));

    const auto t0 = Clock::now();
    const int rc = run_cli("receive --in \"" + capture.string() + "\" --out-dir \"" + (g_work / "ac10" / "out").string() + "\"");
    const double t = seconds_since(t0);
    const bool ok = rc == 0 && t < 10.0;
    return {ok, fmt("receive on %zu cf32 samples: exit %d, %.2f s wall-clock", rx.size(), rc, t)};
}

// 11. IQ round trip and golden CSV schemas.
Outcome ac11() {
    std::mt19937_64 rng(1111);
    std::normal_distribution<float> n01(0.0f, 1.0f);
    std::vector<cf32> samples(100000);
    for (auto& x : samples) x = {n01(rng), n01(rng)};
    const fs::path iq = g_work / "ac11" / "roundtrip.cf32";
    write_iq(iq, samples, IqMetadata{});
    const IqRecording back = read_iq(iq);
    const bool bit_identical = back.samples.size() == samples.size() &&
                               std::memcmp(back.samples.data(), samples.data(), samples.size() * sizeof(cf32)) == 0;

    const fs::path golden = g_data / "golden";
    const fs::path run1 = g_work / "ac11" / "run1";
    const fs::path run2 = g_work / "ac11" / "run2";
    const std::string scenario = "\"" + (golden / "scenario.json").string() + "\"";
    const int rc1 = run_cli("e2e --scenario " + scenario + " --out-dir \"" + run1.string() + "\"");
    const int rc2 = run_cli("e2e --scenario " + scenario + " --out-dir \"" + run2.string() + "\"");

    std::string diff;
    bool reproducible = true;
    for (const char* name : {"range_track.csv", "cir_heatmap.csv", "acquisition.csv", "tracking.csv", "smoothed_toa.csv"}) {
        if (diff.empty()) diff = compare_csv(run1 / name, golden / name);
        if (slurp(run1 / name) != slurp(run2 / name)) reproducible = false;
    }
    const bool ok = bit_identical && rc1 == 0 && rc2 == 0 && diff.empty() && reproducible;
    return {ok, fmt("float32 round trip %s, golden CSVs %s, reruns %s", bit_identical ? "bit-identical" : "DIFFERS",
                    diff.empty() ? "match" : diff.c_str(), reproducible ? "byte-identical" : "DIFFER")};
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 3) {
        std::fprintf(stderr, "usage: %s <nrrange-cli> <test-data-dir>\n", argv[0]);
        return 2;
    }
    g_cli = argv[1];
    g_data = argv[2];
    g_work = fs::temp_directory_path() / ("nrrange_acceptance_" + std::to_string(::getpid()));
    fs::create_directories(g_work);
    spdlog::set_level(spdlog::level::warn);

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"AC1  cell identity arithmetic", ac1},
        {"AC2  ACF closed forms", ac2},
        {"AC3  S-curve and discriminator gain", ac3},
        {"AC4  LS-MP vs exhaustive LS oracle", ac4},
        {"AC5  DLL convergence and jitter", ac5},
        {"AC6  static ranging smoothing", ac6},
        {"AC7  dynamic 7.2 m walk", ac7},
        {"AC8  closed-loop drift", ac8},
        {"AC9  end-to-end exactness", ac9},
        {"AC10 receiver throughput", ac10},
        {"AC11 format fidelity", ac11},
    };

    int failed = 0;
    for (const auto& [name, fn] : criteria) {
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failed;
        std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
        std::fflush(stdout);
    }
    std::error_code ec;
    fs::remove_all(g_work, ec);
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
