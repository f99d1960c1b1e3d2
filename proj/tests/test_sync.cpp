#include <cmath>
#include <random>

#include "doctest.h"
#include "nrrange/channel_sim.hpp"
#include "nrrange/iq_io.hpp"
#include "nrrange/rng.hpp"
#include "nrrange/sync.hpp"
#include "support.hpp"

using namespace nrrange;

namespace {

const Numerology kNum = Numerology::nr();

// SSB for `cell` at `offset` inside a zero capture of length n.
std::vector<cf64> capture_with_ssb(const CellIdentity& cell, std::size_t offset, std::size_t n) {
    const auto wave = ofdm_modulate(map_ssb_grid(cell, 0).grid, kNum);
    std::vector<cf64> s(n, cf64{});
    std::copy(wave.begin(), wave.end(), s.begin() + static_cast<std::ptrdiff_t>(offset));
    return s;
}

std::vector<cf64> impaired(const std::vector<cf64>& s, const MultipathChannel& chan, double cfo,
                           std::optional<double> snr, std::uint64_t seed) {
    Impairments imp;
    imp.cfo_norm = cfo;
    imp.snr_db = snr;
    return apply_channel(s, chan, imp, kNum, seed);
}

}  // namespace

TEST_SUITE("sync") {

TEST_CASE("compute_cell_id") {
    CHECK(compute_cell_id(200, 2).cell_id() == 602);
    CHECK(compute_cell_id(0, 0).cell_id() == 0);
    CHECK(compute_cell_id(335, 2).cell_id() == 1007);
    CHECK(compute_cell_id(200, 2).dmrs_offset() == 2);
    CHECK_THROWS_AS(compute_cell_id(336, 0), std::domain_error);
    CHECK_THROWS_AS(compute_cell_id(-1, 0), std::domain_error);
    CHECK_THROWS_AS(compute_cell_id(0, 3), std::domain_error);
}

TEST_CASE("PSS replica is unit energy") {
    for (int m2 = 0; m2 < 3; ++m2) {
        const auto& r = pss_replica(m2, kNum);
        REQUIRE(r.size() == 256u);
        double e = 0;
        for (const auto& x : r) e += std::norm(x);
        CHECK(e == doctest::Approx(1.0));
    }
}

TEST_CASE("noiseless SSB at sample 0") {
    for (int m2 = 0; m2 < 3; ++m2) {
        const auto s = capture_with_ssb(CellIdentity(17, m2), 0, 3000);
        const PssDetection d = detect_pss(s, kNum);
        CHECK(d.ssb_start == 0);
        CHECK(d.pss_lag == 18);
        CHECK(d.m2 == m2);
        CHECK(d.peak_metric == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("PSS metric at one lag agrees with the search") {
    const auto s = impaired(capture_with_ssb(CellIdentity(5, 1), 1234, 6000), MultipathChannel::identity(), 0.05, 15.0, 2);
    const PssDetection d = detect_pss(s, kNum);
    CHECK(d.ssb_start == 1234);
    CHECK(pss_metric_at(std::span<const cf64>(s), d.pss_lag, d.m2, kNum) == doctest::Approx(d.peak_metric).epsilon(1e-6));
    REQUIRE(d.metric_trace.size() > static_cast<std::size_t>(d.pss_lag - 18));
    CHECK(d.metric_trace[static_cast<std::size_t>(d.pss_lag - 18)] == doctest::Approx(d.peak_metric).epsilon(1e-5));
}

TEST_CASE("PSS detection at SNR 10 dB with CFO 0.1") {
    const auto clean = capture_with_ssb(CellIdentity(200, 2), 5000, 8000);
    int hits = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto s = impaired(clean, MultipathChannel::identity(), 0.1, 10.0, 1000 + seed);
        const PssDetection d = detect_pss(s, kNum);
        if (std::abs(d.ssb_start - 5000) <= 1 && d.m2 == 2) ++hits;
    }
    CHECK(hits >= 99);
}

TEST_CASE("noise only is not detected") {
    ComplexGaussian g(5);
    std::vector<cf64> s(200000);
    for (auto& x : s) x = g(1.0);
    try {
        (void)detect_pss(s, kNum);
        FAIL("noise detected as an SSB");
    } catch (const DetectionError& e) {
        CHECK(!e.metric_trace().empty());
        CHECK(e.peak_ratio() < SyncConfig{}.pss_threshold);
    }
    const std::vector<cf64> too_short(500);
    CHECK_THROWS_AS(detect_pss(too_short, kNum), DetectionError);
}

TEST_CASE("scaling the capture leaves detection unchanged") {
    const auto s = impaired(capture_with_ssb(CellIdentity(321, 0), 2222, 6000),
                            MultipathChannel({{1.0, 0.0}, {0.4, 2.0}}), 0.03, 12.0, 8);
    const CoarseSyncResult a = coarse_sync(s, kNum);
    std::vector<cf64> scaled(s);
    for (auto& x : scaled) x *= cf64(-3e-3, 7e-4);
    const CoarseSyncResult b = coarse_sync(scaled, kNum);
    CHECK(a.ssb_start == b.ssb_start);
    CHECK(a.m1_hat == b.m1_hat);
    CHECK(a.m2_hat == b.m2_hat);
    CHECK(a.cell.cell_id() == 963);
}

TEST_CASE("SSS recovery") {
    const auto s = capture_with_ssb(CellIdentity(123, 1), 700, 3000);
    const SssDetection d = detect_sss(s, 700, 1, kNum);
    CHECK(d.m1 == 123);

    const auto clean = capture_with_ssb(CellIdentity(200, 2), 300, 2000);
    int correct = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto rx = impaired(clean, MultipathChannel::identity(), 0.0, 5.0, 500 + seed);
        try {
            if (detect_sss(rx, 300, 2, kNum).m1 == 200) ++correct;
        } catch (const DetectionError&) {
        }
    }
    CHECK(correct >= 95);
}

TEST_CASE("SSS is tolerant to multipath and small timing error") {
    const auto s = impaired(capture_with_ssb(CellIdentity(88, 0), 400, 3000),
                            MultipathChannel({{1.0, 0.0}, {cf64(0, 0.6), 3.0}}), 0.0, 20.0, 3);
    CHECK(detect_sss(s, 401, 0, kNum).m1 == 88);
    CHECK(detect_sss(s, 398, 0, kNum).m1 == 88);
}

TEST_CASE("CFO estimation") {
    const auto clean = capture_with_ssb(CellIdentity(200, 2), 100, 1500);
    CHECK(std::abs(estimate_cfo(clean, 100, kNum)) < 1e-9);
    const auto rot = impaired(clean, MultipathChannel::identity(), 0.1, std::nullopt, 0);
    CHECK(std::abs(estimate_cfo(rot, 100, kNum) - 0.1) < 1e-3);
    const auto neg = impaired(clean, MultipathChannel::identity(), -0.37, std::nullopt, 0);
    CHECK(std::abs(estimate_cfo(neg, 100, kNum) + 0.37) < 1e-3);

    double se = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto rx = impaired(clean, MultipathChannel::identity(), 0.1, 10.0, 70 + seed);
        const double e = estimate_cfo(rx, 100, kNum) - 0.1;
        se += e * e;
    }
    CHECK(std::sqrt(se / 100.0) < 0.01);
}

TEST_CASE("DM-RS extraction") {
    const CellIdentity cell(200, 2);
    const auto clean = capture_with_ssb(cell, 50, 1300);
    const PilotSet ref = generate_pbch_dmrs(cell, 0, false);

    const PilotObservation flat = extract_dmrs(std::span<const cf64>(clean), 50, cell, kNum, 0);
    REQUIRE(flat.received.size() == 144u);
    CHECK(flat.replica.values == ref.values);
    for (std::size_t i = 0; i < 144; ++i) CHECK(std::abs(flat.received[i] / flat.replica.values[i] - 1.0) < 1e-9);

    const auto delayed = apply_multipath(clean, MultipathChannel({{1.0, 2.0}}));
    const PilotObservation d2 = extract_dmrs(std::span<const cf64>(delayed), 50, cell, kNum, 0);
    for (std::size_t i = 0; i < 144; ++i) {
        const cf64 want = std::polar(1.0, -kTwoPi * d2.bins[i] * 2.0 / 256.0);
        CHECK(std::abs(d2.received[i] / d2.replica.values[i] - want) < 1e-9);
    }

    // Two-path channel: the pilot ratio is the channel frequency response at each bin.
    const MultipathChannel two({{cf64(0.9, 0.1), 1.0}, {cf64(-0.3, 0.4), 4.0}});
    const auto rx = apply_multipath(clean, two);
    const PilotObservation obs = extract_dmrs(std::span<const cf64>(rx), 50, cell, kNum, 8);
    for (std::size_t i = 0; i < 144; ++i) {
        cf64 h{};
        for (const auto& p : two.paths()) h += p.gain * std::polar(1.0, -kTwoPi * obs.bins[i] * (p.delay + 8) / 256.0);
        CHECK(std::abs(obs.received[i] / obs.replica.values[i] - h) < 1e-6);
    }

    CHECK_THROWS_AS(extract_dmrs(std::span<const cf64>(clean), 300, cell, kNum, 0), std::length_error);
    CHECK_THROWS_AS(extract_dmrs(std::span<const cf64>(clean), 4, cell, kNum, 8), std::length_error);
}

TEST_CASE("CFO compensation leaves only the timing slope") {
    const CellIdentity cell(4, 1);
    const auto clean = capture_with_ssb(cell, 200, 1600);
    const auto rx = impaired(clean, MultipathChannel({{1.0, 3.0}}), 0.21, std::nullopt, 0);
    const CoarseSyncResult sync = coarse_sync(rx, kNum);
    CHECK(sync.cfo_hat_norm == doctest::Approx(0.21).epsilon(5e-3));
    const PilotObservation obs = extract_dmrs(std::span<const cf64>(rx), sync, kNum, 0);
    const double delay = 3.0 + 200.0 - static_cast<double>(sync.ssb_start);
    // Residual phase after removing the injected timing ramp is flat across bins within a symbol.
    for (int sym = 1; sym <= 3; ++sym) {
        std::vector<double> phases;
        for (std::size_t i = 0; i < obs.received.size(); ++i) {
            if (obs.replica.symbols[i] != sym) continue;
            const cf64 r = obs.received[i] / obs.replica.values[i] * std::polar(1.0, kTwoPi * obs.bins[i] * delay / 256.0);
            phases.push_back(std::arg(r));
        }
        const double lo = *std::min_element(phases.begin(), phases.end());
        const double hi = *std::max_element(phases.begin(), phases.end());
        CHECK(hi - lo < 0.05);
    }
}

TEST_CASE("noiseless CID sweep") {
    std::mt19937 rng(17);
    std::uniform_int_distribution<int> offset(0, 2000);
    int exact = 0;
    for (int id = 0; id < 1008; ++id) {
        const CellIdentity cell = CellIdentity::from_cell_id(id);
        const auto at = static_cast<std::size_t>(offset(rng));
        const auto s = capture_with_ssb(cell, at, 3200);
        const CoarseSyncResult r = coarse_sync(s, kNum);
        if (r.cell == cell && r.ssb_start == static_cast<std::ptrdiff_t>(at)) ++exact;
    }
    CHECK(exact == 1008);
}

TEST_CASE("ci16 regression fixture") {
    const IqRecording rec = read_iq(std::filesystem::path(NRRANGE_TEST_DATA) / "fixture_602.ci16", IqFormat::Ci16Le);
    const PssDetection pss = detect_pss(std::span<const cf32>(rec.samples), kNum);
    CHECK(pss.pss_lag == 99230);
    CHECK(pss.m2 == 2);
    const CoarseSyncResult sync = coarse_sync(std::span<const cf32>(rec.samples), kNum);
    CHECK(sync.m1_hat == 200);
    CHECK(sync.m2_hat == 2);
    CHECK(sync.cell.cell_id() == 602);
    CHECK(sync.ssb_start == 99212);
}

}  // TEST_SUITE
