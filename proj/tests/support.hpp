#pragma once

// Helpers shared by the unit tests and the acceptance runner.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "nrrange/channel_sim.hpp"
#include "nrrange/nr_grid.hpp"
#include "nrrange/pipeline.hpp"
#include "nrrange/sync.hpp"

namespace nrtest {

using namespace nrrange;

inline double mean(const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double stddev(const std::vector<double>& v) {
    const double m = mean(v);
    double acc = 0.0;
    for (double x : v) acc += (x - m) * (x - m);
    return v.size() > 1 ? std::sqrt(acc / static_cast<double>(v.size() - 1)) : 0.0;
}

/// Reference cell SSB as a time-domain waveform.
struct SsbSource {
    Numerology num = Numerology::nr();
    CellIdentity cell{200, 2};
    SsbGrid ssb;
    std::vector<cf64> wave;

    explicit SsbSource(CellIdentity c = CellIdentity(200, 2)) : cell(c), ssb(map_ssb_grid(c, 0)) {
        wave = ofdm_modulate(ssb.grid, num);
    }
};

/// Per-epoch simulation through simulate_epoch and extract_dmrs, so long runs
/// avoid synthesizing the idle stretch between bursts. Epoch e is nominally at
/// absolute sample e * period, and the reported ToA is relative to that.
class EpochRunner {
public:
    static constexpr int kGuard = 64;

    EpochRunner(const SsbSource& src, PipelineConfig cfg) : src_(src), cfg_(std::move(cfg)) {}

    PilotObservation observe(const MultipathChannel& chan, const Impairments& imp, std::size_t epoch,
                             std::uint64_t seed) const {
        const auto rx = simulate_epoch(src_.wave, chan, imp, src_.num, epoch, cfg_.period_samples(), seed, kGuard);
        return extract_dmrs(std::span<const cf64>(rx), kGuard, src_.cell, src_.num, cfg_.sync.fft_backoff);
    }

    /// Feeds `epochs` observations through an EpochTracker.
    EpochTracker run(std::size_t epochs, const std::function<MultipathChannel(std::size_t)>& channel,
                     const Impairments& imp, std::uint64_t seed) const {
        EpochTracker tracker(cfg_);
        const auto period = static_cast<std::ptrdiff_t>(cfg_.period_samples());
        for (std::size_t e = 0; e < epochs; ++e) {
            const auto obs = observe(channel(e), imp, e, seed);
            tracker.process(e, obs, static_cast<std::ptrdiff_t>(e) * period - cfg_.sync.fft_backoff);
        }
        return tracker;
    }

    const PipelineConfig& config() const { return cfg_; }

private:
    const SsbSource& src_;
    PipelineConfig cfg_;
};

/// Three-path desk-scale profile: 0, -3 and -8 dB within a 3-sample spread.
inline MultipathChannel desk_channel(double first_delay = 2.0, double phase = 0.3) {
    return MultipathChannel({{std::polar(1.0, phase), first_delay},
                             {std::polar(std::pow(10.0, -3.0 / 20.0), phase + 1.9), first_delay + 1.6},
                             {std::polar(std::pow(10.0, -8.0 / 20.0), phase - 2.2), first_delay + 3.0}});
}

inline std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        rows.push_back(std::move(cells));
    }
    return rows;
}

/// Header and shape must match exactly; numeric cells within 1e-6 relative.
/// Returns an empty string on success, otherwise the first difference.
inline std::string compare_csv(const std::filesystem::path& got, const std::filesystem::path& want) {
    const auto a = read_csv(got);
    const auto b = read_csv(want);
    if (a.empty() || b.empty()) return "missing or empty: " + got.filename().string();
    if (a.front() != b.front()) return got.filename().string() + ": header differs";
    if (a.size() != b.size()) return got.filename().string() + ": row count " + std::to_string(a.size()) +
                                     " vs " + std::to_string(b.size());
    for (std::size_t r = 1; r < a.size(); ++r) {
        if (a[r].size() != b[r].size()) return got.filename().string() + ": column count differs at row " + std::to_string(r);
        for (std::size_t c = 0; c < a[r].size(); ++c) {
            const double x = std::stod(a[r][c]);
            const double y = std::stod(b[r][c]);
            if (std::abs(x - y) > 1e-6 * std::max(std::abs(x), std::abs(y)) + 1e-12)
                return got.filename().string() + ": row " + std::to_string(r) + " col " + std::to_string(c) +
                       " " + a[r][c] + " vs " + b[r][c];
        }
    }
    return {};
}

inline std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace nrtest
