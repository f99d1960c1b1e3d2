#pragma once

// Simulation scenario files (JSON) and capture synthesis for the CLI.
//
// {
//   "seed": 7, "cell_id": 602, "ssb_index": 0,
//   "duration_s": 1.0, "first_ssb_offset": 1000, "ssb_period_s": 0.02,
//   "carrier_freq_hz": 2565e6,
//   "channel": [{"delay": 0.0, "gain_db": 0.0, "phase_rad": 0.0}, ...],
//   "impairments": {"cfo_norm": 0.0, "phase0": 0.0, "sto": 0.0, "sco_ppm": 0.0, "snr_db": 10.0},
//   "trajectory": {"waypoints": [[0.0, 10.0], [7.2, 2.8]]},
//   "output": {"datatype": "cf32_le", "full_scale": 1.0, "source": "simulated"}
// }
//
// "snr_db": null (or absent) means noiseless. Every field is optional.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "nrrange/channel_sim.hpp"
#include "nrrange/iq_io.hpp"
#include "nrrange/nr_grid.hpp"

namespace nrrange {

struct Scenario {
    std::uint64_t seed = 1;
    int cell_id = 602;
    int ssb_index = 0;
    double duration_s = 1.0;
    std::size_t first_ssb_offset = 1000;
    double ssb_period_s = 0.02;
    double carrier_freq_hz = 2565e6;
    MultipathChannel channel = MultipathChannel::identity();
    Impairments impairments;
    std::optional<Trajectory> trajectory;
    IqFormat datatype = IqFormat::Cf32Le;
    double full_scale = 1.0;
    std::string source = "simulated";

    std::size_t period_samples(const Numerology& num) const;
    std::size_t total_samples(const Numerology& num) const;
    void validate(const Numerology& num) const;
};

/// Throws MetadataError on malformed content.
Scenario scenario_from_json(const nlohmann::json& j);
nlohmann::json scenario_to_json(const Scenario& s);
Scenario load_scenario(const std::filesystem::path& path);

/// Noise-free SSB burst train at first_ssb_offset + i * period.
std::vector<cf32> generate_ssb_capture(const Scenario& s, const Numerology& num);

/// Channel, trajectory and impairments of the scenario applied period by period.
/// Periods past the end of the trajectory hold its final position.
std::vector<cf32> impair_capture(std::span<const cf32> clean, const Scenario& s, const Numerology& num);

IqMetadata scenario_metadata(const Scenario& s, const Numerology& num);

/// Ground truth a receiver should recover.
struct ScenarioTruth {
    std::size_t ssb_start = 0;
    double first_path_delay = 0.0;  // samples, epoch 0, including sto
    CellIdentity cell{0, 0};
    double range_decrease_m = 0.0;  // r(first epoch) - r(last epoch)
};
ScenarioTruth scenario_truth(const Scenario& s, const Numerology& num);

}  // namespace nrrange
