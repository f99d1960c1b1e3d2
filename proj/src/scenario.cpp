#include "nrrange/scenario.hpp"

#include <cmath>
#include <fstream>

namespace nrrange {

using nlohmann::json;

namespace {

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw MetadataError(std::string("scenario field '") + key + "' has the wrong type");
    }
}

PathComponent path_from_json(const json& j) {
    PathComponent p;
    p.delay = get_or(j, "delay", 0.0);
    if (j.contains("gain_re") || j.contains("gain_im")) {
        p.gain = {get_or(j, "gain_re", 0.0), get_or(j, "gain_im", 0.0)};
    } else {
        const double amp = std::pow(10.0, get_or(j, "gain_db", 0.0) / 20.0);
        p.gain = std::polar(amp, get_or(j, "phase_rad", 0.0));
    }
    return p;
}

}  // namespace

std::size_t Scenario::period_samples(const Numerology& num) const {
    return static_cast<std::size_t>(std::llround(ssb_period_s * num.sample_rate_hz()));
}

std::size_t Scenario::total_samples(const Numerology& num) const { return num.samples_in(duration_s); }

void Scenario::validate(const Numerology& num) const {
    CellIdentity::from_cell_id(cell_id);
    impairments.validate();
    if (!(duration_s > 0.0)) throw std::domain_error("scenario: duration_s must be positive");
    if (!(ssb_period_s > 0.0)) throw std::domain_error("scenario: ssb_period_s must be positive");
    const auto period = period_samples(num);
    const double tail = channel.max_delay() + std::abs(impairments.sto) + 64.0;
    if (static_cast<double>(first_ssb_offset + static_cast<std::size_t>(num.ssb_length())) + tail >
        static_cast<double>(period))
        throw std::domain_error("scenario: first_ssb_offset leaves no room for the SSB and its echoes in one period");
    if (trajectory) trajectory->validate();
    if (!(full_scale > 0.0)) throw std::domain_error("scenario: full_scale must be positive");
}

Scenario scenario_from_json(const json& j) {
    if (!j.is_object()) throw MetadataError("scenario must be a JSON object");
    Scenario s;
    s.seed = get_or<std::uint64_t>(j, "seed", s.seed);
    s.cell_id = get_or(j, "cell_id", s.cell_id);
    s.ssb_index = get_or(j, "ssb_index", s.ssb_index);
    s.duration_s = get_or(j, "duration_s", s.duration_s);
    s.first_ssb_offset = get_or<std::size_t>(j, "first_ssb_offset", s.first_ssb_offset);
    s.ssb_period_s = get_or(j, "ssb_period_s", s.ssb_period_s);
    s.carrier_freq_hz = get_or(j, "carrier_freq_hz", s.carrier_freq_hz);

    if (j.contains("channel")) {
        const json& ch = j.at("channel");
        const json& list = ch.is_object() ? ch.at("paths") : ch;
        if (!list.is_array()) throw MetadataError("scenario channel must be an array of paths");
        std::vector<PathComponent> paths;
        for (const auto& p : list) paths.push_back(path_from_json(p));
        try {
            s.channel = MultipathChannel(std::move(paths));
        } catch (const std::domain_error& e) {
            throw MetadataError(std::string("scenario channel: ") + e.what());
        }
    }
    if (j.contains("impairments")) {
        const json& im = j.at("impairments");
        s.impairments.cfo_norm = get_or(im, "cfo_norm", 0.0);
        s.impairments.phase0 = get_or(im, "phase0", 0.0);
        s.impairments.sto = get_or(im, "sto", 0.0);
        s.impairments.sco_ppm = get_or(im, "sco_ppm", 0.0);
        if (im.contains("snr_db") && !im.at("snr_db").is_null()) s.impairments.snr_db = get_or(im, "snr_db", 0.0);
    }
    if (j.contains("trajectory") && !j.at("trajectory").is_null()) {
        const json& tr = j.at("trajectory");
        Trajectory t;
        t.carrier_freq_hz = get_or(tr, "carrier_freq_hz", s.carrier_freq_hz);
        t.ssb_period_s = s.ssb_period_s;
        if (!tr.contains("waypoints") || !tr.at("waypoints").is_array())
            throw MetadataError("trajectory needs a waypoints array");
        for (const auto& w : tr.at("waypoints")) {
            if (!w.is_array() || w.size() != 2 || !w[0].is_number() || !w[1].is_number())
                throw MetadataError("trajectory waypoints must be [time_s, range_m] pairs");
            t.waypoints.emplace_back(w[0].get<double>(), w[1].get<double>());
        }
        s.trajectory = std::move(t);
    }
    if (j.contains("output")) {
        const json& out = j.at("output");
        s.datatype = parse_iq_format(get_or<std::string>(out, "datatype", to_string(s.datatype)));
        s.full_scale = get_or(out, "full_scale", s.full_scale);
        s.source = get_or<std::string>(out, "source", s.source);
    }
    try {
        s.validate(Numerology::nr());
    } catch (const std::domain_error& e) {
        throw MetadataError(std::string("scenario: ") + e.what());
    } catch (const std::out_of_range& e) {
        throw MetadataError(std::string("scenario: ") + e.what());
    }
    return s;
}

json scenario_to_json(const Scenario& s) {
    json j;
    j["seed"] = s.seed;
    j["cell_id"] = s.cell_id;
    j["ssb_index"] = s.ssb_index;
    j["duration_s"] = s.duration_s;
    j["first_ssb_offset"] = s.first_ssb_offset;
    j["ssb_period_s"] = s.ssb_period_s;
    j["carrier_freq_hz"] = s.carrier_freq_hz;
    j["channel"] = json::array();
    for (const auto& p : s.channel.paths())
        j["channel"].push_back({{"delay", p.delay}, {"gain_re", p.gain.real()}, {"gain_im", p.gain.imag()}});
    const auto& im = s.impairments;
    j["impairments"] = {{"cfo_norm", im.cfo_norm}, {"phase0", im.phase0}, {"sto", im.sto}, {"sco_ppm", im.sco_ppm}};
    j["impairments"]["snr_db"] = im.snr_db ? json(*im.snr_db) : json(nullptr);
    if (s.trajectory) {
        json w = json::array();
        for (const auto& [t, r] : s.trajectory->waypoints) w.push_back({t, r});
        j["trajectory"] = {{"waypoints", w}, {"carrier_freq_hz", s.trajectory->carrier_freq_hz}};
    } else {
        j["trajectory"] = nullptr;
    }
    j["output"] = {{"datatype", to_string(s.datatype)}, {"full_scale", s.full_scale}, {"source", s.source}};
    return j;
}

Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw MetadataError(path.string() + ": scenario file not found");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw MetadataError(path.string() + ": malformed scenario: " + e.what());
    }
    return scenario_from_json(j);
}

std::vector<cf32> generate_ssb_capture(const Scenario& s, const Numerology& num) {
    s.validate(num);
    const SsbGrid ssb = map_ssb_grid(CellIdentity::from_cell_id(s.cell_id), s.ssb_index);
    const auto train = synthesize_ssb_train(ssb, num, s.total_samples(num), s.first_ssb_offset,
                                            s.period_samples(num));
    return {train.begin(), train.end()};
}

std::vector<cf32> impair_capture(std::span<const cf32> clean, const Scenario& s, const Numerology& num) {
    s.validate(num);
    const double fs = num.sample_rate_hz();
    ChannelSchedule schedule;
    if (s.trajectory) {
        const Trajectory traj = *s.trajectory;
        const std::size_t last = traj.epoch_count() - 1;
        schedule = [traj, last, fs, chan = s.channel](std::size_t seg) {
            return trajectory_to_channel(traj, std::min(seg, last), chan, fs).channel;
        };
    } else {
        schedule = [chan = s.channel](std::size_t) { return chan; };
    }
    return apply_channel_segmented(clean, s.period_samples(num), schedule, s.impairments, num, s.seed);
}

IqMetadata scenario_metadata(const Scenario& s, const Numerology& num) {
    IqMetadata m;
    m.datatype = s.datatype;
    m.sample_rate_hz = num.sample_rate_hz();
    m.center_freq_hz = s.carrier_freq_hz;
    m.source = s.source;
    return m;
}

ScenarioTruth scenario_truth(const Scenario& s, const Numerology& num) {
    ScenarioTruth t;
    t.ssb_start = s.first_ssb_offset;
    t.cell = CellIdentity::from_cell_id(s.cell_id);
    MultipathChannel chan = s.channel;
    if (s.trajectory) {
        const auto& traj = *s.trajectory;
        chan = trajectory_to_channel(traj, 0, s.channel, num.sample_rate_hz()).channel;
        const std::size_t span = s.total_samples(num) - s.first_ssb_offset;
        const auto ssb_len = static_cast<std::size_t>(num.ssb_length());
        const std::size_t bursts = span >= ssb_len ? (span - ssb_len) / s.period_samples(num) + 1 : 1;
        const std::size_t last = std::min(bursts, traj.epoch_count()) - 1;
        const double t0 = traj.waypoints.front().first;
        t.range_decrease_m = traj.radial_distance(t0) -
                             traj.radial_distance(t0 + static_cast<double>(last) * traj.ssb_period_s);
    }
    t.first_path_delay = chan.paths().front().delay + s.impairments.sto;
    return t;
}

}  // namespace nrrange
