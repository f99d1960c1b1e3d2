// nrrange: SSB waveform generation, channel impairment, receiver and analysis tables.
//
// Exit codes: 0 success, 1 other failure, 2 no SSB detected, 3 format/metadata error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "nrrange/analysis.hpp"
#include "nrrange/iq_io.hpp"
#include "nrrange/pipeline.hpp"
#include "nrrange/results.hpp"
#include "nrrange/scenario.hpp"

namespace fs = std::filesystem;
using namespace nrrange;
using nlohmann::json;

namespace {

constexpr int kExitOther = 1;
constexpr int kExitNoDetection = 2;
constexpr int kExitFormat = 3;

struct ImpairOverrides {
    std::optional<double> snr_db;
    std::optional<double> cfo;
    std::optional<double> sto;
    std::optional<double> sco_ppm;
    std::optional<double> phase0;
    std::optional<std::uint64_t> seed;
    bool noiseless = false;

    void add_flags(CLI::App* app) {
        app->add_option("--snr-db", snr_db, "Per-sample SNR over the SSB symbols (dB)");
        app->add_flag("--noiseless", noiseless, "Disable AWGN");
        app->add_option("--cfo", cfo, "Carrier frequency offset in subcarrier spacings");
        app->add_option("--sto", sto, "Symbol timing offset in samples");
        app->add_option("--sco-ppm", sco_ppm, "Sampling clock offset (ppm)");
        app->add_option("--phase0", phase0, "Carrier phase (rad)");
        app->add_option("--seed", seed, "Noise seed");
    }

    void apply(Scenario& s) const {
        if (snr_db) s.impairments.snr_db = *snr_db;
        if (noiseless) s.impairments.snr_db.reset();
        if (cfo) s.impairments.cfo_norm = *cfo;
        if (sto) s.impairments.sto = *sto;
        if (sco_ppm) s.impairments.sco_ppm = *sco_ppm;
        if (phase0) s.impairments.phase0 = *phase0;
        if (seed) s.seed = *seed;
    }
};

void add_pipeline_flags(CLI::App* app, PipelineConfig& cfg, bool& dynamic) {
    app->add_option("--scs", cfg.num.scs_hz, "Subcarrier spacing (Hz)")->capture_default_str();
    app->add_option("--center-freq", cfg.carrier_freq_hz, "Carrier frequency (Hz)")->capture_default_str();
    app->add_option("--threshold", cfg.acq.power_threshold, "Acquisition retained-power threshold")
        ->capture_default_str();
    app->add_option("--delta-tau", cfg.acq.delta_tau, "Acquisition delay-grid step (samples)")
        ->capture_default_str();
    app->add_option("--n-tau", cfg.acq.n_tau, "Acquisition delay-grid length")->capture_default_str();
    app->add_option("--max-paths", cfg.acq.max_paths, "Maximum acquired paths")->capture_default_str();
    app->add_option("--update-period", cfg.dll.update_period_s, "DLL updating time (s)")->capture_default_str();
    app->add_option("--loop-bandwidth", cfg.dll.loop_bandwidth_hz, "DLL loop bandwidth (Hz)")
        ->capture_default_str();
    app->add_flag("--dynamic", dynamic, "Dynamic-test loop bandwidth (0.5 Hz)");
    app->add_option("--xi", cfg.dll.xi, "Early/late correlator spacing (samples)")->capture_default_str();
    app->add_option("--loss-of-lock-epochs", cfg.dll.loss_of_lock_epochs, "Epochs outside pull-in before loss of lock")
        ->capture_default_str();
    app->add_option("--smoothing-window", cfg.smoothing_window, "Hatch smoothing window (epochs)")
        ->capture_default_str();
    app->add_option("--pss-threshold", cfg.sync.pss_threshold, "PSS peak-to-mean detection threshold")
        ->capture_default_str();
    app->add_option("--sss-threshold", cfg.sync.sss_threshold, "SSS peak-to-mean detection threshold")
        ->capture_default_str();
    app->add_option("--fft-backoff", cfg.sync.fft_backoff, "FFT window advance into the CP (samples)")
        ->capture_default_str();
    app->add_option("--recenter-window", cfg.recenter_window, "Per-epoch anchor search half-width (samples)")
        ->capture_default_str();
}

void finalize_pipeline(PipelineConfig& cfg, bool dynamic) {
    cfg.num.fft_size = 256;
    if (dynamic) cfg.dll.loop_bandwidth_hz = 0.5;
    cfg.ssb_period_s = cfg.dll.update_period_s;
}

json truth_report(const ScenarioTruth& truth, const PipelineResult& res, const Numerology& num) {
    const auto& track = res.track.epochs();
    json j;
    j["true_ssb_start"] = truth.ssb_start;
    j["true_first_path_delay"] = truth.first_path_delay;
    j["true_cell_id"] = truth.cell.cell_id();
    j["true_range_decrease_m"] = truth.range_decrease_m;
    j["detected_ssb_start"] = res.sync.ssb_start;
    j["detected_cell_id"] = res.sync.cell.cell_id();
    if (!track.empty()) {
        j["epoch0_toa_samples"] = track.front().toa_samples;
        j["epoch0_toa_error_samples"] =
            track.front().toa_samples - (static_cast<double>(truth.ssb_start) + truth.first_path_delay);
        j["cumulative_m"] = res.track.cumulative_m();
        j["cumulative_error_m"] = res.track.cumulative_m() - truth.range_decrease_m;
    }
    j["sample_rate_hz"] = num.sample_rate_hz();
    return j;
}

int run(int argc, char** argv) {
    CLI::App app{"5G NR SSB carrier-phase ranging toolkit"};
    app.require_subcommand(1);
    std::string log_level = "info";
    app.add_option("--log-level", log_level, "trace, debug, info, warn, error, off")->capture_default_str();

    // generate
    auto* gen = app.add_subcommand("generate", "Write a noise-free SSB burst train as an IQ file");
    std::string gen_out;
    std::string gen_datatype = "cf32_le";
    Scenario gen_s;
    gen->add_option("--out", gen_out, "Output IQ file (sidecar written alongside)")->required();
    gen->add_option("--cell-id", gen_s.cell_id, "Physical cell identity")->capture_default_str();
    gen->add_option("--ssb-index", gen_s.ssb_index, "SSB index within the burst set")->capture_default_str();
    gen->add_option("--duration", gen_s.duration_s, "Capture length (s)")->capture_default_str();
    gen->add_option("--first-offset", gen_s.first_ssb_offset, "Sample index of the first SSB")->capture_default_str();
    gen->add_option("--period", gen_s.ssb_period_s, "SSB period (s)")->capture_default_str();
    gen->add_option("--center-freq", gen_s.carrier_freq_hz, "Carrier frequency (Hz)")->capture_default_str();
    gen->add_option("--datatype", gen_datatype, "cf32_le or ci16_le")->capture_default_str();
    gen->add_option("--full-scale", gen_s.full_scale, "ci16 full-scale magnitude")->capture_default_str();

    // impair
    auto* imp = app.add_subcommand("impair", "Apply a channel/trajectory scenario to an IQ file");
    std::string imp_in, imp_out, imp_scenario;
    std::optional<std::string> imp_datatype;
    std::optional<double> imp_full_scale;
    ImpairOverrides imp_over;
    imp->add_option("--in", imp_in, "Input IQ file")->required();
    imp->add_option("--out", imp_out, "Output IQ file")->required();
    imp->add_option("--scenario", imp_scenario, "Scenario JSON (channel, impairments, trajectory, seed)");
    imp->add_option("--datatype", imp_datatype, "Output datatype override");
    imp->add_option("--full-scale", imp_full_scale, "ci16 full-scale magnitude override");
    imp_over.add_flags(imp);

    // receive
    auto* rx = app.add_subcommand("receive", "Run the receiver on a capture and write results");
    std::string rx_in, rx_out;
    std::optional<std::string> rx_format;
    PipelineConfig rx_cfg;
    bool rx_dynamic = false;
    rx->add_option("--in", rx_in, "Capture file (sidecar <file>.json required)")->required();
    rx->add_option("--out-dir", rx_out, "Results directory")->required();
    rx->add_option("--format", rx_format, "Expected datatype (cf32_le or ci16_le)");
    rx->add_option("--seed", rx_cfg.seed, "Seed recorded in the manifest")->capture_default_str();
    add_pipeline_flags(rx, rx_cfg, rx_dynamic);

    // analyze
    auto* an = app.add_subcommand("analyze", "Write closed-form ACF, S-curve and k_d tables");
    std::string an_out;
    AcfParams an_params;
    double an_xi = 0.5, an_range = 2.0;
    int an_points = 401;
    an->add_option("--out-dir", an_out, "Output directory")->required();
    an->add_option("--xi", an_xi, "Correlator spacing for the S-curve table")->capture_default_str();
    an->add_option("--kappa", an_params.kappa, "Pilot spacing (subcarriers)")->capture_default_str();
    an->add_option("--np", an_params.n_p, "Pilot count")->capture_default_str();
    an->add_option("--p0", an_params.p0, "First pilot index")->capture_default_str();
    an->add_option("--range", an_range, "Table span +-range samples")->capture_default_str();
    an->add_option("--points", an_points, "Table points")->capture_default_str();

    // e2e
    auto* e2e = app.add_subcommand("e2e", "generate, impair and receive in one run");
    std::string e2e_scenario, e2e_out;
    PipelineConfig e2e_cfg;
    bool e2e_dynamic = false;
    ImpairOverrides e2e_over;
    e2e->add_option("--scenario", e2e_scenario, "Scenario JSON (defaults: identity channel, noiseless)");
    e2e->add_option("--out-dir", e2e_out, "Output directory (capture, results, truth.json)")->required();
    e2e_over.add_flags(e2e);
    add_pipeline_flags(e2e, e2e_cfg, e2e_dynamic);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // --help and --version exit 0; usage errors fold into the generic failure code.
        return app.exit(e) == 0 ? 0 : kExitOther;
    }

    auto logger = spdlog::stderr_color_mt("nrrange");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::from_str(log_level));

    const Numerology num = Numerology::nr();

    if (gen->parsed()) {
        gen_s.datatype = parse_iq_format(gen_datatype);
        const auto samples = generate_ssb_capture(gen_s, num);
        write_iq(gen_out, samples, scenario_metadata(gen_s, num), gen_s.full_scale);
        spdlog::info("wrote {} samples to {}", samples.size(), gen_out);
        return 0;
    }

    if (imp->parsed()) {
        Scenario s = imp_scenario.empty() ? Scenario{} : load_scenario(imp_scenario);
        imp_over.apply(s);
        const IqRecording in = read_iq(imp_in);
        if (in.meta.sample_rate_hz != num.sample_rate_hz())
            throw MetadataError(imp_in + ": impair expects " + std::to_string(num.sample_rate_hz()) + " Hz input");
        s.duration_s = static_cast<double>(in.samples.size()) / num.sample_rate_hz();
        s.carrier_freq_hz = in.meta.center_freq_hz;
        if (imp_scenario.empty()) s.datatype = in.meta.datatype;
        if (imp_datatype) s.datatype = parse_iq_format(*imp_datatype);
        if (imp_full_scale) s.full_scale = *imp_full_scale;
        const auto out = impair_capture(in.samples, s, num);
        IqMetadata meta = in.meta;
        meta.datatype = s.datatype;
        meta.source = s.source;
        write_iq(imp_out, out, meta, s.full_scale);
        spdlog::info("wrote {} impaired samples to {}", out.size(), imp_out);
        return 0;
    }

    if (rx->parsed()) {
        finalize_pipeline(rx_cfg, rx_dynamic);
        IqRecording rec;
        try {
            rec = read_iq(rx_in, rx_format ? std::optional(parse_iq_format(*rx_format)) : std::nullopt);
        } catch (const std::length_error& e) {
            throw FormatError(e.what());
        }
        const auto result = run_pipeline(rec, rx_cfg);
        json input = {{"capture", fs::path(rx_in).filename().string()},
                      {"datatype", to_string(rec.meta.datatype)},
                      {"capture_sample_rate_hz", rec.meta.sample_rate_hz},
                      {"center_freq_hz", rec.meta.center_freq_hz},
                      {"source", rec.meta.source}};
        write_results(result, rx_cfg, rx_out, input);
        std::printf("cell %d ssb_start %td epochs %zu cumulative_m %.4f\n", result.sync.cell.cell_id(),
                    result.sync.ssb_start, result.track.epochs().size(), result.track.cumulative_m());
        return 0;
    }

    if (an->parsed()) {
        write_analysis_tables(an_out, acf_table(an_params, -an_range, an_range, an_points),
                              s_curve_table(an_params, an_xi, -an_range, an_range, an_points),
                              gain_table(an_params, 0.5 / an_points, 0.5, an_points));
        spdlog::info("analysis tables written to {}", an_out);
        return 0;
    }

    if (e2e->parsed()) {
        finalize_pipeline(e2e_cfg, e2e_dynamic);
        Scenario s = e2e_scenario.empty() ? Scenario{} : load_scenario(e2e_scenario);
        e2e_over.apply(s);
        e2e_cfg.seed = s.seed;
        e2e_cfg.carrier_freq_hz = s.carrier_freq_hz;
        const fs::path dir(e2e_out);
        fs::create_directories(dir);
        const auto clean = generate_ssb_capture(s, num);
        const auto rx_samples = impair_capture(clean, s, num);
        const fs::path capture = dir / ("capture." + std::string(s.datatype == IqFormat::Cf32Le ? "cf32" : "ci16"));
        write_iq(capture, rx_samples, scenario_metadata(s, num), s.full_scale);
        {
            std::ofstream sc(dir / "scenario.json");
            sc << scenario_to_json(s).dump(2) << '\n';
        }
        const IqRecording rec = read_iq(capture);
        const auto result = run_pipeline(rec, e2e_cfg);
        write_results(result, e2e_cfg, dir, {{"capture", capture.filename().string()}, {"scenario", "scenario.json"}});
        const json truth = truth_report(scenario_truth(s, num), result, num);
        std::ofstream(dir / "truth.json") << truth.dump(2) << '\n';
        std::printf("%s\n", truth.dump().c_str());
        return 0;
    }
    return kExitOther;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const DetectionError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitNoDetection;
    } catch (const FormatError& e) {
        std::fprintf(stderr, "format error: %s\n", e.what());
        return kExitFormat;
    } catch (const MetadataError& e) {
        std::fprintf(stderr, "metadata error: %s\n", e.what());
        return kExitFormat;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitOther;
    }
}
