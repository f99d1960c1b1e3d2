#include "nrrange/results.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace nrrange {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class CsvFile {
public:
    CsvFile(const fs::path& path, const std::vector<std::string>& header) : path_(path), out_(path) {
        if (!out_) throw std::runtime_error(path.string() + ": cannot open for writing");
        row(header);
    }

    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
        out_ << '\n';
    }

    void close() {
        out_.close();
        if (!out_) throw std::runtime_error(path_.string() + ": write failed");
    }

private:
    fs::path path_;
    std::ofstream out_;
};

std::string fmt(double v) { return format_number(v); }
std::string fmt(std::size_t v) { return std::to_string(v); }
std::string fmt(int v) { return std::to_string(v); }

}  // namespace

std::string format_number(double v) {
    if (v == 0.0) return "0";  // folds -0
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

void write_results(const PipelineResult& result, const PipelineConfig& cfg, const fs::path& out_dir,
                   const json& extra) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw std::runtime_error(out_dir.string() + ": cannot create directory: " + ec.message());
    const double fs_hz = cfg.num.sample_rate_hz();

    {
        CsvFile csv(out_dir / "range_track.csv", {"epoch", "toa_s", "phase_rad", "delta_m", "cumulative_m", "lock"});
        for (const auto& e : result.track.epochs())
            csv.row({fmt(e.epoch), fmt(e.toa_samples / fs_hz), fmt(e.phase_rad), fmt(e.delta_m),
                     fmt(e.cumulative_m), e.locked ? "1" : "0"});
        csv.close();
    }
    {
        std::vector<std::string> header;
        for (int j = 0; j < cfg.acq.n_tau; ++j) header.push_back("tau_" + fmt(cfg.acq.delay(j)));
        CsvFile csv(out_dir / "cir_heatmap.csv", header);
        for (const auto& e : result.epochs) {
            std::vector<std::string> cells;
            for (double v : e.cir) cells.push_back(fmt(v));
            csv.row(cells);
        }
        csv.close();
    }
    {
        CsvFile csv(out_dir / "acquisition.csv",
                    {"epoch", "path", "delay_samples", "delay_s", "gain_re", "gain_im", "gain_abs", "phase_rad"});
        for (const auto& rec : result.acquisitions)
            for (std::size_t l = 0; l < rec.result.paths.size(); ++l) {
                const auto& p = rec.result.paths[l];
                csv.row({fmt(rec.epoch), fmt(l), fmt(p.delay), fmt(p.delay / fs_hz), fmt(p.coeff.real()),
                         fmt(p.coeff.imag()), fmt(std::abs(p.coeff)), fmt(std::arg(p.coeff))});
            }
        csv.close();
    }
    {
        CsvFile csv(out_dir / "tracking.csv",
                    {"epoch", "path", "delay_samples", "gain_abs", "phase_rad", "discriminator", "locked"});
        for (const auto& e : result.epochs)
            for (const auto& p : e.paths)
                csv.row({fmt(e.epoch), fmt(p.path_index), fmt(p.delay), fmt(std::abs(p.coeff)),
                         fmt(std::arg(p.coeff)), fmt(p.discriminator), p.locked ? "1" : "0"});
        csv.close();
    }
    {
        CsvFile csv(out_dir / "smoothed_toa.csv", {"epoch", "toa_raw_s", "toa_smoothed_s"});
        const auto& epochs = result.track.epochs();
        for (std::size_t i = 0; i < epochs.size(); ++i)
            csv.row({fmt(epochs[i].epoch), fmt(epochs[i].toa_samples / fs_hz),
                     fmt(result.smoothed_toa_samples[i] / fs_hz)});
        csv.close();
    }

    json manifest;
    manifest["config"] = config_to_json(cfg);
    manifest["seed"] = cfg.seed;
    manifest["input"] = extra.is_null() ? json::object() : extra;
    manifest["input"]["samples"] = result.input_samples;
    manifest["input"]["sample_rate_hz"] = result.sample_rate_hz;
    const auto& s = result.sync;
    manifest["sync"] = {{"ssb_start", s.ssb_start},   {"m1", s.m1_hat},
                        {"m2", s.m2_hat},             {"cell_id", s.cell.cell_id()},
                        {"peak_metric", s.peak_metric}, {"threshold_ratio", s.threshold_ratio},
                        {"cfo_hat_norm", s.cfo_hat_norm}, {"sss_metric", s.sss_metric}};
    manifest["stage_trace"] = result.stage_trace;
    manifest["epochs"] = result.track.epochs().size();
    manifest["cumulative_m"] = result.track.cumulative_m();
    manifest["outputs"] = {"range_track.csv", "cir_heatmap.csv", "acquisition.csv", "tracking.csv",
                           "smoothed_toa.csv"};
    const fs::path mpath = out_dir / "run_manifest.json";
    std::ofstream out(mpath);
    if (!out) throw std::runtime_error(mpath.string() + ": cannot open for writing");
    out << manifest.dump(2) << '\n';
    if (!out) throw std::runtime_error(mpath.string() + ": write failed");
}

void write_analysis_tables(const fs::path& out_dir, const std::vector<AcfRow>& acf,
                           const std::vector<SCurveRow>& s, const std::vector<GainRow>& gain) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw std::runtime_error(out_dir.string() + ": cannot create directory: " + ec.message());
    {
        CsvFile csv(out_dir / "acf.csv", {"epsilon", "abs_exact", "abs_approx"});
        for (const auto& r : acf) csv.row({fmt(r.epsilon), fmt(r.abs_exact), fmt(r.abs_approx)});
        csv.close();
    }
    {
        CsvFile csv(out_dir / "s_curve.csv", {"epsilon", "s", "s_exact", "s_normalized"});
        for (const auto& r : s) csv.row({fmt(r.epsilon), fmt(r.s), fmt(r.s_exact), fmt(r.s_normalized)});
        csv.close();
    }
    {
        CsvFile csv(out_dir / "k_d.csv", {"xi", "k_d"});
        for (const auto& r : gain) csv.row({fmt(r.xi), fmt(r.k_d)});
        csv.close();
    }
}

}  // namespace nrrange
