#pragma once

// CSV and manifest emission for pipeline runs and analysis tables.
//
//   range_track.csv   epoch,toa_s,phase_rad,delta_m,cumulative_m,lock
//   cir_heatmap.csv   one row per epoch, one column per delay-grid point
//   acquisition.csv   epoch,path,delay_samples,delay_s,gain_re,gain_im,gain_abs,phase_rad
//   tracking.csv      epoch,path,delay_samples,gain_abs,phase_rad,discriminator,locked
//   smoothed_toa.csv  epoch,toa_raw_s,toa_smoothed_s
//   run_manifest.json configuration, seed, input description, sync result, stage trace

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "nrrange/analysis.hpp"
#include "nrrange/pipeline.hpp"

namespace nrrange {

/// Fixed-precision numeric formatting shared by every CSV (%.12g).
std::string format_number(double v);

/// Writes the five CSVs and run_manifest.json into out_dir (created if needed).
/// `extra` is merged into the manifest under "input". Throws std::runtime_error
/// naming the path on IO failure.
void write_results(const PipelineResult& result, const PipelineConfig& cfg,
                   const std::filesystem::path& out_dir, const nlohmann::json& extra = {});

/// acf.csv, s_curve.csv and k_d.csv.
void write_analysis_tables(const std::filesystem::path& out_dir, const std::vector<AcfRow>& acf,
                           const std::vector<SCurveRow>& s, const std::vector<GainRow>& gain);

}  // namespace nrrange
