#pragma once

// Raw interleaved IQ files with a JSON sidecar `<file>.json`:
//   {"datatype": "cf32_le" | "ci16_le", "sample_rate_hz": ..., "center_freq_hz": ...,
//    "capture_time": "...", "gain_db": ..., "source": "..."}

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nrrange/common.hpp"

namespace nrrange {

enum class IqFormat { Cf32Le, Ci16Le };

std::string to_string(IqFormat fmt);
/// Throws FormatError for anything other than "cf32_le" / "ci16_le".
IqFormat parse_iq_format(const std::string& name);
std::size_t bytes_per_sample(IqFormat fmt);

struct IqMetadata {
    IqFormat datatype = IqFormat::Cf32Le;
    double sample_rate_hz = 7.68e6;
    double center_freq_hz = 2565e6;
    std::string capture_time;
    double gain_db = 0.0;
    std::string source;

    /// Throws MetadataError on non-positive or non-finite rates.
    void validate() const;
};

struct IqRecording {
    std::vector<cf32> samples;
    IqMetadata meta;
};

std::filesystem::path sidecar_path(const std::filesystem::path& data_file);

IqMetadata read_sidecar(const std::filesystem::path& data_file);
void write_sidecar(const std::filesystem::path& data_file, const IqMetadata& meta);

/// Decodes I then Q per sample; 16-bit values are scaled by 1/32768. When
/// `expected` is given it must agree with the sidecar datatype (MetadataError
/// otherwise). Empty file: std::length_error. Partial sample: FormatError.
IqRecording read_iq(const std::filesystem::path& data_file,
                    std::optional<IqFormat> expected = std::nullopt);

/// Writes samples in meta.datatype plus the sidecar. For ci16 a sample of
/// magnitude `full_scale` maps to 32768 (values clip to the int16 range).
void write_iq(const std::filesystem::path& data_file, std::span<const cf32> samples,
              const IqMetadata& meta, double full_scale = 1.0);

}  // namespace nrrange
