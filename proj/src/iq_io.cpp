#include "nrrange/iq_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "json.hpp"

namespace nrrange {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
T from_le(T v) {
    if constexpr (std::endian::native == std::endian::big) {
        auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
        std::reverse(bytes.begin(), bytes.end());
        return std::bit_cast<T>(bytes);
    }
    return v;
}

template <typename T>
T to_le(T v) {
    return from_le(v);
}

template <typename T>
T require(const json& j, const char* key, const fs::path& where) {
    if (!j.contains(key)) throw MetadataError(where.string() + ": sidecar missing field '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw MetadataError(where.string() + ": sidecar field '" + key + "' has the wrong type");
    }
}

}  // namespace

std::string to_string(IqFormat fmt) { return fmt == IqFormat::Cf32Le ? "cf32_le" : "ci16_le"; }

IqFormat parse_iq_format(const std::string& name) {
    if (name == "cf32_le") return IqFormat::Cf32Le;
    if (name == "ci16_le") return IqFormat::Ci16Le;
    throw FormatError("unsupported IQ datatype '" + name + "' (expected cf32_le or ci16_le)");
}

std::size_t bytes_per_sample(IqFormat fmt) { return fmt == IqFormat::Cf32Le ? 8 : 4; }

void IqMetadata::validate() const {
    if (!(sample_rate_hz > 0.0) || !std::isfinite(sample_rate_hz))
        throw MetadataError("sample_rate_hz must be positive and finite");
    if (!std::isfinite(center_freq_hz) || !std::isfinite(gain_db))
        throw MetadataError("center_freq_hz and gain_db must be finite");
}

fs::path sidecar_path(const fs::path& data_file) {
    fs::path p = data_file;
    p += ".json";
    return p;
}

IqMetadata read_sidecar(const fs::path& data_file) {
    const fs::path side = sidecar_path(data_file);
    std::ifstream in(side);
    if (!in) throw MetadataError(side.string() + ": sidecar metadata not found");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw MetadataError(side.string() + ": malformed sidecar: " + e.what());
    }
    IqMetadata m;
    const auto dtype = require<std::string>(j, "datatype", side);
    try {
        m.datatype = parse_iq_format(dtype);
    } catch (const FormatError& e) {
        throw MetadataError(side.string() + ": " + e.what());
    }
    m.sample_rate_hz = require<double>(j, "sample_rate_hz", side);
    m.center_freq_hz = require<double>(j, "center_freq_hz", side);
    m.capture_time = j.value("capture_time", std::string{});
    m.gain_db = j.value("gain_db", 0.0);
    m.source = j.value("source", std::string{});
    try {
        m.validate();
    } catch (const MetadataError& e) {
        throw MetadataError(side.string() + ": " + e.what());
    }
    return m;
}

void write_sidecar(const fs::path& data_file, const IqMetadata& meta) {
    meta.validate();
    json j;
    j["datatype"] = to_string(meta.datatype);
    j["sample_rate_hz"] = meta.sample_rate_hz;
    j["center_freq_hz"] = meta.center_freq_hz;
    j["capture_time"] = meta.capture_time;
    j["gain_db"] = meta.gain_db;
    j["source"] = meta.source;
    const fs::path side = sidecar_path(data_file);
    std::ofstream out(side);
    if (!out) throw std::runtime_error(side.string() + ": cannot open for writing");
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error(side.string() + ": write failed");
}

IqRecording read_iq(const fs::path& data_file, std::optional<IqFormat> expected) {
    IqRecording rec;
    rec.meta = read_sidecar(data_file);
    if (expected && *expected != rec.meta.datatype)
        throw MetadataError(data_file.string() + ": sidecar datatype " + to_string(rec.meta.datatype) +
                            " contradicts requested " + to_string(*expected));

    std::ifstream in(data_file, std::ios::binary);
    if (!in) throw std::runtime_error(data_file.string() + ": cannot open");
    const auto bytes = static_cast<std::size_t>(fs::file_size(data_file));
    if (bytes == 0) throw std::length_error(data_file.string() + ": empty capture");
    const std::size_t width = bytes_per_sample(rec.meta.datatype);
    if (bytes % width != 0)
        throw FormatError(data_file.string() + ": byte count " + std::to_string(bytes) +
                          " is not a whole number of " + to_string(rec.meta.datatype) + " samples");

    const std::size_t count = bytes / width;
    rec.samples.resize(count);
    if (rec.meta.datatype == IqFormat::Cf32Le) {
        static_assert(sizeof(cf32) == 8);
        in.read(reinterpret_cast<char*>(rec.samples.data()), static_cast<std::streamsize>(bytes));
        if (!in) throw std::runtime_error(data_file.string() + ": read failed");
        if constexpr (std::endian::native == std::endian::big) {
            for (auto& s : rec.samples) s = {from_le(s.real()), from_le(s.imag())};
        }
    } else {
        std::vector<std::int16_t> raw(count * 2);
        in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(bytes));
        if (!in) throw std::runtime_error(data_file.string() + ": read failed");
        constexpr float scale = 1.0f / 32768.0f;
        for (std::size_t k = 0; k < count; ++k)
            rec.samples[k] = {static_cast<float>(from_le(raw[2 * k])) * scale,
                              static_cast<float>(from_le(raw[2 * k + 1])) * scale};
    }
    return rec;
}

void write_iq(const fs::path& data_file, std::span<const cf32> samples, const IqMetadata& meta,
              double full_scale) {
    meta.validate();
    if (!(full_scale > 0.0)) throw std::domain_error("write_iq: full_scale must be positive");
    if (data_file.has_parent_path()) fs::create_directories(data_file.parent_path());
    std::ofstream out(data_file, std::ios::binary);
    if (!out) throw std::runtime_error(data_file.string() + ": cannot open for writing");

    if (meta.datatype == IqFormat::Cf32Le) {
        if constexpr (std::endian::native == std::endian::little) {
            out.write(reinterpret_cast<const char*>(samples.data()),
                      static_cast<std::streamsize>(samples.size() * sizeof(cf32)));
        } else {
            for (const auto& s : samples) {
                const float iq[2] = {to_le(s.real()), to_le(s.imag())};
                out.write(reinterpret_cast<const char*>(iq), sizeof iq);
            }
        }
    } else {
        const double gain = 32768.0 / full_scale;
        auto quantize = [gain](float v) {
            const double q = std::nearbyint(static_cast<double>(v) * gain);
            return to_le(static_cast<std::int16_t>(std::clamp(q, -32768.0, 32767.0)));
        };
        std::vector<std::int16_t> raw(samples.size() * 2);
        for (std::size_t k = 0; k < samples.size(); ++k) {
            raw[2 * k] = quantize(samples[k].real());
            raw[2 * k + 1] = quantize(samples[k].imag());
        }
        out.write(reinterpret_cast<const char*>(raw.data()),
                  static_cast<std::streamsize>(raw.size() * sizeof(std::int16_t)));
    }
    if (!out) throw std::runtime_error(data_file.string() + ": write failed");
    out.close();
    write_sidecar(data_file, meta);
}

}  // namespace nrrange
