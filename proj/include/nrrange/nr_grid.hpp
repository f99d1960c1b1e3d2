#pragma once

// 5G NR SSB construction: PSS/SSS/PBCH DM-RS sequences (TS 38.211), the
// 240 x 4 SSB resource grid, and CP-OFDM modulation at N = 256.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "nrrange/common.hpp"

namespace nrrange {

inline constexpr int kSsbSubcarriers = 240;
inline constexpr int kSsbSymbols = 4;
inline constexpr int kSyncSeqLength = 127;
inline constexpr int kSyncFirstSubcarrier = 56;  // PSS/SSS occupy 56..182
inline constexpr int kDmrsPerSsb = 144;
inline constexpr int kPbchDataRes = 432;

/// OFDM parameter set. Only the N = 256 SSB path is supported.
struct Numerology {
    double scs_hz = 30e3;
    int fft_size = 256;
    int cp_len_normal = 18;
    int cp_len_first = 20;  // symbol at a half-subframe boundary

    /// NR numerology at N = 256 for 15 or 30 kHz subcarrier spacing.
    static Numerology nr(double scs_hz = 30e3);

    double sample_rate_hz() const { return scs_hz * fft_size; }
    int symbol_length() const { return fft_size + cp_len_normal; }
    /// Four SSB symbols, all with normal CP.
    int ssb_length() const { return kSsbSymbols * symbol_length(); }
    std::size_t samples_in(double seconds) const;
    void validate() const;
};

/// Physical cell identity N_ID^cell = 3 m1 + m2.
class CellIdentity {
public:
    CellIdentity(int m1, int m2);
    static CellIdentity from_cell_id(int cell_id);

    int m1() const noexcept { return m1_; }
    int m2() const noexcept { return m2_; }
    int cell_id() const noexcept { return 3 * m1_ + m2_; }
    int dmrs_offset() const noexcept { return cell_id() % 4; }

    friend bool operator==(const CellIdentity&, const CellIdentity&) = default;

private:
    int m1_;
    int m2_;
};

using SyncSequence = std::array<double, kSyncSeqLength>;

SyncSequence generate_pss(int m2);
SyncSequence generate_sss(int m1, int m2);

/// Length-31 Gold sequence c(n) of TS 38.211 (Nc = 1600), one bit per entry.
std::vector<std::uint8_t> gold_sequence(std::uint32_t c_init, std::size_t length);

/// DM-RS subcarriers for one SSB symbol (1, 2 or 3), ascending.
std::vector<int> dmrs_subcarriers(int symbol, int v);

/// Ordered pilot positions and their reference values.
struct PilotSet {
    std::vector<int> symbols;
    std::vector<int> subcarriers;
    std::vector<cf64> values;

    std::size_t size() const noexcept { return values.size(); }
    /// Signed FFT bin of each pilot: first_bin + subcarrier.
    std::vector<double> frequency_bins(int first_bin = -kSsbSubcarriers / 2) const;
    /// Sub-set restricted to one SSB symbol.
    PilotSet symbol(int sym) const;
};

/// PBCH DM-RS as in TS 38.211. l_max is the SSB burst-set size (4, 8 or 64).
PilotSet generate_pbch_dmrs(const CellIdentity& cell, int ssb_index, bool half_frame,
                            int l_max = 8);

class ResourceGrid {
public:
    ResourceGrid() = default;
    ResourceGrid(int subcarriers, int symbols);

    int subcarriers() const noexcept { return subcarriers_; }
    int symbols() const noexcept { return symbols_; }
    cf64& at(int symbol, int subcarrier);
    const cf64& at(int symbol, int subcarrier) const;
    std::span<const cf64> symbol_span(int symbol) const;
    std::span<cf64> symbol_span(int symbol);

private:
    int subcarriers_ = 0;
    int symbols_ = 0;
    std::vector<cf64> re_;
};

struct SsbGrid {
    ResourceGrid grid;
    CellIdentity cell;
    int ssb_index = 0;
};

/// Maps PSS, SSS, DM-RS and PBCH data onto the 240 x 4 SSB grid (Table II).
/// Without a payload the 432 PBCH data REs carry deterministic unit-power QPSK
/// seeded from (cell_id, ssb_index).
SsbGrid map_ssb_grid(const CellIdentity& cell, int ssb_index,
                     std::optional<std::span<const cf64>> pbch_payload = std::nullopt,
                     bool half_frame = false, int l_max = 8);

/// Values of `grid` at the positions of `layout`.
std::vector<cf64> gather_pilots(const ResourceGrid& grid, const PilotSet& layout);

/// Subcarrier k of a grid is carried on FFT bin (first_bin + k) mod N. The default
/// centers the 240-subcarrier SSB on DC.
struct GridPlacement {
    int first_bin = -kSsbSubcarriers / 2;
};

/// CP-OFDM modulation: s(k) = N^{-1/2} sum_n c_n e^{j2pi kn/N}, CP prepended to
/// every symbol. Throws std::domain_error when the grid is wider than N.
std::vector<cf64> ofdm_modulate(const ResourceGrid& grid, const Numerology& num,
                                GridPlacement placement = {});

/// Removes the CP and FFTs each symbol. start_index is the first CP sample of
/// symbol 0; a window placed d samples early inside the CP returns subcarrier p
/// rotated by e^{-j2pi p d/N}. Throws std::length_error when samples run out.
ResourceGrid ofdm_demodulate(std::span<const cf64> samples, const Numerology& num,
                             std::ptrdiff_t start_index, int subcarriers = kSsbSubcarriers,
                             int symbols = kSsbSymbols, GridPlacement placement = {});
ResourceGrid ofdm_demodulate(std::span<const cf32> samples, const Numerology& num,
                             std::ptrdiff_t start_index, int subcarriers = kSsbSubcarriers,
                             int symbols = kSsbSymbols, GridPlacement placement = {});

/// First OFDM symbol of each SSB candidate in a half frame, Case C (30 kHz).
std::vector<int> case_c_first_symbols(int l_max);

/// Periodic SSB bursts: the modulated SSB copied to first_offset + i * period.
std::vector<cf64> synthesize_ssb_train(const SsbGrid& ssb, const Numerology& num,
                                       std::size_t total_samples, std::size_t first_offset,
                                       std::size_t period_samples);

}  // namespace nrrange
