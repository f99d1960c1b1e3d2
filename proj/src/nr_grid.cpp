#include "nrrange/nr_grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "nrrange/fft.hpp"

namespace nrrange {

namespace {

int mod(int a, int n) {
    const int r = a % n;
    return r < 0 ? r + n : r;
}

// Seven-stage LFSR of the sync sequences: x(i+7) = (x(i+tap) + x(i)) mod 2.
std::array<std::uint8_t, kSyncSeqLength> m_sequence(int tap,
                                                    const std::array<std::uint8_t, 7>& init) {
    std::array<std::uint8_t, kSyncSeqLength> x{};
    std::copy(init.begin(), init.end(), x.begin());
    for (int i = 0; i + 7 < kSyncSeqLength; ++i)
        x[i + 7] = static_cast<std::uint8_t>((x[i + tap] + x[i]) % 2);
    return x;
}

cf64 qpsk(std::uint8_t b0, std::uint8_t b1) {
    constexpr double a = 0.70710678118654752440;
    return {a * (1.0 - 2.0 * b0), a * (1.0 - 2.0 * b1)};
}

template <typename Sample>
ResourceGrid demodulate_impl(std::span<const Sample> samples, const Numerology& num,
                             std::ptrdiff_t start_index, int subcarriers, int symbols,
                             GridPlacement placement) {
    const int n = num.fft_size;
    if (subcarriers > n) throw std::domain_error("ofdm_demodulate: grid wider than fft_size");
    ResourceGrid grid(subcarriers, symbols);
    std::vector<cf64> time(n), freq(n);
    const Fft& fft = cached_fft(n, FftDirection::Forward);
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    for (int s = 0; s < symbols; ++s) {
        const std::ptrdiff_t window =
            start_index + static_cast<std::ptrdiff_t>(s) * num.symbol_length() + num.cp_len_normal;
        if (window < 0 || window + n > static_cast<std::ptrdiff_t>(samples.size()))
            throw std::length_error("ofdm_demodulate: not enough samples for symbol " +
                                    std::to_string(s));
        for (int k = 0; k < n; ++k) time[k] = cf64(samples[window + k]);
        fft.execute(time, freq);
        for (int k = 0; k < subcarriers; ++k)
            grid.at(s, k) = freq[mod(placement.first_bin + k, n)] * scale;
    }
    return grid;
}

}  // namespace

Numerology Numerology::nr(double scs_hz) {
    Numerology num;
    num.scs_hz = scs_hz;
    num.validate();
    return num;
}

std::size_t Numerology::samples_in(double seconds) const {
    return static_cast<std::size_t>(std::llround(seconds * sample_rate_hz()));
}

void Numerology::validate() const {
    if (scs_hz != 15e3 && scs_hz != 30e3)
        throw std::domain_error("Numerology: subcarrier spacing must be 15 or 30 kHz");
    if (fft_size != 256) throw std::domain_error("Numerology: SSB path requires fft_size 256");
    if (!(0 < cp_len_normal && cp_len_normal <= cp_len_first && cp_len_first < fft_size))
        throw std::domain_error("Numerology: inconsistent CP lengths");
}

CellIdentity::CellIdentity(int m1, int m2) : m1_(m1), m2_(m2) {
    if (m1 < 0 || m1 > 335) throw std::domain_error("CellIdentity: m1 outside 0..335");
    if (m2 < 0 || m2 > 2) throw std::domain_error("CellIdentity: m2 outside 0..2");
}

CellIdentity CellIdentity::from_cell_id(int cell_id) {
    if (cell_id < 0 || cell_id > 1007) throw std::domain_error("CellIdentity: id outside 0..1007");
    return CellIdentity(cell_id / 3, cell_id % 3);
}

SyncSequence generate_pss(int m2) {
    if (m2 < 0 || m2 > 2) throw std::domain_error("generate_pss: m2 outside 0..2");
    // [x(6) .. x(0)] = [1 1 1 0 1 1 0]
    const auto x = m_sequence(4, {0, 1, 1, 0, 1, 1, 1});
    SyncSequence d{};
    for (int n = 0; n < kSyncSeqLength; ++n) d[n] = 1.0 - 2.0 * x[(n + 43 * m2) % kSyncSeqLength];
    return d;
}

SyncSequence generate_sss(int m1, int m2) {
    if (m1 < 0 || m1 > 335) throw std::domain_error("generate_sss: m1 outside 0..335");
    if (m2 < 0 || m2 > 2) throw std::domain_error("generate_sss: m2 outside 0..2");
    const auto x0 = m_sequence(4, {1, 0, 0, 0, 0, 0, 0});
    const auto x1 = m_sequence(1, {1, 0, 0, 0, 0, 0, 0});
    const int shift0 = 15 * (m1 / 112) + 5 * m2;
    const int shift1 = m1 % 112;
    SyncSequence d{};
    for (int n = 0; n < kSyncSeqLength; ++n)
        d[n] = (1.0 - 2.0 * x0[(n + shift0) % kSyncSeqLength]) *
               (1.0 - 2.0 * x1[(n + shift1) % kSyncSeqLength]);
    return d;
}

std::vector<std::uint8_t> gold_sequence(std::uint32_t c_init, std::size_t length) {
    constexpr std::size_t nc = 1600;
    const std::size_t total = length + nc + 31;
    std::vector<std::uint8_t> x1(total, 0), x2(total, 0);
    x1[0] = 1;
    for (int i = 0; i < 31; ++i) x2[i] = (c_init >> i) & 1u;
    for (std::size_t n = 0; n + 31 < total; ++n) {
        x1[n + 31] = (x1[n + 3] + x1[n]) % 2;
        x2[n + 31] = (x2[n + 3] + x2[n + 2] + x2[n + 1] + x2[n]) % 2;
    }
    std::vector<std::uint8_t> c(length);
    for (std::size_t n = 0; n < length; ++n) c[n] = (x1[n + nc] + x2[n + nc]) % 2;
    return c;
}

std::vector<int> dmrs_subcarriers(int symbol, int v) {
    if (v < 0 || v > 3) throw std::domain_error("dmrs_subcarriers: offset outside 0..3");
    std::vector<int> k;
    if (symbol == 1 || symbol == 3) {
        for (int i = 0; i < 60; ++i) k.push_back(4 * i + v);
    } else if (symbol == 2) {
        for (int i = 0; i < 12; ++i) k.push_back(4 * i + v);
        for (int i = 0; i < 12; ++i) k.push_back(192 + 4 * i + v);
    } else {
        throw std::domain_error("dmrs_subcarriers: DM-RS lives on SSB symbols 1..3");
    }
    return k;
}

std::vector<double> PilotSet::frequency_bins(int first_bin) const {
    std::vector<double> bins(subcarriers.size());
    std::transform(subcarriers.begin(), subcarriers.end(), bins.begin(),
                   [first_bin](int k) { return static_cast<double>(first_bin + k); });
    return bins;
}

PilotSet PilotSet::symbol(int sym) const {
    PilotSet out;
    for (std::size_t i = 0; i < size(); ++i) {
        if (symbols[i] != sym) continue;
        out.symbols.push_back(symbols[i]);
        out.subcarriers.push_back(subcarriers[i]);
        out.values.push_back(values[i]);
    }
    return out;
}

PilotSet generate_pbch_dmrs(const CellIdentity& cell, int ssb_index, bool half_frame, int l_max) {
    if (l_max != 4 && l_max != 8 && l_max != 64)
        throw std::domain_error("generate_pbch_dmrs: l_max must be 4, 8 or 64");
    if (ssb_index < 0 || ssb_index >= l_max)
        throw std::domain_error("generate_pbch_dmrs: ssb_index outside the burst set");

    const int i_bar = l_max == 4 ? (ssb_index & 3) + 4 * (half_frame ? 1 : 0) : (ssb_index & 7);
    const int id = cell.cell_id();
    const auto c_init = static_cast<std::uint32_t>((1u << 11) * (i_bar + 1) * (id / 4 + 1) +
                                                   (1u << 6) * (i_bar + 1) + (id % 4));
    const auto c = gold_sequence(c_init, 2 * kDmrsPerSsb);

    PilotSet pilots;
    const int v = cell.dmrs_offset();
    std::size_t m = 0;
    for (int sym = 1; sym <= 3; ++sym) {
        for (int k : dmrs_subcarriers(sym, v)) {
            pilots.symbols.push_back(sym);
            pilots.subcarriers.push_back(k);
            pilots.values.push_back(qpsk(c[2 * m], c[2 * m + 1]));
            ++m;
        }
    }
    return pilots;
}

ResourceGrid::ResourceGrid(int subcarriers, int symbols)
    : subcarriers_(subcarriers), symbols_(symbols) {
    if (subcarriers <= 0 || symbols <= 0)
        throw std::domain_error("ResourceGrid: dimensions must be positive");
    re_.assign(static_cast<std::size_t>(subcarriers) * symbols, cf64{});
}

cf64& ResourceGrid::at(int symbol, int subcarrier) {
    return re_.at(static_cast<std::size_t>(symbol) * subcarriers_ + subcarrier);
}

const cf64& ResourceGrid::at(int symbol, int subcarrier) const {
    return re_.at(static_cast<std::size_t>(symbol) * subcarriers_ + subcarrier);
}

std::span<const cf64> ResourceGrid::symbol_span(int symbol) const {
    return std::span<const cf64>(re_).subspan(static_cast<std::size_t>(symbol) * subcarriers_,
                                              subcarriers_);
}

std::span<cf64> ResourceGrid::symbol_span(int symbol) {
    return std::span<cf64>(re_).subspan(static_cast<std::size_t>(symbol) * subcarriers_,
                                        subcarriers_);
}

SsbGrid map_ssb_grid(const CellIdentity& cell, int ssb_index,
                     std::optional<std::span<const cf64>> pbch_payload, bool half_frame,
                     int l_max) {
    SsbGrid ssb{ResourceGrid(kSsbSubcarriers, kSsbSymbols), cell, ssb_index};
    ResourceGrid& g = ssb.grid;

    const auto pss = generate_pss(cell.m2());
    const auto sss = generate_sss(cell.m1(), cell.m2());
    for (int n = 0; n < kSyncSeqLength; ++n) {
        g.at(0, kSyncFirstSubcarrier + n) = pss[n];
        g.at(2, kSyncFirstSubcarrier + n) = sss[n];
    }

    const PilotSet dmrs = generate_pbch_dmrs(cell, ssb_index, half_frame, l_max);
    std::vector<bool> is_pilot(static_cast<std::size_t>(kSsbSubcarriers) * kSsbSymbols, false);
    for (std::size_t i = 0; i < dmrs.size(); ++i) {
        g.at(dmrs.symbols[i], dmrs.subcarriers[i]) = dmrs.values[i];
        is_pilot[dmrs.symbols[i] * kSsbSubcarriers + dmrs.subcarriers[i]] = true;
    }

    std::vector<cf64> data;
    if (pbch_payload) {
        if (pbch_payload->size() != static_cast<std::size_t>(kPbchDataRes))
            throw std::length_error("map_ssb_grid: PBCH payload must hold 432 symbols");
        data.assign(pbch_payload->begin(), pbch_payload->end());
    } else {
        const auto seed = static_cast<std::uint32_t>(((ssb_index & 63) + 1) << 10 | cell.cell_id());
        const auto bits = gold_sequence(seed, 2 * kPbchDataRes);
        for (int i = 0; i < kPbchDataRes; ++i) data.push_back(qpsk(bits[2 * i], bits[2 * i + 1]));
    }

    std::size_t next = 0;
    for (int sym = 1; sym <= 3; ++sym) {
        for (int k = 0; k < kSsbSubcarriers; ++k) {
            if (sym == 2 && k >= 48 && k < 192) continue;
            if (is_pilot[sym * kSsbSubcarriers + k]) continue;
            g.at(sym, k) = data[next++];
        }
    }
    return ssb;
}

std::vector<cf64> gather_pilots(const ResourceGrid& grid, const PilotSet& layout) {
    std::vector<cf64> out(layout.size());
    for (std::size_t i = 0; i < layout.size(); ++i)
        out[i] = grid.at(layout.symbols[i], layout.subcarriers[i]);
    return out;
}

std::vector<cf64> ofdm_modulate(const ResourceGrid& grid, const Numerology& num,
                                GridPlacement placement) {
    const int n = num.fft_size;
    if (grid.subcarriers() > n) throw std::domain_error("ofdm_modulate: grid wider than fft_size");
    const int cp = num.cp_len_normal;
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    const Fft& ifft = cached_fft(n, FftDirection::Inverse);

    std::vector<cf64> out;
    out.reserve(static_cast<std::size_t>(grid.symbols()) * (n + cp));
    std::vector<cf64> freq(n), time(n);
    for (int s = 0; s < grid.symbols(); ++s) {
        std::fill(freq.begin(), freq.end(), cf64{});
        for (int k = 0; k < grid.subcarriers(); ++k)
            freq[mod(placement.first_bin + k, n)] = grid.at(s, k);
        ifft.execute(freq, time);
        for (auto& x : time) x *= scale;
        out.insert(out.end(), time.end() - cp, time.end());
        out.insert(out.end(), time.begin(), time.end());
    }
    return out;
}

ResourceGrid ofdm_demodulate(std::span<const cf64> samples, const Numerology& num,
                             std::ptrdiff_t start_index, int subcarriers, int symbols,
                             GridPlacement placement) {
    return demodulate_impl(samples, num, start_index, subcarriers, symbols, placement);
}

ResourceGrid ofdm_demodulate(std::span<const cf32> samples, const Numerology& num,
                             std::ptrdiff_t start_index, int subcarriers, int symbols,
                             GridPlacement placement) {
    return demodulate_impl(samples, num, start_index, subcarriers, symbols, placement);
}

std::vector<int> case_c_first_symbols(int l_max) {
    if (l_max != 4 && l_max != 8) throw std::domain_error("case_c_first_symbols: l_max 4 or 8");
    std::vector<int> starts;
    for (int n = 0; n < l_max / 2; ++n) {
        starts.push_back(2 + 14 * n);
        starts.push_back(8 + 14 * n);
    }
    return starts;
}

std::vector<cf64> synthesize_ssb_train(const SsbGrid& ssb, const Numerology& num,
                                       std::size_t total_samples, std::size_t first_offset,
                                       std::size_t period_samples) {
    if (period_samples == 0) throw std::domain_error("synthesize_ssb_train: zero period");
    const auto burst = ofdm_modulate(ssb.grid, num);
    std::vector<cf64> out(total_samples);
    for (std::size_t at = first_offset; at + burst.size() <= total_samples; at += period_samples)
        std::copy(burst.begin(), burst.end(), out.begin() + static_cast<std::ptrdiff_t>(at));
    return out;
}

}  // namespace nrrange
