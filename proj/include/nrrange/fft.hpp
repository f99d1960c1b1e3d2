#pragma once

#include <cstddef>
#include <memory>
#include <span>

#include "nrrange/common.hpp"

namespace nrrange {

enum class FftDirection { Forward, Inverse };

/// Unnormalized complex DFT of a fixed length backed by an FFTW plan.
///
/// Forward computes X(n) = sum_k x(k) e^{-j2pi kn/L}; Inverse uses e^{+j...}.
/// Plans are created with FFTW_ESTIMATE so repeated runs are bit-identical.
/// Input and output may alias.
class Fft {
public:
    Fft(std::size_t size, FftDirection dir);
    ~Fft();
    Fft(Fft&&) noexcept;
    Fft& operator=(Fft&&) noexcept;
    Fft(const Fft&) = delete;
    Fft& operator=(const Fft&) = delete;

    std::size_t size() const noexcept { return size_; }
    void execute(std::span<const cf64> in, std::span<cf64> out) const;

private:
    struct Plan;
    std::size_t size_;
    std::unique_ptr<Plan> plan_;
};

/// Thread-local plan cache; the reference stays valid for the thread's lifetime.
const Fft& cached_fft(std::size_t size, FftDirection dir);

/// Smallest n >= min_size whose only prime factors are 2, 3, 5 and 7.
std::size_t fft_friendly_size(std::size_t min_size);

}  // namespace nrrange
