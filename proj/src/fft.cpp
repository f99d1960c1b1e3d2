#include "nrrange/fft.hpp"

#include <fftw3.h>

#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

namespace nrrange {

struct Fft::Plan {
    fftw_plan handle = nullptr;
    ~Plan() {
        if (handle) fftw_destroy_plan(handle);
    }
};

Fft::Fft(std::size_t size, FftDirection dir) : size_(size), plan_(std::make_unique<Plan>()) {
    if (size == 0) throw std::domain_error("Fft: size must be positive");
    std::vector<cf64> scratch_in(size), scratch_out(size);
    auto* in = reinterpret_cast<fftw_complex*>(scratch_in.data());
    auto* out = reinterpret_cast<fftw_complex*>(scratch_out.data());
    const int sign = dir == FftDirection::Forward ? FFTW_FORWARD : FFTW_BACKWARD;
    plan_->handle = fftw_plan_dft_1d(static_cast<int>(size), in, out, sign,
                                     FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (!plan_->handle) throw std::runtime_error("Fft: FFTW planner failed");
}

Fft::~Fft() = default;
Fft::Fft(Fft&&) noexcept = default;
Fft& Fft::operator=(Fft&&) noexcept = default;

void Fft::execute(std::span<const cf64> in, std::span<cf64> out) const {
    if (in.size() != size_ || out.size() != size_)
        throw std::length_error("Fft::execute: buffer length does not match plan size");
    // Plans are out-of-place; an aliased call goes through a scratch copy.
    thread_local std::vector<cf64> scratch;
    const cf64* src_data = in.data();
    if (src_data == out.data()) {
        scratch.assign(in.begin(), in.end());
        src_data = scratch.data();
    }
    // FFTW's new-array execute takes non-const input but does not modify it for
    // out-of-place complex transforms.
    auto* src = reinterpret_cast<fftw_complex*>(const_cast<cf64*>(src_data));
    auto* dst = reinterpret_cast<fftw_complex*>(out.data());
    fftw_execute_dft(plan_->handle, src, dst);
}

const Fft& cached_fft(std::size_t size, FftDirection dir) {
    thread_local std::map<std::pair<std::size_t, int>, Fft> cache;
    const auto key = std::make_pair(size, static_cast<int>(dir));
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, Fft(size, dir)).first;
    return it->second;
}

std::size_t fft_friendly_size(std::size_t min_size) {
    if (min_size <= 1) return 1;
    for (std::size_t n = min_size;; ++n) {
        std::size_t m = n;
        for (std::size_t p : {2u, 3u, 5u, 7u})
            while (m % p == 0) m /= p;
        if (m == 1) return n;
    }
}

}  // namespace nrrange
