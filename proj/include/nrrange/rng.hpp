#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "nrrange/common.hpp"

namespace nrrange {

/// splitmix64 finalizer; derives independent stream seeds from a master seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    std::uint64_t z = master + 0x9E3779B97F4A7C15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// Circularly-symmetric complex Gaussian source.
///
/// Box-Muller over raw mt19937_64 output rather than std::normal_distribution,
/// whose algorithm is implementation-defined; seeded runs stay bit-identical
/// across standard libraries.
class ComplexGaussian {
public:
    explicit ComplexGaussian(std::uint64_t seed) : engine_(seed) {}

    /// One draw with E|n|^2 = variance.
    cf64 operator()(double variance) {
        const double u1 = uniform_open();
        const double u2 = uniform_open();
        const double r = std::sqrt(-std::log(u1) * variance);
        return {r * std::cos(kTwoPi * u2), r * std::sin(kTwoPi * u2)};
    }

    /// Uniform in (0, 1].
    double uniform_open() {
        return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

}  // namespace nrrange
