#pragma once

// Closed-form DM-RS autocorrelation, EMLP S-curve and discriminator gain.
// Delays are in samples; pilots sit every kappa subcarriers from bin p0.

#include <vector>

#include "nrrange/common.hpp"

namespace nrrange {

struct AcfParams {
    int kappa = 4;
    int n_p = 60;
    int n_fft = 256;
    int p0 = 2;
    double amp = 1.0;  // A = E[c c*]

    /// (2 p0 + kappa (n_p - 1)) / N
    double alpha() const;
    /// kappa n_p / N
    double beta() const;
    void validate() const;
};

/// R(eps) = (A/Np) e^{j pi eps [2p0 + kappa(Np-1)]/N} sin(pi kappa Np eps/N) / sin(pi kappa eps/N)
cf64 ideal_acf_exact(const AcfParams& params, double epsilon);

/// R(eps) ~= A e^{j pi alpha eps} sinc(pi beta eps)
cf64 ideal_acf_approx(const AcfParams& params, double epsilon);

/// sin(x)/x with the removable point handled.
double sinc(double x);

/// A^2 [sinc^2(pi beta (eps - xi)) - sinc^2(pi beta (eps + xi))]. Positive for a
/// late true path (eps > 0). Throws std::domain_error unless 0 < xi <= 0.5.
double s_curve(double epsilon, double xi, double amp = 1.0, double beta = 0.9375);

/// Same discriminator built on the exact Dirichlet ACF: |R(eps - xi)|^2 - |R(eps + xi)|^2.
double s_curve_exact(const AcfParams& params, double epsilon, double xi);

/// dS/deps at eps = 0: 4 pi beta A^2 sin x (sin x - x cos x) / x^3 with x = pi beta xi,
/// evaluated by series below x = 1e-3.
double discriminator_gain(double xi, double amp = 1.0, double beta = 0.9375);

// Chip rates for the mainlobe comparison against GNSS ranging codes.
inline constexpr double kGpsCaChipRate = 1.023e6;
inline constexpr double kGalileoE1ChipRate = 1.023e6;
inline constexpr double kBdsB1iChipRate = 2.046e6;

/// First null of the DM-RS ACF in samples: N / (kappa Np).
double acf_first_null_samples(const AcfParams& params);

struct AcfRow {
    double epsilon;
    double abs_exact;
    double abs_approx;
};
struct SCurveRow {
    double epsilon;
    double s;
    double s_exact;
    double s_normalized;  // s / k_d
};
struct GainRow {
    double xi;
    double k_d;
};

/// Uniform grids from lo to hi inclusive with `points` samples.
std::vector<AcfRow> acf_table(const AcfParams& params, double lo, double hi, int points);
std::vector<SCurveRow> s_curve_table(const AcfParams& params, double xi, double lo, double hi,
                                     int points);
std::vector<GainRow> gain_table(const AcfParams& params, double xi_lo, double xi_hi, int points);

}  // namespace nrrange
