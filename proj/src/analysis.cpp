#include "nrrange/analysis.hpp"

#include <cmath>
#include <stdexcept>

namespace nrrange {

namespace {

void check_xi(double xi) {
    if (!(xi > 0.0) || xi > 0.5) throw std::domain_error("correlator spacing xi must lie in (0, 0.5]");
}

std::vector<double> grid(double lo, double hi, int points) {
    if (points < 2) throw std::domain_error("table grid needs at least two points");
    std::vector<double> g(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) g[i] = lo + (hi - lo) * i / (points - 1);
    g.back() = hi;
    return g;
}

}  // namespace

double AcfParams::alpha() const {
    return (2.0 * p0 + static_cast<double>(kappa) * (n_p - 1)) / n_fft;
}

double AcfParams::beta() const { return static_cast<double>(kappa) * n_p / n_fft; }

void AcfParams::validate() const {
    if (kappa <= 0 || n_p <= 0 || n_fft <= 0) throw std::domain_error("AcfParams: sizes must be positive");
    if (kappa * n_p > n_fft) throw std::domain_error("AcfParams: pilots exceed the FFT size");
}

double sinc(double x) {
    if (std::abs(x) < 1e-8) return 1.0 - x * x / 6.0;
    return std::sin(x) / x;
}

cf64 ideal_acf_exact(const AcfParams& params, double epsilon) {
    params.validate();
    const double n = params.n_fft;
    const double x = kPi * params.kappa * epsilon / n;
    const double den = std::sin(x);
    double ratio;
    if (std::abs(den) < 1e-12) {
        // x = m pi: sin(Np x)/sin(x) -> Np cos(Np x)/cos(x)
        ratio = params.n_p * std::cos(params.n_p * x) / std::cos(x);
    } else {
        ratio = std::sin(params.n_p * x) / den;
    }
    const double phase = kPi * epsilon * (2.0 * params.p0 + params.kappa * (params.n_p - 1.0)) / n;
    return params.amp / params.n_p * ratio * std::polar(1.0, phase);
}

cf64 ideal_acf_approx(const AcfParams& params, double epsilon) {
    params.validate();
    return params.amp * sinc(kPi * params.beta() * epsilon) *
           std::polar(1.0, kPi * params.alpha() * epsilon);
}

double s_curve(double epsilon, double xi, double amp, double beta) {
    check_xi(xi);
    const double late = sinc(kPi * beta * (epsilon - xi));
    const double early = sinc(kPi * beta * (epsilon + xi));
    return amp * amp * (late * late - early * early);
}

double s_curve_exact(const AcfParams& params, double epsilon, double xi) {
    check_xi(xi);
    return std::norm(ideal_acf_exact(params, epsilon - xi)) -
           std::norm(ideal_acf_exact(params, epsilon + xi));
}

double discriminator_gain(double xi, double amp, double beta) {
    check_xi(xi);
    const double x = kPi * beta * xi;
    double g;
    if (x < 1e-3) {
        g = x / 3.0 - 4.0 / 45.0 * x * x * x;
    } else {
        g = std::sin(x) * (std::sin(x) - x * std::cos(x)) / (x * x * x);
    }
    return 4.0 * kPi * beta * amp * amp * g;
}

double acf_first_null_samples(const AcfParams& params) {
    params.validate();
    return static_cast<double>(params.n_fft) / (params.kappa * params.n_p);
}

std::vector<AcfRow> acf_table(const AcfParams& params, double lo, double hi, int points) {
    std::vector<AcfRow> rows;
    for (double e : grid(lo, hi, points))
        rows.push_back({e, std::abs(ideal_acf_exact(params, e)), std::abs(ideal_acf_approx(params, e))});
    return rows;
}

std::vector<SCurveRow> s_curve_table(const AcfParams& params, double xi, double lo, double hi,
                                     int points) {
    const double kd = discriminator_gain(xi, params.amp, params.beta());
    std::vector<SCurveRow> rows;
    for (double e : grid(lo, hi, points)) {
        const double s = s_curve(e, xi, params.amp, params.beta());
        rows.push_back({e, s, s_curve_exact(params, e, xi), s / kd});
    }
    return rows;
}

std::vector<GainRow> gain_table(const AcfParams& params, double xi_lo, double xi_hi, int points) {
    std::vector<GainRow> rows;
    for (double xi : grid(xi_lo, xi_hi, points))
        rows.push_back({xi, discriminator_gain(xi, params.amp, params.beta())});
    return rows;
}

}  // namespace nrrange
