#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spl/weights.hpp"

namespace spl {

struct CountingSample {
    double lambda = 0.0;
    int n_plus = 0;
    int n_minus = 0;
    int n = 0;
};

struct PowerFit {
    double theta_hat = 0.0;
    double coeff_hat = 0.0;  // n(lambda) ~ coeff * lambda^{-theta}
    double slope = 0.0;      // of log s_j against log j, or of log n against log lambda
    double intercept = 0.0;
    double r2 = 0.0;
    int lo = 0;  // 1-based inclusive window on the index j
    int hi = 0;
    int n_usable = 0;
    double period = 0.0;  // averaging period in log lambda, period-averaged fits only
};

struct FitOptions {
    double floor_rel = 1e-11;
    double tail_factor = 100.0;  // drop values within this factor of the floor
    double head_frac = 0.1;      // drop the top fraction of the resolved indices
    int resolution_cap = 0;      // 0 = none; otherwise at most this many indices are resolved
    int min_usable = 30;
    int lo_override = 0;
    int hi_override = 0;
    bool period_average = false;
    int samples = 400;  // counting samples across the window for period-averaged fits
};

struct SpectrumReport {
    Vec positive;  // descending
    Vec negative;  // magnitudes, descending
    Vec singular;  // descending
    std::vector<CountingSample> counting;
    PowerFit fit;
    bool fitted = false;
    std::string fit_error;
    double floor = 0.0;
};

// number of entries of v strictly above lambda
int count_above(const Vec& v, double lambda);

// eigenvalues for symmetric K, singular values otherwise; the fit runs on the singular values
SpectrumReport spectrum(const Mat& K, const FitOptions& opt = {}, int samples = 200);

// values: descending positive reals; slope of log s_j against log j is -1/theta
PowerFit fit_power_law(const Vec& values, const FitOptions& opt = {});
// counting samples: slope of log n against log lambda is -theta
PowerFit fit_counting(const std::vector<CountingSample>& samples);

// autocorrelation period of an evenly sampled series: first maximum after the first zero crossing;
// returns 0 if there is no usable oscillation
double detect_period(const std::vector<double>& y, double dx);

struct LogPeriodicReport {
    std::vector<double> log_lambda;
    std::vector<double> scaled;    // n(lambda) lambda^theta
    std::vector<double> residual;  // scaled - mean
    double theta = 0.0;
    double mean = 0.0;
    double max_min_ratio = 1.0;
    double period = 0.0;
    bool period_found = false;
};

LogPeriodicReport log_periodic_residual(const std::vector<CountingSample>& samples, double theta);

// counting samples of a descending spectrum on a log-spaced grid over [lam_lo, lam_hi]
std::vector<CountingSample> counting_samples(const Vec& values, double lam_lo, double lam_hi, int count);

struct KyFanReport {
    long checks = 0;
    long additive_violations = 0;
    long multiplicative_violations = 0;
    long tight = 0;  // additive cases holding with equality
    long violations() const { return additive_violations + multiplicative_violations; }
};

// both inequalities over all pairs from the lambda grids
KyFanReport kyfan_check(const Mat& K1, const Mat& K2, const std::vector<double>& lam1, const std::vector<double>& lam2);
// random symmetric pairs with lambda grids at spectral midpoints
KyFanReport kyfan_suite(int trials, int size, std::uint64_t seed);

// r(xi') = (2 pi)^{-1} int a(xi' + y nu)^{-2} dy by Gauss-Kronrod quadrature
double weyl_r(const Mat& a, const Vec& tangent, const Vec& normal);
double weyl_r_closed_form(const Mat& a, const Vec& tangent, const Vec& normal);
// omega = (d (2 pi)^d)^{-1} int_{S} r^theta dsigma for N = 2 (two points) or N = 3 (circle)
double weyl_density(const Mat& a, const Vec& normal, double theta);

struct WeylPrediction {
    Vec omega;
    double theta = 0.0;
    double coefficient_plus = 0.0;  // without the (2 pi)^{-d} prefactor
    double coefficient_minus = 0.0;
    double prefactor = 1.0;  // (2 pi)^{-d}
    double with_prefactor_plus() const { return prefactor * coefficient_plus; }
    double with_prefactor_minus() const { return prefactor * coefficient_minus; }
};

// constant coefficients a and a constant unit normal along the measure
WeylPrediction weyl_prediction(const DiscreteMeasure& m, const Perturbation& p1, const Perturbation& p2, double theta,
                               const Mat& a, const Vec& normal);

}  // namespace spl
