#pragma once

#include "nashbsde/types.hpp"

#include <functional>
#include <iosfwd>
#include <vector>

namespace nashbsde {

/// Transition density (s0, x0) -> (s, x).
using DensityFn = std::function<double(double s, const Vector& x)>;

/// m-dimensional Gaussian transition density of dX = sigma dB, covariance
/// sigma sigma^T (s - t0). Throws DomainError for s <= t0.
double gaussian_density(double t0, const Vector& x0, double s, const Vector& x, const Matrix& sigma);

/// Law of X_s = x exp(B_s - B_t - (s - t)/2) written in the log variable,
///   (2 pi (s-t))^{-1/2} exp(-(ln(y/x) + (s-t)/2)^2 / (2 (s-t))),  y > 0.
/// This is the density of ln y, not of y: it carries no 1/y factor and its
/// integral dy over (0, inf) equals x. Throws DomainError for x <= 0 or s <= t.
double lognormal_density(double t, double x, double s, double y);

/// Standard lognormal density of y (the form above divided by y).
double lognormal_density_jacobian(double t, double x, double s, double y);

struct LognormalNormalization {
    double x = 1.0;
    double integral_log_form = 0.0;
    double integral_jacobian_form = 0.0;
    bool log_form_is_probability = false;
    bool jacobian_form_is_probability = false;
};

/// Integrates both lognormal forms over y in (0, inf) for the given start x
/// (s - t = 1). A form counts as a probability density when within 1e-4 of 1.
LognormalNormalization lognormal_normalization(double x);

struct AronsonParams {
    double rho1 = 0.0;
    double rho2 = 0.0;
    double lambda_small = 0.0;
    double lambda_big = 0.0;
    int dim_m = 1;

    void validate() const;
};

struct AronsonPoint {
    double s = 0.0;
    Vector x;
    double density = 0.0;
    double lower = 0.0;
    double upper = 0.0;
};

struct AronsonReport {
    double max_lower_violation = 0.0;
    double max_upper_violation = 0.0;
    bool pass = false;
    std::vector<AronsonPoint> points;
};

/// Sandwich
///   rho1 (s-t0)^{-m/2} exp(-Lambda |x-x0|^2/(s-t0)) <= rho <= rho2 (s-t0)^{-m/2} exp(-lambda |x-x0|^2/(s-t0))
/// on the tensor grid of the given times and per-axis offsets from x0.
/// Pass iff both violations <= 1e-12.
AronsonReport check_aronson(const AronsonParams& params, const DensityFn& density, double t0,
                            const Vector& x0, const std::vector<double>& times,
                            const std::vector<double>& offsets);

void write_aronson_csv(std::ostream& out, const AronsonReport& report);

struct DominationReport {
    double value = 0.0;
    double refined_value = 0.0;
    double relative_change = 0.0;
    int levels = 0;
    bool finite = false;
    bool stable = false;
    bool pass = false;
};

/// Integrates (rho_num / rho_den)^q rho_den over [s_lo, T] x [lo, hi]^m by a
/// tensor trapezoid rule, doubling the resolution until successive
/// Richardson-extrapolated values agree within 1% (at most max_levels levels).
/// Throws NumericalError when rho_den vanishes at a node.
DominationReport domination_check(const DensityFn& num, const DensityFn& den, double s_lo,
                                  double horizon, double lo, double hi, int dim_m, double q,
                                  int base_points = 8, int max_levels = 6);

}  // namespace nashbsde
