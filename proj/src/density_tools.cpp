#include "nashbsde/density_tools.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>

namespace nashbsde {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Composite Simpson on [a, b] with n (even) panels.
template <class F>
double simpson(F&& f, double a, double b, int n) {
    const double h = (b - a) / n;
    double acc = f(a) + f(b);
    for (int k = 1; k < n; ++k) acc += (k % 2 ? 4.0 : 2.0) * f(a + k * h);
    return acc * h / 3.0;
}

// Tensor trapezoid over [s_lo, s_hi] x [lo, hi]^m with n intervals per axis.
double tensor_trapezoid(const DensityFn& num, const DensityFn& den, double s_lo, double s_hi,
                        double lo, double hi, int m, double q, int n) {
    const double hs = (s_hi - s_lo) / n;
    const double hx = (hi - lo) / n;
    const auto weight = [n](int k) { return (k == 0 || k == n) ? 0.5 : 1.0; };
    std::vector<int> idx(static_cast<std::size_t>(m), 0);
    double total = 0.0;
    Vector x(m);
    for (int ks = 0; ks <= n; ++ks) {
        const double s = s_lo + ks * hs;
        std::fill(idx.begin(), idx.end(), 0);
        double slab = 0.0;
        for (;;) {
            double w = weight(ks);
            for (int j = 0; j < m; ++j) {
                x[j] = lo + idx[static_cast<std::size_t>(j)] * hx;
                w *= weight(idx[static_cast<std::size_t>(j)]);
            }
            const double d = den(s, x);
            if (!(d > 0.0)) {
                throw NumericalError("denominator density vanishes at s=" + std::to_string(s) +
                                     "; density ratio undefined");
            }
            slab += w * std::pow(num(s, x) / d, q) * d;
            int j = 0;
            while (j < m && ++idx[static_cast<std::size_t>(j)] > n) idx[static_cast<std::size_t>(j++)] = 0;
            if (j == m) break;
        }
        total += slab;
    }
    return total * hs * std::pow(hx, m);
}

}  // namespace

double gaussian_density(double t0, const Vector& x0, double s, const Vector& x, const Matrix& sigma) {
    if (!(s > t0)) throw DomainError("gaussian_density requires s > t0");
    const int m = static_cast<int>(x0.size());
    if (x.size() != m || sigma.rows() != m || sigma.cols() != m) {
        throw DomainError("gaussian_density: dimension mismatch");
    }
    const Matrix cov = sigma * sigma.transpose();
    const Eigen::LLT<Matrix> llt(cov);
    if (llt.info() != Eigen::Success) throw DomainError("gaussian_density: sigma sigma^T not positive definite");
    const Vector diff = x - x0;
    const Vector solved = llt.solve(diff);
    const double quad = diff.dot(solved);
    const double det = llt.matrixLLT().diagonal().prod();
    const double ds = s - t0;
    const double norm = std::pow(kTwoPi, -0.5 * m) / det;
    return norm * std::pow(ds, -0.5 * m) * std::exp(-0.5 * quad / ds);
}

double lognormal_density(double t, double x, double s, double y) {
    if (!(x > 0.0)) throw DomainError("lognormal_density requires x > 0");
    if (!(s > t)) throw DomainError("lognormal_density requires s > t");
    if (!(y > 0.0)) return 0.0;
    const double ds = s - t;
    const double e = std::log(y / x) + 0.5 * ds;
    return std::exp(-e * e / (2.0 * ds)) / std::sqrt(kTwoPi * ds);
}

double lognormal_density_jacobian(double t, double x, double s, double y) {
    const double p = lognormal_density(t, x, s, y);
    return y > 0.0 ? p / y : 0.0;
}

LognormalNormalization lognormal_normalization(double x) {
    // Substitute y = exp(u); u covers the mean of ln y +- 12 standard deviations.
    const double center = std::log(x) - 0.5;
    const auto integral = [&](auto&& density) {
        return simpson([&](double u) {
            const double y = std::exp(u);
            return density(0.0, x, 1.0, y) * y;
        }, center - 12.0, center + 12.0, 4000);
    };
    LognormalNormalization r;
    r.x = x;
    r.integral_log_form = integral(lognormal_density);
    r.integral_jacobian_form = integral(lognormal_density_jacobian);
    r.log_form_is_probability = std::abs(r.integral_log_form - 1.0) <= 1e-4;
    r.jacobian_form_is_probability = std::abs(r.integral_jacobian_form - 1.0) <= 1e-4;
    return r;
}

void AronsonParams::validate() const {
    if (!(rho1 > 0.0 && rho2 > 0.0 && lambda_small > 0.0 && lambda_big > 0.0)) {
        throw ConfigError("aronson constants must be positive");
    }
    if (rho1 > rho2) throw ConfigError("aronson: rho1 must not exceed rho2");
    if (lambda_small > lambda_big) throw ConfigError("aronson: lambda must not exceed Lambda");
    if (dim_m < 1 || dim_m > kMaxDim) throw ConfigError("aronson: dim_m out of range");
}

AronsonReport check_aronson(const AronsonParams& params, const DensityFn& density, double t0,
                            const Vector& x0, const std::vector<double>& times,
                            const std::vector<double>& offsets) {
    params.validate();
    const int m = params.dim_m;
    if (x0.size() != m) throw DomainError("check_aronson: x0 dimension mismatch");
    if (offsets.empty() || times.empty()) throw DomainError("check_aronson: empty grid");
    AronsonReport report;
    std::vector<std::size_t> idx(static_cast<std::size_t>(m), 0);
    for (double s : times) {
        if (!(s > t0)) throw DomainError("check_aronson: grid times must exceed t0");
        const double ds = s - t0;
        std::fill(idx.begin(), idx.end(), 0);
        for (;;) {
            Vector x(m);
            for (int j = 0; j < m; ++j) x[j] = x0[j] + offsets[idx[static_cast<std::size_t>(j)]];
            const double r2 = (x - x0).squaredNorm();
            const double scale = std::pow(ds, -0.5 * m);
            AronsonPoint pt{s, x, density(s, x), params.rho1 * scale * std::exp(-params.lambda_big * r2 / ds),
                            params.rho2 * scale * std::exp(-params.lambda_small * r2 / ds)};
            report.max_lower_violation = std::max(report.max_lower_violation, pt.lower - pt.density);
            report.max_upper_violation = std::max(report.max_upper_violation, pt.density - pt.upper);
            report.points.push_back(pt);
            int j = 0;
            while (j < m && ++idx[static_cast<std::size_t>(j)] == offsets.size()) idx[static_cast<std::size_t>(j++)] = 0;
            if (j == m) break;
        }
    }
    report.pass = report.max_lower_violation <= 1e-12 && report.max_upper_violation <= 1e-12;
    return report;
}

void write_aronson_csv(std::ostream& out, const AronsonReport& report) {
    out << "s";
    const int m = report.points.empty() ? 0 : static_cast<int>(report.points.front().x.size());
    for (int j = 1; j <= m; ++j) out << ",x_" << j;
    out << ",density,lower,upper,lower_violation,upper_violation\n";
    char buf[40];
    const auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out << buf;
    };
    for (const auto& p : report.points) {
        put(p.s);
        for (int j = 0; j < m; ++j) {
            out << ',';
            put(p.x[j]);
        }
        for (double v : {p.density, p.lower, p.upper, std::max(0.0, p.lower - p.density),
                         std::max(0.0, p.density - p.upper)}) {
            out << ',';
            put(v);
        }
        out << '\n';
    }
}

DominationReport domination_check(const DensityFn& num, const DensityFn& den, double s_lo,
                                  double horizon, double lo, double hi, int dim_m, double q,
                                  int base_points, int max_levels) {
    if (!(s_lo < horizon)) throw DomainError("domination_check: empty time interval");
    if (!(lo < hi)) throw DomainError("domination_check: empty space interval");
    if (!(q > 1.0)) throw DomainError("domination_check: q must exceed 1");
    if (dim_m < 1 || dim_m > kMaxDim) throw DomainError("domination_check: dim_m out of range");
    if (base_points < 2 || max_levels < 3) throw DomainError("domination_check: too few levels");

    constexpr double kMaxNodes = 2e7;
    DominationReport report;
    std::vector<double> trap;
    std::vector<double> rich;
    int n = base_points;
    for (int level = 0; level < max_levels; ++level, n *= 2) {
        if (std::pow(n + 1.0, dim_m + 1) > kMaxNodes) break;
        trap.push_back(tensor_trapezoid(num, den, s_lo, horizon, lo, hi, dim_m, q, n));
        report.levels = level + 1;
        if (trap.size() >= 2) {
            rich.push_back((4.0 * trap.back() - trap[trap.size() - 2]) / 3.0);
        }
        if (rich.size() >= 2) {
            const double a = rich[rich.size() - 2];
            const double b = rich.back();
            report.value = a;
            report.refined_value = b;
            report.relative_change = std::abs(b - a) / std::max(std::abs(b), 1e-300);
            if (report.relative_change <= 0.01) break;
        }
    }
    if (rich.size() < 2) throw NumericalError("domination_check: grid too large for two refinements");
    report.finite = std::isfinite(report.refined_value);
    report.stable = report.finite && report.relative_change <= 0.01;
    report.pass = report.finite && report.stable;
    return report;
}

}  // namespace nashbsde
