#include "nashbsde/mollify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

namespace nashbsde {

namespace {

/// Visits every lattice node y in (h Z)^d with |y - center| < radius, passing
/// the node and its unnormalized kernel weight bump(|y - center|^2 / radius^2).
template <class Visit>
void for_each_lattice_node(const std::vector<double>& center, double radius, double spacing,
                           Visit&& visit) {
    const int d = static_cast<int>(center.size());
    std::vector<long> lo(center.size()), hi(center.size()), idx(center.size());
    for (int j = 0; j < d; ++j) {
        lo[j] = static_cast<long>(std::ceil((center[j] - radius) / spacing));
        hi[j] = static_cast<long>(std::floor((center[j] + radius) / spacing));
        if (lo[j] > hi[j]) return;
        idx[j] = lo[j];
    }
    std::vector<double> node(center.size());
    for (;;) {
        double r2 = 0.0;
        for (int j = 0; j < d; ++j) {
            node[j] = static_cast<double>(idx[j]) * spacing;
            const double w = (node[j] - center[j]) / radius;
            r2 += w * w;
        }
        if (r2 < 1.0) {
            const double weight = bump(r2);
            if (weight > 0.0) visit(node, weight);
        }
        int j = d - 1;
        while (j >= 0 && ++idx[j] > hi[j]) {
            idx[j] = lo[j];
            --j;
        }
        if (j < 0) return;
    }
}

double support_radius(const MollifyParams& params) { return params.mollifier_radius / params.n; }

double lattice_spacing(const MollifyParams& params) {
    return 2.0 * support_radius(params) / params.quad_points;
}

std::vector<double> stack(const Vector& z1, const Vector& z2) {
    std::vector<double> c(static_cast<std::size_t>(z1.size() + z2.size()));
    for (int j = 0; j < z1.size(); ++j) c[static_cast<std::size_t>(j)] = z1[j];
    for (int j = 0; j < z2.size(); ++j) c[static_cast<std::size_t>(z1.size() + j)] = z2[j];
    return c;
}

/// Integral of bump(|w|^2) over the unit ball of R^d, by composite Simpson
/// on the radial profile.
double unit_bump_integral(int d) {
    constexpr int kIntervals = 20000;
    const double h = 1.0 / kIntervals;
    double acc = 0.0;
    for (int k = 0; k <= kIntervals; ++k) {
        const double r = k * h;
        const double f = std::pow(r, d - 1) * bump(r * r);
        const double w = (k == 0 || k == kIntervals) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
        acc += w * f;
    }
    acc *= h / 3.0;
    const double sphere = 2.0 * std::pow(std::numbers::pi, d / 2.0) / std::tgamma(d / 2.0);
    return sphere * acc;
}

}  // namespace

void MollifyParams::validate() const {
    if (n < 1) throw DomainError("mollify: n must be >= 1");
    if (quad_points < 3) throw DomainError("mollify: quad_points must be >= 3");
    if (!(mollifier_radius > 0.0)) throw DomainError("mollify: mollifier_radius must be positive");
}

Vector truncate_state(const Vector& x, int n) {
    if (n < 1) throw DomainError("truncate_state requires n >= 1");
    Vector out(x.size());
    const double bound = static_cast<double>(n);
    for (int j = 0; j < x.size(); ++j) out[j] = std::min(bound, std::max(-bound, x[j]));
    return out;
}

double smooth_step(double tau) noexcept {
    if (tau <= 0.0) return 0.0;
    if (tau >= 1.0) return 1.0;
    const double rise = std::exp(-1.0 / tau);
    const double fall = std::exp(-1.0 / (1.0 - tau));
    return rise / (rise + fall);
}

double bump(double r2) noexcept {
    if (r2 >= 1.0) return 0.0;
    return std::exp(-1.0 / (1.0 - r2));
}

double cutoff(const Vector& y, const Vector& z, int n) {
    if (n < 1) throw DomainError("cutoff requires n >= 1");
    const double nn = static_cast<double>(n) * n;
    const double s = (y.squaredNorm() + z.squaredNorm()) / nn;
    if (s <= 1.0) return 1.0;
    if (s >= 4.0) return 0.0;
    return 1.0 - smooth_step((s - 1.0) / 3.0);
}

std::array<double, 2> coupled_generators(const GameSpec& spec, double t, const Vector& x,
                                         const Vector& z1, const Vector& z2) {
    if (!spec.best_response) throw ConfigError("coupled generator needs best_response maps");
    const Vector u = spec.best_response->first(t, x, z1, z2);
    const Vector v = spec.best_response->second(t, x, z1, z2);
    const Vector scaled = spec.sigma_inv(t, x) * spec.drift_f(t, x, u, v);
    return {z1.dot(scaled) + spec.running_cost[0](t, x, u, v),
            z2.dot(scaled) + spec.running_cost[1](t, x, u, v)};
}

std::array<double, 2> mollified_generators(const GameSpec& spec, double t, const Vector& x,
                                           const Vector& z1, const Vector& z2,
                                           const MollifyParams& params) {
    if (!spec.best_response) throw ConfigError("mollified generator needs best_response maps");
    const double psi = cutoff(z1, z2, params.n);
    if (psi == 0.0) return {0.0, 0.0};

    const int m = spec.dim_m;
    const Vector xbar = truncate_state(x, params.n);
    const Matrix sig_inv = spec.sigma_inv(t, xbar);
    const StrategyPair& sel = *spec.best_response;
    const auto center = stack(z1, z2);

    double total_weight = 0.0;
    std::array<double, 2> acc{0.0, 0.0};
    Vector y1(m), y2(m);
    for_each_lattice_node(center, support_radius(params), lattice_spacing(params),
                          [&](const std::vector<double>& node, double weight) {
        for (int j = 0; j < m; ++j) {
            y1[j] = node[static_cast<std::size_t>(j)];
            y2[j] = node[static_cast<std::size_t>(m + j)];
        }
        const Vector u = sel.first(t, xbar, y1, y2);
        const Vector v = sel.second(t, xbar, y1, y2);
        const Vector scaled = sig_inv * spec.drift_f(t, xbar, u, v);
        const double h1 = y1.dot(scaled) + spec.running_cost[0](t, xbar, u, v);
        const double h2 = y2.dot(scaled) + spec.running_cost[1](t, xbar, u, v);
        if (!std::isfinite(h1) || !std::isfinite(h2)) {
            std::string where;
            for (double c : node) where += (where.empty() ? "" : ",") + std::to_string(c);
            throw NumericalError("mollified generator: non-finite integrand at node (" + where + ")");
        }
        total_weight += weight;
        acc[0] += weight * h1;
        acc[1] += weight * h2;
    });
    if (!(total_weight > 0.0)) throw NumericalError("mollified generator: empty kernel support");
    return {psi * acc[0] / total_weight, psi * acc[1] / total_weight};
}

double mollified_generator(const GameSpec& spec, Player player, double t, const Vector& x,
                           const Vector& z1, const Vector& z2, const MollifyParams& params) {
    return mollified_generators(spec, t, x, z1, z2, params)[static_cast<std::size_t>(index(player))];
}

double mollifier_raw_mass(const MollifyParams& params, int dim_m, const std::vector<double>& center) {
    params.validate();
    const int d = 2 * dim_m;
    if (static_cast<int>(center.size()) != d) throw DomainError("mollifier center must have 2m entries");
    const double radius = support_radius(params);
    const double h = lattice_spacing(params);
    const double norm = 1.0 / (unit_bump_integral(d) * std::pow(radius, d));
    double mass = 0.0;
    for_each_lattice_node(center, radius, h, [&](const std::vector<double>&, double w) { mass += w; });
    return mass * norm * std::pow(h, d);
}

double mollifier_weight_sum(const MollifyParams& params, int dim_m, const std::vector<double>& center) {
    params.validate();
    if (static_cast<int>(center.size()) != 2 * dim_m) throw DomainError("mollifier center must have 2m entries");
    double total = 0.0;
    for_each_lattice_node(center, support_radius(params), lattice_spacing(params),
                          [&](const std::vector<double>&, double w) { total += w; });
    double normalized = 0.0;
    for_each_lattice_node(center, support_radius(params), lattice_spacing(params),
                          [&](const std::vector<double>&, double w) { normalized += w / total; });
    return normalized;
}

double compact_sup_distance(const GameSpec& spec, const MollifyParams& params, double t,
                            const Vector& x, double radius, int points_per_axis) {
    const int m = spec.dim_m;
    const int d = 2 * m;
    if (points_per_axis <= 0) points_per_axis = m == 1 ? 11 : (m == 2 ? 5 : 3);
    std::vector<int> idx(static_cast<std::size_t>(d), 0);
    Vector z1(m), z2(m);
    double sup = 0.0;
    for (;;) {
        for (int j = 0; j < d; ++j) {
            const double c = -radius + 2.0 * radius * idx[static_cast<std::size_t>(j)] / (points_per_axis - 1);
            if (j < m) z1[j] = c; else z2[j - m] = c;
        }
        const auto approx = mollified_generators(spec, t, x, z1, z2, params);
        const auto exact = coupled_generators(spec, t, x, z1, z2);
        sup = std::max({sup, std::abs(approx[0] - exact[0]), std::abs(approx[1] - exact[1])});
        int j = d - 1;
        while (j >= 0 && ++idx[static_cast<std::size_t>(j)] == points_per_axis) {
            idx[static_cast<std::size_t>(j)] = 0;
            --j;
        }
        if (j < 0) break;
    }
    return sup;
}

GeneratorReport verify_generator_properties(const GameSpec& spec, const MollifyParams& params,
                                            int sample_count, std::uint64_t seed) {
    params.validate();
    if (spec.growth_gamma < 1.0) throw DomainError("growth bound check requires growth_gamma >= 1");
    const int m = spec.dim_m;
    const double n = params.n;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    auto draw_x = [&] {
        Vector x(m);
        for (int j = 0; j < m; ++j) {
            x[j] = spec.sample_box.lo[j] + (spec.sample_box.hi[j] - spec.sample_box.lo[j]) * unit(rng);
        }
        return x;
    };
    auto draw_z = [&](double half_width, Vector& z1, Vector& z2) {
        z1.resize(m);
        z2.resize(m);
        for (int j = 0; j < m; ++j) z1[j] = half_width * (2.0 * unit(rng) - 1.0);
        for (int j = 0; j < m; ++j) z2[j] = half_width * (2.0 * unit(rng) - 1.0);
    };

    GeneratorReport report;
    report.n = params.n;

    // (a) finite differences at two step sizes tied to the lattice spacing.
    const double h = lattice_spacing(params);
    const double coarse = 0.1 * h;
    const double fine = 0.025 * h;
    for (int s = 0; s < sample_count; ++s) {
        const double t = spec.horizon_T * unit(rng);
        const Vector x = draw_x();
        Vector z1, z2;
        draw_z(2.0 * n, z1, z2);
        Vector e1(m), e2(m);
        for (int j = 0; j < m; ++j) e1[j] = gauss(rng);
        for (int j = 0; j < m; ++j) e2[j] = gauss(rng);
        const double norm = std::sqrt(e1.squaredNorm() + e2.squaredNorm());
        e1 /= norm;
        e2 /= norm;
        const auto base = mollified_generators(spec, t, x, z1, z2, params);
        const auto step_c = mollified_generators(spec, t, x, z1 + coarse * e1, z2 + coarse * e2, params);
        const auto step_f = mollified_generators(spec, t, x, z1 + fine * e1, z2 + fine * e2, params);
        for (std::size_t i = 0; i < 2; ++i) {
            report.lipschitz_coarse = std::max(report.lipschitz_coarse, std::abs(step_c[i] - base[i]) / coarse);
            report.lipschitz_fine = std::max(report.lipschitz_fine, std::abs(step_f[i] - base[i]) / fine);
        }
    }
    report.lipschitz_pass = std::isfinite(report.lipschitz_coarse) && std::isfinite(report.lipschitz_fine) &&
                            report.lipschitz_fine <= 1.5 * report.lipschitz_coarse + 1e-9;

    // (b), (c) and the exact cutoff.
    const double rr = support_radius(params);
    report.certified_growth_constant =
        std::max(spec.scaled_drift_growth, spec.cost_growth + 2.0 * spec.scaled_drift_growth * rr);
    for (int s = 0; s < sample_count; ++s) {
        const double t = spec.horizon_T * unit(rng);
        const Vector x = draw_x();
        Vector z1, z2;
        draw_z(2.5 * n, z1, z2);
        const auto value = mollified_generators(spec, t, x, z1, z2, params);
        const Vector xbar = truncate_state(x, params.n);
        const double lin = 1.0 + xbar.norm();
        const double poly = 1.0 + std::pow(xbar.norm(), spec.growth_gamma);
        const bool outside = z1.squaredNorm() + z2.squaredNorm() >= 4.0 * n * n;
        for (std::size_t i = 0; i < 2; ++i) {
            const double zi = (i == 0 ? z1 : z2).norm();
            const double mag = std::abs(value[i]);
            report.fitted_growth_constant = std::max(report.fitted_growth_constant, mag / (lin * zi + poly));
            report.global_sup = std::max(report.global_sup, mag);
            if (outside) report.outside_cutoff_max = std::max(report.outside_cutoff_max, mag);
        }
    }
    report.growth_ratio = report.fitted_growth_constant / report.certified_growth_constant;
    report.growth_pass = report.growth_ratio <= 1.0;
    report.bound_pass = std::isfinite(report.global_sup);

    // (d) decay of the compact sup-distance as n doubles.
    Vector x_mid = spec.sample_box.midpoint();
    const double t_mid = 0.5 * spec.horizon_T;
    MollifyParams doubled = params;
    doubled.n = 2 * params.n;
    report.compact_distance = compact_sup_distance(spec, params, t_mid, x_mid);
    report.compact_distance_doubled = compact_sup_distance(spec, doubled, t_mid, x_mid);
    report.convergence_pass =
        report.compact_distance_doubled <= report.compact_distance * (1.0 + 1e-3) + 1e-9;
    return report;
}

}  // namespace nashbsde
