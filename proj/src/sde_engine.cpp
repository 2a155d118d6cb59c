#include "nashbsde/sde_engine.hpp"

#include "nashbsde/parallel.hpp"

#include <algorithm>

#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <string>

namespace nashbsde {

namespace {

constexpr std::uint64_t splitmix(std::uint64_t z) noexcept {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Uniform in (0, 1), never 0 or 1.
double open_unit(std::uint64_t bits) noexcept {
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

void check_x0(const GameSpec& spec, const Vector& x0) {
    if (x0.size() != spec.dim_m) throw DomainError("x0 dimension does not match the game");
}

[[noreturn]] void non_finite(const char* what, int path, int step) {
    throw NumericalError(std::string("non-finite ") + what + " at path " + std::to_string(path) +
                         ", step " + std::to_string(step));
}

PathBundle allocate(const TimeGrid& grid, int dim, int n_paths, std::uint64_t seed, SchemeTag tag) {
    if (n_paths < 1) throw DomainError("n_paths must be >= 1");
    PathBundle b;
    b.grid = grid;
    b.n_paths = n_paths;
    b.dim = dim;
    b.seed = seed;
    b.scheme = tag;
    const auto np = static_cast<std::size_t>(n_paths);
    const auto steps = static_cast<std::size_t>(grid.n_steps);
    const auto d = static_cast<std::size_t>(dim);
    b.increments.resize(np * steps * d);
    b.states.resize(np * (steps + 1) * d);
    return b;
}

void fill_increments(PathBundle& b, std::size_t path) {
    const double sqrt_dt = std::sqrt(b.grid.dt());
    const auto d = static_cast<std::size_t>(b.dim);
    for (int k = 0; k < b.grid.n_steps; ++k) {
        double* out = &b.increments[(path * static_cast<std::size_t>(b.grid.n_steps) +
                                     static_cast<std::size_t>(k)) * d];
        for (std::size_t j = 0; j < d; ++j) {
            out[j] = sqrt_dt * standard_normal(b.seed, path, static_cast<std::uint64_t>(k), j);
        }
    }
}

template <class Step>
void integrate_paths(PathBundle& b, const Vector& x0, Step&& step) {
    const auto d = static_cast<std::size_t>(b.dim);
    const auto knots = static_cast<std::size_t>(b.grid.n_steps + 1);
    parallel_for(static_cast<std::size_t>(b.n_paths), [&](std::size_t begin, std::size_t end) {
        for (std::size_t p = begin; p < end; ++p) {
            fill_increments(b, p);
            double* row = &b.states[p * knots * d];
            for (std::size_t j = 0; j < d; ++j) row[j] = x0[static_cast<int>(j)];
            Vector x = x0;
            for (int k = 0; k < b.grid.n_steps; ++k) {
                const Vector db = b.increment(static_cast<int>(p), k);
                x = step(static_cast<int>(p), k, x, db);
                double* next = &row[static_cast<std::size_t>(k + 1) * d];
                for (std::size_t j = 0; j < d; ++j) {
                    if (!std::isfinite(x[static_cast<int>(j)])) non_finite("state", static_cast<int>(p), k);
                    next[j] = x[static_cast<int>(j)];
                }
            }
        }
    });
}

Matrix checked_sigma(const GameSpec& spec, double t, const Vector& x, int path, int step) {
    Matrix s = spec.sigma(t, x);
    if (!s.allFinite()) non_finite("sigma", path, step);
    return s;
}

}  // namespace

TimeGrid::TimeGrid(double t0_, double T_, int n_steps_) : t0(t0_), T(T_), n_steps(n_steps_) {
    if (n_steps < 1) throw DomainError("time grid needs n_steps >= 1");
    if (!(T > t0)) throw DomainError("time grid needs T > t0");
}

int TimeGrid::knot_at_or_before(double t) const noexcept {
    if (t >= T) return n_steps;
    if (t <= t0) return 0;
    const int k = static_cast<int>(std::floor((t - t0) / dt() + 1e-9));
    return std::min(std::max(k, 0), n_steps);
}

Vector PathBundle::state(int path, int knot) const {
    const auto s = state_span(path, knot);
    Vector v(dim);
    for (int j = 0; j < dim; ++j) v[j] = s[static_cast<std::size_t>(j)];
    return v;
}

Vector PathBundle::increment(int path, int step) const {
    const auto s = increment_span(path, step);
    Vector v(dim);
    for (int j = 0; j < dim; ++j) v[j] = s[static_cast<std::size_t>(j)];
    return v;
}

std::span<const double> PathBundle::state_span(int path, int knot) const {
    const auto d = static_cast<std::size_t>(dim);
    const std::size_t off = (static_cast<std::size_t>(path) * static_cast<std::size_t>(grid.n_steps + 1) +
                             static_cast<std::size_t>(knot)) * d;
    return {states.data() + off, d};
}

std::span<const double> PathBundle::increment_span(int path, int step) const {
    const auto d = static_cast<std::size_t>(dim);
    const std::size_t off = (static_cast<std::size_t>(path) * static_cast<std::size_t>(grid.n_steps) +
                             static_cast<std::size_t>(step)) * d;
    return {increments.data() + off, d};
}

double standard_normal(std::uint64_t seed, std::uint64_t path, std::uint64_t step,
                       std::uint64_t coord) noexcept {
    // Box-Muller on a pair of counter-derived uniforms; even/odd coordinates
    // share a pair and take the cosine/sine branch.
    std::uint64_t key = splitmix(seed);
    key = splitmix(key ^ path);
    key = splitmix(key ^ step);
    key = splitmix(key ^ (coord >> 1));
    const double u1 = open_unit(splitmix(key ^ 0x1ULL));
    const double u2 = open_unit(splitmix(key ^ 0x2ULL));
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    return (coord & 1U) ? radius * std::sin(angle) : radius * std::cos(angle);
}

void evaluate_controls(const StrategyPair& feedbacks, const ZField& z_field, double t,
                       const Vector& x, Vector& u, Vector& v) {
    Vector z1 = Vector::Zero(x.size());
    Vector z2 = Vector::Zero(x.size());
    if (z_field) z_field(t, x, z1, z2);
    u = feedbacks.first(t, x, z1, z2);
    v = feedbacks.second(t, x, z1, z2);
}

PathBundle simulate_reference(const GameSpec& spec, const TimeGrid& grid, const Vector& x0,
                              int n_paths, std::uint64_t seed) {
    check_x0(spec, x0);
    PathBundle b = allocate(grid, spec.dim_m, n_paths, seed, SchemeTag::reference);
    integrate_paths(b, x0, [&](int path, int k, const Vector& x, const Vector& db) -> Vector {
        const Matrix s = checked_sigma(spec, grid.knot(k), x, path, k);
        return x + s * db;
    });
    return b;
}

PathBundle simulate_controlled(const GameSpec& spec, const TimeGrid& grid, const Vector& x0,
                               const StrategyPair& feedbacks, const ZField& z_field, int n_paths,
                               std::uint64_t seed) {
    check_x0(spec, x0);
    PathBundle b = allocate(grid, spec.dim_m, n_paths, seed, SchemeTag::controlled);
    const double dt = grid.dt();
    integrate_paths(b, x0, [&](int path, int k, const Vector& x, const Vector& db) -> Vector {
        const double t = grid.knot(k);
        Vector u, v;
        evaluate_controls(feedbacks, z_field, t, x, u, v);
        const Vector f = spec.drift_f(t, x, u, v);
        if (!f.allFinite()) non_finite("drift", path, k);
        const Matrix s = checked_sigma(spec, t, x, path, k);
        const Vector shifted = x + f * dt;
        return shifted + s * db;
    });
    return b;
}

std::vector<double> girsanov_log_weight(const GameSpec& spec, const PathBundle& bundle,
                                        const StrategyPair& feedbacks, const ZField& z_field) {
    if (bundle.scheme != SchemeTag::reference) {
        throw ContractError("girsanov_weight requires a reference-measure bundle");
    }
    const TimeGrid& grid = bundle.grid;
    const double dt = grid.dt();
    std::vector<double> log_w(static_cast<std::size_t>(bundle.n_paths));
    parallel_for(log_w.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t p = begin; p < end; ++p) {
            const int path = static_cast<int>(p);
            double stochastic = 0.0;
            double quadratic = 0.0;
            for (int k = 0; k < grid.n_steps; ++k) {
                const double t = grid.knot(k);
                const Vector x = bundle.state(path, k);
                Vector u, v;
                evaluate_controls(feedbacks, z_field, t, x, u, v);
                const Vector eta = spec.sigma_inv(t, x) * spec.drift_f(t, x, u, v);
                stochastic += eta.dot(bundle.increment(path, k));
                quadratic += eta.squaredNorm();
            }
            const double lw = stochastic - 0.5 * quadratic * dt;
            if (!std::isfinite(lw)) non_finite("log-weight", path, grid.n_steps);
            log_w[p] = lw;
        }
    });
    return log_w;
}

std::vector<double> girsanov_weight(const GameSpec& spec, const PathBundle& bundle,
                                    const StrategyPair& feedbacks, const ZField& z_field) {
    std::vector<double> w = girsanov_log_weight(spec, bundle, feedbacks, z_field);
    for (std::size_t p = 0; p < w.size(); ++p) {
        w[p] = std::exp(w[p]);
        if (!(w[p] > 0.0) || !std::isfinite(w[p])) non_finite("weight", static_cast<int>(p), bundle.grid.n_steps);
    }
    return w;
}

SampleStats sample_stats(std::span<const double> values) {
    SampleStats s;
    const auto n = values.size();
    if (n == 0) return s;
    const double sum = chunked_sum(n, [&](std::size_t b, std::size_t e) {
        double acc = 0.0;
        for (std::size_t i = b; i < e; ++i) acc += values[i];
        return acc;
    });
    s.mean = sum / static_cast<double>(n);
    if (n > 1) {
        const double ss = chunked_sum(n, [&](std::size_t b, std::size_t e) {
            double acc = 0.0;
            for (std::size_t i = b; i < e; ++i) acc += (values[i] - s.mean) * (values[i] - s.mean);
            return acc;
        });
        s.std_error = std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n));
    }
    return s;
}

double sup_moment(const PathBundle& bundle, double q) {
    std::vector<double> sup_pow(static_cast<std::size_t>(bundle.n_paths));
    for (int p = 0; p < bundle.n_paths; ++p) {
        double sup = 0.0;
        for (int k = 0; k <= bundle.grid.n_steps; ++k) sup = std::max(sup, bundle.state(p, k).norm());
        sup_pow[static_cast<std::size_t>(p)] = std::pow(sup, 2.0 * q);
    }
    return sample_stats(sup_pow).mean;
}

double weight_moment(std::span<const double> weights, double p) {
    std::vector<double> powered(weights.size());
    for (std::size_t i = 0; i < weights.size(); ++i) powered[i] = std::pow(weights[i], p);
    return sample_stats(powered).mean;
}

void write_paths_csv(std::ostream& out, const PathBundle& bundle, int max_paths) {
    out << "path_id,t";
    for (int j = 1; j <= bundle.dim; ++j) out << ",x_" << j;
    out << '\n';
    const int n = max_paths < 0 ? bundle.n_paths : std::min(max_paths, bundle.n_paths);
    char buf[64];
    for (int p = 0; p < n; ++p) {
        for (int k = 0; k <= bundle.grid.n_steps; ++k) {
            std::snprintf(buf, sizeof buf, "%.17g", bundle.grid.knot(k));
            out << p << ',' << buf;
            for (double xj : bundle.state_span(p, k)) {
                std::snprintf(buf, sizeof buf, "%.17g", xj);
                out << ',' << buf;
            }
            out << '\n';
        }
    }
}

}  // namespace nashbsde
