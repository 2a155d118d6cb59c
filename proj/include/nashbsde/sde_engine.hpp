#pragma once

#include "nashbsde/game_model.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

namespace nashbsde {

/// Uniform time grid t_k = t0 + k dt, k = 0..n_steps.
struct TimeGrid {
    double t0 = 0.0;
    double T = 1.0;
    int n_steps = 1;

    TimeGrid() = default;
    TimeGrid(double t0_, double T_, int n_steps_);

    double dt() const noexcept { return (T - t0) / n_steps; }
    double knot(int k) const noexcept { return k == n_steps ? T : t0 + k * dt(); }
    /// Index of the knot at or before t, clamped to [0, n_steps].
    int knot_at_or_before(double t) const noexcept;
};

enum class SchemeTag { reference, controlled };

/// Costate field (t, x) -> (z1, z2) feeding the feedback maps. An empty
/// field means z1 = z2 = 0.
using ZField = std::function<void(double t, const Vector& x, Vector& z1, Vector& z2)>;

/// Monte Carlo ensemble on a time grid. Storage is path-major:
/// increments[(path * n_steps + step) * dim + j], states[(path * (n_steps+1) + knot) * dim + j].
struct PathBundle {
    TimeGrid grid;
    int n_paths = 0;
    int dim = 0;
    std::uint64_t seed = 0;
    SchemeTag scheme = SchemeTag::reference;
    std::vector<double> increments;
    std::vector<double> states;

    Vector state(int path, int knot) const;
    Vector increment(int path, int step) const;
    std::span<const double> state_span(int path, int knot) const;
    std::span<const double> increment_span(int path, int step) const;
};

/// Counter-based standard normal: a pure function of (seed, path, step, coord).
double standard_normal(std::uint64_t seed, std::uint64_t path, std::uint64_t step,
                       std::uint64_t coord) noexcept;

/// Euler-Maruyama for dX = sigma(t, X) dB under the reference measure.
PathBundle simulate_reference(const GameSpec& spec, const TimeGrid& grid, const Vector& x0,
                              int n_paths, std::uint64_t seed);

/// Euler-Maruyama for dX = f(t, X, u, v) dt + sigma(t, X) dB with controls
/// taken from the feedbacks at (t_k, X_k, z1, z2), z from z_field.
PathBundle simulate_controlled(const GameSpec& spec, const TimeGrid& grid, const Vector& x0,
                               const StrategyPair& feedbacks, const ZField& z_field, int n_paths,
                               std::uint64_t seed);

/// log zeta_T per path, left-point discretization:
///   sum_k eta_k . dB_k - 0.5 sum_k |eta_k|^2 dt,  eta_k = sigma^-1 f at (t_k, X_k, u_k, v_k).
std::vector<double> girsanov_log_weight(const GameSpec& spec, const PathBundle& bundle,
                                        const StrategyPair& feedbacks, const ZField& z_field);

/// exp of girsanov_log_weight. Requires a reference bundle.
std::vector<double> girsanov_weight(const GameSpec& spec, const PathBundle& bundle,
                                    const StrategyPair& feedbacks, const ZField& z_field);

struct SampleStats {
    double mean = 0.0;
    double std_error = 0.0;
};

SampleStats sample_stats(std::span<const double> values);

/// Empirical E[sup_k |X_k|^{2q}].
double sup_moment(const PathBundle& bundle, double q);

/// Empirical E[w^p].
double weight_moment(std::span<const double> weights, double p);

/// CSV with header path_id,t,x_1..x_m; one row per path per knot.
/// max_paths < 0 exports every path.
void write_paths_csv(std::ostream& out, const PathBundle& bundle, int max_paths = -1);

/// Evaluates both feedbacks at (t, x) with z from the field.
void evaluate_controls(const StrategyPair& feedbacks, const ZField& z_field, double t,
                       const Vector& x, Vector& u, Vector& v);

}  // namespace nashbsde
