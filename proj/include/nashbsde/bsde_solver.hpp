#pragma once

#include "nashbsde/game_model.hpp"
#include "nashbsde/mollify.hpp"
#include "nashbsde/regression.hpp"
#include "nashbsde/sde_engine.hpp"

#include <json.hpp>

#include <array>
#include <optional>
#include <span>
#include <vector>

namespace nashbsde {

/// A knot's Picard loop stops once the coefficient sup-change is at most
/// tol * max(1, |coefficients|_inf).
struct PicardOptions {
    int max_iter = 10;
    double tol = 1e-10;
};

struct BsdeDiagnostics {
    /// Coefficient sup-change of each Picard iterate, per knot (index k).
    std::vector<std::vector<double>> picard_residuals;
    std::vector<int> picard_iterations;
    std::vector<bool> picard_converged;
    bool picard_warning = false;
    std::vector<double> condition_numbers;
    int reduced_cells = 0;
    /// Empirical E[int_0^T |Z^i|^2 dt].
    std::array<double, 2> z_energy{0.0, 0.0};
    /// max over the terminal cloud of |w^i(T, X_T) - g^i(X_T)|.
    std::array<double, 2> terminal_residual{0.0, 0.0};
    /// Sample standard error of the t = 0 regression target (per player).
    std::array<double, 2> y0_std_error{0.0, 0.0};

    /// Fraction of knots whose residuals are nonincreasing after the second iterate.
    double picard_monotone_fraction() const;
};

/// Deterministic representation W^i_s = w^i(s, X_s), Z^i_s = v^i(s, X_s) as
/// per-knot regression coefficients.
struct BsdeSolution {
    TimeGrid grid;
    RegressionBasis basis;
    int dim = 1;
    std::vector<KnotBox> knot_boxes;                             // n_steps + 1
    std::array<std::vector<Eigen::VectorXd>, 2> coeffs_y;        // [player][knot]
    std::array<std::vector<std::vector<Eigen::VectorXd>>, 2> coeffs_z;  // [player][knot][coord]
    std::optional<MollifyParams> mollify;
    BsdeDiagnostics diagnostics;

    /// Z field for feedback evaluation (z1, z2) = (v^1, v^2)(t, x).
    ZField z_field() const;
    /// True when x lies outside the sample cloud box of t's knot.
    bool extrapolates(double t, const Vector& x) const;
};

/// Backward least-squares Monte Carlo for the coupled system
///   -dW^i = H_i(s, X, Z^i, u1*(s,X,Z^1,Z^2), u2*(s,X,Z^1,Z^2)) ds - Z^i dB,  W^i_T = g^i(X_T),
/// on a reference bundle; with `mollify` set the generator is H_i^n.
///
/// At each knot k (from n_steps-1 down to 0) the Picard map is
///   Z^i_k = E[(Y^i_{k+1} - Y^i_k) dB_k | X_k] / dt,
///   Y^i_k = E[Y^i_{k+1} + dt H_i(t_k, X_k, Z^i_k, selectors(Z^1_k, Z^2_k)) | X_k],
/// started from the knot k+1 function and iterated until the coefficient
/// change meets the PicardOptions criterion.
BsdeSolution solve_coupled(const GameSpec& spec, const PathBundle& bundle,
                           const RegressionBasis& basis, const std::optional<MollifyParams>& mollify,
                           const PicardOptions& picard);

/// w^i(t, x); piecewise constant in t (left knot), polynomial extrapolation in x.
double eval_w(const BsdeSolution& sol, Player player, double t, const Vector& x);
/// v^i(t, x) in R^m.
Vector eval_z(const BsdeSolution& sol, Player player, double t, const Vector& x);

struct GrowthReport {
    std::vector<double> radii;
    std::array<std::vector<double>, 2> max_abs;  // per player, per radius
    std::array<double, 2> exponent{0.0, 0.0};
    std::array<double, 2> constant{0.0, 0.0};
};

/// Fits log max|w^i| against log r over spheres of the given radii (max over
/// knots k >= 1 and a fixed direction set).
GrowthReport growth_diagnostic(const BsdeSolution& sol, std::span<const double> radii);

/// Both players' exponents agree within rel_tol of the larger magnitude.
bool growth_stable(const GrowthReport& a, const GrowthReport& b, double rel_tol = 0.2);

nlohmann::json to_json(const BsdeSolution& sol);
BsdeSolution solution_from_json(const nlohmann::json& doc);

}  // namespace nashbsde
