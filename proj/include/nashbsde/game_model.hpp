#pragma once

#include "nashbsde/types.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace nashbsde {

/// Feedback map (t, x, z1, z2) -> control. Used for the Isaacs selectors,
/// equilibrium candidates and deviations alike.
using FeedbackControl =
    std::function<Vector(double t, const Vector& x, const Vector& z1, const Vector& z2)>;

using MatrixField = std::function<Matrix(double t, const Vector& x)>;
using DriftFn = std::function<Vector(double t, const Vector& x, const Vector& u, const Vector& v)>;
using RunningCostFn =
    std::function<double(double t, const Vector& x, const Vector& u, const Vector& v)>;
using TerminalCostFn = std::function<double(const Vector& x)>;

/// One feedback per player.
struct StrategyPair {
    FeedbackControl first;
    FeedbackControl second;

    const FeedbackControl& operator[](Player p) const { return p == Player::first ? first : second; }
    FeedbackControl& operator[](Player p) { return p == Player::first ? first : second; }
};

/// Two-player game with diffusion dX = f dt + sigma dB (weak formulation).
///
/// Growth constants are declared by whoever builds the GameSpec and are only
/// spot-checked by validate_spec():
///   |f|             <= drift_growth        * (1 + |x|)
///   |sigma^-1 f|    <= scaled_drift_growth * (1 + |x|)
///   |h_i|, |g^i|    <= cost_growth         * (1 + |x|^growth_gamma)
struct GameSpec {
    std::string name;
    int dim_m = 1;
    double horizon_T = 1.0;
    MatrixField sigma;
    MatrixField sigma_inv;
    DriftFn drift_f;
    std::array<RunningCostFn, 2> running_cost;
    std::array<TerminalCostFn, 2> terminal_cost;
    Box control_box_1;
    Box control_box_2;
    std::optional<StrategyPair> best_response;
    double growth_gamma = 1.0;
    double drift_growth = 1.0;
    double scaled_drift_growth = 1.0;
    double cost_growth = 1.0;
    /// State region sampled by the spot checks (Isaacs, generator properties).
    Box sample_box;

    const Box& control_box(Player p) const {
        return p == Player::first ? control_box_1 : control_box_2;
    }
};

/// H_i(t,x,p,u,v) = p . sigma^-1(t,x) f(t,x,u,v) + h_i(t,x,u,v).
/// Throws DomainError when u or v leaves its control box.
double eval_hamiltonian(const GameSpec& spec, Player player, double t, const Vector& x,
                        const Vector& p, const Vector& u, const Vector& v);

/// Same as eval_hamiltonian without the control-box check; for inner loops
/// whose controls are already known to be admissible.
double eval_hamiltonian_unchecked(const GameSpec& spec, Player player, double t,
                                  const Vector& x, const Vector& p, const Vector& u,
                                  const Vector& v);

/// Clamp to [-1, 1].
double clamp_symmetric_unit(double eta) noexcept;
/// min(1, max(0, eta)).
double clamp_unit_interval(double eta) noexcept;

/// Scalar linear-quadratic game: f = a x + b u + c v,
/// h_i = theta_i x^{p_i} + gamma_i u^2 + rho_i v^2, U = [-1, 1], V = [0, 1].
/// Terminal costs are polynomials given by ascending coefficients.
struct LqGameParams {
    double a = 0.0;
    double b = 1.0;
    double c = 1.0;
    std::array<double, 2> theta{0.0, 0.0};
    std::array<int, 2> power{0, 0};
    std::array<double, 2> gamma{1.0, 0.1};
    std::array<double, 2> rho{0.1, 1.0};
    std::array<std::vector<double>, 2> terminal{std::vector<double>{0.0, 0.0, 1.0},
                                                std::vector<double>{0.0, 0.0, 1.0}};

    void validate() const;
};

/// Multi-dimensional linear-quadratic game with constant diffusion:
///   f = A x + B u + C v,  sigma constant,
///   h_i = theta_i sum_j x_j^{p_i} + gamma_i |u|^2 + rho_i |v|^2,
///   g^i(x) = sum_j poly_i(x_j).
/// The Isaacs selectors are the box-clamped minimizers
///   u* = clamp(-(B^T sigma^-T z1) / (2 gamma_1)),  v* = clamp(-(C^T sigma^-T z2) / (2 rho_2)).
struct LinearQuadraticTables {
    Matrix sigma;
    Matrix drift_state;
    Matrix drift_u;
    Matrix drift_v;
    Box box_u;
    Box box_v;
    std::array<double, 2> theta{0.0, 0.0};
    std::array<int, 2> power{0, 0};
    std::array<double, 2> gamma{1.0, 0.1};
    std::array<double, 2> rho{0.1, 1.0};
    std::array<std::vector<double>, 2> terminal;

    void validate() const;
};

/// Isaacs selectors of the scalar LQ game:
///   u* = psi(-b z1 / (2 gamma_1)),  v* = phi(-c z2 / (2 rho_2)).
/// Throws DomainError when gamma_1 or rho_2 is not positive.
StrategyPair lq_feedback(const LqGameParams& params);

GameSpec make_lq_game(const LqGameParams& params, double horizon);
GameSpec make_linear_quadratic_game(const LinearQuadraticTables& tables, double horizon);

/// Geometric Brownian motion game: sigma(t,x) = x, f = x (u + v), costs as in
/// the LQ game, selectors u* = psi(-z1 / (2 gamma_1)), v* = phi(-z2 / (2 rho_2)).
GameSpec make_gbm_extension_game(const LqGameParams& params, double horizon);

/// Builtin lookup by name ("lq", "gbm_extension").
GameSpec make_builtin_game(const std::string& name, const LqGameParams& params, double horizon);

/// Brute-force argmin of u -> H_i(t, x, z_i, .) over a uniform grid with
/// grid_n points per coordinate of the player's box; the opponent control is
/// held fixed. Ties go to the lexicographically smallest grid point.
Vector best_response_grid(const GameSpec& spec, Player player, double t, const Vector& x,
                          const Vector& z_i, const Vector& opponent_value, int grid_n);

struct IsaacsSample {
    double t = 0.0;
    Vector x;
    Vector z1;
    Vector z2;
    std::array<double, 2> violation{0.0, 0.0};
};

struct IsaacsReport {
    int sample_count = 0;
    int grid_n = 0;
    double max_violation = 0.0;
    double grid_slack = 0.0;
    bool pass = false;
    std::vector<IsaacsSample> samples;
};

/// Samples (t, x, z1, z2) and compares each selector against the grid minimum
/// of its own Hamiltonian with the opponent frozen at the other selector.
/// Violation = H_i(selectors) - min_grid H_i, floored at 0.
IsaacsReport check_isaacs(const GameSpec& spec, int sample_count, int grid_n,
                          std::uint64_t seed, double z_radius = 5.0);

struct SpecValidationReport {
    double max_inverse_error = 0.0;
    double max_drift_ratio = 0.0;
    double max_scaled_drift_ratio = 0.0;
    double max_cost_ratio = 0.0;
    double min_ellipticity = 0.0;
    double max_ellipticity = 0.0;
    bool selectors_in_box = true;
    bool pass = false;
};

/// Spot-checks the declared assumptions at random points of sample_box:
/// sigma * sigma_inv = I (1e-10), growth bounds, selector admissibility, and
/// reports the sampled eigenvalue range of sigma sigma^T.
SpecValidationReport validate_spec(const GameSpec& spec, int sample_count, std::uint64_t seed);

}  // namespace nashbsde
