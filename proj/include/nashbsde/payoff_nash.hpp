#pragma once

#include "nashbsde/bsde_solver.hpp"
#include "nashbsde/game_model.hpp"
#include "nashbsde/sde_engine.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace nashbsde {

enum class PayoffMethod { girsanov_weighted, direct_controlled };

std::string to_string(PayoffMethod method);

struct PayoffEstimate {
    Player player = Player::first;
    double value = 0.0;
    double std_error = 0.0;
    int n_paths = 0;
    PayoffMethod method = PayoffMethod::girsanov_weighted;
};

/// Per-path samples of zeta_T * (int_0^T h_i dt + g^i(X_T)) for both players.
/// On a controlled bundle the weights are all one.
struct CostSamples {
    std::array<std::vector<double>, 2> values;
    std::vector<double> weights;
};

CostSamples cost_samples(const GameSpec& spec, const PathBundle& bundle,
                         const StrategyPair& strategies, const ZField& z_field);

/// J^i(u, v) = E^{(u,v)}[int_0^T h_i dt + g^i(X_T)] by either estimator.
std::array<PayoffEstimate, 2> estimate_payoff(const GameSpec& spec, const StrategyPair& strategies,
                                              const ZField& z_field, const TimeGrid& grid,
                                              const Vector& x0, int n_paths, std::uint64_t seed,
                                              PayoffMethod method);

/// Girsanov estimate on an existing reference bundle.
std::array<PayoffEstimate, 2> estimate_payoff(const GameSpec& spec, const PathBundle& reference,
                                              const StrategyPair& strategies, const ZField& z_field);

struct W0Check {
    std::array<double, 2> w0{0.0, 0.0};
    std::array<double, 2> payoff{0.0, 0.0};
    std::array<double, 2> std_error{0.0, 0.0};
    std::array<double, 2> allowance{0.0, 0.0};
    std::array<bool, 2> player_pass{false, false};
    bool pass = false;
};

/// Compares w^i(0, x0) with the Girsanov payoff estimate of the strategies
/// the solution was built for. Allowance = 3 SE + rel_allowance |J|.
W0Check verify_w0_equals_j(const GameSpec& spec, const BsdeSolution& sol,
                           const StrategyPair& strategies, const Vector& x0, int n_paths,
                           std::uint64_t seed, double rel_allowance = 0.02);

enum class DeviationKind { constants, bang_bang, perturbed_feedback };

std::string to_string(DeviationKind kind);
DeviationKind deviation_kind_from_string(const std::string& name);

struct Deviation {
    Player player = Player::first;
    DeviationKind kind = DeviationKind::constants;
    std::string description;
    FeedbackControl control;
};

using DeviationFamily = std::vector<Deviation>;

/// constants: count points per axis of the player's box (count = 1 gives the midpoint).
/// bang_bang: members j = 1..count; member j switches between the box corners at
///   the j interior times T s/(j+1), starting at lo for odd j and at hi for even j.
/// perturbed_feedback: members j = 1..count; equilibrium map plus a piecewise
///   constant (10 time segments) uniform offset of amplitude 10% of the box
///   width per axis, clipped to the box.
DeviationFamily make_deviation_family(const GameSpec& spec, Player player, DeviationKind kind,
                                      int count, std::uint64_t seed,
                                      const FeedbackControl& equilibrium);

struct FamilySpec {
    int constants = 9;
    int bang_bang = 4;
    int perturbed = 5;
};

/// Both players' deviations for the given counts.
DeviationFamily standard_family(const GameSpec& spec, const StrategyPair& equilibrium,
                                std::uint64_t seed, const FamilySpec& counts = {});

struct DeviationRow {
    Player player = Player::first;
    std::string kind;
    std::string description;
    double payoff = 0.0;
    double std_error = 0.0;
    /// Standard error of the paired difference J_eq - J_dev.
    double paired_std_error = 0.0;
    double improvement = 0.0;
    double tolerance = 0.0;
    double weight_mean = 0.0;
    double weight_std_error = 0.0;
    bool improves = false;
};

struct NashReport {
    std::array<PayoffEstimate, 2> equilibrium_girsanov;
    std::array<PayoffEstimate, 2> equilibrium_direct;
    std::vector<DeviationRow> rows;
    double rel_tol = 0.01;
    double weight_mean = 0.0;
    double weight_std_error = 0.0;
    /// Every Girsanov weight sample used (equilibrium and rows) has mean 1 within 4 SE.
    bool weights_ok = false;
    /// No row improves its player's payoff by more than its tolerance.
    bool pass = false;
};

/// True iff no row improves by more than max(3 paired SE, rel_tol |J_eq|).
bool nash_pass_at(const NashReport& report, double rel_tol);

/// Unilateral deviation sweep under common random numbers: one reference
/// bundle is reused for the equilibrium and for every row.
NashReport deviation_test(const GameSpec& spec, const BsdeSolution& sol,
                          const StrategyPair& equilibrium, const DeviationFamily& family,
                          const TimeGrid& grid, const Vector& x0, int n_paths, std::uint64_t seed,
                          double rel_tol = 0.01);

/// player,kind,description,payoff,std_error,paired_std_error,improvement,tolerance,weight_mean,verdict
void write_nash_csv(std::ostream& out, const NashReport& report);
nlohmann::json nash_summary_json(const NashReport& report);

}  // namespace nashbsde
