#pragma once

#include "nashbsde/game_model.hpp"

#include <cmath>

namespace testing {

using nashbsde::Box;
using nashbsde::GameSpec;
using nashbsde::Matrix;
using nashbsde::StrategyPair;
using nashbsde::Vector;

inline StrategyPair constant_strategies(double u, double v) {
    StrategyPair s;
    s.first = [u](double, const Vector&, const Vector&, const Vector&) { return nashbsde::make_vector({u}); };
    s.second = [v](double, const Vector&, const Vector&, const Vector&) { return nashbsde::make_vector({v}); };
    return s;
}

/// Scalar game with sigma = 1, f = drift_u * u + drift_const, h = 0 and
/// g^1 = g^2 = g. Controls in [-1, 1] x [0, 1], selectors constant.
template <class Terminal>
GameSpec scalar_game(double drift_u, double drift_const, Terminal g, double horizon = 1.0,
                     double u_star = 0.0) {
    GameSpec s;
    s.name = "test";
    s.dim_m = 1;
    s.horizon_T = horizon;
    s.sigma = [](double, const Vector&) { return Matrix::Identity(1, 1); };
    s.sigma_inv = s.sigma;
    s.drift_f = [drift_u, drift_const](double, const Vector&, const Vector& u, const Vector&) {
        return nashbsde::make_vector({drift_u * u[0] + drift_const});
    };
    for (auto& h : s.running_cost) h = [](double, const Vector&, const Vector&, const Vector&) { return 0.0; };
    for (auto& t : s.terminal_cost) t = [g](const Vector& x) { return g(x[0]); };
    s.control_box_1 = Box::cube(1, -1.0, 1.0);
    s.control_box_2 = Box::cube(1, 0.0, 1.0);
    s.best_response = constant_strategies(u_star, 0.0);
    s.sample_box = Box::cube(1, -3.0, 3.0);
    return s;
}

inline double identity(double x) { return x; }
inline double square(double x) { return x * x; }

}  // namespace testing
