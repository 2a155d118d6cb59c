#include "nashbsde/payoff_nash.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace nashbsde;

namespace {

const ZField kZeroZ = [](double, const Vector&, Vector& z1, Vector& z2) {
    z1 = make_vector({0.0});
    z2 = make_vector({0.0});
};

RegressionBasis poly(int degree) {
    RegressionBasis b;
    b.degree = degree;
    return b;
}

Vector at(const FeedbackControl& c, double t) {
    const Vector zero = make_vector({0.0});
    return c(t, zero, zero, zero);
}

}  // namespace

TEST_CASE("zero drift payoff is the mean terminal cost") {
    const GameSpec spec = testing::scalar_game(0.0, 0.0, testing::identity);
    const TimeGrid grid(0.0, 1.0, 10);
    for (auto method : {PayoffMethod::girsanov_weighted, PayoffMethod::direct_controlled}) {
        const auto est = estimate_payoff(spec, testing::constant_strategies(0.0, 0.0), kZeroZ, grid,
                                         make_vector({0.3}), 20000, 4, method);
        CHECK(est[0].method == method);
        CHECK(est[0].n_paths == 20000);
        CHECK(std::abs(est[0].value - 0.3) <= 3.0 * est[0].std_error);
        CHECK(est[1].value == est[0].value);
    }
}

TEST_CASE("both payoff estimators see a constant control shift") {
    // dX = u dt + dB with u = 0.7 gives E[X_T] = x0 + 0.7 T
    const GameSpec spec = testing::scalar_game(1.0, 0.0, testing::identity);
    const TimeGrid grid(0.0, 1.0, 20);
    const auto strat = testing::constant_strategies(0.7, 0.0);
    const auto g = estimate_payoff(spec, strat, kZeroZ, grid, make_vector({0.0}), 40000, 6,
                                   PayoffMethod::girsanov_weighted);
    const auto d = estimate_payoff(spec, strat, kZeroZ, grid, make_vector({0.0}), 40000, 7,
                                   PayoffMethod::direct_controlled);
    CHECK(std::abs(g[0].value - 0.7) <= 3.0 * g[0].std_error);
    CHECK(std::abs(d[0].value - 0.7) <= 3.0 * d[0].std_error);
    const double combined = std::sqrt(g[0].std_error * g[0].std_error + d[0].std_error * d[0].std_error);
    CHECK(std::abs(g[0].value - d[0].value) <= 3.0 * combined);
    CHECK(to_string(PayoffMethod::girsanov_weighted) == "girsanov_weighted");
}

TEST_CASE("cost samples on a controlled bundle carry unit weights") {
    const GameSpec spec = testing::scalar_game(1.0, 0.0, testing::identity);
    const TimeGrid grid(0.0, 1.0, 5);
    const auto strat = testing::constant_strategies(0.5, 0.0);
    const PathBundle bundle = simulate_controlled(spec, grid, make_vector({0.0}), strat, kZeroZ, 100, 2);
    const CostSamples s = cost_samples(spec, bundle, strat, kZeroZ);
    REQUIRE(s.weights.size() == 100);
    for (double w : s.weights) CHECK(w == 1.0);
    CHECK_THROWS_AS(estimate_payoff(spec, bundle, strat, kZeroZ), ContractError);
}

TEST_CASE("deviation families") {
    const GameSpec spec = make_lq_game(LqGameParams{}, 1.0);
    const StrategyPair eq = lq_feedback(LqGameParams{});

    const auto constants = make_deviation_family(spec, Player::first, DeviationKind::constants, 3, 0, eq.first);
    REQUIRE(constants.size() == 3);
    CHECK(at(constants[0].control, 0.1)[0] == -1.0);
    CHECK(at(constants[1].control, 0.1)[0] == 0.0);
    CHECK(at(constants[2].control, 0.1)[0] == 1.0);
    const auto mid = make_deviation_family(spec, Player::second, DeviationKind::constants, 1, 0, eq.second);
    CHECK(at(mid[0].control, 0.0)[0] == 0.5);

    const auto bang = make_deviation_family(spec, Player::first, DeviationKind::bang_bang, 2, 0, eq.first);
    REQUIRE(bang.size() == 2);
    CHECK(at(bang[0].control, 0.2)[0] == -1.0);
    CHECK(at(bang[0].control, 0.7)[0] == 1.0);
    CHECK(at(bang[1].control, 0.2)[0] == 1.0);
    CHECK(at(bang[1].control, 0.5)[0] == -1.0);
    CHECK(at(bang[1].control, 0.9)[0] == 1.0);

    const auto pert = make_deviation_family(spec, Player::second, DeviationKind::perturbed_feedback, 5, 3, eq.second);
    REQUIRE(pert.size() == 5);
    for (const auto& d : pert) {
        for (double t = 0.0; t < 1.0; t += 0.05) {
            for (double z : {-10.0, -0.2, 0.0, 0.3, 10.0}) {
                const Vector zv = make_vector({z});
                const double v = d.control(t, zv, zv, zv)[0];
                const double e = eq.second(t, zv, zv, zv)[0];
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
                CHECK(std::abs(v - e) <= 0.1 + 1e-12);
            }
        }
    }
    CHECK_THROWS_AS(make_deviation_family(spec, Player::first, DeviationKind::perturbed_feedback, 1, 0, {}), ConfigError);
    CHECK_THROWS_AS(make_deviation_family(spec, Player::first, DeviationKind::constants, 0, 0, eq.first), ConfigError);

    CHECK(standard_family(spec, eq, 1).size() == 36);
    CHECK(deviation_kind_from_string("bang_bang") == DeviationKind::bang_bang);
    CHECK(deviation_kind_from_string(to_string(DeviationKind::perturbed_feedback)) == DeviationKind::perturbed_feedback);
    CHECK_THROWS_AS(deviation_kind_from_string("wiggle"), ConfigError);
}

TEST_CASE("uncoupled quadratic costs give exact improvements") {
    // b = c = 0: the state ignores the controls, so deviating by a constant u
    // only adds gamma_1 u^2 T to player 1's cost on the same paths
    LqGameParams params;
    params.b = 0.0;
    params.c = 0.0;
    const GameSpec spec = make_lq_game(params, 1.0);
    const StrategyPair eq = lq_feedback(params);
    const TimeGrid grid(0.0, 1.0, 10);
    const PathBundle bundle = simulate_reference(spec, grid, make_vector({0.0}), 2000, 8);
    const BsdeSolution sol = solve_coupled(spec, bundle, poly(2), std::nullopt, PicardOptions{});

    DeviationFamily family = make_deviation_family(spec, Player::first, DeviationKind::constants, 3, 0, eq.first);
    const auto second = make_deviation_family(spec, Player::second, DeviationKind::constants, 3, 0, eq.second);
    family.insert(family.end(), second.begin(), second.end());
    const NashReport report = deviation_test(spec, sol, eq, family, grid, make_vector({0.0}), 4000, 9);
    REQUIRE(report.rows.size() == 6);
    const double expected[6] = {-params.gamma[0], 0.0, -params.gamma[0], 0.0, -0.25 * params.rho[1], -params.rho[1]};
    for (int r = 0; r < 6; ++r) {
        CHECK(report.rows[r].improvement == doctest::Approx(expected[r]).epsilon(1e-9).scale(1.0));
        CHECK_FALSE(report.rows[r].improves);
        CHECK(report.rows[r].weight_mean == 1.0);
    }
    CHECK(report.rows[1].paired_std_error == doctest::Approx(0.0).scale(1e-12));
    CHECK(report.pass);
    CHECK(report.weights_ok);
    CHECK(report.equilibrium_girsanov[0].value == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("lq equilibrium survives the standard deviation sweep") {
    const GameSpec spec = make_lq_game(LqGameParams{}, 1.0);
    const StrategyPair eq = lq_feedback(LqGameParams{});
    const TimeGrid grid(0.0, 1.0, 20);
    const PathBundle bundle = simulate_reference(spec, grid, make_vector({0.0}), 20000, 1);
    const BsdeSolution sol = solve_coupled(spec, bundle, poly(6), std::nullopt, PicardOptions{});
    const DeviationFamily family = standard_family(spec, eq, 2, FamilySpec{3, 2, 2});
    const NashReport report = deviation_test(spec, sol, eq, family, grid, make_vector({0.0}), 20000, 2);
    CHECK(report.rows.size() == 3 + 3 + 2 * 2 + 2 * 2);
    CHECK(report.pass);
    CHECK(report.weights_ok);
    // a looser tolerance can only keep a pass
    CHECK(nash_pass_at(report, 0.01) == report.pass);
    CHECK(nash_pass_at(report, 0.05));
    for (const auto& row : report.rows) CHECK(row.tolerance >= 3.0 * row.paired_std_error);

    std::ostringstream csv;
    write_nash_csv(csv, report);
    const std::string text = csv.str();
    CHECK(text.rfind("player,kind,description,payoff,std_error,paired_std_error,improvement,tolerance,weight_mean,verdict\n", 0) == 0);
    CHECK(text.find("improves\n") == std::string::npos);
    const nlohmann::json summary = nash_summary_json(report);
    CHECK(summary["kind"] == "nash_summary");
    CHECK(summary["pass"] == true);

    const W0Check w = verify_w0_equals_j(spec, sol, eq, make_vector({0.0}), 20000, 3);
    CHECK(w.pass);
    CHECK(w.allowance[0] >= 0.02 * std::abs(w.payoff[0]));
}

TEST_CASE("a strictly better deviation is reported") {
    LqGameParams params;
    params.b = 0.0;
    params.c = 0.0;
    const GameSpec spec = make_lq_game(params, 1.0);
    const TimeGrid grid(0.0, 1.0, 10);
    const PathBundle bundle = simulate_reference(spec, grid, make_vector({0.0}), 2000, 8);
    const BsdeSolution sol = solve_coupled(spec, bundle, poly(2), std::nullopt, PicardOptions{});
    // claim u = 1 is the equilibrium; the u = 0 deviation saves gamma_1 T
    const StrategyPair bad = testing::constant_strategies(1.0, 0.0);
    const auto family = make_deviation_family(spec, Player::first, DeviationKind::constants, 3, 0, bad.first);
    const NashReport report = deviation_test(spec, sol, bad, family, grid, make_vector({0.0}), 2000, 9);
    CHECK(report.rows[1].improvement == doctest::Approx(params.gamma[0]));
    CHECK(report.rows[1].improves);
    CHECK_FALSE(report.pass);
    CHECK_FALSE(nash_pass_at(report, 0.01));
    std::ostringstream csv;
    write_nash_csv(csv, report);
    CHECK(csv.str().find(",improves\n") != std::string::npos);
}

TEST_CASE("w0 check for the zero generator game") {
    const GameSpec spec = testing::scalar_game(0.0, 0.0, testing::square);
    const TimeGrid grid(0.0, 1.0, 10);
    const PathBundle bundle = simulate_reference(spec, grid, make_vector({0.5}), 10000, 1);
    const BsdeSolution sol = solve_coupled(spec, bundle, poly(2), std::nullopt, PicardOptions{});
    const W0Check w = verify_w0_equals_j(spec, sol, *spec.best_response, make_vector({0.5}), 10000, 2);
    CHECK(w.pass);
    CHECK(w.w0[0] == doctest::Approx(1.25).epsilon(0.03));
    CHECK(w.payoff[0] == doctest::Approx(1.25).epsilon(0.03));
}
