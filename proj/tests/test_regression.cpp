#include "nashbsde/regression.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace nashbsde;

namespace {

std::vector<double> cloud(int n, int dim, std::uint64_t seed, double spread = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, spread);
    std::vector<double> pts(static_cast<std::size_t>(n * dim));
    for (auto& p : pts) p = g(rng);
    return pts;
}

}  // namespace

TEST_CASE("monomial exponents") {
    const auto& e = monomial_exponents(2, 2);
    REQUIRE(e.size() == 6);
    CHECK(e.front() == std::vector<int>{0, 0});
    int prev_degree = 0;
    for (const auto& m : e) {
        const int deg = m[0] + m[1];
        CHECK(deg >= prev_degree);
        prev_degree = deg;
    }
    CHECK(monomial_exponents(3, 4).size() == 35);
    CHECK(monomial_exponents(1, 10).size() == 11);
    RegressionBasis b;
    b.degree = 3;
    CHECK(b.local_size(2) == 10);
    b.kind = BasisKind::local_partition;
    b.cells_per_axis = 4;
    CHECK(b.cell_count(2) == 16);
    CHECK(b.size(2) == 160);
}

TEST_CASE("exact polynomial targets are reproduced") {
    for (int dim : {1, 2, 3}) {
        const int n = 2000;
        const auto pts = cloud(n, dim, 5 + dim);
        RegressionBasis basis;
        basis.degree = 2;
        const KnotRegression reg(basis, pts, dim, "test");
        std::vector<double> target(n);
        for (int p = 0; p < n; ++p) {
            double v = 1.5;
            for (int j = 0; j < dim; ++j) {
                const double x = pts[static_cast<std::size_t>(p * dim + j)];
                v += (j + 1) * x - 0.5 * x * x;
            }
            target[static_cast<std::size_t>(p)] = v;
        }
        const Eigen::VectorXd c = reg.fit(target);
        std::vector<double> fitted(n);
        reg.predict(c, fitted);
        for (int p = 0; p < n; ++p) CHECK(fitted[static_cast<std::size_t>(p)] == doctest::Approx(target[static_cast<std::size_t>(p)]).scale(1.0).epsilon(1e-6));
        Vector x(dim);
        for (int j = 0; j < dim; ++j) x[j] = 0.3;
        double expect = 1.5;
        for (int j = 0; j < dim; ++j) expect += (j + 1) * 0.3 - 0.045;
        CHECK(evaluate_expansion(basis, reg.box(), c, x) == doctest::Approx(expect).epsilon(1e-8));
        CHECK(reg.condition_number() >= 1.0);
    }
}

TEST_CASE("regression is a conditional mean") {
    const int n = 20000;
    const auto pts = cloud(n, 1, 21);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<double> target(n);
    for (int p = 0; p < n; ++p) target[static_cast<std::size_t>(p)] = 2.0 * pts[static_cast<std::size_t>(p)] + noise(rng);
    RegressionBasis basis;
    basis.degree = 1;
    const KnotRegression reg(basis, pts, 1, "noisy");
    const Eigen::VectorXd c = reg.fit(target);
    CHECK(evaluate_expansion(basis, reg.box(), c, make_vector({1.0})) == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("degenerate cloud fits the constant") {
    std::vector<double> pts(500, 0.25);
    RegressionBasis basis;
    basis.degree = 3;
    const KnotRegression reg(basis, pts, 1, "t=0");
    CHECK(reg.box().degenerate);
    std::vector<double> target(500);
    for (std::size_t k = 0; k < target.size(); ++k) target[k] = static_cast<double>(k % 7);
    const Eigen::VectorXd c = reg.fit(target);
    double mean = 0.0;
    for (double t : target) mean += t;
    mean /= static_cast<double>(target.size());
    CHECK(evaluate_expansion(basis, reg.box(), c, make_vector({0.25})) == doctest::Approx(mean).epsilon(1e-10));
    CHECK(evaluate_expansion(basis, reg.box(), c, make_vector({3.0})) == doctest::Approx(mean).epsilon(1e-10));
}

TEST_CASE("local partition") {
    const int n = 4000;
    const auto pts = cloud(n, 1, 8);
    RegressionBasis basis;
    basis.kind = BasisKind::local_partition;
    basis.degree = 1;
    basis.cells_per_axis = 8;
    const KnotRegression reg(basis, pts, 1, "local");
    CHECK(reg.size() == 16);
    // tail cells of a Gaussian cloud hold few points; those are reduced to constants
    CHECK(reg.reduced_cells() >= 0);
    std::vector<double> target(n);
    for (int p = 0; p < n; ++p) target[static_cast<std::size_t>(p)] = std::abs(pts[static_cast<std::size_t>(p)]);
    const Eigen::VectorXd c = reg.fit(target);
    // piecewise linear fit of |x| is close in the bulk
    CHECK(evaluate_expansion(basis, reg.box(), c, make_vector({0.9})) == doctest::Approx(0.9).epsilon(0.05));

    // one point in the left half, the rest in the right half
    std::vector<double> more = {-1.0};
    for (int r = 0; r < 119; ++r) more.push_back(0.8 + 0.2 * r / 118.0);
    RegressionBasis coarse = basis;
    coarse.cells_per_axis = 2;
    coarse.degree = 2;
    CHECK(KnotRegression(coarse, more, 1, "sparse").reduced_cells() == 1);
}

TEST_CASE("regression preconditions") {
    const auto pts = cloud(50, 1, 1);
    RegressionBasis basis;
    basis.degree = 6;
    CHECK_THROWS_AS(KnotRegression(basis, pts, 1, "small"), NumericalError);
    basis.degree = -1;
    CHECK_THROWS_AS(basis.validate(1), ConfigError);
    CHECK_THROWS_AS(KnotRegression(RegressionBasis{}, std::vector<double>{}, 1, "empty"), NumericalError);
}
