#include "nashbsde/game_model.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace nashbsde {

namespace {

double integer_power(double x, int p) {
    double out = 1.0;
    for (int k = 0; k < p; ++k) out *= x;
    return out;
}

double polynomial(const std::vector<double>& coeffs, double x) {
    double out = 0.0;
    for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) out = out * x + *it;
    return out;
}

int polynomial_degree(const std::vector<double>& coeffs) {
    for (int k = static_cast<int>(coeffs.size()) - 1; k >= 0; --k) {
        if (coeffs[static_cast<std::size_t>(k)] != 0.0) return k;
    }
    return 0;
}

double abs_sum(const std::vector<double>& coeffs) {
    double s = 0.0;
    for (double c : coeffs) s += std::abs(c);
    return s;
}

double max_abs_square(const Box& box) {
    double s = 0.0;
    for (int j = 0; j < box.dim(); ++j) s += std::max(box.lo[j] * box.lo[j], box.hi[j] * box.hi[j]);
    return s;
}

Vector uniform_in(const Box& box, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Vector out(box.dim());
    for (int j = 0; j < box.dim(); ++j) out[j] = box.lo[j] + (box.hi[j] - box.lo[j]) * unit(rng);
    return out;
}

/// Calls visit(point) for every node of the grid_n^d tensor grid on the box,
/// in lexicographic order (first coordinate most significant).
template <class Visit>
void for_each_grid_point(const Box& box, int grid_n, Visit&& visit) {
    const int d = box.dim();
    std::array<int, kMaxDim> idx{};
    Vector point(d);
    for (;;) {
        for (int j = 0; j < d; ++j) {
            point[j] = box.lo[j] + (box.hi[j] - box.lo[j]) * idx[static_cast<std::size_t>(j)] /
                                       static_cast<double>(grid_n - 1);
        }
        visit(point);
        int j = d - 1;
        while (j >= 0 && ++idx[static_cast<std::size_t>(j)] == grid_n) {
            idx[static_cast<std::size_t>(j)] = 0;
            --j;
        }
        if (j < 0) return;
    }
}

double own_hamiltonian(const GameSpec& spec, Player player, double t, const Vector& x,
                       const Vector& z, const Vector& own, const Vector& opponent) {
    return player == Player::first
               ? eval_hamiltonian_unchecked(spec, player, t, x, z, own, opponent)
               : eval_hamiltonian_unchecked(spec, player, t, x, z, opponent, own);
}

}  // namespace

double eval_hamiltonian_unchecked(const GameSpec& spec, Player player, double t,
                                  const Vector& x, const Vector& p, const Vector& u,
                                  const Vector& v) {
    const Vector scaled = spec.sigma_inv(t, x) * spec.drift_f(t, x, u, v);
    return p.dot(scaled) + spec.running_cost[static_cast<std::size_t>(index(player))](t, x, u, v);
}

double eval_hamiltonian(const GameSpec& spec, Player player, double t, const Vector& x,
                        const Vector& p, const Vector& u, const Vector& v) {
    if (!spec.control_box_1.contains(u)) throw DomainError("control u outside U1");
    if (!spec.control_box_2.contains(v)) throw DomainError("control v outside U2");
    if (p.size() != spec.dim_m || x.size() != spec.dim_m) {
        throw DomainError("state or costate dimension does not match the game");
    }
    return eval_hamiltonian_unchecked(spec, player, t, x, p, u, v);
}

double clamp_symmetric_unit(double eta) noexcept {
    if (eta < -1.0) return -1.0;
    if (eta > 1.0) return 1.0;
    return eta;
}

double clamp_unit_interval(double eta) noexcept { return std::min(1.0, std::max(0.0, eta)); }

void LqGameParams::validate() const {
    if (!(gamma[0] > 0.0)) throw DomainError("LQ game requires gamma_1 > 0");
    if (!(rho[1] > 0.0)) throw DomainError("LQ game requires rho_2 > 0");
    for (int p : power) {
        if (p < 0) throw DomainError("LQ running-cost power must be a nonnegative integer");
    }
}

void LinearQuadraticTables::validate() const {
    const auto m = sigma.rows();
    if (m < 1 || m > kMaxDim || sigma.cols() != m) throw DomainError("sigma must be square, 1 <= m <= 4");
    if (drift_state.rows() != m || drift_state.cols() != m) throw DomainError("drift_state must be m x m");
    if (drift_u.rows() != m || drift_u.cols() != box_u.dim()) throw DomainError("drift_u must be m x dim(U)");
    if (drift_v.rows() != m || drift_v.cols() != box_v.dim()) throw DomainError("drift_v must be m x dim(V)");
    if (std::abs(sigma.determinant()) < 1e-14) throw DomainError("sigma must be invertible");
    if (!(gamma[0] > 0.0)) throw DomainError("linear-quadratic game requires gamma_1 > 0");
    if (!(rho[1] > 0.0)) throw DomainError("linear-quadratic game requires rho_2 > 0");
    for (int p : power) {
        if (p < 0) throw DomainError("running-cost power must be a nonnegative integer");
    }
}

StrategyPair lq_feedback(const LqGameParams& params) {
    params.validate();
    const double b = params.b;
    const double c = params.c;
    const double gamma1 = params.gamma[0];
    const double rho2 = params.rho[1];
    StrategyPair out;
    out.first = [b, gamma1](double, const Vector&, const Vector& z1, const Vector&) {
        return make_vector({clamp_symmetric_unit(-b * z1[0] / (2.0 * gamma1))});
    };
    out.second = [c, rho2](double, const Vector&, const Vector&, const Vector& z2) {
        return make_vector({clamp_unit_interval(-c * z2[0] / (2.0 * rho2))});
    };
    return out;
}

namespace {

void attach_lq_costs(GameSpec& spec, const std::array<double, 2>& theta,
                     const std::array<int, 2>& power, const std::array<double, 2>& gamma,
                     const std::array<double, 2>& rho,
                     const std::array<std::vector<double>, 2>& terminal) {
    for (Player p : kPlayers) {
        const auto i = static_cast<std::size_t>(index(p));
        const double th = theta[i];
        const int pw = power[i];
        const double ga = gamma[i];
        const double rh = rho[i];
        spec.running_cost[i] = [th, pw, ga, rh](double, const Vector& x, const Vector& u,
                                                const Vector& v) {
            double state_term = 0.0;
            if (th != 0.0) {
                for (int j = 0; j < x.size(); ++j) state_term += integer_power(x[j], pw);
            }
            return th * state_term + ga * u.squaredNorm() + rh * v.squaredNorm();
        };
        const std::vector<double> coeffs = terminal[i];
        spec.terminal_cost[i] = [coeffs](const Vector& x) {
            double out = 0.0;
            for (int j = 0; j < x.size(); ++j) out += polynomial(coeffs, x[j]);
            return out;
        };
    }
    const int m = spec.dim_m;
    double gamma_exp = 1.0;
    double cost = 0.0;
    for (std::size_t i = 0; i < 2; ++i) {
        gamma_exp = std::max({gamma_exp, static_cast<double>(power[i]),
                              static_cast<double>(polynomial_degree(terminal[i]))});
        const double running = m * std::abs(theta[i]) +
                               std::abs(gamma[i]) * max_abs_square(spec.control_box_1) +
                               std::abs(rho[i]) * max_abs_square(spec.control_box_2);
        cost = std::max({cost, running, m * abs_sum(terminal[i])});
    }
    spec.growth_gamma = gamma_exp;
    spec.cost_growth = std::max(cost, 1e-12);
}

}  // namespace

GameSpec make_linear_quadratic_game(const LinearQuadraticTables& tables, double horizon) {
    tables.validate();
    if (!(horizon > 0.0)) throw DomainError("horizon must be positive");
    const int m = static_cast<int>(tables.sigma.rows());
    GameSpec spec;
    spec.name = "linear_quadratic";
    spec.dim_m = m;
    spec.horizon_T = horizon;
    const Matrix sigma = tables.sigma;
    const Matrix sigma_inv = tables.sigma.inverse();
    spec.sigma = [sigma](double, const Vector&) { return sigma; };
    spec.sigma_inv = [sigma_inv](double, const Vector&) { return sigma_inv; };
    const Matrix a = tables.drift_state;
    const Matrix b = tables.drift_u;
    const Matrix c = tables.drift_v;
    spec.drift_f = [a, b, c](double, const Vector& x, const Vector& u, const Vector& v) {
        Vector out = a * x + b * u + c * v;
        return out;
    };
    spec.control_box_1 = tables.box_u;
    spec.control_box_2 = tables.box_v;
    attach_lq_costs(spec, tables.theta, tables.power, tables.gamma, tables.rho, tables.terminal);

    const Matrix bt = (sigma_inv * b).transpose();
    const Matrix ct = (sigma_inv * c).transpose();
    const double gamma1 = tables.gamma[0];
    const double rho2 = tables.rho[1];
    const Box box_u = tables.box_u;
    const Box box_v = tables.box_v;
    StrategyPair selectors;
    selectors.first = [bt, gamma1, box_u](double, const Vector&, const Vector& z1, const Vector&) {
        Vector raw = -(bt * z1) / (2.0 * gamma1);
        return box_u.clamp(raw);
    };
    selectors.second = [ct, rho2, box_v](double, const Vector&, const Vector&, const Vector& z2) {
        Vector raw = -(ct * z2) / (2.0 * rho2);
        return box_v.clamp(raw);
    };
    spec.best_response = selectors;

    const double max_u = std::sqrt(max_abs_square(box_u));
    const double max_v = std::sqrt(max_abs_square(box_v));
    const double drift = std::max(a.norm(), b.norm() * max_u + c.norm() * max_v);
    spec.drift_growth = std::max(drift, 1e-12);
    spec.scaled_drift_growth = std::max(sigma_inv.norm() * drift, 1e-12);
    spec.sample_box = Box::cube(m, -3.0, 3.0);
    return spec;
}

GameSpec make_lq_game(const LqGameParams& params, double horizon) {
    params.validate();
    LinearQuadraticTables tables;
    tables.sigma = Matrix::Identity(1, 1);
    tables.drift_state = Matrix::Constant(1, 1, params.a);
    tables.drift_u = Matrix::Constant(1, 1, params.b);
    tables.drift_v = Matrix::Constant(1, 1, params.c);
    tables.box_u = Box::cube(1, -1.0, 1.0);
    tables.box_v = Box::cube(1, 0.0, 1.0);
    tables.theta = params.theta;
    tables.power = params.power;
    tables.gamma = params.gamma;
    tables.rho = params.rho;
    tables.terminal = params.terminal;
    GameSpec spec = make_linear_quadratic_game(tables, horizon);
    spec.name = "lq";
    spec.best_response = lq_feedback(params);
    return spec;
}

GameSpec make_gbm_extension_game(const LqGameParams& params, double horizon) {
    params.validate();
    if (!(horizon > 0.0)) throw DomainError("horizon must be positive");
    GameSpec spec;
    spec.name = "gbm_extension";
    spec.dim_m = 1;
    spec.horizon_T = horizon;
    spec.sigma = [](double, const Vector& x) { return Matrix::Constant(1, 1, x[0]); };
    spec.sigma_inv = [](double, const Vector& x) { return Matrix::Constant(1, 1, 1.0 / x[0]); };
    spec.drift_f = [](double, const Vector& x, const Vector& u, const Vector& v) {
        return make_vector({x[0] * (u[0] + v[0])});
    };
    spec.control_box_1 = Box::cube(1, -1.0, 1.0);
    spec.control_box_2 = Box::cube(1, 0.0, 1.0);
    attach_lq_costs(spec, params.theta, params.power, params.gamma, params.rho, params.terminal);
    const double gamma1 = params.gamma[0];
    const double rho2 = params.rho[1];
    StrategyPair selectors;
    selectors.first = [gamma1](double, const Vector&, const Vector& z1, const Vector&) {
        return make_vector({clamp_symmetric_unit(-z1[0] / (2.0 * gamma1))});
    };
    selectors.second = [rho2](double, const Vector&, const Vector&, const Vector& z2) {
        return make_vector({clamp_unit_interval(-z2[0] / (2.0 * rho2))});
    };
    spec.best_response = selectors;
    spec.drift_growth = 2.0;
    spec.scaled_drift_growth = 2.0;
    spec.sample_box = Box::cube(1, 0.1, 3.0);
    return spec;
}

GameSpec make_builtin_game(const std::string& name, const LqGameParams& params, double horizon) {
    if (name == "lq") return make_lq_game(params, horizon);
    if (name == "gbm_extension") return make_gbm_extension_game(params, horizon);
    throw ConfigError("unknown builtin game '" + name + "'");
}

Vector best_response_grid(const GameSpec& spec, Player player, double t, const Vector& x,
                          const Vector& z_i, const Vector& opponent_value, int grid_n) {
    if (grid_n < 2) throw DomainError("best_response_grid requires grid_n >= 2");
    const Box& own_box = spec.control_box(player);
    const Box& other_box = spec.control_box(player == Player::first ? Player::second : Player::first);
    if (!other_box.contains(opponent_value)) throw DomainError("opponent control outside its box");
    double best = std::numeric_limits<double>::infinity();
    Vector argmin = own_box.lo;
    for_each_grid_point(own_box, grid_n, [&](const Vector& candidate) {
        const double h = own_hamiltonian(spec, player, t, x, z_i, candidate, opponent_value);
        if (h < best) {
            best = h;
            argmin = candidate;
        }
    });
    return argmin;
}

namespace {

/// Largest h^2/8 * |second difference| / h^2 along any grid axis: the gap
/// between the grid minimum and the continuous minimum of a C^2 function.
double curvature_slack(const GameSpec& spec, Player player, double t, const Vector& x,
                       const Vector& z, const Vector& opponent, int grid_n) {
    const Box& box = spec.control_box(player);
    double slack = 0.0;
    for_each_grid_point(box, grid_n, [&](const Vector& point) {
        for (int j = 0; j < box.dim(); ++j) {
            const double h = (box.hi[j] - box.lo[j]) / (grid_n - 1);
            if (h <= 0.0 || point[j] - h < box.lo[j] - 1e-12 || point[j] + h > box.hi[j] + 1e-12) {
                continue;
            }
            Vector lo = point;
            Vector hi = point;
            lo[j] -= h;
            hi[j] += h;
            const double d2 = own_hamiltonian(spec, player, t, x, z, hi, opponent) -
                              2.0 * own_hamiltonian(spec, player, t, x, z, point, opponent) +
                              own_hamiltonian(spec, player, t, x, z, lo, opponent);
            slack = std::max(slack, std::abs(d2) / 8.0);
        }
    });
    return slack;
}

}  // namespace

IsaacsReport check_isaacs(const GameSpec& spec, int sample_count, int grid_n, std::uint64_t seed,
                          double z_radius) {
    if (!spec.best_response) throw ConfigError("check_isaacs: game has no best_response maps");
    if (grid_n < 2) throw DomainError("check_isaacs requires grid_n >= 2");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const Box z_box = Box::cube(spec.dim_m, -z_radius, z_radius);

    IsaacsReport report;
    report.sample_count = sample_count;
    report.grid_n = grid_n;
    report.samples.reserve(static_cast<std::size_t>(sample_count));
    for (int s = 0; s < sample_count; ++s) {
        IsaacsSample sample;
        sample.t = spec.horizon_T * unit(rng);
        sample.x = uniform_in(spec.sample_box, rng);
        sample.z1 = uniform_in(z_box, rng);
        sample.z2 = uniform_in(z_box, rng);
        const Vector u_star = spec.best_response->first(sample.t, sample.x, sample.z1, sample.z2);
        const Vector v_star = spec.best_response->second(sample.t, sample.x, sample.z1, sample.z2);
        if (!spec.control_box_1.contains(u_star) || !spec.control_box_2.contains(v_star)) {
            throw DomainError("check_isaacs: selector value outside its control box");
        }
        for (Player p : kPlayers) {
            const Vector& z = p == Player::first ? sample.z1 : sample.z2;
            const Vector& own = p == Player::first ? u_star : v_star;
            const Vector& other = p == Player::first ? v_star : u_star;
            const double at_selector = own_hamiltonian(spec, p, sample.t, sample.x, z, own, other);
            double grid_min = std::numeric_limits<double>::infinity();
            for_each_grid_point(spec.control_box(p), grid_n, [&](const Vector& candidate) {
                grid_min = std::min(grid_min,
                                    own_hamiltonian(spec, p, sample.t, sample.x, z, candidate, other));
            });
            const double violation = std::max(0.0, at_selector - grid_min);
            sample.violation[static_cast<std::size_t>(index(p))] = violation;
            report.max_violation = std::max(report.max_violation, violation);
            report.grid_slack = std::max(
                report.grid_slack, curvature_slack(spec, p, sample.t, sample.x, z, other, grid_n));
        }
        report.samples.push_back(std::move(sample));
    }
    report.pass = report.max_violation <= 1e-9 + report.grid_slack;
    return report;
}

SpecValidationReport validate_spec(const GameSpec& spec, int sample_count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const Box z_box = Box::cube(spec.dim_m, -5.0, 5.0);
    SpecValidationReport report;
    report.min_ellipticity = std::numeric_limits<double>::infinity();
    const int m = spec.dim_m;
    for (int s = 0; s < sample_count; ++s) {
        const double t = spec.horizon_T * unit(rng);
        const Vector x = uniform_in(spec.sample_box, rng);
        const Vector u = uniform_in(spec.control_box_1, rng);
        const Vector v = uniform_in(spec.control_box_2, rng);
        const Matrix sig = spec.sigma(t, x);
        const Matrix sig_inv = spec.sigma_inv(t, x);
        const Matrix prod = sig * sig_inv;
        const Matrix id = Matrix::Identity(m, m);
        report.max_inverse_error = std::max(report.max_inverse_error, (prod - id).cwiseAbs().maxCoeff());

        const Matrix gram = sig * sig.transpose();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(Eigen::MatrixXd(gram), Eigen::EigenvaluesOnly);
        report.min_ellipticity = std::min(report.min_ellipticity, eig.eigenvalues().minCoeff());
        report.max_ellipticity = std::max(report.max_ellipticity, eig.eigenvalues().maxCoeff());

        const Vector f = spec.drift_f(t, x, u, v);
        const double lin = 1.0 + x.norm();
        const double poly = 1.0 + std::pow(x.norm(), spec.growth_gamma);
        report.max_drift_ratio = std::max(report.max_drift_ratio, f.norm() / (spec.drift_growth * lin));
        const Vector scaled = sig_inv * f;
        report.max_scaled_drift_ratio =
            std::max(report.max_scaled_drift_ratio, scaled.norm() / (spec.scaled_drift_growth * lin));
        for (std::size_t i = 0; i < 2; ++i) {
            const double h = std::abs(spec.running_cost[i](t, x, u, v));
            const double g = std::abs(spec.terminal_cost[i](x));
            report.max_cost_ratio =
                std::max({report.max_cost_ratio, h / (spec.cost_growth * poly), g / (spec.cost_growth * poly)});
        }
        if (spec.best_response) {
            const Vector z1 = uniform_in(z_box, rng);
            const Vector z2 = uniform_in(z_box, rng);
            const bool ok = spec.control_box_1.contains(spec.best_response->first(t, x, z1, z2)) &&
                            spec.control_box_2.contains(spec.best_response->second(t, x, z1, z2));
            report.selectors_in_box = report.selectors_in_box && ok;
        }
    }
    constexpr double kRatioTol = 1.0 + 1e-12;
    report.pass = report.max_inverse_error <= 1e-10 && report.max_drift_ratio <= kRatioTol &&
                  report.max_scaled_drift_ratio <= kRatioTol && report.max_cost_ratio <= kRatioTol &&
                  report.selectors_in_box;
    return report;
}

}  // namespace nashbsde
