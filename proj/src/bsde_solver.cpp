#include "nashbsde/bsde_solver.hpp"

#include "nashbsde/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>

namespace nashbsde {

namespace {

std::vector<double> gather_knot(const PathBundle& bundle, int knot) {
    const auto d = static_cast<std::size_t>(bundle.dim);
    std::vector<double> pts(static_cast<std::size_t>(bundle.n_paths) * d);
    for (int p = 0; p < bundle.n_paths; ++p) {
        const auto s = bundle.state_span(p, knot);
        std::copy(s.begin(), s.end(), pts.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(p) * d));
    }
    return pts;
}

std::string knot_label(const TimeGrid& grid, int k) {
    return "knot " + std::to_string(k) + " (t=" + std::to_string(grid.knot(k)) + ")";
}

Vector point_at(const std::vector<double>& pts, std::size_t row, int dim) {
    Vector x(dim);
    for (int j = 0; j < dim; ++j) x[j] = pts[row * static_cast<std::size_t>(dim) + static_cast<std::size_t>(j)];
    return x;
}

double sup_norm_diff(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace

double BsdeDiagnostics::picard_monotone_fraction() const {
    int eligible = 0;
    int monotone = 0;
    for (const auto& r : picard_residuals) {
        if (r.size() < 3) {
            ++eligible;
            ++monotone;
            continue;
        }
        ++eligible;
        bool ok = true;
        for (std::size_t p = 2; p < r.size(); ++p) ok = ok && r[p] <= r[p - 1];
        if (ok) ++monotone;
    }
    return eligible == 0 ? 1.0 : static_cast<double>(monotone) / eligible;
}

BsdeSolution solve_coupled(const GameSpec& spec, const PathBundle& bundle,
                           const RegressionBasis& basis, const std::optional<MollifyParams>& mollify,
                           const PicardOptions& picard) {
    if (bundle.scheme != SchemeTag::reference) {
        throw ContractError("solve_coupled requires a reference-measure bundle");
    }
    if (!spec.best_response) throw ConfigError("solve_coupled: game has no best_response maps");
    if (bundle.dim != spec.dim_m) throw DomainError("bundle dimension does not match the game");
    if (picard.max_iter < 1) throw ConfigError("picard.max_iter must be >= 1");
    if (mollify) mollify->validate();
    basis.validate(spec.dim_m);

    const TimeGrid& grid = bundle.grid;
    const int n_steps = grid.n_steps;
    const int m = spec.dim_m;
    const auto n = static_cast<std::size_t>(bundle.n_paths);
    const double dt = grid.dt();

    BsdeSolution sol;
    sol.grid = grid;
    sol.basis = basis;
    sol.dim = m;
    sol.mollify = mollify;
    sol.knot_boxes.resize(static_cast<std::size_t>(n_steps + 1));
    for (auto& c : sol.coeffs_y) c.resize(static_cast<std::size_t>(n_steps + 1));
    for (auto& c : sol.coeffs_z) c.resize(static_cast<std::size_t>(n_steps));
    auto& diag = sol.diagnostics;
    diag.picard_residuals.resize(static_cast<std::size_t>(n_steps));
    diag.picard_iterations.assign(static_cast<std::size_t>(n_steps), 0);
    diag.picard_converged.assign(static_cast<std::size_t>(n_steps), false);
    diag.condition_numbers.assign(static_cast<std::size_t>(n_steps + 1), 1.0);

    // Terminal knot: exact g^i pathwise, its projection stored as w^i(T, .).
    std::array<std::vector<double>, 2> y_next;
    {
        const auto pts = gather_knot(bundle, n_steps);
        KnotRegression reg(basis, pts, m, knot_label(grid, n_steps));
        sol.knot_boxes.back() = reg.box();
        diag.condition_numbers.back() = reg.condition_number();
        diag.reduced_cells += reg.reduced_cells();
        std::vector<double> fitted(n);
        for (std::size_t i = 0; i < 2; ++i) {
            y_next[i].resize(n);
            for (std::size_t p = 0; p < n; ++p) y_next[i][p] = spec.terminal_cost[i](point_at(pts, p, m));
            sol.coeffs_y[i].back() = reg.fit(y_next[i]);
            reg.predict(sol.coeffs_y[i].back(), fitted);
            double worst = 0.0;
            for (std::size_t p = 0; p < n; ++p) worst = std::max(worst, std::abs(fitted[p] - y_next[i][p]));
            diag.terminal_residual[i] = worst;
        }
    }

    std::array<std::vector<double>, 2> y_cur{std::vector<double>(n), std::vector<double>(n)};
    std::array<std::vector<double>, 2> target{std::vector<double>(n), std::vector<double>(n)};
    std::array<std::vector<std::vector<double>>, 2> z_val;
    for (auto& z : z_val) z.assign(static_cast<std::size_t>(m), std::vector<double>(n));
    std::vector<double> z_target(n);

    for (int k = n_steps - 1; k >= 0; --k) {
        const auto ku = static_cast<std::size_t>(k);
        const double t = grid.knot(k);
        const auto pts = gather_knot(bundle, k);
        KnotRegression reg(basis, pts, m, knot_label(grid, k));
        sol.knot_boxes[ku] = reg.box();
        diag.condition_numbers[ku] = reg.condition_number();
        diag.reduced_cells += reg.reduced_cells();

        std::array<Eigen::VectorXd, 2> coeff;
        for (std::size_t i = 0; i < 2; ++i) {
            const auto& prev_box = sol.knot_boxes[ku + 1];
            const auto& prev_coeff = sol.coeffs_y[i][ku + 1];
            for (std::size_t p = 0; p < n; ++p) {
                y_cur[i][p] = evaluate_expansion(basis, prev_box, prev_coeff, point_at(pts, p, m));
            }
            coeff[i] = reg.fit(y_cur[i]);
        }

        std::array<std::vector<Eigen::VectorXd>, 2> z_coeff;
        auto& residuals = diag.picard_residuals[ku];
        for (int iter = 1; iter <= picard.max_iter; ++iter) {
            for (std::size_t i = 0; i < 2; ++i) {
                z_coeff[i].assign(static_cast<std::size_t>(m), Eigen::VectorXd());
                for (int j = 0; j < m; ++j) {
                    for (std::size_t p = 0; p < n; ++p) {
                        const double db = bundle.increment_span(static_cast<int>(p), k)[static_cast<std::size_t>(j)];
                        z_target[p] = (y_next[i][p] - y_cur[i][p]) * db / dt;
                    }
                    z_coeff[i][static_cast<std::size_t>(j)] = reg.fit(z_target);
                    reg.predict(z_coeff[i][static_cast<std::size_t>(j)], z_val[i][static_cast<std::size_t>(j)]);
                }
            }
            parallel_for(n, [&](std::size_t begin, std::size_t end) {
                Vector z1(m), z2(m);
                for (std::size_t p = begin; p < end; ++p) {
                    for (int j = 0; j < m; ++j) {
                        z1[j] = z_val[0][static_cast<std::size_t>(j)][p];
                        z2[j] = z_val[1][static_cast<std::size_t>(j)][p];
                    }
                    const Vector x = point_at(pts, p, m);
                    const auto h = mollify ? mollified_generators(spec, t, x, z1, z2, *mollify)
                                           : coupled_generators(spec, t, x, z1, z2);
                    for (std::size_t i = 0; i < 2; ++i) {
                        if (!std::isfinite(h[i])) {
                            throw NumericalError("non-finite generator at path " + std::to_string(p) +
                                                 ", " + knot_label(grid, k));
                        }
                        target[i][p] = y_next[i][p] + dt * h[i];
                    }
                }
            });
            double change = 0.0;
            double scale = 1.0;
            for (std::size_t i = 0; i < 2; ++i) {
                Eigen::VectorXd updated = reg.fit(target[i]);
                change = std::max(change, sup_norm_diff(updated, coeff[i]));
                scale = std::max(scale, updated.cwiseAbs().maxCoeff());
                coeff[i] = std::move(updated);
                reg.predict(coeff[i], y_cur[i]);
            }
            residuals.push_back(change);
            diag.picard_iterations[ku] = iter;
            if (change <= picard.tol * scale) {
                diag.picard_converged[ku] = true;
                break;
            }
        }
        if (!diag.picard_converged[ku]) diag.picard_warning = true;

        for (std::size_t i = 0; i < 2; ++i) {
            sol.coeffs_y[i][ku] = coeff[i];
            sol.coeffs_z[i][ku] = z_coeff[i];
            double energy = 0.0;
            for (int j = 0; j < m; ++j) {
                for (double z : z_val[i][static_cast<std::size_t>(j)]) energy += z * z;
            }
            diag.z_energy[i] += energy / static_cast<double>(n) * dt;
            if (k == 0) diag.y0_std_error[i] = sample_stats(target[i]).std_error;
        }
        std::swap(y_next, y_cur);
    }
    return sol;
}

double eval_w(const BsdeSolution& sol, Player player, double t, const Vector& x) {
    const int k = sol.grid.knot_at_or_before(t);
    const auto ku = static_cast<std::size_t>(k);
    return evaluate_expansion(sol.basis, sol.knot_boxes[ku],
                              sol.coeffs_y[static_cast<std::size_t>(index(player))][ku], x);
}

Vector eval_z(const BsdeSolution& sol, Player player, double t, const Vector& x) {
    const int k = std::min(sol.grid.knot_at_or_before(t), sol.grid.n_steps - 1);
    const auto ku = static_cast<std::size_t>(k);
    const auto& coeffs = sol.coeffs_z[static_cast<std::size_t>(index(player))][ku];
    Vector z(sol.dim);
    for (int j = 0; j < sol.dim; ++j) {
        z[j] = evaluate_expansion(sol.basis, sol.knot_boxes[ku], coeffs[static_cast<std::size_t>(j)], x);
    }
    return z;
}

ZField BsdeSolution::z_field() const {
    auto self = std::make_shared<const BsdeSolution>(*this);
    return [self](double t, const Vector& x, Vector& z1, Vector& z2) {
        z1 = eval_z(*self, Player::first, t, x);
        z2 = eval_z(*self, Player::second, t, x);
    };
}

bool BsdeSolution::extrapolates(double t, const Vector& x) const {
    const int k = grid.knot_at_or_before(t);
    return !knot_boxes[static_cast<std::size_t>(k)].contains(x);
}

GrowthReport growth_diagnostic(const BsdeSolution& sol, std::span<const double> radii) {
    if (radii.size() < 2) throw DomainError("growth_diagnostic needs at least two radii");
    const int m = sol.dim;
    std::vector<Vector> directions;
    for (int j = 0; j < m; ++j) {
        Vector e = Vector::Zero(m);
        e[j] = 1.0;
        directions.push_back(e);
        directions.push_back(-e);
    }
    if (m > 1) {
        const Vector diag = Vector::Constant(m, 1.0 / std::sqrt(static_cast<double>(m)));
        directions.push_back(diag);
        directions.push_back(-diag);
    }

    GrowthReport report;
    report.radii.assign(radii.begin(), radii.end());
    for (Player p : kPlayers) {
        const auto i = static_cast<std::size_t>(index(p));
        std::vector<double> log_r, log_w;
        for (double r : radii) {
            if (!(r > 0.0)) throw DomainError("growth_diagnostic radii must be positive");
            double worst = 0.0;
            for (int k = 1; k <= sol.grid.n_steps; ++k) {
                if (sol.knot_boxes[static_cast<std::size_t>(k)].degenerate) continue;
                for (const auto& e : directions) {
                    worst = std::max(worst, std::abs(eval_w(sol, p, sol.grid.knot(k), r * e)));
                }
            }
            report.max_abs[i].push_back(worst);
            log_r.push_back(std::log(r));
            log_w.push_back(std::log(std::max(worst, std::numeric_limits<double>::min())));
        }
        const double n = static_cast<double>(log_r.size());
        double mx = 0.0, my = 0.0;
        for (std::size_t k = 0; k < log_r.size(); ++k) {
            mx += log_r[k];
            my += log_w[k];
        }
        mx /= n;
        my /= n;
        double sxy = 0.0, sxx = 0.0;
        for (std::size_t k = 0; k < log_r.size(); ++k) {
            sxy += (log_r[k] - mx) * (log_w[k] - my);
            sxx += (log_r[k] - mx) * (log_r[k] - mx);
        }
        report.exponent[i] = sxy / sxx;
        report.constant[i] = std::exp(my - report.exponent[i] * mx);
    }
    return report;
}

bool growth_stable(const GrowthReport& a, const GrowthReport& b, double rel_tol) {
    for (std::size_t i = 0; i < 2; ++i) {
        const double scale = std::max(std::abs(a.exponent[i]), std::abs(b.exponent[i]));
        if (std::abs(a.exponent[i] - b.exponent[i]) > rel_tol * scale + 1e-9) return false;
    }
    return true;
}

namespace {

nlohmann::json vec_json(const Eigen::VectorXd& v) {
    return nlohmann::json(std::vector<double>(v.data(), v.data() + v.size()));
}

nlohmann::json vec_json(const Vector& v) {
    return nlohmann::json(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd dyn_from_json(const nlohmann::json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Vector small_from_json(const nlohmann::json& j) {
    const auto v = j.get<std::vector<double>>();
    Vector out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t k = 0; k < v.size(); ++k) out[static_cast<Eigen::Index>(k)] = v[k];
    return out;
}

}  // namespace

nlohmann::json to_json(const BsdeSolution& sol) {
    using nlohmann::json;
    json doc;
    doc["schema_version"] = 1;
    doc["kind"] = "bsde_solution";
    doc["grid"] = {{"t0", sol.grid.t0}, {"T", sol.grid.T}, {"n_steps", sol.grid.n_steps}};
    doc["basis"] = {{"kind", sol.basis.kind == BasisKind::global_poly ? "global_poly" : "local_partition"},
                    {"degree", sol.basis.degree},
                    {"cells", sol.basis.cells_per_axis}};
    doc["dim"] = sol.dim;
    json boxes = json::array();
    for (const auto& b : sol.knot_boxes) {
        boxes.push_back({{"lo", vec_json(b.lo)}, {"hi", vec_json(b.hi)}, {"degenerate", b.degenerate}});
    }
    doc["knot_boxes"] = boxes;
    json cy = json::array();
    json cz = json::array();
    for (std::size_t i = 0; i < 2; ++i) {
        json per_knot = json::array();
        for (const auto& c : sol.coeffs_y[i]) per_knot.push_back(vec_json(c));
        cy.push_back(per_knot);
        json per_knot_z = json::array();
        for (const auto& coords : sol.coeffs_z[i]) {
            json per_coord = json::array();
            for (const auto& c : coords) per_coord.push_back(vec_json(c));
            per_knot_z.push_back(per_coord);
        }
        cz.push_back(per_knot_z);
    }
    doc["coeffs_y"] = cy;
    doc["coeffs_z"] = cz;
    if (sol.mollify) {
        doc["mollify"] = {{"n", sol.mollify->n},
                          {"quad_points", sol.mollify->quad_points},
                          {"radius", sol.mollify->mollifier_radius}};
    } else {
        doc["mollify"] = nullptr;
    }
    const auto& d = sol.diagnostics;
    doc["diagnostics"] = {{"picard_residuals", d.picard_residuals},
                          {"picard_iterations", d.picard_iterations},
                          {"picard_converged", d.picard_converged},
                          {"picard_warning", d.picard_warning},
                          {"condition_numbers", d.condition_numbers},
                          {"reduced_cells", d.reduced_cells},
                          {"z_energy", d.z_energy},
                          {"terminal_residual", d.terminal_residual},
                          {"y0_std_error", d.y0_std_error}};
    return doc;
}

BsdeSolution solution_from_json(const nlohmann::json& doc) {
    if (doc.value("schema_version", 0) != 1 || doc.value("kind", std::string()) != "bsde_solution") {
        throw ConfigError("not a version-1 bsde_solution document");
    }
    BsdeSolution sol;
    const auto& g = doc.at("grid");
    sol.grid = TimeGrid(g.at("t0").get<double>(), g.at("T").get<double>(), g.at("n_steps").get<int>());
    const auto& b = doc.at("basis");
    sol.basis.kind = b.at("kind").get<std::string>() == "global_poly" ? BasisKind::global_poly
                                                                       : BasisKind::local_partition;
    sol.basis.degree = b.at("degree").get<int>();
    sol.basis.cells_per_axis = b.at("cells").get<int>();
    sol.dim = doc.at("dim").get<int>();
    for (const auto& box : doc.at("knot_boxes")) {
        KnotBox kb;
        kb.lo = small_from_json(box.at("lo"));
        kb.hi = small_from_json(box.at("hi"));
        kb.degenerate = box.at("degenerate").get<bool>();
        sol.knot_boxes.push_back(kb);
    }
    for (std::size_t i = 0; i < 2; ++i) {
        for (const auto& c : doc.at("coeffs_y").at(i)) sol.coeffs_y[i].push_back(dyn_from_json(c));
        for (const auto& coords : doc.at("coeffs_z").at(i)) {
            std::vector<Eigen::VectorXd> per_coord;
            for (const auto& c : coords) per_coord.push_back(dyn_from_json(c));
            sol.coeffs_z[i].push_back(std::move(per_coord));
        }
    }
    if (!doc.at("mollify").is_null()) {
        const auto& mo = doc.at("mollify");
        sol.mollify = MollifyParams{mo.at("n").get<int>(), mo.at("quad_points").get<int>(),
                                    mo.at("radius").get<double>()};
    }
    const auto& d = doc.at("diagnostics");
    auto& diag = sol.diagnostics;
    diag.picard_residuals = d.at("picard_residuals").get<std::vector<std::vector<double>>>();
    diag.picard_iterations = d.at("picard_iterations").get<std::vector<int>>();
    diag.picard_converged = d.at("picard_converged").get<std::vector<bool>>();
    diag.picard_warning = d.at("picard_warning").get<bool>();
    diag.condition_numbers = d.at("condition_numbers").get<std::vector<double>>();
    diag.reduced_cells = d.at("reduced_cells").get<int>();
    diag.z_energy = d.at("z_energy").get<std::array<double, 2>>();
    diag.terminal_residual = d.at("terminal_residual").get<std::array<double, 2>>();
    diag.y0_std_error = d.at("y0_std_error").get<std::array<double, 2>>();
    return sol;
}

}  // namespace nashbsde
