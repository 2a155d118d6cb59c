#include "nashbsde/payoff_nash.hpp"

#include "nashbsde/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

namespace nashbsde {

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string vector_text(const Vector& v) {
    std::string s;
    for (int j = 0; j < v.size(); ++j) {
        if (j) s += ' ';
        char buf[32];
        std::snprintf(buf, sizeof buf, "%g", v[j]);
        s += buf;
    }
    return s;
}

void non_finite_cost(int path) {
    throw NumericalError("non-finite cost accumulation on path " + std::to_string(path));
}

std::array<PayoffEstimate, 2> summarize(const CostSamples& samples, PayoffMethod method) {
    std::array<PayoffEstimate, 2> out;
    for (Player p : kPlayers) {
        const auto i = static_cast<std::size_t>(index(p));
        const SampleStats s = sample_stats(samples.values[i]);
        out[i] = PayoffEstimate{p, s.mean, s.std_error, static_cast<int>(samples.values[i].size()), method};
    }
    return out;
}

std::vector<double> paired_difference(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> d(a.size());
    for (std::size_t k = 0; k < a.size(); ++k) d[k] = a[k] - b[k];
    return d;
}

bool weight_mean_ok(const SampleStats& w) {
    return std::abs(w.mean - 1.0) <= 4.0 * w.std_error + 1e-12;
}

}  // namespace

std::string to_string(PayoffMethod method) {
    return method == PayoffMethod::girsanov_weighted ? "girsanov_weighted" : "direct_controlled";
}

CostSamples cost_samples(const GameSpec& spec, const PathBundle& bundle,
                         const StrategyPair& strategies, const ZField& z_field) {
    const bool weighted = bundle.scheme == SchemeTag::reference;
    const auto n = static_cast<std::size_t>(bundle.n_paths);
    const TimeGrid& grid = bundle.grid;
    const double dt = grid.dt();
    CostSamples out;
    for (auto& v : out.values) v.resize(n);
    out.weights.assign(n, 1.0);
    parallel_for(n, [&](std::size_t begin, std::size_t end) {
        Vector u, v;
        for (std::size_t p = begin; p < end; ++p) {
            const int path = static_cast<int>(p);
            double log_w = 0.0;
            std::array<double, 2> running{0.0, 0.0};
            for (int k = 0; k < grid.n_steps; ++k) {
                const double t = grid.knot(k);
                const Vector x = bundle.state(path, k);
                evaluate_controls(strategies, z_field, t, x, u, v);
                if (weighted) {
                    const Vector eta = spec.sigma_inv(t, x) * spec.drift_f(t, x, u, v);
                    log_w += eta.dot(bundle.increment(path, k)) - 0.5 * eta.squaredNorm() * dt;
                }
                for (std::size_t i = 0; i < 2; ++i) running[i] += spec.running_cost[i](t, x, u, v) * dt;
            }
            const Vector xt = bundle.state(path, grid.n_steps);
            const double w = weighted ? std::exp(log_w) : 1.0;
            if (!std::isfinite(w)) non_finite_cost(path);
            out.weights[p] = w;
            for (std::size_t i = 0; i < 2; ++i) {
                const double value = w * (running[i] + spec.terminal_cost[i](xt));
                if (!std::isfinite(value)) non_finite_cost(path);
                out.values[i][p] = value;
            }
        }
    });
    return out;
}

std::array<PayoffEstimate, 2> estimate_payoff(const GameSpec& spec, const PathBundle& reference,
                                              const StrategyPair& strategies, const ZField& z_field) {
    if (reference.scheme != SchemeTag::reference) {
        throw ContractError("Girsanov payoff estimate requires a reference-measure bundle");
    }
    return summarize(cost_samples(spec, reference, strategies, z_field), PayoffMethod::girsanov_weighted);
}

std::array<PayoffEstimate, 2> estimate_payoff(const GameSpec& spec, const StrategyPair& strategies,
                                              const ZField& z_field, const TimeGrid& grid,
                                              const Vector& x0, int n_paths, std::uint64_t seed,
                                              PayoffMethod method) {
    if (method == PayoffMethod::girsanov_weighted) {
        const PathBundle ref = simulate_reference(spec, grid, x0, n_paths, seed);
        return estimate_payoff(spec, ref, strategies, z_field);
    }
    const PathBundle ctl = simulate_controlled(spec, grid, x0, strategies, z_field, n_paths, seed);
    return summarize(cost_samples(spec, ctl, strategies, z_field), PayoffMethod::direct_controlled);
}

W0Check verify_w0_equals_j(const GameSpec& spec, const BsdeSolution& sol,
                           const StrategyPair& strategies, const Vector& x0, int n_paths,
                           std::uint64_t seed, double rel_allowance) {
    const auto est = estimate_payoff(spec, strategies, sol.z_field(), sol.grid, x0, n_paths, seed,
                                     PayoffMethod::girsanov_weighted);
    W0Check out;
    out.pass = true;
    for (Player p : kPlayers) {
        const auto i = static_cast<std::size_t>(index(p));
        out.w0[i] = eval_w(sol, p, sol.grid.t0, x0);
        out.payoff[i] = est[i].value;
        out.std_error[i] = est[i].std_error;
        out.allowance[i] = 3.0 * est[i].std_error + rel_allowance * std::abs(est[i].value);
        out.player_pass[i] = std::abs(out.w0[i] - out.payoff[i]) <= out.allowance[i];
        out.pass = out.pass && out.player_pass[i];
    }
    return out;
}

std::string to_string(DeviationKind kind) {
    switch (kind) {
        case DeviationKind::constants: return "constants";
        case DeviationKind::bang_bang: return "bang_bang";
        case DeviationKind::perturbed_feedback: return "perturbed_feedback";
    }
    return "unknown";
}

DeviationKind deviation_kind_from_string(const std::string& name) {
    if (name == "constants") return DeviationKind::constants;
    if (name == "bang_bang") return DeviationKind::bang_bang;
    if (name == "perturbed_feedback") return DeviationKind::perturbed_feedback;
    throw ConfigError("unknown deviation kind '" + name + "'");
}

DeviationFamily make_deviation_family(const GameSpec& spec, Player player, DeviationKind kind,
                                      int count, std::uint64_t seed,
                                      const FeedbackControl& equilibrium) {
    if (count < 1) throw ConfigError("deviation count must be >= 1");
    const Box box = spec.control_box(player);
    const int d = box.dim();
    const double horizon = spec.horizon_T;
    DeviationFamily family;

    switch (kind) {
        case DeviationKind::constants: {
            long total = 1;
            for (int j = 0; j < d; ++j) total *= count;
            for (long idx = 0; idx < total; ++idx) {
                Vector c(d);
                long rest = idx;
                for (int j = d - 1; j >= 0; --j) {
                    const long a = rest % count;
                    rest /= count;
                    c[j] = count == 1 ? box.midpoint()[j]
                                      : box.lo[j] + (box.hi[j] - box.lo[j]) * static_cast<double>(a) / (count - 1);
                }
                family.push_back({player, kind, "constant " + vector_text(c),
                                  [c](double, const Vector&, const Vector&, const Vector&) { return c; }});
            }
            break;
        }
        case DeviationKind::bang_bang: {
            for (int j = 1; j <= count; ++j) {
                const bool start_low = j % 2 == 1;
                const Vector lo = box.lo;
                const Vector hi = box.hi;
                const double seg = horizon / (j + 1);
                family.push_back({player, kind,
                                  std::to_string(j) + " switch" + (j > 1 ? "es" : "") + " from " +
                                      (start_low ? "lo" : "hi"),
                                  [=](double t, const Vector&, const Vector&, const Vector&) {
                                      const int passed = std::min(j, static_cast<int>(std::floor(t / seg + 1e-12)));
                                      const bool low = (passed % 2 == 0) == start_low;
                                      return low ? lo : hi;
                                  }});
            }
            break;
        }
        case DeviationKind::perturbed_feedback: {
            if (!equilibrium) throw ConfigError("perturbed_feedback deviations need the equilibrium map");
            constexpr int kSegments = 10;
            std::mt19937_64 rng(seed ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(label(player))));
            std::uniform_real_distribution<double> unit(-1.0, 1.0);
            const Vector amplitude = 0.1 * box.width();
            for (int j = 1; j <= count; ++j) {
                std::vector<Vector> offsets;
                for (int s = 0; s < kSegments; ++s) {
                    Vector o(d);
                    for (int a = 0; a < d; ++a) o[a] = amplitude[a] * unit(rng);
                    offsets.push_back(o);
                }
                const double seg = horizon / kSegments;
                family.push_back({player, kind, "perturbed equilibrium #" + std::to_string(j),
                                  [=](double t, const Vector& x, const Vector& z1, const Vector& z2) {
                                      const int s = std::clamp(static_cast<int>(std::floor(t / seg)), 0, kSegments - 1);
                                      return box.clamp(equilibrium(t, x, z1, z2) + offsets[static_cast<std::size_t>(s)]);
                                  }});
            }
            break;
        }
    }
    return family;
}

DeviationFamily standard_family(const GameSpec& spec, const StrategyPair& equilibrium,
                                std::uint64_t seed, const FamilySpec& counts) {
    DeviationFamily all;
    for (Player p : kPlayers) {
        const auto& eq = equilibrium[p];
        const std::array<std::pair<DeviationKind, int>, 3> parts{
            std::pair{DeviationKind::constants, counts.constants},
            std::pair{DeviationKind::bang_bang, counts.bang_bang},
            std::pair{DeviationKind::perturbed_feedback, counts.perturbed}};
        for (const auto& [kind, count] : parts) {
            if (count == 0) continue;
            auto f = make_deviation_family(spec, p, kind, count, seed, eq);
            all.insert(all.end(), f.begin(), f.end());
        }
    }
    return all;
}

bool nash_pass_at(const NashReport& report, double rel_tol) {
    for (const auto& row : report.rows) {
        const double j_eq = report.equilibrium_girsanov[static_cast<std::size_t>(index(row.player))].value;
        const double tol = std::max(3.0 * row.paired_std_error, rel_tol * std::abs(j_eq));
        if (row.improvement > tol) return false;
    }
    return true;
}

NashReport deviation_test(const GameSpec& spec, const BsdeSolution& sol,
                          const StrategyPair& equilibrium, const DeviationFamily& family,
                          const TimeGrid& grid, const Vector& x0, int n_paths, std::uint64_t seed,
                          double rel_tol) {
    if (family.empty()) throw ConfigError("deviation family is empty");
    const ZField z_field = sol.z_field();
    const PathBundle reference = simulate_reference(spec, grid, x0, n_paths, seed);

    NashReport report;
    report.rel_tol = rel_tol;
    const CostSamples eq = cost_samples(spec, reference, equilibrium, z_field);
    report.equilibrium_girsanov = summarize(eq, PayoffMethod::girsanov_weighted);
    report.equilibrium_direct =
        estimate_payoff(spec, equilibrium, z_field, grid, x0, n_paths, seed, PayoffMethod::direct_controlled);
    const SampleStats w_eq = sample_stats(eq.weights);
    report.weight_mean = w_eq.mean;
    report.weight_std_error = w_eq.std_error;
    report.weights_ok = weight_mean_ok(w_eq);

    for (const auto& dev : family) {
        StrategyPair strategies = equilibrium;
        strategies[dev.player] = dev.control;
        const CostSamples cs = cost_samples(spec, reference, strategies, z_field);
        const auto i = static_cast<std::size_t>(index(dev.player));
        DeviationRow row;
        row.player = dev.player;
        row.kind = to_string(dev.kind);
        row.description = dev.description;
        const SampleStats s = sample_stats(cs.values[i]);
        row.payoff = s.mean;
        row.std_error = s.std_error;
        const SampleStats diff = sample_stats(paired_difference(eq.values[i], cs.values[i]));
        row.improvement = diff.mean;
        row.paired_std_error = diff.std_error;
        row.tolerance = std::max(3.0 * diff.std_error, rel_tol * std::abs(report.equilibrium_girsanov[i].value));
        row.improves = row.improvement > row.tolerance;
        const SampleStats w = sample_stats(cs.weights);
        row.weight_mean = w.mean;
        row.weight_std_error = w.std_error;
        report.weights_ok = report.weights_ok && weight_mean_ok(w);
        report.rows.push_back(std::move(row));
    }
    report.pass = nash_pass_at(report, rel_tol);
    return report;
}

void write_nash_csv(std::ostream& out, const NashReport& report) {
    out << "player,kind,description,payoff,std_error,paired_std_error,improvement,tolerance,weight_mean,verdict\n";
    for (const auto& r : report.rows) {
        out << label(r.player) << ',' << r.kind << ',' << r.description << ',' << fmt17(r.payoff) << ','
            << fmt17(r.std_error) << ',' << fmt17(r.paired_std_error) << ',' << fmt17(r.improvement) << ','
            << fmt17(r.tolerance) << ',' << fmt17(r.weight_mean) << ','
            << (r.improves ? "improves" : "no_improvement") << '\n';
    }
}

nlohmann::json nash_summary_json(const NashReport& report) {
    using nlohmann::json;
    json players = json::array();
    for (Player p : kPlayers) {
        const auto i = static_cast<std::size_t>(index(p));
        int rows = 0;
        double worst = -std::numeric_limits<double>::infinity();
        for (const auto& r : report.rows) {
            if (r.player != p) continue;
            ++rows;
            worst = std::max(worst, r.improvement - r.tolerance);
        }
        players.push_back({{"player", label(p)},
                           {"girsanov", {{"value", report.equilibrium_girsanov[i].value},
                                         {"std_error", report.equilibrium_girsanov[i].std_error}}},
                           {"direct", {{"value", report.equilibrium_direct[i].value},
                                       {"std_error", report.equilibrium_direct[i].std_error}}},
                           {"deviations", rows},
                           {"worst_margin", rows ? worst : 0.0}});
    }
    return {{"schema_version", 1},
            {"kind", "nash_summary"},
            {"players", players},
            {"rel_tol", report.rel_tol},
            {"weight_mean", report.weight_mean},
            {"weight_std_error", report.weight_std_error},
            {"weights_ok", report.weights_ok},
            {"scope", "certified against the tested deviation family only"},
            {"pass", report.pass}};
}

}  // namespace nashbsde
