#include "nashbsde/cli.hpp"

#include "nashbsde/parallel.hpp"

#include <CLI11.hpp>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <utility>
#include <vector>

namespace nashbsde::cli {

namespace {

constexpr std::array<const char*, 6> kSubcommands{"simulate",     "solve",           "verify-nash",
                                                  "check-isaacs", "verify-generator", "density-check"};

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Ordered key=value pairs for the summary line.
class Summary {
public:
    void add(const std::string& key, const std::string& value) { items_.emplace_back(key, value); }
    void add(const std::string& key, double value) { add(key, fmt17(value)); }
    void add(const std::string& key, int value) { add(key, std::to_string(value)); }
    void add(const std::string& key, bool value) { add(key, std::string(value ? "true" : "false")); }

    void print(std::ostream& out, bool pass) const {
        out << "status=" << (pass ? "pass" : "fail");
        for (const auto& [k, v] : items_) out << ' ' << k << '=' << v;
        out << '\n';
    }

private:
    std::vector<std::pair<std::string, std::string>> items_;
};

std::ofstream open_output(const RunConfig& cfg, const std::string& name) {
    std::filesystem::create_directories(cfg.output_dir);
    const auto path = std::filesystem::path(cfg.output_dir) / name;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write '" + path.string() + "'");
    return f;
}

void write_json(const RunConfig& cfg, const std::string& name, const nlohmann::json& doc) {
    auto f = open_output(cfg, name);
    f << doc.dump(2) << '\n';
}

const StrategyPair& equilibrium(const RunConfig& cfg) {
    if (!cfg.game.best_response) throw ConfigError("config field 'game': no best-response maps");
    return *cfg.game.best_response;
}

BsdeSolution solve_from_config(const RunConfig& cfg, std::uint64_t seed) {
    const PathBundle bundle = simulate_reference(cfg.game, cfg.grid, cfg.x0, cfg.n_paths, seed);
    return solve_coupled(cfg.game, bundle, cfg.basis, cfg.mollify, cfg.picard);
}

void write_convergence_csv(std::ostream& out, const BsdeSolution& sol) {
    const auto& d = sol.diagnostics;
    out << "knot,t,iterations,converged,final_residual,condition_number\n";
    for (int k = 0; k < sol.grid.n_steps; ++k) {
        const auto ku = static_cast<std::size_t>(k);
        const auto& r = d.picard_residuals[ku];
        out << k << ',' << fmt17(sol.grid.knot(k)) << ',' << d.picard_iterations[ku] << ','
            << (d.picard_converged[ku] ? 1 : 0) << ',' << fmt17(r.empty() ? 0.0 : r.back()) << ','
            << fmt17(d.condition_numbers[ku]) << '\n';
    }
}

int cmd_simulate(const RunConfig& cfg, std::ostream& out) {
    Summary s;
    PathBundle bundle;
    if (cfg.simulate.controlled) {
        ZField z;
        if (!cfg.simulate.solution_path.empty()) {
            std::ifstream in(cfg.simulate.solution_path);
            if (!in) throw ConfigError("config field 'simulate.solution': cannot open file");
            nlohmann::json doc;
            try {
                doc = nlohmann::json::parse(in);
            } catch (const nlohmann::json::exception& e) {
                throw ConfigError(std::string("config field 'simulate.solution': ") + e.what());
            }
            z = solution_from_json(doc).z_field();
        }
        bundle = simulate_controlled(cfg.game, cfg.grid, cfg.x0, equilibrium(cfg), z, cfg.n_paths, cfg.seed);
    } else {
        bundle = simulate_reference(cfg.game, cfg.grid, cfg.x0, cfg.n_paths, cfg.seed);
    }
    auto f = open_output(cfg, "paths.csv");
    write_paths_csv(f, bundle, cfg.simulate.max_paths_csv);

    std::vector<double> terminal(static_cast<std::size_t>(bundle.n_paths));
    for (int p = 0; p < bundle.n_paths; ++p) terminal[static_cast<std::size_t>(p)] = bundle.state(p, cfg.grid.n_steps)[0];
    const SampleStats st = sample_stats(terminal);
    s.add("subcommand", std::string("simulate"));
    s.add("scheme", std::string(cfg.simulate.controlled ? "controlled" : "reference"));
    s.add("n_paths", bundle.n_paths);
    s.add("n_steps", cfg.grid.n_steps);
    s.add("mean_xT_1", st.mean);
    s.add("se_xT_1", st.std_error);
    s.print(out, true);
    return kExitPass;
}

int cmd_solve(const RunConfig& cfg, std::ostream& out) {
    const BsdeSolution sol = solve_from_config(cfg, cfg.seed);
    write_json(cfg, "solution.json", to_json(sol));
    {
        auto f = open_output(cfg, "convergence.csv");
        write_convergence_csv(f, sol);
    }
    const bool pass = !sol.diagnostics.picard_warning;
    Summary s;
    s.add("subcommand", std::string("solve"));
    s.add("y0_1", eval_w(sol, Player::first, cfg.grid.t0, cfg.x0));
    s.add("y0_2", eval_w(sol, Player::second, cfg.grid.t0, cfg.x0));
    s.add("z_energy_1", sol.diagnostics.z_energy[0]);
    s.add("z_energy_2", sol.diagnostics.z_energy[1]);
    s.add("picard_warning", sol.diagnostics.picard_warning);
    s.add("reduced_cells", sol.diagnostics.reduced_cells);
    s.print(out, pass);
    return pass ? kExitPass : kExitVerificationFailed;
}

int cmd_verify_nash(const RunConfig& cfg, std::ostream& out) {
    const BsdeSolution sol = solve_from_config(cfg, cfg.seed);
    const StrategyPair& eq = equilibrium(cfg);
    const DeviationFamily family = standard_family(cfg.game, eq, cfg.seed, cfg.family);
    // Fresh noise for the estimates so they are not fitted in-sample.
    const NashReport report =
        deviation_test(cfg.game, sol, eq, family, cfg.grid, cfg.x0, cfg.n_paths, cfg.seed + 1, cfg.rel_tol);
    const W0Check w0 = verify_w0_equals_j(cfg.game, sol, eq, cfg.x0, cfg.n_paths, cfg.seed + 1, cfg.w0_rel_allowance);
    {
        auto f = open_output(cfg, "nash_report.csv");
        write_nash_csv(f, report);
    }
    nlohmann::json summary = nash_summary_json(report);
    summary["w0_check"] = {{"w0", w0.w0}, {"payoff", w0.payoff}, {"std_error", w0.std_error},
                           {"allowance", w0.allowance}, {"pass", w0.pass}};
    write_json(cfg, "nash_summary.json", summary);

    int improving = 0;
    for (const auto& r : report.rows) improving += r.improves ? 1 : 0;
    const bool pass = report.pass && report.weights_ok;
    Summary s;
    s.add("subcommand", std::string("verify-nash"));
    s.add("deviations", static_cast<int>(report.rows.size()));
    s.add("improving", improving);
    s.add("J1", report.equilibrium_girsanov[0].value);
    s.add("J2", report.equilibrium_girsanov[1].value);
    s.add("weight_mean", report.weight_mean);
    s.add("weights_ok", report.weights_ok);
    s.add("w0_pass", w0.pass);
    s.print(out, pass);
    return pass ? kExitPass : kExitVerificationFailed;
}

int cmd_check_isaacs(const RunConfig& cfg, std::ostream& out) {
    const IsaacsReport report =
        check_isaacs(cfg.game, cfg.isaacs.samples, cfg.isaacs.grid_n, cfg.seed, cfg.isaacs.z_radius);
    {
        auto f = open_output(cfg, "isaacs_report.csv");
        const int m = cfg.game.dim_m;
        f << "sample,t";
        for (const char* name : {"x", "z1", "z2"}) {
            for (int j = 1; j <= m; ++j) f << ',' << name << '_' << j;
        }
        f << ",violation_1,violation_2\n";
        for (std::size_t k = 0; k < report.samples.size(); ++k) {
            const auto& smp = report.samples[k];
            f << k << ',' << fmt17(smp.t);
            for (const Vector* v : {&smp.x, &smp.z1, &smp.z2}) {
                for (int j = 0; j < v->size(); ++j) f << ',' << fmt17((*v)[j]);
            }
            f << ',' << fmt17(smp.violation[0]) << ',' << fmt17(smp.violation[1]) << '\n';
        }
    }
    Summary s;
    s.add("subcommand", std::string("check-isaacs"));
    s.add("samples", report.sample_count);
    s.add("grid_n", report.grid_n);
    s.add("max_violation", report.max_violation);
    s.add("grid_slack", report.grid_slack);
    s.print(out, report.pass);
    return report.pass ? kExitPass : kExitVerificationFailed;
}

int cmd_verify_generator(const RunConfig& cfg, std::ostream& out) {
    const MollifyParams base = cfg.mollify.value_or(MollifyParams{});
    auto f = open_output(cfg, "generator_report.csv");
    f << "n,lipschitz_coarse,lipschitz_fine,fitted_growth_constant,certified_growth_constant,"
         "growth_ratio,global_sup,compact_distance,compact_distance_doubled,outside_cutoff_max,pass\n";
    bool all = true;
    double worst_ratio = 0.0;
    for (int n : cfg.generator.levels) {
        MollifyParams p = base;
        p.n = n;
        const GeneratorReport r = verify_generator_properties(cfg.game, p, cfg.generator.samples, cfg.seed);
        f << n << ',' << fmt17(r.lipschitz_coarse) << ',' << fmt17(r.lipschitz_fine) << ','
          << fmt17(r.fitted_growth_constant) << ',' << fmt17(r.certified_growth_constant) << ','
          << fmt17(r.growth_ratio) << ',' << fmt17(r.global_sup) << ',' << fmt17(r.compact_distance) << ','
          << fmt17(r.compact_distance_doubled) << ',' << fmt17(r.outside_cutoff_max) << ','
          << (r.pass() ? 1 : 0) << '\n';
        all = all && r.pass();
        worst_ratio = std::max(worst_ratio, r.growth_ratio);
    }
    Summary s;
    s.add("subcommand", std::string("verify-generator"));
    s.add("levels", static_cast<int>(cfg.generator.levels.size()));
    s.add("max_growth_ratio", worst_ratio);
    s.print(out, all);
    return all ? kExitPass : kExitVerificationFailed;
}

int cmd_density_check(const RunConfig& cfg, std::ostream& out) {
    const DensityOptions& d = cfg.density;
    const auto gaussian_from = [&](double t0, const Vector& x0) -> DensityFn {
        return [t0, x0, sigma = d.sigma](double s, const Vector& x) { return gaussian_density(t0, x0, s, x, sigma); };
    };
    const AronsonReport aronson = check_aronson(d.aronson, gaussian_from(d.t0, d.x0), d.t0, d.x0, d.times, d.offsets);
    {
        auto f = open_output(cfg, "aronson_violations.csv");
        write_aronson_csv(f, aronson);
    }
    const DominationReport dom = domination_check(gaussian_from(d.t1, d.x1), gaussian_from(d.t0, d.x0),
                                                  d.t1 + d.delta, d.horizon, -d.k, d.k,
                                                  static_cast<int>(d.x0.size()), d.q);
    const LognormalNormalization ln1 = lognormal_normalization(1.0);
    const LognormalNormalization ln2 = lognormal_normalization(2.0);
    const auto ln_json = [](const LognormalNormalization& n) {
        return nlohmann::json{{"x", n.x},
                              {"integral_log_form", n.integral_log_form},
                              {"integral_jacobian_form", n.integral_jacobian_form},
                              {"log_form_is_probability", n.log_form_is_probability},
                              {"jacobian_form_is_probability", n.jacobian_form_is_probability}};
    };
    const bool pass = aronson.pass && dom.pass;
    write_json(cfg, "density_report.json",
               {{"schema_version", 1},
                {"kind", "density_report"},
                {"aronson", {{"max_lower_violation", aronson.max_lower_violation},
                             {"max_upper_violation", aronson.max_upper_violation},
                             {"points", aronson.points.size()},
                             {"pass", aronson.pass}}},
                {"domination", {{"value", dom.refined_value},
                                {"previous_value", dom.value},
                                {"relative_change", dom.relative_change},
                                {"levels", dom.levels},
                                {"finite", dom.finite},
                                {"stable", dom.stable},
                                {"pass", dom.pass}}},
                {"lognormal", {ln_json(ln1), ln_json(ln2)}},
                {"pass", pass}});
    Summary s;
    s.add("subcommand", std::string("density-check"));
    s.add("aronson_lower", aronson.max_lower_violation);
    s.add("aronson_upper", aronson.max_upper_violation);
    s.add("domination", dom.refined_value);
    s.add("domination_change", dom.relative_change);
    s.add("lognormal_log_form_integral_x1", ln1.integral_log_form);
    s.add("lognormal_jacobian_form_integral_x1", ln1.integral_jacobian_form);
    s.add("lognormal_log_form_integral_x2", ln2.integral_log_form);
    s.print(out, pass);
    return pass ? kExitPass : kExitVerificationFailed;
}

}  // namespace

bool is_subcommand(const std::string& name) {
    for (const char* s : kSubcommands) {
        if (name == s) return true;
    }
    return false;
}

int run_subcommand(const std::string& name, const RunConfig& cfg, std::ostream& out) {
    set_thread_count(cfg.threads);
    if (name == "simulate") return cmd_simulate(cfg, out);
    if (name == "solve") return cmd_solve(cfg, out);
    if (name == "verify-nash") return cmd_verify_nash(cfg, out);
    if (name == "check-isaacs") return cmd_check_isaacs(cfg, out);
    if (name == "verify-generator") return cmd_verify_generator(cfg, out);
    if (name == "density-check") return cmd_density_check(cfg, out);
    throw ConfigError("unknown subcommand '" + name + "'");
}

int run(int argc, char** argv) {
    CLI::App app{"Nash equilibria of two-player stochastic differential games via coupled BSDEs"};
    app.require_subcommand(1);
    std::string config_path;
    std::string output_dir;
    int threads = -1;
    for (const char* name : kSubcommands) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("-c,--config", config_path, "JSON run configuration")->required();
        sub->add_option("-o,--output-dir", output_dir, "Overrides output_dir");
        sub->add_option("-t,--threads", threads, "Worker threads (0 = hardware)")->check(CLI::NonNegativeNumber);
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitPass : kExitInvalidConfig;
    }
    const std::string name = app.get_subcommands().front()->get_name();
    try {
        RunConfig cfg = load_config(config_path);
        if (!output_dir.empty()) cfg.output_dir = output_dir;
        if (threads >= 0) cfg.threads = threads;
        return run_subcommand(name, cfg, std::cout);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        std::cout << "status=fail error=invalid_config\n";
        return kExitInvalidConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        std::cout << "status=fail error=numerical\n";
        return kExitNumericalError;
    }
}

}  // namespace nashbsde::cli
