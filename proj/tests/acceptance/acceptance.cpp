// Acceptance suite: one PASS/FAIL line per criterion, exit 0 iff all pass.

#include "../test_support.hpp"
#include "nashbsde/bsde_solver.hpp"
#include "nashbsde/config.hpp"
#include "nashbsde/density_tools.hpp"
#include "nashbsde/mollify.hpp"
#include "nashbsde/parallel.hpp"
#include "nashbsde/payoff_nash.hpp"

#include <CLI11.hpp>

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace nashbsde;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Context {
    fs::path configs;
    fs::path cli;
    fs::path work;
    RunConfig lq;
    std::optional<BsdeSolution> lq_solution;
};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

RegressionBasis poly(int degree) {
    RegressionBasis b;
    b.degree = degree;
    return b;
}

const BsdeSolution& lq_solution(Context& ctx) {
    if (!ctx.lq_solution) {
        const PathBundle bundle = simulate_reference(ctx.lq.game, ctx.lq.grid, ctx.lq.x0, ctx.lq.n_paths, ctx.lq.seed);
        ctx.lq_solution = solve_coupled(ctx.lq.game, bundle, ctx.lq.basis, std::nullopt, ctx.lq.picard);
    }
    return *ctx.lq_solution;
}

const StrategyPair& lq_equilibrium(const Context& ctx) { return *ctx.lq.game.best_response; }

int run_command(const std::string& cmd) {
    const int status = std::system(cmd.c_str());
    if (status == -1 || !WIFEXITED(status)) return -1;
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::map<std::string, std::string> directory_contents(const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = slurp(e.path());
    }
    return files;
}

Outcome ac1_girsanov_martingale(Context& ctx) {
    const BsdeSolution& sol = lq_solution(ctx);
    const TimeGrid grid(0.0, 1.0, 100);
    const int saved = thread_count();
    set_thread_count(1);
    const auto start = std::chrono::steady_clock::now();
    const PathBundle bundle = simulate_reference(ctx.lq.game, grid, ctx.lq.x0, 100000, ctx.lq.seed + 2);
    const std::vector<double> w = girsanov_weight(ctx.lq.game, bundle, lq_equilibrium(ctx), sol.z_field());
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    set_thread_count(saved);
    const SampleStats s = sample_stats(w);
    const double gap = std::abs(s.mean - 1.0);
    const bool pass = gap <= 4.0 * s.std_error && seconds < 30.0;
    return {pass, "mean=" + num(s.mean) + " se=" + num(s.std_error) + " |mean-1|/se=" + num(gap / s.std_error) +
                      " seconds_single_thread=" + num(seconds)};
}

Outcome ac2_estimator_agreement(Context& ctx) {
    const BsdeSolution& sol = lq_solution(ctx);
    const auto g = estimate_payoff(ctx.lq.game, lq_equilibrium(ctx), sol.z_field(), ctx.lq.grid, ctx.lq.x0, 100000,
                                   ctx.lq.seed + 3, PayoffMethod::girsanov_weighted);
    const auto d = estimate_payoff(ctx.lq.game, lq_equilibrium(ctx), sol.z_field(), ctx.lq.grid, ctx.lq.x0, 100000,
                                   ctx.lq.seed + 4, PayoffMethod::direct_controlled);
    bool pass = true;
    std::string detail;
    for (int p = 0; p < 2; ++p) {
        const double se = std::hypot(g[p].std_error, d[p].std_error);
        const double gap = std::abs(g[p].value - d[p].value);
        pass = pass && gap <= 3.0 * se;
        detail += "J" + std::to_string(p + 1) + " girsanov=" + num(g[p].value) + " direct=" + num(d[p].value) +
                  " gap/se=" + num(gap / se) + " ";
    }
    return {pass, detail};
}

Outcome ac3_closed_forms(Context&) {
    const TimeGrid grid(0.0, 1.0, 50);
    const double x0 = 0.5;
    const int n = 100000;
    bool pass = true;
    std::string detail;

    {
        const GameSpec spec = testing::scalar_game(0.0, 0.0, testing::identity);
        const PathBundle bundle = simulate_reference(spec, grid, make_vector({x0}), n, 301);
        const BsdeSolution sol = solve_coupled(spec, bundle, poly(2), std::nullopt, PicardOptions{});
        std::vector<double> terminal(static_cast<std::size_t>(n));
        for (int p = 0; p < n; ++p) terminal[static_cast<std::size_t>(p)] = bundle.state(p, grid.n_steps)[0];
        const double se = sample_stats(terminal).std_error;
        const double y0 = eval_w(sol, Player::first, 0.0, make_vector({x0}));
        const bool ok = std::abs(y0 - x0) <= 3.0 * se;
        pass = pass && ok;
        detail += "(a) Y0=" + num(y0) + " |Y0-x0|/se=" + num(std::abs(y0 - x0) / se) + " ";
    }
    {
        const GameSpec spec = testing::scalar_game(0.0, 0.0, testing::square);
        const PathBundle bundle = simulate_reference(spec, grid, make_vector({x0}), n, 302);
        const BsdeSolution sol = solve_coupled(spec, bundle, poly(2), std::nullopt, PicardOptions{});
        const double y0 = eval_w(sol, Player::first, 0.0, make_vector({x0}));
        const double rel = std::abs(y0 - (x0 * x0 + 1.0)) / (x0 * x0 + 1.0);
        pass = pass && rel <= 0.02;
        detail += "(b) Y0=" + num(y0) + " rel=" + num(rel) + " ";
    }
    {
        const GameSpec spec = testing::scalar_game(0.0, 1.0, testing::identity);
        const PathBundle bundle = simulate_reference(spec, grid, make_vector({x0}), n, 303);
        const BsdeSolution sol = solve_coupled(spec, bundle, poly(2), std::nullopt, PicardOptions{});
        const double y0 = eval_w(sol, Player::first, 0.0, make_vector({x0}));
        const double rel = std::abs(y0 - (x0 + 1.0)) / (x0 + 1.0);
        pass = pass && rel <= 0.02;
        detail += "(c) Y0=" + num(y0) + " rel=" + num(rel);
    }
    return {pass, detail};
}

Outcome ac4_w0_equals_j(Context& ctx) {
    const BsdeSolution& sol = lq_solution(ctx);
    const W0Check w = verify_w0_equals_j(ctx.lq.game, sol, lq_equilibrium(ctx), ctx.lq.x0, ctx.lq.n_paths,
                                         ctx.lq.seed + 1, ctx.lq.w0_rel_allowance);
    bool pass = true;
    std::string detail;
    for (int p = 0; p < 2; ++p) {
        const double allowance = std::max(3.0 * w.std_error[p], 0.02 * std::abs(w.payoff[p]));
        const double gap = std::abs(w.w0[p] - w.payoff[p]);
        pass = pass && gap <= allowance;
        detail += "player" + std::to_string(p + 1) + " W0=" + num(w.w0[p]) + " J=" + num(w.payoff[p]) +
                  " gap=" + num(gap) + " allowance=" + num(allowance) + " ";
    }
    return {pass, detail};
}

Outcome ac5_nash_certification(Context& ctx) {
    const fs::path out = ctx.work / "ac5";
    fs::remove_all(out);
    const std::string cmd = "\"" + ctx.cli.string() + "\" verify-nash -c \"" + (ctx.configs / "lq_paper.json").string() +
                            "\" -o \"" + out.string() + "\" > \"" + (ctx.work / "ac5_stdout.txt").string() + "\"";
    const int code = run_command(cmd);
    std::ifstream csv(out / "nash_report.csv");
    std::string line;
    std::getline(csv, line);
    int rows = 0;
    int improving = 0;
    while (std::getline(csv, line)) {
        if (line.empty()) continue;
        ++rows;
        if (line.size() >= 9 && line.compare(line.size() - 9, 9, ",improves") == 0) ++improving;
    }
    const bool pass = code == 0 && rows == 36 && improving == 0;
    return {pass, "exit=" + std::to_string(code) + " rows=" + std::to_string(rows) +
                      " improving=" + std::to_string(improving)};
}

Outcome ac6_isaacs(Context& ctx) {
    const GameSpec& spec = ctx.lq.game;
    const LqGameParams params = ctx.lq.lq_params.value_or(LqGameParams{});
    const StrategyPair formulas = lq_feedback(params);
    const int grid_n = 201;
    const double step_u = spec.control_box_1.width()[0] / (grid_n - 1);
    const double step_v = spec.control_box_2.width()[0] / (grid_n - 1);
    std::mt19937_64 rng(606);
    std::uniform_real_distribution<double> tz(0.0, 1.0), xz(-3.0, 3.0), zz(-5.0, 5.0);
    double worst = 0.0;
    bool within = true;
    for (int k = 0; k < 100; ++k) {
        const double t = tz(rng);
        const Vector x = make_vector({xz(rng)});
        const Vector z1 = make_vector({zz(rng)});
        const Vector z2 = make_vector({zz(rng)});
        const Vector u = formulas.first(t, x, z1, z2);
        const Vector v = formulas.second(t, x, z1, z2);
        const double du = std::abs(best_response_grid(spec, Player::first, t, x, z1, v, grid_n)[0] - u[0]);
        const double dv = std::abs(best_response_grid(spec, Player::second, t, x, z2, u, grid_n)[0] - v[0]);
        worst = std::max({worst, du / step_u, dv / step_v});
        within = within && du <= step_u && dv <= step_v;
    }
    const IsaacsReport r = check_isaacs(spec, ctx.lq.isaacs.samples, grid_n, ctx.lq.seed, ctx.lq.isaacs.z_radius);
    const bool isaacs_ok = r.max_violation <= 1e-9 + r.grid_slack;
    return {within && isaacs_ok, "max_grid_gap_in_steps=" + num(worst) + " max_violation=" + num(r.max_violation) +
                                     " grid_slack=" + num(r.grid_slack)};
}

Outcome ac7_mollification(Context& ctx) {
    bool pass = true;
    std::string detail;
    double previous = -1.0;
    for (int n : {4, 8, 16}) {
        MollifyParams p = ctx.lq.mollify.value_or(MollifyParams{});
        p.n = n;
        const GeneratorReport r = verify_generator_properties(ctx.lq.game, p, ctx.lq.generator.samples, ctx.lq.seed);
        const bool monotone = previous < 0.0 || r.compact_distance <= previous * (1.0 + 1e-3) + 1e-9;
        pass = pass && r.growth_ratio <= 1.0 && r.outside_cutoff_max == 0.0 && monotone;
        detail += "n=" + std::to_string(n) + " growth_ratio=" + num(r.growth_ratio) + " outside_max=" +
                  num(r.outside_cutoff_max) + " distance=" + num(r.compact_distance) + " ";
        previous = r.compact_distance;
    }
    return {pass, detail};
}

Outcome ac8_growth(Context& ctx) {
    const std::vector<double> radii{4.0, 8.0, 16.0, 32.0};
    const TimeGrid grid(0.0, 1.0, 20);
    const PathBundle bundle = simulate_reference(ctx.lq.game, grid, ctx.lq.x0, 20000, ctx.lq.seed);
    std::array<GrowthReport, 2> lq;
    std::string detail;
    for (int level = 0; level < 2; ++level) {
        MollifyParams p = ctx.lq.mollify.value_or(MollifyParams{});
        p.n = level == 0 ? 8 : 16;
        const BsdeSolution sol = solve_coupled(ctx.lq.game, bundle, poly(2), p, ctx.lq.picard);
        lq[level] = growth_diagnostic(sol, radii);
        detail += "n=" + std::to_string(p.n) + " exponents=" + num(lq[level].exponent[0]) + "," +
                  num(lq[level].exponent[1]) + " ";
    }
    const bool stable = growth_stable(lq[0], lq[1], 0.2);

    const GameSpec oracle = testing::scalar_game(0.0, 0.0, testing::square);
    const PathBundle ob = simulate_reference(oracle, grid, make_vector({0.0}), 20000, 801);
    const BsdeSolution os = solve_coupled(oracle, ob, poly(2), std::nullopt, PicardOptions{});
    const GrowthReport og = growth_diagnostic(os, radii);
    const bool quadratic = std::abs(og.exponent[0] - 2.0) <= 0.2 && std::abs(og.exponent[1] - 2.0) <= 0.2;
    detail += "x^2 exponents=" + num(og.exponent[0]) + "," + num(og.exponent[1]);
    return {stable && quadratic, detail};
}

Outcome ac9_z_energy(Context& ctx) {
    const BsdeSolution& full = lq_solution(ctx);
    const int half_paths = ctx.lq.n_paths / 2;
    const PathBundle bundle = simulate_reference(ctx.lq.game, ctx.lq.grid, ctx.lq.x0, half_paths, ctx.lq.seed);
    const BsdeSolution half = solve_coupled(ctx.lq.game, bundle, ctx.lq.basis, std::nullopt, ctx.lq.picard);
    bool pass = true;
    std::string detail = "paths=" + std::to_string(half_paths) + "->" + std::to_string(ctx.lq.n_paths) + " ";
    for (int p = 0; p < 2; ++p) {
        const double a = half.diagnostics.z_energy[p];
        const double b = full.diagnostics.z_energy[p];
        const double change = std::abs(b - a) / std::abs(a);
        pass = pass && change < 0.10;
        detail += "player" + std::to_string(p + 1) + " energy=" + num(a) + "->" + num(b) + " change=" + num(change) + " ";
    }
    return {pass, detail};
}

Outcome ac10_density(Context& ctx) {
    const DensityOptions& d = ctx.lq.density;
    std::string detail;

    double total1 = 0.0;
    const double h1 = 0.005;
    for (int k = -2400; k <= 2400; ++k) {
        total1 += h1 * gaussian_density(0.0, make_vector({0.0}), 1.0, make_vector({k * h1}), Matrix::Identity(1, 1));
    }
    Matrix sigma2(2, 2);
    sigma2 << 1.0, 0.0, 0.3, 0.7;
    double total2 = 0.0;
    const double h2 = 0.04;
    for (int a = -250; a <= 250; ++a) {
        for (int b = -250; b <= 250; ++b) {
            total2 += h2 * h2 * gaussian_density(0.0, make_vector({0.0, 0.0}), 1.0, make_vector({a * h2, b * h2}), sigma2);
        }
    }
    const bool integrates = std::abs(total1 - 1.0) <= 1e-4 && std::abs(total2 - 1.0) <= 1e-4;
    detail += "integral_1d=" + num(total1) + " integral_2d=" + num(total2) + " ";

    const Matrix unit = Matrix::Identity(1, 1);
    const DensityFn rho = [&](double s, const Vector& x) { return gaussian_density(d.t0, d.x0, s, x, unit); };
    const double c = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    const AronsonReport tight = check_aronson({c, c, 0.5, 0.5, 1}, rho, d.t0, d.x0, d.times, d.offsets);
    const bool aronson = tight.pass;
    detail += "aronson_tight_violations=" + num(tight.max_lower_violation) + "," + num(tight.max_upper_violation) + " ";

    const DominationReport dom = domination_check(rho, rho, d.t0 + 0.1 * (d.horizon - d.t0), d.horizon, -3.0, 3.0, 1, d.q);
    const bool domination = dom.refined_value <= d.horizon + 1e-6 && dom.stable && dom.relative_change <= 0.01;
    detail += "identical_domination=" + num(dom.refined_value) + " change=" + num(dom.relative_change) + " ";

    const LognormalNormalization ln = lognormal_normalization(1.0);
    const LognormalNormalization ln2 = lognormal_normalization(2.0);
    const bool reported = ln.jacobian_form_is_probability && ln2.jacobian_form_is_probability &&
                          !ln2.log_form_is_probability;
    detail += std::string("lognormal: jacobian_form_integral=") + num(ln2.integral_jacobian_form) +
              " log_form_integral(x=2)=" + num(ln2.integral_log_form) + " (the y^-1 form is the probability density)";
    return {integrates && aronson && domination && reported, detail};
}

Outcome ac11_determinism(Context& ctx) {
    std::ifstream in(ctx.configs / "lq_paper.json");
    nlohmann::json doc = nlohmann::json::parse(in);
    doc["monte_carlo"]["n_paths"] = 4000;
    doc["grid"]["n_steps"] = 20;
    doc["basis"]["degree"] = 3;
    doc["isaacs"]["samples"] = 20;
    doc["generator"]["samples"] = 50;
    const fs::path dir = ctx.work / "ac11";
    fs::remove_all(dir);
    fs::create_directories(dir);
    doc["output_dir"] = "out";
    const fs::path config = dir / "config.json";
    std::ofstream(config) << doc.dump(2);

    bool pass = true;
    std::string detail;
    for (const char* sub : {"simulate", "solve", "verify-nash", "check-isaacs", "verify-generator", "density-check"}) {
        std::array<std::map<std::string, std::string>, 2> outputs;
        std::array<int, 2> codes{};
        for (int run = 0; run < 2; ++run) {
            const fs::path out = dir / (std::string(sub) + "_" + std::to_string(run));
            const fs::path stdout_file = dir / (std::string(sub) + "_" + std::to_string(run) + ".stdout");
            codes[run] = run_command("\"" + ctx.cli.string() + "\" " + sub + " -c \"" + config.string() + "\" -o \"" +
                                     out.string() + "\" -t " + std::to_string(run + 1) + " > \"" +
                                     stdout_file.string() + "\"");
            outputs[run] = directory_contents(out);
            outputs[run]["<stdout>"] = slurp(stdout_file);
        }
        const bool same = codes[0] == codes[1] && codes[0] >= 0 && outputs[0] == outputs[1] && outputs[0].size() > 1;
        pass = pass && same;
        detail += std::string(sub) + (same ? "=identical " : "=DIFFERENT ");
    }
    return {pass, detail};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"nashbsde acceptance suite"};
    std::string configs, cli, work;
    app.add_option("--configs", configs, "directory holding lq_paper.json")->required();
    app.add_option("--cli", cli, "path to the nashbsde_cli executable")->required();
    app.add_option("--work", work, "scratch directory")->required();
    CLI11_PARSE(app, argc, argv);

    Context ctx;
    ctx.configs = fs::absolute(configs);
    ctx.cli = fs::absolute(cli);
    ctx.work = fs::absolute(work);
    fs::create_directories(ctx.work);
    try {
        ctx.lq = load_config((ctx.configs / "lq_paper.json").string());
    } catch (const std::exception& e) {
        std::printf("cannot load the LQ config: %s\n", e.what());
        return 1;
    }

    const std::vector<std::pair<std::string, std::function<Outcome(Context&)>>> criteria{
        {"AC1 girsanov martingale", ac1_girsanov_martingale},
        {"AC2 estimator agreement", ac2_estimator_agreement},
        {"AC3 closed-form oracles", ac3_closed_forms},
        {"AC4 W0 equals J", ac4_w0_equals_j},
        {"AC5 nash certification", ac5_nash_certification},
        {"AC6 isaacs oracle", ac6_isaacs},
        {"AC7 mollification properties", ac7_mollification},
        {"AC8 uniform polynomial growth", ac8_growth},
        {"AC9 Z-energy stability", ac9_z_energy},
        {"AC10 density suite", ac10_density},
        {"AC11 determinism", ac11_determinism},
    };

    int failures = 0;
    for (const auto& [name, check] : criteria) {
        Outcome o;
        const auto start = std::chrono::steady_clock::now();
        try {
            o = check(ctx);
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (!o.pass) ++failures;
        std::printf("%s %s: %s[%.1fs]\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), seconds);
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
