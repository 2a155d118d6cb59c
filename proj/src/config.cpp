#include "nashbsde/config.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>

namespace nashbsde {

namespace {

using nlohmann::json;

std::string join(const std::string& parent, const std::string& key) {
    return parent.empty() ? key : parent + "." + key;
}

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw ConfigError("config field '" + path + "': " + what);
}

const json& require(const json& obj, const std::string& parent, const std::string& key) {
    if (!obj.is_object()) fail(parent.empty() ? "<root>" : parent, "expected an object");
    const auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) fail(join(parent, key), "missing");
    return *it;
}

const json* optional_field(const json& obj, const std::string& key) {
    if (!obj.is_object()) return nullptr;
    const auto it = obj.find(key);
    return it == obj.end() || it->is_null() ? nullptr : &*it;
}

double as_number(const json& j, const std::string& path) {
    if (!j.is_number()) fail(path, "expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) fail(path, "must be finite");
    return v;
}

int as_int(const json& j, const std::string& path) {
    if (!j.is_number_integer()) fail(path, "expected an integer");
    const auto v = j.get<std::int64_t>();
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) fail(path, "out of range");
    return static_cast<int>(v);
}

double number_or(const json& obj, const std::string& parent, const std::string& key, double fallback) {
    const json* j = optional_field(obj, key);
    return j ? as_number(*j, join(parent, key)) : fallback;
}

int int_or(const json& obj, const std::string& parent, const std::string& key, int fallback) {
    const json* j = optional_field(obj, key);
    return j ? as_int(*j, join(parent, key)) : fallback;
}

std::vector<double> as_numbers(const json& j, const std::string& path) {
    if (!j.is_array()) fail(path, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t k = 0; k < j.size(); ++k) out.push_back(as_number(j[k], path + "[" + std::to_string(k) + "]"));
    return out;
}

Vector as_vector(const json& j, const std::string& path) {
    const auto v = as_numbers(j, path);
    if (v.empty() || v.size() > static_cast<std::size_t>(kMaxDim)) fail(path, "length must be 1..4");
    Vector out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t k = 0; k < v.size(); ++k) out[static_cast<Eigen::Index>(k)] = v[k];
    return out;
}

Matrix as_matrix(const json& j, const std::string& path) {
    if (!j.is_array() || j.empty() || j.size() > static_cast<std::size_t>(kMaxDim)) {
        fail(path, "expected 1..4 rows");
    }
    const auto rows = static_cast<Eigen::Index>(j.size());
    Eigen::Index cols = -1;
    Matrix out;
    for (Eigen::Index r = 0; r < rows; ++r) {
        const auto row = as_numbers(j[static_cast<std::size_t>(r)], path + "[" + std::to_string(r) + "]");
        if (cols < 0) {
            cols = static_cast<Eigen::Index>(row.size());
            if (cols < 1 || cols > kMaxDim) fail(path, "expected 1..4 columns");
            out.resize(rows, cols);
        } else if (static_cast<Eigen::Index>(row.size()) != cols) {
            fail(path, "rows have different lengths");
        }
        for (Eigen::Index c = 0; c < cols; ++c) out(r, c) = row[static_cast<std::size_t>(c)];
    }
    return out;
}

template <class T, class F>
std::array<T, 2> pair_of(const json& j, const std::string& path, F&& convert) {
    if (!j.is_array() || j.size() != 2) fail(path, "expected a two-element array");
    return {convert(j[0], path + "[0]"), convert(j[1], path + "[1]")};
}

Box as_box(const json& j, const std::string& path) {
    Vector lo = as_vector(require(j, path, "lo"), join(path, "lo"));
    Vector hi = as_vector(require(j, path, "hi"), join(path, "hi"));
    if (lo.size() != hi.size()) fail(path, "lo and hi differ in length");
    for (int k = 0; k < lo.size(); ++k) {
        if (!(lo[k] < hi[k])) fail(path, "requires lo < hi");
    }
    return Box(lo, hi);
}

template <class Target>
void read_cost_fields(const json& obj, const std::string& path, Target& target) {
    if (const json* j = optional_field(obj, "theta")) target.theta = pair_of<double>(*j, join(path, "theta"), as_number);
    if (const json* j = optional_field(obj, "power")) target.power = pair_of<int>(*j, join(path, "power"), as_int);
    if (const json* j = optional_field(obj, "gamma")) target.gamma = pair_of<double>(*j, join(path, "gamma"), as_number);
    if (const json* j = optional_field(obj, "rho")) target.rho = pair_of<double>(*j, join(path, "rho"), as_number);
    if (const json* j = optional_field(obj, "terminal")) {
        target.terminal = pair_of<std::vector<double>>(*j, join(path, "terminal"), as_numbers);
    }
}

LqGameParams read_lq_params(const json* obj, const std::string& path) {
    LqGameParams p;
    if (!obj) return p;
    if (!obj->is_object()) fail(path, "expected an object");
    p.a = number_or(*obj, path, "a", p.a);
    p.b = number_or(*obj, path, "b", p.b);
    p.c = number_or(*obj, path, "c", p.c);
    read_cost_fields(*obj, path, p);
    return p;
}

LinearQuadraticTables read_tables(const json& obj, const std::string& path) {
    LinearQuadraticTables t;
    t.sigma = as_matrix(require(obj, path, "sigma"), join(path, "sigma"));
    t.drift_state = as_matrix(require(obj, path, "drift_state"), join(path, "drift_state"));
    t.drift_u = as_matrix(require(obj, path, "drift_u"), join(path, "drift_u"));
    t.drift_v = as_matrix(require(obj, path, "drift_v"), join(path, "drift_v"));
    t.box_u = as_box(require(obj, path, "box_u"), join(path, "box_u"));
    t.box_v = as_box(require(obj, path, "box_v"), join(path, "box_v"));
    t.terminal = {std::vector<double>{0.0, 0.0, 1.0}, std::vector<double>{0.0, 0.0, 1.0}};
    read_cost_fields(obj, path, t);
    return t;
}

std::uint64_t parse_seed_text(const std::string& text, const std::string& where) {
    if (text.empty() || text.find_first_not_of("0123456789") != std::string::npos) {
        fail(where, "seed must be a 64-bit unsigned integer");
    }
    errno = 0;
    char* end = nullptr;
    const unsigned long long v = std::strtoull(text.c_str(), &end, 10);
    if (errno == ERANGE || *end != '\0') fail(where, "seed must be a 64-bit unsigned integer");
    return static_cast<std::uint64_t>(v);
}

std::uint64_t as_seed(const json& j, const std::string& path) {
    if (j.is_number_unsigned()) return j.get<std::uint64_t>();
    if (j.is_number_integer()) {
        const auto v = j.get<std::int64_t>();
        if (v < 0) fail(path, "seed must be a 64-bit unsigned integer");
        return static_cast<std::uint64_t>(v);
    }
    if (j.is_string()) return parse_seed_text(j.get<std::string>(), path);
    fail(path, "seed must be a 64-bit unsigned integer");
}

// Wraps a domain error raised while building a library object into a
// config error that names the section it came from.
template <class F>
auto config_section(const std::string& path, F&& build) {
    try {
        return build();
    } catch (const ConfigError&) {
        throw;
    } catch (const DomainError& e) {
        fail(path, e.what());
    }
}

void read_game(const json& doc, RunConfig& cfg, double horizon) {
    const json& g = require(doc, "", "game");
    if (const json* b = optional_field(g, "builtin")) {
        if (!b->is_string()) fail("game.builtin", "expected a string");
        const std::string name = b->get<std::string>();
        if (name != "lq" && name != "gbm_extension") fail("game.builtin", "unknown builtin '" + name + "'");
        const LqGameParams params = read_lq_params(optional_field(g, "params"), "game.params");
        cfg.lq_params = params;
        cfg.game = config_section("game.params", [&] { return make_builtin_game(name, params, horizon); });
    } else if (const json* t = optional_field(g, "tables")) {
        const LinearQuadraticTables tables = read_tables(*t, "game.tables");
        cfg.game = config_section("game.tables", [&] { return make_linear_quadratic_game(tables, horizon); });
    } else {
        fail("game", "needs either 'builtin' or 'tables'");
    }
}

void read_density(const json* d, RunConfig& cfg) {
    DensityOptions& o = cfg.density;
    const std::string path = "density";
    const json empty = json::object();
    const json& obj = d ? *d : empty;
    if (d && !d->is_object()) fail(path, "expected an object");
    o.x0 = optional_field(obj, "x0") ? as_vector(obj["x0"], "density.x0") : make_vector({0.0});
    const int m = static_cast<int>(o.x0.size());
    o.sigma = optional_field(obj, "sigma") ? as_matrix(obj["sigma"], "density.sigma") : Matrix::Identity(m, m);
    if (o.sigma.rows() != m || o.sigma.cols() != m) fail("density.sigma", "must be m x m with m = len(x0)");
    o.t0 = number_or(obj, path, "t0", 0.0);
    o.horizon = number_or(obj, path, "T", 1.0);
    o.times = optional_field(obj, "times") ? as_numbers(obj["times"], "density.times")
                                           : std::vector<double>{0.1, 0.2, 0.4, 0.6, 0.8, 1.0};
    if (optional_field(obj, "offsets")) {
        o.offsets = as_numbers(obj["offsets"], "density.offsets");
    } else {
        for (int k = -8; k <= 8; ++k) o.offsets.push_back(0.25 * k);
    }
    const json* a = optional_field(obj, "aronson");
    const json& ar = a ? *a : empty;
    o.aronson.dim_m = m;
    o.aronson.rho1 = number_or(ar, "density.aronson", "rho1", 0.1);
    o.aronson.rho2 = number_or(ar, "density.aronson", "rho2", 1.0);
    o.aronson.lambda_small = number_or(ar, "density.aronson", "lambda", 0.4);
    o.aronson.lambda_big = number_or(ar, "density.aronson", "Lambda", 0.6);
    config_section("density.aronson", [&] { o.aronson.validate(); return 0; });
    const json* dm = optional_field(obj, "domination");
    const json& dom = dm ? *dm : empty;
    o.t1 = number_or(dom, "density.domination", "t1", o.t0);
    Vector shifted = o.x0;
    shifted[0] += 1.0;
    o.x1 = optional_field(dom, "x1") ? as_vector(dom["x1"], "density.domination.x1") : shifted;
    if (o.x1.size() != m) fail("density.domination.x1", "must have the same length as density.x0");
    o.delta = number_or(dom, "density.domination", "delta", 0.1);
    o.k = number_or(dom, "density.domination", "k", 3.0);
    o.q = number_or(dom, "density.domination", "q", 2.0);
    if (!(o.delta > 0.0 && o.t1 + o.delta <= o.horizon)) fail("density.domination.delta", "requires 0 < delta <= T - t1");
    if (!(o.q > 1.0)) fail("density.domination.q", "must exceed 1");
    if (!(o.k > 0.0)) fail("density.domination.k", "must be positive");
}

}  // namespace

RunConfig parse_config(const json& doc, const std::string& base_dir) {
    if (!doc.is_object()) fail("<root>", "expected an object");
    RunConfig cfg;

    const json& grid = require(doc, "", "grid");
    const double t0 = as_number(require(grid, "grid", "t0"), "grid.t0");
    const double horizon = as_number(require(grid, "grid", "T"), "grid.T");
    const int n_steps = as_int(require(grid, "grid", "n_steps"), "grid.n_steps");
    if (t0 != 0.0) fail("grid.t0", "games start at t0 = 0");
    if (!(horizon > t0)) fail("grid.T", "must exceed grid.t0");
    if (n_steps < 1) fail("grid.n_steps", "must be >= 1");
    cfg.grid = TimeGrid(t0, horizon, n_steps);

    read_game(doc, cfg, horizon);
    const int m = cfg.game.dim_m;
    if (const json* x0 = optional_field(doc, "x0")) {
        cfg.x0 = as_vector(*x0, "x0");
    } else {
        cfg.x0 = cfg.game.name == "gbm_extension" ? Vector::Ones(m) : Vector::Zero(m);
    }
    if (cfg.x0.size() != m) fail("x0", "length must equal the game dimension");

    const json& mc = require(doc, "", "monte_carlo");
    cfg.n_paths = as_int(require(mc, "monte_carlo", "n_paths"), "monte_carlo.n_paths");
    if (cfg.n_paths < 2) fail("monte_carlo.n_paths", "must be >= 2");
    cfg.seed = as_seed(require(mc, "monte_carlo", "seed"), "monte_carlo.seed");

    if (const json* b = optional_field(doc, "basis")) {
        const std::string kind = optional_field(*b, "kind") ? (*b)["kind"].get<std::string>() : "global_poly";
        if (kind == "global_poly") {
            cfg.basis.kind = BasisKind::global_poly;
        } else if (kind == "local_partition") {
            cfg.basis.kind = BasisKind::local_partition;
        } else {
            fail("basis.kind", "expected 'global_poly' or 'local_partition'");
        }
        cfg.basis.degree = int_or(*b, "basis", "degree", 2);
        cfg.basis.cells_per_axis = int_or(*b, "basis", "cells_per_axis", 1);
    }
    config_section("basis", [&] { cfg.basis.validate(m); return 0; });
    if (cfg.basis.size(m) * 10 > cfg.n_paths) fail("basis", "basis size must not exceed n_paths / 10");

    if (const json* mo = optional_field(doc, "mollify")) {
        MollifyParams p;
        p.n = int_or(*mo, "mollify", "n", p.n);
        p.quad_points = int_or(*mo, "mollify", "quad_points", p.quad_points);
        p.mollifier_radius = number_or(*mo, "mollify", "radius", p.mollifier_radius);
        config_section("mollify", [&] { p.validate(); return 0; });
        cfg.mollify = p;
    }
    if (const json* pc = optional_field(doc, "picard")) {
        cfg.picard.max_iter = int_or(*pc, "picard", "max_iter", cfg.picard.max_iter);
        cfg.picard.tol = number_or(*pc, "picard", "tol", cfg.picard.tol);
        if (cfg.picard.max_iter < 1) fail("picard.max_iter", "must be >= 1");
        if (!(cfg.picard.tol >= 0.0)) fail("picard.tol", "must be >= 0");
    }
    if (const json* nash = optional_field(doc, "nash")) {
        cfg.family.constants = int_or(*nash, "nash", "constants", cfg.family.constants);
        cfg.family.bang_bang = int_or(*nash, "nash", "bang_bang", cfg.family.bang_bang);
        cfg.family.perturbed = int_or(*nash, "nash", "perturbed", cfg.family.perturbed);
        cfg.rel_tol = number_or(*nash, "nash", "rel_tol", cfg.rel_tol);
        cfg.w0_rel_allowance = number_or(*nash, "nash", "w0_rel_allowance", cfg.w0_rel_allowance);
        if (cfg.family.constants < 0 || cfg.family.bang_bang < 0 || cfg.family.perturbed < 0) {
            fail("nash", "deviation counts must be >= 0");
        }
        if (cfg.family.constants + cfg.family.bang_bang + cfg.family.perturbed == 0) {
            fail("nash", "deviation family is empty");
        }
        if (!(cfg.rel_tol >= 0.0)) fail("nash.rel_tol", "must be >= 0");
    }
    if (const json* s = optional_field(doc, "simulate")) {
        if (const json* sc = optional_field(*s, "scheme")) {
            const std::string scheme = sc->is_string() ? sc->get<std::string>() : "";
            if (scheme != "reference" && scheme != "controlled") {
                fail("simulate.scheme", "expected 'reference' or 'controlled'");
            }
            cfg.simulate.controlled = scheme == "controlled";
        }
        if (const json* sp = optional_field(*s, "solution")) {
            if (!sp->is_string()) fail("simulate.solution", "expected a path string");
            const std::filesystem::path p = sp->get<std::string>();
            cfg.simulate.solution_path = (p.is_relative() ? std::filesystem::path(base_dir) / p : p).string();
        }
        cfg.simulate.max_paths_csv = int_or(*s, "simulate", "max_paths_csv", cfg.simulate.max_paths_csv);
    }
    if (const json* is = optional_field(doc, "isaacs")) {
        cfg.isaacs.samples = int_or(*is, "isaacs", "samples", cfg.isaacs.samples);
        cfg.isaacs.grid_n = int_or(*is, "isaacs", "grid_n", cfg.isaacs.grid_n);
        cfg.isaacs.z_radius = number_or(*is, "isaacs", "z_radius", cfg.isaacs.z_radius);
        if (cfg.isaacs.samples < 1) fail("isaacs.samples", "must be >= 1");
        if (cfg.isaacs.grid_n < 2) fail("isaacs.grid_n", "must be >= 2");
    }
    if (const json* ge = optional_field(doc, "generator")) {
        if (const json* lv = optional_field(*ge, "levels")) {
            if (!lv->is_array() || lv->empty()) fail("generator.levels", "expected a nonempty array");
            cfg.generator.levels.clear();
            for (std::size_t k = 0; k < lv->size(); ++k) {
                const int n = as_int((*lv)[k], "generator.levels[" + std::to_string(k) + "]");
                if (n < 1) fail("generator.levels[" + std::to_string(k) + "]", "must be >= 1");
                cfg.generator.levels.push_back(n);
            }
        }
        cfg.generator.samples = int_or(*ge, "generator", "samples", cfg.generator.samples);
        if (cfg.generator.samples < 1) fail("generator.samples", "must be >= 1");
    }
    read_density(optional_field(doc, "density"), cfg);

    if (const json* out = optional_field(doc, "output_dir")) {
        if (!out->is_string()) fail("output_dir", "expected a path string");
        const std::filesystem::path p = out->get<std::string>();
        cfg.output_dir = (p.is_relative() ? std::filesystem::path(base_dir) / p : p).string();
    } else {
        cfg.output_dir = base_dir;
    }
    cfg.threads = int_or(doc, "", "threads", 0);
    if (cfg.threads < 0) fail("threads", "must be >= 0");
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
    }
    const auto dir = std::filesystem::path(path).parent_path();
    RunConfig cfg = parse_config(doc, dir.empty() ? "." : dir.string());
    if (const char* env = std::getenv(kSeedEnvVar)) cfg.seed = parse_seed_text(env, kSeedEnvVar);
    return cfg;
}

}  // namespace nashbsde
