#pragma once

#include "nashbsde/bsde_solver.hpp"
#include "nashbsde/density_tools.hpp"
#include "nashbsde/game_model.hpp"
#include "nashbsde/mollify.hpp"
#include "nashbsde/payoff_nash.hpp"
#include "nashbsde/regression.hpp"
#include "nashbsde/sde_engine.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace nashbsde {

/// Environment variable that replaces monte_carlo.seed when set.
inline constexpr const char* kSeedEnvVar = "NASHBSDE_SEED";

struct SimulateOptions {
    bool controlled = false;
    /// Solution document whose Z field drives the controlled feedbacks (optional).
    std::string solution_path;
    int max_paths_csv = 1000;
};

struct IsaacsOptions {
    int samples = 100;
    int grid_n = 201;
    double z_radius = 5.0;
};

struct GeneratorOptions {
    std::vector<int> levels{4, 8, 16};
    int samples = 200;
};

struct DensityOptions {
    Matrix sigma;
    double t0 = 0.0;
    Vector x0;
    AronsonParams aronson;
    std::vector<double> times;
    std::vector<double> offsets;
    double t1 = 0.0;
    Vector x1;
    double delta = 0.1;
    double k = 3.0;
    double q = 2.0;
    double horizon = 1.0;
};

struct RunConfig {
    GameSpec game;
    /// Present when the game came from LqGameParams (builtin games).
    std::optional<LqGameParams> lq_params;
    Vector x0;
    TimeGrid grid;
    int n_paths = 10000;
    std::uint64_t seed = 0;
    RegressionBasis basis;
    std::optional<MollifyParams> mollify;
    PicardOptions picard;
    FamilySpec family;
    double rel_tol = 0.01;
    double w0_rel_allowance = 0.02;
    SimulateOptions simulate;
    IsaacsOptions isaacs;
    GeneratorOptions generator;
    DensityOptions density;
    std::string output_dir = ".";
    int threads = 0;
};

/// Builds a run configuration. Throws ConfigError naming the field path
/// (e.g. "grid.n_steps") for missing, mistyped or out-of-range entries.
RunConfig parse_config(const nlohmann::json& doc, const std::string& base_dir = ".");

/// Reads and parses a config file; relative output_dir resolves against the
/// file's directory. Applies the seed environment override.
RunConfig load_config(const std::string& path);

}  // namespace nashbsde
