#include "nashbsde/cli.hpp"
#include "nashbsde/config.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

using namespace nashbsde;
namespace fs = std::filesystem;

namespace {

nlohmann::json base_config() {
    std::ifstream in(fs::path(NASHBSDE_CONFIG_DIR) / "lq_paper.json");
    nlohmann::json doc = nlohmann::json::parse(in);
    doc["grid"]["n_steps"] = 10;
    doc["monte_carlo"]["n_paths"] = 2000;
    doc["basis"]["degree"] = 3;
    doc["nash"]["constants"] = 3;
    doc["nash"]["bang_bang"] = 1;
    doc["nash"]["perturbed"] = 1;
    doc["isaacs"]["samples"] = 10;
    doc["generator"]["samples"] = 20;
    doc["generator"]["levels"] = {4, 8};
    return doc;
}

fs::path write_config(const std::string& name, nlohmann::json doc) {
    const fs::path dir = fs::path(NASHBSDE_WORK_DIR) / name;
    fs::create_directories(dir);
    doc["output_dir"] = "out";
    const fs::path path = dir / "config.json";
    std::ofstream(path) << doc.dump(2);
    return path;
}

struct Result {
    int code = 0;
    std::string out;
    std::string err;
};

Result run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "nashbsde_cli");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    std::ostringstream out, err;
    auto* old_out = std::cout.rdbuf(out.rdbuf());
    auto* old_err = std::cerr.rdbuf(err.rdbuf());
    Result r;
    r.code = cli::run(static_cast<int>(argv.size()), argv.data());
    std::cout.rdbuf(old_out);
    std::cerr.rdbuf(old_err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

}  // namespace

TEST_CASE("missing field is an invalid config naming the field") {
    nlohmann::json doc = base_config();
    doc["grid"].erase("n_steps");
    const Result r = run_cli({"solve", "-c", write_config("missing", doc).string()});
    CHECK(r.code == cli::kExitInvalidConfig);
    CHECK((r.out + r.err).find("grid.n_steps") != std::string::npos);
    CHECK(r.out.find("status=fail") != std::string::npos);
}

TEST_CASE("config errors") {
    nlohmann::json doc = base_config();
    doc["grid"]["t0"] = 0.5;
    CHECK_THROWS_AS(parse_config(doc, "."), ConfigError);
    doc = base_config();
    doc["monte_carlo"]["seed"] = -4;
    CHECK_THROWS_AS(parse_config(doc, "."), ConfigError);
    doc = base_config();
    doc["monte_carlo"]["n_paths"] = 30;
    CHECK_THROWS_AS(parse_config(doc, "."), ConfigError);
    doc = base_config();
    doc["game"]["builtin"] = "chess";
    CHECK_THROWS_AS(parse_config(doc, "."), ConfigError);
    doc = base_config();
    doc["monte_carlo"]["seed"] = "18446744073709551615";
    CHECK(parse_config(doc, ".").seed == 18446744073709551615ULL);
    doc["monte_carlo"]["seed"] = 18446744073709551615ULL;
    CHECK(parse_config(doc, ".").seed == 18446744073709551615ULL);
    doc["output_dir"] = "out";
    CHECK(parse_config(doc, "/base").output_dir == fs::path("/base/out").string());
    CHECK(run_cli({"solve", "-c", (fs::path(NASHBSDE_WORK_DIR) / "nowhere.json").string()}).code == cli::kExitInvalidConfig);
    CHECK_FALSE(cli::is_subcommand("dance"));
    CHECK(cli::is_subcommand("verify-nash"));
}

TEST_CASE("seed override from the environment") {
    const fs::path path = write_config("seed", base_config());
    ::setenv(kSeedEnvVar, "77", 1);
    const RunConfig a = load_config(path.string());
    ::unsetenv(kSeedEnvVar);
    const RunConfig b = load_config(path.string());
    CHECK(a.seed == 77);
    CHECK(b.seed == 20240611);
    ::setenv(kSeedEnvVar, "not-a-number", 1);
    CHECK_THROWS_AS(load_config(path.string()), ConfigError);
    ::unsetenv(kSeedEnvVar);
}

TEST_CASE("solve is byte-identical across repeats and thread counts") {
    const fs::path path = write_config("determinism", base_config());
    const fs::path out = path.parent_path() / "out";
    const Result first = run_cli({"solve", "-c", path.string(), "-t", "1"});
    REQUIRE(first.code == cli::kExitPass);
    CHECK(first.out.rfind("status=pass subcommand=solve", 0) == 0);
    const std::string sol1 = slurp(out / "solution.json");
    const std::string conv1 = slurp(out / "convergence.csv");
    CHECK(conv1.rfind("knot,t,iterations,converged,final_residual,condition_number\n", 0) == 0);
    const Result second = run_cli({"solve", "-c", path.string(), "-t", "2"});
    REQUIRE(second.code == cli::kExitPass);
    CHECK(slurp(out / "solution.json") == sol1);
    CHECK(slurp(out / "convergence.csv") == conv1);
    CHECK(second.out == first.out);
}

TEST_CASE("every subcommand runs on a small config") {
    const fs::path path = write_config("all", base_config());
    const fs::path out = path.parent_path() / "out";
    for (const char* sub : {"simulate", "check-isaacs", "verify-generator", "density-check"}) {
        const Result r = run_cli({sub, "-c", path.string()});
        CHECK_MESSAGE(r.code == cli::kExitPass, sub, " ", r.out, r.err);
    }
    CHECK(fs::exists(out / "paths.csv"));
    CHECK(fs::exists(out / "isaacs_report.csv"));
    CHECK(fs::exists(out / "generator_report.csv"));
    CHECK(fs::exists(out / "aronson_violations.csv"));
    CHECK(fs::exists(out / "density_report.json"));
    const Result other = run_cli({"simulate", "-c", path.string(), "-o", (out / "elsewhere").string()});
    CHECK(other.code == cli::kExitPass);
    CHECK(fs::exists(out / "elsewhere" / "paths.csv"));
}

TEST_CASE("numerical failure maps to its exit code") {
    nlohmann::json doc = base_config();
    doc["game"]["builtin"] = "gbm_extension";
    doc["x0"] = {1e308};
    const Result r = run_cli({"solve", "-c", write_config("overflow", doc).string()});
    CHECK(r.code == cli::kExitNumericalError);
    CHECK(r.out.find("status=fail") != std::string::npos);
}

TEST_CASE("usage errors") {
    CHECK(run_cli({"solve"}).code != cli::kExitPass);
    CHECK(run_cli({}).code != cli::kExitPass);
}
