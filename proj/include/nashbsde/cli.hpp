#pragma once

#include "nashbsde/config.hpp"

#include <iosfwd>
#include <string>

namespace nashbsde::cli {

enum ExitCode : int {
    kExitPass = 0,
    kExitVerificationFailed = 1,
    kExitInvalidConfig = 2,
    kExitNumericalError = 3,
};

/// Subcommand names: simulate, solve, verify-nash, check-isaacs,
/// verify-generator, density-check.
bool is_subcommand(const std::string& name);

/// Runs one subcommand on a parsed configuration, writes its artifacts under
/// cfg.output_dir and prints the one-line summary to `out`. Library errors
/// propagate as exceptions.
int run_subcommand(const std::string& name, const RunConfig& cfg, std::ostream& out);

/// Full command-line entry point; maps exceptions to exit codes.
int run(int argc, char** argv);

}  // namespace nashbsde::cli
