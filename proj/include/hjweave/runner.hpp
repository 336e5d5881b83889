#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hjweave/config.hpp"

namespace hjweave {

enum class Subcommand { certify, minimize, characteristics, evolve, oracle, compare };

/// Exit statuses of the command-line runner.
enum ExitCode : int {
    kExitSuccess = 0,
    kExitOther = 1,
    kExitConfig = 2,
    kExitConvergence = 3,
    kExitStability = 4,
    kExitSearchBox = 5,
};

std::optional<Subcommand> parse_subcommand(const std::string& name);
const char* subcommand_name(Subcommand command);

/// Exit status for an exception escaping a subcommand.
int exit_code_for(const std::exception& error);

struct RunOverrides {
    std::optional<std::string> output_directory;
    std::optional<int> threads;
    std::optional<std::uint64_t> seed;
    /// Field files for `compare`; defaults to evolve.csv and oracle.csv in the output directory.
    std::vector<std::string> compare_files;
};

struct RunResult {
    int exit_code = kExitSuccess;
    /// Files written, in order.
    std::vector<std::string> artifacts;
};

/// Runs one subcommand and writes its artifact into the output directory:
///   certify -> certify.json, minimize -> minimize.csv,
///   characteristics -> characteristics.csv, evolve -> evolve.csv,
///   oracle -> oracle.csv, compare -> compare.json.
/// Warnings and summaries go to `log`. Library errors propagate; see exit_code_for.
RunResult run(Subcommand command, ProblemConfig config, const RunOverrides& overrides, std::ostream& log);

}  // namespace hjweave
