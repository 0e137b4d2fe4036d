#pragma once

#include "dichotomy/scenario.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>

namespace dichotomy {

using ordered_json = nlohmann::ordered_json;

enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitMismatch = 2, kExitInconclusive = 3 };

/// Finite doubles as numbers; inf, -inf and nan as strings (JSON has no
/// literal for them).
ordered_json json_number(double value);

/// Max over nodes (both one-sided limits) of ||a(t) - b(t)||_t.
double nodewise_discrepancy(const GridFunction& a, const GridFunction& b);

/// Files produced by a run, keyed by path relative to the output directory.
/// Written once, after the run, by write_artifacts.
struct Artifacts {
    std::map<std::string, std::string> files;
};

struct RunResult {
    int exit_code = kExitOk;
    ordered_json report;
    std::string message;
    Artifacts artifacts;
};

/// Executes `task` on a validated scenario. Library errors other than
/// configuration errors are caught and reported as inconclusive.
RunResult run_task(const Scenario& scenario, Task task);

void write_artifacts(const std::filesystem::path& out, const RunResult& result,
                     const std::filesystem::path& config_path);

/// Whole pipeline behind the CLI: load, validate, run, write. Returns the exit
/// code; diagnostics go to stderr.
int run_scenario(const std::filesystem::path& config, const std::filesystem::path& out,
                 std::optional<std::uint64_t> seed, std::optional<Task> task);

}  // namespace dichotomy
