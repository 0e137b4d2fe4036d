#pragma once

#include "dichotomy/admissibility.hpp"
#include "dichotomy/evolution.hpp"
#include "dichotomy/perturbation.hpp"
#include "dichotomy/reconstruct.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace dichotomy {

enum class Task { Axioms, Evolve, Solve, Check, Reconstruct, Perturb, Full };

std::string to_string(Task task);
std::optional<Task> parse_task(const std::string& text);

/// Configuration error with a "source:line: field 'x': message" diagnostic.
class ConfigError : public InvalidInput {
public:
    ConfigError(const std::string& source, int line, const std::string& field, const std::string& message);

    int line() const { return line_; }
    const std::string& field() const { return field_; }

private:
    int line_;
    std::string field_;
};

struct Tolerances {
    double cocycle = 1e-8;
    double residual = 1e-6;
    double kernel = 1e-6;  // factor of the scaled ||H||
    double projection = 1e-3;
};

/// Test input y: a pulse on [from, to], a Gaussian bump, or a constant.
struct InputSpec {
    std::string kind = "pulse";
    double from = 0.0;
    double to = 1.0;
    double center = 0.0;
    double width = 1.0;
    Vector direction;
};

struct AnalyticCertificate {
    Matrix projection;
    double alpha = 1.0;
    double beta = 1.0;
    double D = 1.0;
};

struct PerturbationConfig {
    std::vector<double> magnitudes;
    std::string phi = "exp_abs";  // exp_abs: e^{-r|t|}; gaussian: e^{-r t^2}
    double phi_rate = 1.0;
    Matrix direction;
};

struct LyapunovConfig {
    double margin = 0.5;
    double horizon = 40.0;
    double ds = 0.01;
};

struct Scenario {
    std::string source;
    std::string name;
    Task task = Task::Full;
    nlohmann::ordered_json system_json;
    nlohmann::ordered_json norms_json;
    EvolutionFamilyPtr family;  // with the configured norms
    double half_width = 15.0;
    double h = 0.01;
    Exponent p{2.0};
    Exponent q{2.0};
    Tolerances tolerances;
    std::vector<double> kernel_sweep;
    SolverOptions solver;
    int random_probes = 8;
    double interior_margin = 5.0;
    std::size_t node_stride = 10;
    std::optional<InputSpec> input;
    std::optional<Verdict> expect;
    std::optional<AnalyticCertificate> certificate;
    std::optional<PerturbationConfig> perturbation;
    LyapunovConfig lyapunov;
    std::uint64_t seed = 0;

    AdmissibilityConfig admissibility_config() const;
    ReconstructConfig reconstruct_config() const;
    Grid grid() const { return Grid::window(half_width, h); }
    /// The scenario input sampled on the grid (one-sided limits at jumps).
    GridFunction sample_input() const;
};

/// Parses and validates a scenario. Throws ConfigError.
Scenario parse_scenario(const std::string& text, const std::string& source);
Scenario load_scenario(const std::filesystem::path& path);

/// Checks the task-dependent invariants (reconstruction forbids (inf, 1)).
void validate_for_task(const Scenario& scenario, Task task);

}  // namespace dichotomy
