#include "dichotomy/report_io.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

int main(int argc, char** argv)
{
    using namespace dichotomy;

    CLI::App app{"Exponential dichotomy toolkit: admissibility checks, converse reconstruction, robustness sweeps"};
    app.require_subcommand(1);

    std::string config;
    std::string out = "out";
    std::optional<std::uint64_t> seed;
    std::optional<Task> chosen;

    for (Task task : {Task::Axioms, Task::Evolve, Task::Solve, Task::Check, Task::Reconstruct, Task::Perturb, Task::Full}) {
        auto* sub = app.add_subcommand(to_string(task));
        sub->add_option("--config", config, "Scenario JSON file")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out, "Output directory")->capture_default_str();
        sub->add_option("--seed", seed, "Seed for the random probes (overrides the scenario)");
        sub->callback([&chosen, task] { chosen = task; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }
    return run_scenario(config, out, seed, chosen);
}
