#include "dichotomy/report_io.hpp"

#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace dichotomy;
namespace fs = std::filesystem;

namespace {

const std::string kMinimal = R"({
  "name": "t",
  "system": {"kind": "scalar", "a": -1},
  "window": 5,
  "h": 0.01,
  "p": 2,
  "q": 2
})";

std::string replace(std::string s, const std::string& from, const std::string& to)
{
    const auto at = s.find(from);
    REQUIRE(at != std::string::npos);
    return s.replace(at, from.size(), to);
}

ConfigError config_error(const std::string& text)
{
    try {
        (void)parse_scenario(text, "cfg.json");
    } catch (const ConfigError& e) {
        return e;
    }
    FAIL("expected a ConfigError");
    throw;
}

fs::path scratch(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / ("dichotomy_tests_" + std::to_string(::getpid())) / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

int run_cli(const std::string& args)
{
    const std::string cmd = std::string(DICHOTOMY_CLI) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p)
{
    std::ifstream f(p, std::ios::binary);
    std::stringstream s;
    s << f.rdbuf();
    return s.str();
}

}  // namespace

TEST_SUITE("scenario")
{
    TEST_CASE("defaults")
    {
        const Scenario s = parse_scenario(kMinimal, "cfg.json");
        CHECK(s.task == Task::Full);
        CHECK(s.tolerances.cocycle == 1e-8);
        CHECK(s.tolerances.residual == 1e-6);
        CHECK(s.tolerances.kernel == 1e-6);
        CHECK(s.tolerances.projection == 1e-3);
        CHECK(s.family->dimension() == 1);
        CHECK(s.grid().cells() == 1000);
        CHECK(s.admissibility_config().half_width == 5.0);
    }

    TEST_CASE("p >= q is enforced with a located diagnostic")
    {
        const ConfigError e = config_error(replace(kMinimal, "\"p\": 2", "\"p\": 1"));
        CHECK(std::string(e.what()).find("p >= q") != std::string::npos);
        CHECK(e.field() == "p");
        CHECK(e.line() == 6);
    }

    TEST_CASE("unknown system kind")
    {
        const ConfigError e = config_error(replace(kMinimal, "\"scalar\"", "\"banana\""));
        CHECK(e.field() == "system.kind");
        CHECK(e.line() == 3);
        CHECK(std::string(e.what()).rfind("cfg.json:3:", 0) == 0);
    }

    TEST_CASE("unparseable JSON reports the line")
    {
        const ConfigError e = config_error(replace(kMinimal, "\"h\": 0.01,", "\"h\": 0.01,,"));
        CHECK(e.line() == 5);
    }

    TEST_CASE("grid step must divide the window and the input jumps")
    {
        CHECK(config_error(replace(kMinimal, "0.01", "0.03")).field() == "h");
        const std::string with_input = replace(kMinimal, "\"q\": 2", "\"q\": 2,\n  \"input\": {\"kind\": \"pulse\", \"from\": 0.005, \"to\": 1}");
        CHECK(config_error(with_input).field() == "input.from");
    }

    TEST_CASE("other validation")
    {
        CHECK(config_error(replace(kMinimal, "\"q\": 2", "\"q\": 2, \"colour\": 1")).field() == "colour");
        CHECK(config_error(replace(kMinimal, "\"p\": 2", "\"p\": 0.5")).field() == "p");
        CHECK(config_error(replace(kMinimal, "\"q\": 2", "\"q\": 2, \"task\": \"dance\"")).field() == "task");
        CHECK(config_error(replace(kMinimal, "\"q\": 2", "\"q\": 2, \"norms\": {\"kind\": \"adapted\"}")).field() == "norms.kind");
        const Scenario inf1 = parse_scenario(replace(replace(kMinimal, "\"p\": 2", "\"p\": \"inf\""), "\"q\": 2", "\"q\": 1"), "cfg.json");
        CHECK_THROWS_AS(validate_for_task(inf1, Task::Reconstruct), ConfigError);
        CHECK_NOTHROW(validate_for_task(inf1, Task::Check));
    }

    TEST_CASE("every bundled scenario parses")
    {
        int count = 0;
        for (const auto& entry : fs::directory_iterator(DICHOTOMY_SCENARIO_DIR)) {
            if (entry.path().extension() != ".json")
                continue;
            CAPTURE(entry.path().string());
            CHECK_NOTHROW((void)load_scenario(entry.path()));
            ++count;
        }
        CHECK(count >= 9);
    }

    TEST_CASE("run_task is deterministic")
    {
        const Scenario s = load_scenario(fs::path(DICHOTOMY_SCENARIO_DIR) / "scalar_stable.json");
        const RunResult a = run_task(s, Task::Full);
        const RunResult b = run_task(s, Task::Full);
        CHECK(a.exit_code == kExitOk);
        CHECK(a.report.dump(2) == b.report.dump(2));
        CHECK(a.artifacts.files == b.artifacts.files);
        CHECK(a.artifacts.files.count("certificate.json") == 1);
        CHECK(a.artifacts.files.count("projections.csv") == 1);
        CHECK(a.report["results"]["check"]["verdict"] == "admissible");
        CHECK(a.report["results"]["reconstruct"]["fitted"]["alpha"].get<double>() == doctest::Approx(1.0).epsilon(0.05));
    }

    TEST_CASE("a verdict mismatch exits with 2")
    {
        Scenario s = load_scenario(fs::path(DICHOTOMY_SCENARIO_DIR) / "rotation.json");
        s.expect = Verdict::Admissible;
        CHECK(run_task(s, Task::Check).exit_code == kExitMismatch);
    }
}

TEST_SUITE("cli")
{
    TEST_CASE("bundled scalar_stable runs to completion")
    {
        const fs::path out = scratch("stable");
        CHECK(run_cli("full --config " + std::string(DICHOTOMY_SCENARIO_DIR) + "/scalar_stable.json --out " + out.string()) == 0);
        CHECK(fs::exists(out / "report.json"));
        CHECK(fs::exists(out / "metadata.json"));
        CHECK(fs::exists(out / "certificate.json"));
        CHECK(fs::exists(out / "projections.csv"));
        CHECK(fs::exists(out / "traces" / "x.csv"));
        CHECK(slurp(out / "report.json").find("generated_at") == std::string::npos);
    }

    TEST_CASE("rotation is reported not admissible with exit 0")
    {
        const fs::path out = scratch("rotation");
        CHECK(run_cli("check --config " + std::string(DICHOTOMY_SCENARIO_DIR) + "/rotation.json --out " + out.string()) == 0);
        CHECK(slurp(out / "report.json").find("\"verdict\": \"not-admissible\"") != std::string::npos);
        CHECK(fs::exists(out / "traces" / "witness.csv"));
    }

    TEST_CASE("(p, q) = (1, 2) is a configuration error")
    {
        const fs::path dir = scratch("bad");
        std::ofstream(dir / "bad.json") << replace(kMinimal, "\"p\": 2", "\"p\": 1");
        CHECK(run_cli("check --config " + (dir / "bad.json").string() + " --out " + (dir / "out").string()) == 1);
        CHECK(run_cli("check --out " + (dir / "out").string()) == 1);
    }

    TEST_CASE("perturb writes the sweep")
    {
        const fs::path out = scratch("perturb");
        CHECK(run_cli("perturb --config " + std::string(DICHOTOMY_SCENARIO_DIR) + "/scalar_perturb.json --seed 3 --out " + out.string()) == 0);
        const std::string sweep = slurp(out / "sweep.csv");
        CHECK(sweep.rfind("M,lhs,verdict,alpha_hat,beta_hat,D_hat", 0) == 0);
        CHECK(slurp(out / "report.json").find("\"seed\": 3") != std::string::npos);
    }
}
