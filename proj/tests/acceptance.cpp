// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include "dichotomy/green.hpp"
#include "dichotomy/lyapunov_norms.hpp"
#include "dichotomy/perturbation.hpp"
#include "dichotomy/reconstruct.hpp"
#include "dichotomy/report_io.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

using namespace dichotomy;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string trim_separator(std::string s)
{
    if (s.size() >= 2 && s.compare(s.size() - 2, 2, "; ") == 0)
        s.resize(s.size() - 2);
    return s;
}

const Matrix kSaddleP = (Matrix(2, 2) << 1.0, 0.0, 0.0, 0.0).finished();

EvolutionFamilyPtr saddle()
{
    return std::make_shared<const EvolutionFamily>(EvolutionFamily::diagonal((Vector(2) << -1.0, 1.0).finished()));
}

GridFunction pulse(const Grid& g, NormFamilyPtr norms, Vector direction, double a = 0.0, double b = 1.0)
{
    return GridFunction::sample_sided(g, norms, [=](double t, Side s) { return Vector(direction * indicator(a, b, t, s)); });
}

Outcome cocycle_fidelity()
{
    const auto start = std::chrono::steady_clock::now();
    const EvolutionFamily f = EvolutionFamily::time_varying(
        2, [](double t) { return (Matrix(2, 2) << -1.0, std::sin(t), 0.0, -2.0).finished(); }, 1e-3, "triangular");
    double worst = 0.0;
    int samples = 0;
    for (double tau = -4.0; tau <= 4.0; tau += 0.5)
        for (double s = tau; s <= 4.0; s += 0.5)
            for (double t = s; t <= 4.0; t += 0.5) {
                worst = std::max(worst, cocycle_residual(f, tau, s, t));
                ++samples;
            }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {worst <= 1e-7 && secs < 10.0,
            "max residual " + fmt(worst) + " over " + std::to_string(samples) + " triples in " + fmt(secs) + " s"};
}

Outcome forward_bound()
{
    const Grid g = Grid::window(15.0, 0.01);
    const auto fam = std::make_shared<const EvolutionFamily>(EvolutionFamily::constant_scalar(-1.0));
    const auto cert = make_constant_certificate(fam, g, Matrix::Ones(1, 1), 1.0, 1.0, 1.0);
    const GridFunction y = pulse(g, fam->norms_ptr(), Vector::Ones(1));
    const GreenSolution s = green_solve(cert, y);
    const double sup = lp_norm(s.x, Exponent::infinity());
    const SolutionBounds b = dichotomy_solution_bounds(cert, Exponent::infinity(), Exponent(2.0));
    const double b_formula = 2.0 / (1.0 - std::exp(-1.0));
    const double residual = mild_residual(s.x, y, *fam);
    const bool ok = std::abs(sup - 0.632121) <= 1e-3 && std::abs(b.sup_bound() - b_formula) <= 1e-12 &&
                    sup <= b.sup_bound() * lp_norm(y, Exponent(2.0)) && residual <= 1e-6;
    return {ok, "||x||_inf " + fmt(sup) + ", B_inf " + fmt(b.sup_bound()) + ", residual " + fmt(residual)};
}

Outcome young_bound()
{
    const Grid g = Grid::window(15.0, 0.01);
    const auto fam = saddle();
    const auto cert = make_constant_certificate(fam, g, kSaddleP, 1.0, 1.0, 1.0);
    const auto norms = fam->norms_ptr();
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> centre(-6.0, 6.0);
    std::uniform_real_distribution<double> width(0.2, 4.0);
    std::normal_distribution<double> gauss;

    // 20 probes: pulses, bumps, and random step functions, all hitting the
    // unstable coordinate.
    std::vector<GridFunction> probes;
    for (int k = 0; k < 20; ++k) {
        const Vector dir = (Vector(2) << gauss(rng), 1.0 + std::abs(gauss(rng))).finished();
        if (k % 3 == 0) {
            const double a = std::round(centre(rng) * 100.0) / 100.0;
            const double w = std::round(width(rng) * 100.0) / 100.0;
            probes.push_back(pulse(g, norms, dir, a, a + w));
        } else if (k % 3 == 1) {
            const double c = centre(rng), w = width(rng);
            probes.push_back(GridFunction::sample(g, norms, [=](double t) { return Vector(dir * std::exp(-(t - c) * (t - c) / (w * w))); }));
        } else {
            std::vector<double> levels;
            for (int j = 0; j < 12; ++j)
                levels.push_back(gauss(rng));
            probes.push_back(GridFunction::sample_sided(g, norms, [=](double t, Side s) {
                const double u = std::floor(t + 6.0 - (s == Side::Left ? 1e-9 : 0.0));
                const double level = (u >= 0.0 && u < 12.0) ? levels[static_cast<std::size_t>(u)] : 0.0;
                return Vector(dir * level);
            }));
        }
    }
    const std::vector<std::pair<Exponent, Exponent>> pairs{{Exponent(2.0), Exponent(2.0)},
                                                           {Exponent::infinity(), Exponent(2.0)},
                                                           {Exponent(2.0), Exponent(1.0)},
                                                           {Exponent::infinity(), Exponent::infinity()}};
    double worst = 0.0;
    for (const GridFunction& y : probes) {
        const GreenSolution s = green_solve(cert, y);
        for (const auto& [p, q] : pairs) {
            const SolutionBounds b = dichotomy_solution_bounds(cert, p, q);
            worst = std::max(worst, lp_norm(s.unstable_part, p) / (b.lp_unstable * lp_norm(y, q)));
        }
    }
    return {worst <= 1.0 + 1e-3, "max ||x2||_p / bound " + fmt(worst) + " over 20 probes x 4 pairs"};
}

Outcome oracle_equivalence()
{
    std::string detail;
    bool ok = true;
    int count = 0;
    for (const char* name : {"scalar_stable", "scalar_unstable", "saddle", "triangular"}) {
        const Scenario s = load_scenario(fs::path(DICHOTOMY_SCENARIO_DIR) / (std::string(name) + ".json"));
        const GridFunction y = s.sample_input();
        const SolveResult r = solve_bounded(*s.family, y, s.p, s.q, s.solver);
        const auto cert = make_constant_certificate(s.family, s.grid(), s.certificate->projection, s.certificate->alpha,
                                                    s.certificate->beta, s.certificate->D);
        const GreenSolution green = green_solve(cert, y);
        const double tol = std::max(1e-3, 10.0 * s.h * s.h);
        const double disc = r.x ? nodewise_discrepancy(*r.x, green.x) : kInfinity;
        ok = ok && disc <= tol;
        detail += std::string(count++ ? ", " : "") + name + " " + fmt(disc);
    }
    return {ok, "node-wise discrepancy: " + detail};
}

Outcome converse_reconstruction()
{
    ReconstructConfig cfg;
    cfg.admissibility.half_width = 15.0;
    const ReconstructionReport r = certify_dichotomy(*saddle(), Exponent(2.0), Exponent(2.0), cfg);
    if (!r.certificate)
        return {false, "no certificate"};
    double worst = 0.0;
    for (const Matrix& P : r.certificate->projections)
        worst = std::max(worst, spectral_norm(P - kSaddleP));
    const double G = r.admissibility.g_norm_estimate;
    const double theta = 1.0;
    const double T = std::pow(4.0 * r.growth.K * std::exp(r.growth.c) * G * G, 1.0 / theta);
    const double lambda = std::log(2.0) / T;
    const bool formulas = std::abs(r.conservative.T - T) <= 1e-12 * T && std::abs(r.conservative.lambda - lambda) <= 1e-12 * lambda;
    const bool ok = worst <= 1e-3 && r.worst_invariance.residual <= 1e-6 && std::abs(r.fitted.alpha - 1.0) <= 0.05 &&
                    std::abs(r.fitted.beta - 1.0) <= 0.05 && formulas;
    return {ok, "max ||P - diag(1,0)|| " + fmt(worst) + ", invariance " + fmt(r.worst_invariance.residual) + ", alpha " +
                    fmt(r.fitted.alpha) + ", beta " + fmt(r.fitted.beta) + ", T " + fmt(r.conservative.T) + ", lambda " +
                    fmt(r.conservative.lambda)};
}

Outcome negative_detection()
{
    AdmissibilityConfig cfg;
    cfg.half_width = 20.0;
    cfg.sweep = {5.0, 10.0, 20.0};
    bool ok = true;
    std::string detail;
    const std::vector<std::pair<std::string, EvolutionFamily>> families{
        {"A=0", EvolutionFamily::constant_scalar(0.0)},
        {"rotation", EvolutionFamily::constant_matrix((Matrix(2, 2) << 0.0, 1.0, -1.0, 0.0).finished())}};
    for (const auto& [name, f] : families) {
        const AdmissibilityReport r = check_admissibility(f, Exponent(2.0), Exponent(2.0), cfg);
        const auto& w = r.kernel.windows;
        const bool decreasing = w.size() == 3 && w[0].sigma_min > w[1].sigma_min && w[1].sigma_min > w[2].sigma_min;
        ok = ok && r.verdict == Verdict::NotAdmissible && r.kernel.witness.has_value() && decreasing;
        detail += name + ": " + to_string(r.verdict) + ", sigma";
        for (const auto& x : w)
            detail += " " + fmt(x.sigma_min);
        detail += r.kernel.witness ? ", witness growth " + fmt(r.kernel.witness_growth) + "; " : ", no witness; ";
    }
    return {ok, trim_separator(detail)};
}

Outcome projection_uniqueness()
{
    bool ok = true;
    std::string detail;
    for (const auto& entry : fs::directory_iterator(DICHOTOMY_SCENARIO_DIR)) {
        if (entry.path().extension() != ".json")
            continue;
        const Scenario s = load_scenario(entry.path());
        if (!s.certificate)
            continue;
        const auto name = entry.path().stem().string();
        try {
            const ReconstructionReport r = certify_dichotomy(*s.family, s.p, s.q, s.reconstruct_config());
            if (!r.certificate) {
                ok = false;
                detail += name + " uncertified (" + to_string(r.admissibility.verdict) + "); ";
                continue;
            }
            double worst = 0.0;
            for (const Matrix& P : r.certificate->projections)
                worst = std::max(worst, spectral_norm(P - s.certificate->projection));
            ok = ok && worst <= 1e-3;
            detail += name + " " + fmt(worst) + "; ";
        } catch (const Error& e) {
            ok = false;
            detail += name + " error: " + e.what() + "; ";
        }
    }
    return {ok, trim_separator(detail)};
}

Outcome nonuniform_showcase()
{
    const auto fam = std::make_shared<const EvolutionFamily>(EvolutionFamily::nonuniform_scalar(3.0));
    // Constant norms: least K(tau) for a rate-1 bound from tau.
    std::vector<double> taus;
    for (int k = -20; k <= 20; ++k)
        taus.push_back(k);
    const auto K = uniform_constant_profile(*fam, taus, 1.0, 10.0, 0.01);
    std::vector<double> sup_log_k;
    for (double R : {5.0, 10.0, 20.0}) {
        double m = 0.0;
        for (std::size_t i = 0; i < taus.size(); ++i)
            if (std::abs(taus[i]) <= R)
                m = std::max(m, std::log(K[i]));
        sup_log_k.push_back(m);
    }
    const bool grows = sup_log_k[0] < sup_log_k[1] && sup_log_k[1] < sup_log_k[2] && sup_log_k[2] - sup_log_k[0] > 10.0;

    const Grid g = Grid::window(20.0, 0.01);
    const auto cert = make_constant_certificate(fam, g, Matrix::Ones(1, 1), 1.0, 1.0, 1.0);
    LyapunovOptions opt;
    opt.rate_margin = 0.5;
    opt.horizon = 40.0;
    opt.ds = 0.01;
    const LyapunovNorms ln = build_lyapunov_norms(*fam, cert, opt);
    const NormFamily& nf = *ln.norms;
    double worst = 0.0;
    for (double tau = -20.0; tau <= 20.0; tau += 0.5)
        for (double lag : {0.1, 0.5, 1.0, 2.0, 5.0}) {
            const Vector x = Vector::Ones(1);
            worst = std::max(worst, nf(tau + lag, fam->propagator(tau + lag, tau) * x) / (std::exp(-0.5 * lag) * nf(tau, x)));
        }
    std::vector<double> times;
    for (double t = -20.0; t <= 20.0; t += 1.0)
        times.push_back(t);
    const std::vector<Vector> vecs{Vector::Ones(1)};
    const EnvelopeReport env = verify_envelope(nf, times, vecs);
    const bool ok = grows && worst <= 1.0 + 1e-9 && env.holds() && env.fitted_eps <= 2.2;
    return {ok, "constant-norm sup log K over |tau| <= 5/10/20: " + fmt(sup_log_k[0]) + "/" + fmt(sup_log_k[1]) + "/" +
                    fmt(sup_log_k[2]) + "; adapted contraction ratio " + fmt(worst) + ", fitted eps " + fmt(env.fitted_eps)};
}

Outcome perturbation_robustness()
{
    const EvolutionFamily base = EvolutionFamily::constant_scalar(-1.0);
    const PerturbationSpec spec = make_perturbation(0.0, base.norms(), [](double t) { return std::exp(-std::abs(t)); },
                                                    "exp(-|t|)", Matrix::Ones(1, 1));
    ReconstructConfig cfg;
    cfg.admissibility.half_width = 15.0;
    const SweepReport sw = robustness_experiment(base, spec, {0.0, 0.05, 0.1, 0.2}, Exponent(2.0), Exponent(2.0), cfg);
    bool ok = sw.consistent;
    double identity = 0.0;
    double gronwall = 0.0;
    for (const SweepRow& row : sw.rows) {
        ok = ok && (!row.satisfied || row.certified) && row.error.empty();
        identity = std::max(identity, row.identity_residual);
        gronwall = std::max(gronwall, row.gronwall_ratio);
        const IdentityCheck ic = operator_identity(base, spec.with_magnitude(row.magnitude), Grid::window(5.0, 0.01), 0);
        identity = std::max(identity, ic.matrix_residual);
    }
    ok = ok && identity <= 1e-10 && gronwall <= 1.0 + 1e-9;
    std::string lhs;
    for (const SweepRow& row : sw.rows)
        lhs += (lhs.empty() ? "" : "/") + fmt(row.lhs) + (row.certified ? "+" : "-");
    return {ok, "lhs (certified) " + lhs + ", identity residual " + fmt(identity) + ", Gronwall ratio " + fmt(gronwall)};
}

Outcome determinism()
{
    const fs::path root = fs::temp_directory_path() / ("dichotomy_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(root);
    std::vector<std::string> reports;
    for (const char* run : {"a", "b"}) {
        const std::string cmd = std::string(DICHOTOMY_CLI) + " full --config " + DICHOTOMY_SCENARIO_DIR +
                                "/saddle.json --seed 42 --out " + (root / run).string() + " > /dev/null 2>&1";
        const int status = std::system(cmd.c_str());
        if (!WIFEXITED(status) || WEXITSTATUS(status) != 0)
            return {false, "CLI run failed"};
        std::ifstream in(root / run / "report.json", std::ios::binary);
        std::stringstream s;
        s << in.rdbuf();
        reports.push_back(s.str());
    }
    fs::remove_all(root);
    return {!reports[0].empty() && reports[0] == reports[1], std::to_string(reports[0].size()) + " bytes, identical: " +
                                                                 (reports[0] == reports[1] ? "yes" : "no")};
}

}  // namespace

int main()
{
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"cocycle fidelity", cocycle_fidelity},
        {"forward bound", forward_bound},
        {"Young bound", young_bound},
        {"oracle equivalence", oracle_equivalence},
        {"converse reconstruction", converse_reconstruction},
        {"negative detection", negative_detection},
        {"projection uniqueness", projection_uniqueness},
        {"nonuniform showcase", nonuniform_showcase},
        {"perturbation robustness", perturbation_robustness},
        {"determinism", determinism},
    };
    int failures = 0;
    int index = 0;
    for (const auto& [name, run] : criteria) {
        ++index;
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += o.pass ? 0 : 1;
        std::printf("criterion %d %s: %s (%s)\n", index, name.c_str(), o.pass ? "PASS" : "FAIL", o.detail.c_str());
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
