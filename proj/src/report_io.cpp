#include "dichotomy/report_io.hpp"

#include "dichotomy/green.hpp"
#include "dichotomy/lyapunov_norms.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

namespace dichotomy {

ordered_json json_number(double value)
{
    if (std::isnan(value))
        return "nan";
    if (std::isinf(value))
        return value > 0 ? "inf" : "-inf";
    return value;
}

double nodewise_discrepancy(const GridFunction& a, const GridFunction& b)
{
    const GridFunction d = a - b;
    double worst = 0.0;
    for (std::size_t i = 0; i < d.grid().nodes(); ++i) {
        const double t = d.grid().time(i);
        worst = std::max({worst, d.norms()(t, d.left(i)), d.norms()(t, d.right(i))});
    }
    return worst;
}

namespace {

ordered_json matrix_json(const Matrix& m)
{
    ordered_json rows = ordered_json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        ordered_json row = ordered_json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            row.push_back(json_number(m(i, j)));
        rows.push_back(row);
    }
    return rows;
}

ordered_json growth_json(const GrowthBound& g)
{
    return {{"K", json_number(g.K)}, {"c", json_number(g.c)}};
}

std::string csv_number(double v)
{
    std::ostringstream s;
    s << std::setprecision(17) << v;
    return s.str();
}

std::string function_csv(const GridFunction& f)
{
    std::ostringstream s;
    write_csv(s, f);
    return s.str();
}

std::vector<double> linspace(double a, double b, int n)
{
    std::vector<double> v;
    for (int i = 0; i < n; ++i)
        v.push_back(n == 1 ? a : a + (b - a) * i / (n - 1));
    return v;
}

// Accumulated state of a run: the worst outcome decides the exit code.
struct Status {
    std::optional<Verdict> verdict;
    bool inconclusive = false;
    bool mismatch = false;
    std::vector<std::string> messages;

    void fail_check(const std::string& what)
    {
        mismatch = true;
        messages.push_back("check failed: " + what);
    }
};

struct Context {
    const Scenario& s;
    Status status;
    Artifacts artifacts;
    std::optional<AdmissibilityReport> admissibility;
};

std::optional<DichotomyCertificate> analytic_certificate(const Scenario& s)
{
    if (!s.certificate)
        return std::nullopt;
    return make_constant_certificate(s.family, s.grid(), s.certificate->projection, s.certificate->alpha,
                                     s.certificate->beta, s.certificate->D);
}

ordered_json run_axioms(Context& ctx)
{
    const Scenario& s = ctx.s;
    const EvolutionFamily& fam = *s.family;
    const NormFamily& norms = fam.norms();
    const int n = fam.dimension();
    std::mt19937_64 rng(s.seed);
    std::normal_distribution<double> gauss;

    const auto times = linspace(-s.half_width, s.half_width, 21);
    std::vector<Vector> vectors;
    for (int j = 0; j < n; ++j)
        vectors.push_back(Vector::Unit(n, j));
    for (int k = 0; k < 6; ++k) {
        Vector v(n);
        for (int j = 0; j < n; ++j)
            v(j) = gauss(rng);
        vectors.push_back(v);
    }
    const EnvelopeReport env = verify_envelope(norms, times, vectors);

    double homogeneity = 0.0;
    double triangle = 0.0;
    for (double t : times) {
        for (std::size_t k = 0; k < vectors.size(); ++k) {
            const Vector& x = vectors[k];
            const double nx = norms(t, x);
            for (double lambda : {-2.5, 0.3})
                homogeneity = std::max(homogeneity, std::abs(norms(t, lambda * x) - std::abs(lambda) * nx) /
                                                        (std::abs(lambda) * nx));
            const Vector& y = vectors[(k + 1) % vectors.size()];
            triangle = std::max(triangle, (norms(t, x + y) - nx - norms(t, y)) / (nx + norms(t, y)));
        }
    }
    const double axiom_tol = 1e-9;

    double identity = 0.0;
    for (double t : linspace(-s.half_width, s.half_width, 5))
        identity = std::max(identity, spectral_norm(fam.propagator(t, t) - Matrix::Identity(n, n)));

    std::uniform_real_distribution<double> uni(-s.half_width, s.half_width);
    double cocycle = 0.0;
    for (int k = 0; k < 12; ++k) {
        std::array<double, 3> ts{uni(rng), uni(rng), uni(rng)};
        std::sort(ts.begin(), ts.end());
        const double scale = std::max(1.0, spectral_norm(fam.propagator(ts[2], ts[0])));
        cocycle = std::max(cocycle, cocycle_residual(fam, ts[0], ts[1], ts[2]) / scale);
    }

    const double span = std::min(5.0, s.half_width);
    const auto taus = linspace(-s.half_width, s.half_width - span, 9);
    const auto lags = linspace(0.0, span, 11);
    const GrowthBound growth = estimate_growth_bound(fam, taus, lags);

    ordered_json out;
    out["norms"] = {{"kind", to_string(norms.kind())},
                    {"label", norms.label()},
                    {"declared_C", json_number(norms.envelope_c())},
                    {"declared_eps", json_number(norms.envelope_eps())},
                    {"fitted_C", json_number(env.fitted_c)},
                    {"fitted_eps", json_number(env.fitted_eps)},
                    {"max_lower_violation", json_number(env.max_lower_violation)},
                    {"max_upper_violation", json_number(env.max_upper_violation)},
                    {"envelope_holds", env.holds()},
                    {"homogeneity_defect", json_number(homogeneity)},
                    {"triangle_excess", json_number(std::max(0.0, triangle))},
                    {"axioms_hold", env.holds() && homogeneity <= axiom_tol && triangle <= axiom_tol}};
    if (!env.holds())
        ctx.status.fail_check("norm envelope");
    if (homogeneity > axiom_tol || triangle > axiom_tol)
        ctx.status.fail_check("norm homogeneity/triangle inequality");

    out["evolution"] = {{"kind", to_string(fam.kind())},
                        {"label", fam.label()},
                        {"identity_defect", json_number(identity)},
                        {"max_relative_cocycle_residual", json_number(cocycle)},
                        {"cocycle_tolerance", json_number(s.tolerances.cocycle)},
                        {"cocycle_holds", cocycle <= s.tolerances.cocycle},
                        {"growth", growth_json(growth)}};
    if (cocycle > s.tolerances.cocycle)
        ctx.status.fail_check("cocycle residual above tolerance");

    // Norm table ||e_j||_t for plotting.
    {
        std::ostringstream csv;
        csv << "t";
        for (int j = 0; j < n; ++j)
            csv << ",e" << (j + 1);
        csv << '\n';
        for (double t : linspace(-s.half_width, s.half_width, 201)) {
            csv << csv_number(t);
            for (int j = 0; j < n; ++j)
                csv << ',' << csv_number(norms(t, Vector::Unit(n, j)));
            csv << '\n';
        }
        ctx.artifacts.files["traces/norms.csv"] = csv.str();
    }

    if (s.certificate) {
        // Contraction of the certified splitting. Adapted norms make it
        // uniform with constant 1 at rate alpha - margin.
        const bool adapted = norms.kind() == NormKind::Adapted ||
                             s.norms_json.value("kind", std::string()) == "adapted";
        const double rate_s = adapted ? s.certificate->alpha - s.lyapunov.margin : s.certificate->alpha;
        const double rate_u = adapted ? s.certificate->beta - s.lyapunov.margin : s.certificate->beta;
        const double constant = adapted ? 1.0 : s.certificate->D;
        const Matrix& P = s.certificate->projection;
        const Matrix Q = Matrix::Identity(n, n) - P;
        double stable_ratio = 0.0;
        double unstable_ratio = 0.0;
        for (double tau : taus) {
            for (double lag : lags) {
                const Matrix T = fam.propagator(tau + lag, tau);
                for (const Vector& x : vectors) {
                    const Vector px = P * x;
                    if (px.norm() > 1e-12)
                        stable_ratio = std::max(stable_ratio, norms(tau + lag, T * px) /
                                                                  (constant * std::exp(-rate_s * lag) * norms(tau, px)));
                    const Vector qx = Q * x;
                    if (qx.norm() > 1e-12)
                        unstable_ratio = std::max(unstable_ratio, norms(tau, qx) / (constant * std::exp(-rate_u * lag) *
                                                                                    norms(tau + lag, T * qx)));
                }
            }
        }
        const double slack = adapted ? 1e-3 : 1e-9;
        out["certified_contraction"] = {{"stable_rate", json_number(rate_s)},
                                        {"unstable_rate", json_number(rate_u)},
                                        {"constant", json_number(constant)},
                                        {"max_stable_ratio", json_number(stable_ratio)},
                                        {"max_unstable_ratio", json_number(unstable_ratio)},
                                        {"holds", stable_ratio <= 1.0 + slack && unstable_ratio <= 1.0 + slack}};
        if (stable_ratio > 1.0 + slack || unstable_ratio > 1.0 + slack)
            ctx.status.fail_check("certified contraction");

        if (!adapted && P.isIdentity(1e-12)) {
            // How far a uniform constant in these norms has to grow with |tau|.
            const auto ktaus = linspace(-s.half_width, s.half_width, 9);
            const auto K = uniform_constant_profile(fam, ktaus, s.certificate->alpha, span, 0.05);
            ordered_json profile = ordered_json::array();
            for (std::size_t i = 0; i < ktaus.size(); ++i)
                profile.push_back({{"tau", json_number(ktaus[i])}, {"log_K", json_number(std::log(K[i]))}});
            out["uniform_constant_profile"] = {{"rate", json_number(s.certificate->alpha)}, {"samples", profile}};
        }
    }
    return out;
}

ordered_json run_evolve(Context& ctx)
{
    const Scenario& s = ctx.s;
    const EvolutionFamily& fam = *s.family;
    const int n = fam.dimension();
    const Grid g = s.grid();
    const CellPropagators cells(fam, g);

    const std::size_t stride = std::max<std::size_t>(1, g.cells() / 400);
    std::ostringstream csv;
    csv << "t";
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            csv << ",T" << (i + 1) << (j + 1);
    csv << ",norm\n";
    Matrix T = Matrix::Identity(n, n);
    double max_norm = 0.0;
    double max_step_cocycle = 0.0;
    for (std::size_t i = 0; i < g.nodes(); ++i) {
        if (i > 0)
            T = cells.step(i - 1) * T;
        if (i % stride == 0 || i + 1 == g.nodes()) {
            const double t = g.time(i);
            const double norm = operator_norm(T, fam.norms(), t, fam.norms(), g.start());
            max_norm = std::max(max_norm, norm);
            csv << csv_number(t);
            for (int r = 0; r < n; ++r)
                for (int c = 0; c < n; ++c)
                    csv << ',' << csv_number(T(r, c));
            csv << ',' << csv_number(norm) << '\n';
            // The composed cell propagators against one direct evaluation.
            if (i % (stride * 50) == 0 && i > 0) {
                const Matrix direct = fam.propagator(t, g.start());
                max_step_cocycle = std::max(max_step_cocycle, spectral_norm(direct - T) / std::max(1.0, spectral_norm(direct)));
            }
        }
    }
    ctx.artifacts.files["traces/propagator.csv"] = csv.str();

    const double span = std::min(5.0, s.half_width);
    const auto taus = linspace(-s.half_width, s.half_width - span, 9);
    const auto lags = linspace(0.0, span, 11);
    const GrowthBound growth = estimate_growth_bound(fam, taus, lags);
    return {{"from", json_number(g.start())},
            {"max_propagator_norm", json_number(max_norm)},
            {"composition_defect", json_number(max_step_cocycle)},
            {"growth", growth_json(growth)}};
}

GridFunction scenario_input(const Scenario& s)
{
    if (s.input)
        return s.sample_input();
    Scenario copy = s;
    InputSpec spec;
    spec.direction = Vector::Ones(s.family->dimension());
    copy.input = spec;
    return copy.sample_input();
}

ordered_json run_solve(Context& ctx)
{
    const Scenario& s = ctx.s;
    const EvolutionFamily& fam = *s.family;
    require_window_fits(fam, s.half_width);
    const GridFunction y = scenario_input(s);
    const SolveResult res = solve_bounded(fam, y, s.p, s.q, s.solver);

    ordered_json closure = {{"left_rows", res.closure.left_rows},
                            {"right_rows", res.closure.right_rows},
                            {"min_rate_margin", json_number(res.closure.min_rate_margin)},
                            {"ambiguous", res.closure.ambiguous},
                            {"condition_estimate", json_number(res.closure.condition_estimate)},
                            {"message", res.closure.message}};
    ordered_json out = {{"boundary", to_string(s.solver.mode)}, {"closure", closure}};
    ctx.artifacts.files["traces/y.csv"] = function_csv(y);
    if (res.inconclusive || !res.x) {
        ctx.status.inconclusive = true;
        ctx.status.messages.push_back("solve: boundary closure is ambiguous or singular");
        out["inconclusive"] = true;
        return out;
    }
    const GridFunction& x = *res.x;
    const double yq = lp_norm(y, s.q);
    out["inconclusive"] = false;
    out["mild_residual"] = json_number(res.residual);
    out["residual_holds"] = res.residual <= s.tolerances.residual;
    out["norm_y_q"] = json_number(yq);
    out["norm_x_sup"] = json_number(lp_norm(x, Exponent::infinity()));
    out["norm_x_p"] = json_number(lp_norm(x, s.p));
    out["norm_x_y1"] = json_number(y1_norm(x, s.p));
    if (res.residual > s.tolerances.residual)
        ctx.status.fail_check("solve: mild residual above tolerance");
    ctx.artifacts.files["traces/x.csv"] = function_csv(x);

    if (const auto cert = analytic_certificate(s)) {
        const GreenSolution green = green_solve(*cert, y);
        const double disc = nodewise_discrepancy(x, green.x);
        const double disc_tol = std::max(1e-3, 10.0 * s.h * s.h);
        const SolutionBounds b = dichotomy_solution_bounds(*cert, s.p, s.q);
        const double x1_sup = lp_norm(green.stable_part, Exponent::infinity());
        const double x2_sup = lp_norm(green.unstable_part, Exponent::infinity());
        const double slack = 1.0 + 1e-3;
        const bool sup_ok = x1_sup <= b.sup_stable * yq * slack && x2_sup <= b.sup_unstable * yq * slack;
        ordered_json bounds = {{"r", json_number(b.r)},
                               {"B_sup", json_number(b.sup_bound())},
                               {"sup_stable_bound", json_number(b.sup_stable * yq)},
                               {"sup_unstable_bound", json_number(b.sup_unstable * yq)},
                               {"norm_x1_sup", json_number(x1_sup)},
                               {"norm_x2_sup", json_number(x2_sup)},
                               {"sup_holds", sup_ok}};
        bool lp_ok = true;
        if (std::isfinite(b.r)) {
            const double x1_p = lp_norm(green.stable_part, s.p);
            const double x2_p = lp_norm(green.unstable_part, s.p);
            lp_ok = x1_p <= b.lp_stable * yq * slack && x2_p <= b.lp_unstable * yq * slack;
            bounds["B_p"] = json_number(b.lp_bound());
            bounds["lp_stable_bound"] = json_number(b.lp_stable * yq);
            bounds["lp_unstable_bound"] = json_number(b.lp_unstable * yq);
            bounds["norm_x1_p"] = json_number(x1_p);
            bounds["norm_x2_p"] = json_number(x2_p);
            bounds["lp_holds"] = lp_ok;
        }
        out["green"] = {{"mild_residual", json_number(mild_residual(green.x, y, fam))},
                        {"truncation_warning", green.truncation_warning},
                        {"tail_estimate", json_number(green.tail_estimate)},
                        {"oracle_discrepancy", json_number(disc)},
                        {"oracle_tolerance", json_number(disc_tol)},
                        {"oracle_holds", disc <= disc_tol},
                        {"bounds", bounds}};
        if (disc > disc_tol)
            ctx.status.fail_check("solve: bounded solution differs from the dichotomy formula");
        if (!sup_ok || !lp_ok)
            ctx.status.fail_check("solve: solution bound violated");
        ctx.artifacts.files["traces/x1.csv"] = function_csv(green.stable_part);
        ctx.artifacts.files["traces/x2.csv"] = function_csv(green.unstable_part);
    }
    return out;
}

ordered_json admissibility_json(const AdmissibilityReport& r)
{
    ordered_json windows = ordered_json::array();
    for (const auto& w : r.kernel.windows)
        windows.push_back({{"half_width", json_number(w.half_width)},
                           {"sigma_min", json_number(w.sigma_min)},
                           {"threshold", json_number(w.threshold)}});
    ordered_json kernel = {{"trend", to_string(r.kernel.trend)},
                           {"sigma_min", json_number(r.kernel.sigma_min)},
                           {"windows", windows},
                           {"witness", r.kernel.witness.has_value()}};
    if (r.kernel.witness) {
        kernel["witness_residual"] = json_number(r.kernel.witness_residual);
        kernel["witness_growth"] = json_number(r.kernel.witness_growth);
    }
    return {{"verdict", to_string(r.verdict)},
            {"p", r.p.to_string()},
            {"q", r.q.to_string()},
            {"half_width", json_number(r.half_width)},
            {"h", json_number(r.h)},
            {"g_norm_estimate", json_number(r.g_norm_estimate)},
            {"g_norm_warning", r.g_norm_warning},
            {"kernel_sigma_min", json_number(r.kernel_sigma_min)},
            {"kernel_threshold", json_number(r.kernel_threshold)},
            {"kernel", kernel},
            {"residual", json_number(r.residual)},
            {"mode_discrepancy", json_number(r.mode_discrepancy)},
            {"closure",
             {{"left_rows", r.closure.left_rows},
              {"right_rows", r.closure.right_rows},
              {"min_rate_margin", json_number(r.closure.min_rate_margin)},
              {"ambiguous", r.closure.ambiguous},
              {"condition_estimate", json_number(r.closure.condition_estimate)}}},
            {"probe_support_margin", json_number(r.probe_support_margin)},
            {"reconstruction_available", r.reconstruction_available},
            {"notes", r.notes}};
}

void record_verdict(Context& ctx, Verdict v)
{
    ctx.status.verdict = v;
    if (v == Verdict::Inconclusive && ctx.s.expect != Verdict::Inconclusive)
        ctx.status.inconclusive = true;
    else if (ctx.s.expect && *ctx.s.expect != v)
        ctx.status.mismatch = true;
}

ordered_json run_check(Context& ctx)
{
    const Scenario& s = ctx.s;
    const AdmissibilityReport r = check_admissibility(*s.family, s.p, s.q, s.admissibility_config());
    ctx.admissibility = r;
    record_verdict(ctx, r.verdict);
    if (r.kernel.witness)
        ctx.artifacts.files["traces/witness.csv"] = function_csv(*r.kernel.witness);
    ordered_json out = admissibility_json(r);
    if (s.expect)
        out["expected"] = to_string(*s.expect);
    return out;
}

ordered_json run_reconstruct(Context& ctx)
{
    const Scenario& s = ctx.s;
    ReconstructionReport r;
    try {
        r = certify_dichotomy(*s.family, s.p, s.q, s.reconstruct_config());
    } catch (const CertificationFailure& e) {
        ctx.status.inconclusive = true;
        ctx.status.messages.push_back(std::string("reconstruct: ") + e.what());
        return {{"certified", false}, {"error", e.what()}};
    }
    ctx.admissibility = r.admissibility;
    record_verdict(ctx, r.admissibility.verdict);

    ordered_json out = {{"admissibility", admissibility_json(r.admissibility)}, {"certified", r.certificate.has_value()}};
    if (!r.certificate) {
        out["notes"] = r.notes;
        return out;
    }
    const DichotomyCertificate& cert = *r.certificate;
    const int n = cert.dimension();

    ordered_json conservative = {{"theta", json_number(r.conservative.theta)},
                                 {"C", json_number(r.conservative.C)},
                                 {"T", json_number(r.conservative.T)},
                                 {"lambda", json_number(r.conservative.lambda)},
                                 {"D", json_number(r.conservative.D)}};
    ordered_json fitted = {{"alpha", json_number(r.fitted.alpha)},
                           {"beta", json_number(r.fitted.beta)},
                           {"D", json_number(r.fitted.D)},
                           {"alpha_placeholder", r.fitted.alpha_placeholder},
                           {"beta_placeholder", r.fitted.beta_placeholder},
                           {"max_stable_ratio", json_number(r.fitted.max_stable_ratio)},
                           {"max_unstable_ratio", json_number(r.fitted.max_unstable_ratio)}};
    out["growth"] = growth_json(r.growth);
    out["rank"] = r.rank;
    out["rank_constant"] = r.rank_constant;
    out["projection_bound_M"] = json_number(r.projection_bound_M);
    out["max_projection_norm"] = json_number(r.max_projection_norm);
    out["projection_bound_holds"] = r.projection_bound_holds;
    out["max_idempotency_defect"] = json_number(r.max_idempotency_defect);
    out["invariance_tolerance"] = json_number(r.invariance_tolerance);
    out["worst_invariance"] = {{"t", json_number(r.worst_invariance.t)},
                               {"tau", json_number(r.worst_invariance.tau)},
                               {"residual", json_number(r.worst_invariance.residual)}};
    out["unstable_roundtrip"] = json_number(r.unstable_roundtrip);
    out["growth_lemma_min_ratio"] = json_number(r.growth_lemma_min_ratio);
    out["growth_lemma_holds"] = r.growth_lemma_holds;
    out["stable_decay_holds"] = r.stable_decay_holds;
    out["min_subspace_angle"] = json_number(r.min_subspace_angle);
    out["fitted"] = fitted;
    out["conservative"] = conservative;
    out["notes"] = r.notes;

    // certificate.json + projections.csv
    ordered_json cj = {{"p", s.p.to_string()},
                       {"q", s.q.to_string()},
                       {"grid",
                        {{"start", json_number(cert.grid.start())},
                         {"step", json_number(cert.grid.step())},
                         {"nodes", cert.grid.nodes()}}},
                       {"rank", cert.rank},
                       {"alpha", json_number(cert.alpha)},
                       {"beta", json_number(cert.beta)},
                       {"D", json_number(cert.D)},
                       {"alpha_placeholder", r.fitted.alpha_placeholder},
                       {"beta_placeholder", r.fitted.beta_placeholder},
                       {"conservative", conservative},
                       {"projection_bound_M", json_number(r.projection_bound_M)},
                       {"invariance_tolerance", json_number(r.invariance_tolerance)},
                       {"projections", "projections.csv"}};
    ctx.artifacts.files["certificate.json"] = cj.dump(2) + "\n";
    std::ostringstream csv;
    csv << "t";
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            csv << ",P" << (i + 1) << (j + 1);
    csv << '\n';
    for (std::size_t k = 0; k < cert.grid.nodes(); ++k) {
        csv << csv_number(cert.grid.time(k));
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                csv << ',' << csv_number(cert.projections[k](i, j));
        csv << '\n';
    }
    ctx.artifacts.files["projections.csv"] = csv.str();

    if (s.certificate) {
        double worst = 0.0;
        for (const Matrix& P : cert.projections)
            worst = std::max(worst, spectral_norm(P - s.certificate->projection));
        const bool ok = worst <= s.tolerances.projection;
        out["analytic_comparison"] = {{"max_projection_difference", json_number(worst)},
                                      {"tolerance", json_number(s.tolerances.projection)},
                                      {"holds", ok},
                                      {"analytic_projection", matrix_json(s.certificate->projection)},
                                      {"analytic_alpha", json_number(s.certificate->alpha)},
                                      {"analytic_beta", json_number(s.certificate->beta)}};
        if (!ok)
            ctx.status.fail_check("reconstruct: projections differ from the analytic certificate");
    }
    return out;
}

ordered_json run_perturb(Context& ctx)
{
    const Scenario& s = ctx.s;
    const PerturbationConfig& pc = *s.perturbation;
    const double rate = pc.phi_rate;
    std::function<double(double)> phi;
    std::string label;
    if (pc.phi == "gaussian") {
        phi = [rate](double t) { return std::exp(-rate * t * t); };
        label = "exp(-" + csv_number(rate) + " t^2)";
    } else {
        phi = [rate](double t) { return std::exp(-rate * std::abs(t)); };
        label = "exp(-" + csv_number(rate) + " |t|)";
    }
    const PerturbationSpec spec = make_perturbation(0.0, s.family->norms(), phi, label, pc.direction);
    const SweepReport sw = robustness_experiment(*s.family, spec, pc.magnitudes, s.p, s.q, s.reconstruct_config());

    std::ostringstream csv;
    write_sweep_csv(csv, sw);
    ctx.artifacts.files["sweep.csv"] = csv.str();

    ordered_json rows = ordered_json::array();
    for (const SweepRow& r : sw.rows) {
        ordered_json row = {{"M", json_number(r.magnitude)},
                            {"lhs", json_number(r.lhs)},
                            {"smallness_satisfied", r.satisfied},
                            {"verdict", r.verdict},
                            {"certified", r.certified},
                            {"alpha_hat", json_number(r.alpha_hat)},
                            {"beta_hat", json_number(r.beta_hat)},
                            {"D_hat", json_number(r.d_hat)},
                            {"gronwall_ratio", json_number(r.gronwall_ratio)},
                            {"identity_residual", json_number(r.identity_residual)},
                            {"propagator_agreement", json_number(r.propagator_agreement)}};
        if (!r.error.empty())
            row["error"] = r.error;
        rows.push_back(row);
    }
    ordered_json out = {{"phi", label},
                        {"phi_q_norm", json_number(sw.phi_q)},
                        {"phi_tail", json_number(sw.phi.tail)},
                        {"phi_tail_ok", sw.phi.tail_ok},
                        {"envelope_C", json_number(spec.envelope_c)},
                        {"envelope_eps", json_number(spec.eps)},
                        {"h_inverse_norm", json_number(sw.h_inverse_norm)},
                        {"base_growth", growth_json(sw.base_growth)},
                        {"theoretical_threshold", json_number(sw.theoretical_threshold)},
                        {"empirical_threshold",
                         sw.empirical_threshold ? json_number(*sw.empirical_threshold) : ordered_json(nullptr)},
                        {"consistent", sw.consistent},
                        {"rows", rows}};
    if (!sw.consistent)
        ctx.status.fail_check("perturb: a magnitude inside the smallness region was not certified");
    return out;
}

ordered_json config_json(const Scenario& s)
{
    return {{"system", s.system_json},
            {"norms", s.norms_json},
            {"window", json_number(s.half_width)},
            {"h", json_number(s.h)},
            {"p", s.p.to_string()},
            {"q", s.q.to_string()},
            {"tolerances",
             {{"cocycle", json_number(s.tolerances.cocycle)},
              {"residual", json_number(s.tolerances.residual)},
              {"kernel", json_number(s.tolerances.kernel)},
              {"projection", json_number(s.tolerances.projection)}}},
            {"boundary", to_string(s.solver.mode)},
            {"random_probes", s.random_probes}};
}

}  // namespace

RunResult run_task(const Scenario& scenario, Task task)
{
    Context ctx{scenario, {}, {}, {}};
    ordered_json results;
    try {
        validate_for_task(scenario, task);
        require_window_fits(*scenario.family, scenario.half_width);
        switch (task) {
        case Task::Axioms: results["axioms"] = run_axioms(ctx); break;
        case Task::Evolve: results["evolve"] = run_evolve(ctx); break;
        case Task::Solve: results["solve"] = run_solve(ctx); break;
        case Task::Check: results["check"] = run_check(ctx); break;
        case Task::Reconstruct: results["reconstruct"] = run_reconstruct(ctx); break;
        case Task::Perturb: results["perturb"] = run_perturb(ctx); break;
        case Task::Full:
            results["axioms"] = run_axioms(ctx);
            results["evolve"] = run_evolve(ctx);
            if (is_excluded_pair(scenario.p, scenario.q)) {
                results["check"] = run_check(ctx);
                results["reconstruct"] = {{"skipped", "reconstruction is unavailable for (p, q) = (inf, 1)"}};
            } else {
                // The reconstruction runs the admissibility check itself.
                ordered_json rec = run_reconstruct(ctx);
                if (ctx.admissibility) {
                    results["check"] = admissibility_json(*ctx.admissibility);
                    if (scenario.expect)
                        results["check"]["expected"] = to_string(*scenario.expect);
                    if (ctx.admissibility->kernel.witness)
                        ctx.artifacts.files["traces/witness.csv"] = function_csv(*ctx.admissibility->kernel.witness);
                    rec.erase("admissibility");
                }
                results["reconstruct"] = rec;
            }
            // Without admissibility there is no bounded solution to compute.
            if (ctx.status.verdict == Verdict::Admissible)
                results["solve"] = run_solve(ctx);
            else
                results["solve"] = {{"skipped", "the family is not admissible"}};
            if (scenario.perturbation)
                results["perturb"] = run_perturb(ctx);
            break;
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const WindowTooLarge& e) {
        throw ConfigError(scenario.source, 1, "window", e.what());
    } catch (const Error& e) {
        ctx.status.inconclusive = true;
        ctx.status.messages.push_back(e.what());
    }

    RunResult out;
    if (ctx.status.mismatch)
        out.exit_code = kExitMismatch;
    else if (ctx.status.inconclusive)
        out.exit_code = kExitInconclusive;
    else
        out.exit_code = kExitOk;
    std::string message;
    for (const auto& m : ctx.status.messages)
        message += (message.empty() ? "" : "; ") + m;
    if (ctx.status.mismatch && ctx.status.verdict && scenario.expect && *ctx.status.verdict != *scenario.expect)
        message = "verdict " + to_string(*ctx.status.verdict) + " but expected " + to_string(*scenario.expect) +
                  (message.empty() ? "" : "; " + message);
    out.message = message;

    ordered_json status = {{"exit_code", out.exit_code},
                           {"verdict", ctx.status.verdict ? ordered_json(to_string(*ctx.status.verdict)) : ordered_json(nullptr)},
                           {"expected", scenario.expect ? ordered_json(to_string(*scenario.expect)) : ordered_json(nullptr)},
                           {"messages", ctx.status.messages}};
    out.report = {{"scenario", scenario.name},
                  {"task", to_string(task)},
                  {"seed", scenario.seed},
                  {"config", config_json(scenario)},
                  {"results", results},
                  {"status", status}};
    out.artifacts = std::move(ctx.artifacts);
    return out;
}

void write_artifacts(const std::filesystem::path& out, const RunResult& result, const std::filesystem::path& config_path)
{
    namespace fs = std::filesystem;
    fs::create_directories(out);
    auto write = [&](const std::string& rel, const std::string& content) {
        const fs::path path = out / rel;
        fs::create_directories(path.parent_path());
        std::ofstream f(path, std::ios::binary);
        if (!f)
            throw Error("cannot write " + path.string());
        f << content;
    };
    write("report.json", result.report.dump(2) + "\n");
    for (const auto& [rel, content] : result.artifacts.files)
        write(rel, content);

    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    std::ostringstream stamp;
    stamp << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    ordered_json meta = {{"generated_at", stamp.str()}, {"config", config_path.string()}};
    ordered_json files = ordered_json::array({"report.json"});
    for (const auto& [rel, content] : result.artifacts.files)
        files.push_back(rel);
    meta["files"] = files;
    write("metadata.json", meta.dump(2) + "\n");
}

int run_scenario(const std::filesystem::path& config, const std::filesystem::path& out, std::optional<std::uint64_t> seed,
                 std::optional<Task> task)
{
    try {
        Scenario s = load_scenario(config);
        if (seed)
            s.seed = *seed;
        const Task t = task.value_or(s.task);
        RunResult r = run_task(s, t);
        write_artifacts(out, r, config);
        if (!r.message.empty())
            std::cerr << config.string() << ": " << r.message << '\n';
        return r.exit_code;
    } catch (const ConfigError& e) {
        std::cerr << e.what() << '\n';
        return kExitConfig;
    } catch (const InvalidInput& e) {
        std::cerr << config.string() << ": " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << e.what() << '\n';
        return kExitConfig;
    }
}

}  // namespace dichotomy
