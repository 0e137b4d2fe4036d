#include "dichotomy/perturbation.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>

namespace dichotomy {

Matrix PerturbationSpec::operator()(double t) const
{
    return envelope(t) * direction;
}

double PerturbationSpec::envelope(double t) const
{
    if (magnitude == 0.0)
        return 0.0;
    return magnitude * std::exp(-eps * std::abs(t)) * phi(t);
}

PerturbationSpec PerturbationSpec::with_magnitude(double m) const
{
    if (!(m >= 0.0) || !std::isfinite(m))
        throw InvalidInput("perturbation magnitude must be finite and nonnegative");
    PerturbationSpec s = *this;
    s.magnitude = m;
    return s;
}

PerturbationSpec make_perturbation(double magnitude, const NormFamily& norms, std::function<double(double)> phi,
                                   std::string phi_label, Matrix direction)
{
    if (!phi)
        throw InvalidInput("perturbation weight phi is empty");
    if (direction.rows() != norms.dimension() || direction.cols() != norms.dimension())
        throw InvalidInput("perturbation direction must be n x n");
    if (spectral_norm(direction) > 1.0 + 1e-12)
        throw InvalidInput("perturbation direction must satisfy ||B0|| <= 1");
    PerturbationSpec s;
    s.envelope_c = norms.envelope_c();
    s.eps = norms.envelope_eps();
    s.phi = std::move(phi);
    s.phi_label = std::move(phi_label);
    s.direction = std::move(direction);
    return s.with_magnitude(magnitude);
}

double envelope_violation(const PerturbationSpec& spec, const std::vector<double>& times)
{
    double worst = -kInfinity;
    for (double t : times)
        worst = std::max(worst, spectral_norm(spec(t)) - spec.envelope(t));
    return worst;
}

namespace {

// Composite Simpson rule of f over [a, b] with a step close to h; [a, b]
// is split at 0 so that the kink of two-sided weights is a node.
double integrate(const std::function<double(double)>& f, double a, double b, double h)
{
    if (b <= a)
        return 0.0;
    if (a < 0.0 && b > 0.0)
        return integrate(f, a, 0.0, h) + integrate(f, 0.0, b, h);
    auto m = static_cast<std::size_t>(std::ceil((b - a) / h));
    m += m % 2;
    const double d = (b - a) / static_cast<double>(m);
    double sum = f(a) + f(b);
    for (std::size_t k = 1; k < m; ++k)
        sum += (k % 2 ? 4.0 : 2.0) * f(a + static_cast<double>(k) * d);
    return sum * d / 3.0;
}

double sup_on(const std::function<double(double)>& f, double a, double b, double h)
{
    const auto m = static_cast<std::size_t>(std::ceil((b - a) / h));
    double best = 0.0;
    for (std::size_t k = 0; k <= m; ++k)
        best = std::max(best, f(std::min(b, a + static_cast<double>(k) * h)));
    if (a < 0.0 && b > 0.0)
        best = std::max(best, f(0.0));
    return best;
}

}  // namespace

PhiNorm phi_lq_norm(const PerturbationSpec& spec, Exponent q, double half_width, double h)
{
    PhiNorm out;
    if (q.is_infinite()) {
        out.value = sup_on(spec.phi, -half_width, half_width, h);
        out.tail = std::max(sup_on(spec.phi, -2.0 * half_width, -half_width, h),
                            sup_on(spec.phi, half_width, 2.0 * half_width, h));
    } else {
        const double qv = q.value();
        const auto fq = [&](double t) { return std::pow(std::abs(spec.phi(t)), qv); };
        out.value = std::pow(integrate(fq, -half_width, half_width, h), 1.0 / qv);
        out.tail = integrate(fq, -2.0 * half_width, -half_width, h) + integrate(fq, half_width, 2.0 * half_width, h);
    }
    out.tail_ok = out.tail < 1e-8;
    return out;
}

double phi_integral(const PerturbationSpec& spec, double tau, double t, double h)
{
    return integrate(spec.phi, tau, t, h);
}

EvolutionFamilyPtr perturbed_family(EvolutionFamilyPtr base, const PerturbationSpec& spec, double h_int)
{
    if (!base)
        throw InvalidInput("perturbed_family needs a base family");
    if (spec.magnitude == 0.0)
        return base;
    if (base->kind() == SystemKind::TimeVarying)
        h_int = std::min(h_int, base->h_int());
    auto coefficient = [base, spec](double t) -> Matrix { return base->coefficient(t) + spec(t); };
    auto fam = EvolutionFamily::time_varying(base->dimension(), coefficient, h_int, base->label() + "+B")
                   .with_norms(base->norms_ptr());
    return std::make_shared<const EvolutionFamily>(std::move(fam));
}

Matrix perturbed_propagator(const EvolutionFamily& base, const PerturbationSpec& spec, double t, double tau,
                            PropagatorMethod method, const PicardOptions& options)
{
    if (t < tau)
        throw OrderError("perturbed_propagator requires t >= tau");
    const int n = base.dimension();
    const Matrix id = Matrix::Identity(n, n);
    if (t == tau)
        return id;
    if (spec.magnitude == 0.0)
        return base.propagator(t, tau);
    if (method == PropagatorMethod::Integrate) {
        auto shared = std::make_shared<const EvolutionFamily>(base);
        return perturbed_family(shared, spec)->propagator(t, tau);
    }

    double step = options.step;
    while (true) {
        if (step < options.h_min)
            throw ConvergenceFailure("Picard step fell below h_min without contraction");
        const auto m = static_cast<std::size_t>(std::ceil((t - tau) / step - 1e-9));
        const double d = (t - tau) / static_cast<double>(m);
        bool contracts = true;
        for (std::size_t k = 0; k <= m && contracts; ++k)
            contracts = 0.5 * d * spec.envelope(tau + static_cast<double>(k) * d) < 1.0;
        if (!contracts) {
            step *= 0.5;
            continue;
        }
        // U_{k+1} = T_k (I + d/2 B_k) U_k + (d/2) B_{k+1} U_{k+1}, solved by
        // fixed-point iteration on each step.
        Matrix u = id;
        Matrix b_prev = spec(tau);
        for (std::size_t k = 0; k < m; ++k) {
            const double s0 = tau + static_cast<double>(k) * d;
            const double s1 = k + 1 == m ? t : tau + static_cast<double>(k + 1) * d;
            const Matrix tk = base.propagator(s1, s0);
            const Matrix b_next = spec(s1);
            const Matrix fixed = tk * (u + 0.5 * d * b_prev * u);
            Matrix next = fixed + 0.5 * d * b_next * (tk * u);
            bool done = false;
            for (int it = 0; it < options.max_iterations; ++it) {
                const Matrix again = fixed + 0.5 * d * b_next * next;
                const double change = (again - next).norm();
                next = again;
                if (change <= options.tolerance * std::max(1.0, next.norm())) {
                    done = true;
                    break;
                }
            }
            if (!done)
                throw ConvergenceFailure("Picard iteration did not reach the relative tolerance");
            u = next;
            b_prev = b_next;
        }
        return u;
    }
}

Smallness smallness_condition(const PerturbationSpec& spec, double phi_q, double h_inverse_norm)
{
    Smallness s;
    s.lhs = spec.magnitude * spec.envelope_c * phi_q * h_inverse_norm;
    s.satisfied = s.lhs < 1.0;
    return s;
}

GrowthBound perturbed_growth_bound(const PerturbationSpec& spec, GrowthBound base, double phi_q)
{
    const double shift = spec.magnitude * spec.envelope_c * base.K * phi_q;
    return GrowthBound{base.K * std::exp(shift), base.c + shift};
}

GronwallCheck check_gronwall(const EvolutionFamily& perturbed, const PerturbationSpec& spec, GrowthBound bound,
                             double phi_q, const std::vector<double>& taus, const std::vector<double>& lags)
{
    GronwallCheck out;
    const auto& norms = perturbed.norms();
    for (double tau : taus) {
        for (double lag : lags) {
            const double t = tau + lag;
            const double u = operator_norm(perturbed.propagator(t, tau), norms, t, norms, tau);
            out.max_ratio = std::max(out.max_ratio, u / (bound.K * std::exp(bound.c * lag)));
            if (phi_q > 0.0)
                out.max_integral_ratio =
                    std::max(out.max_integral_ratio, phi_integral(spec, tau, t) / (phi_q * (lag + 1.0)));
            ++out.samples;
        }
    }
    return out;
}

IdentityCheck operator_identity(const EvolutionFamily& base, const PerturbationSpec& spec, const Grid& grid,
                                std::uint64_t seed)
{
    const int n = base.dimension();
    const double h = grid.step();
    const Matrix id = Matrix::Identity(n, n);
    const DiscreteOperator op(base, grid);
    const auto& cells = op.cells();
    std::vector<Matrix> b(grid.nodes());
    for (std::size_t i = 0; i < grid.nodes(); ++i)
        b[i] = spec(grid.time(i));

    using Triplet = Eigen::Triplet<double>;
    std::vector<Triplet> lt;
    std::vector<Triplet> pt;
    const auto put = [](std::vector<Triplet>& out, Eigen::Index r0, Eigen::Index c0, const Matrix& m) {
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c)
                out.emplace_back(r0 + r, c0 + c, m(r, c));
    };
    for (std::size_t i = 0; i < grid.cells(); ++i) {
        const auto r0 = static_cast<Eigen::Index>(i) * n;
        const auto c0 = static_cast<Eigen::Index>(i) * n;
        const Matrix& tk = cells.step(i);
        // Fused rows: x_{i+1} - T_i x_i - (h/2)(T_i B_i x_i + B_{i+1} x_{i+1}).
        put(lt, r0, c0, -tk - 0.5 * h * tk * b[i]);
        put(lt, r0, c0 + n, id - 0.5 * h * b[i + 1]);
        put(pt, r0, c0, 0.5 * h * tk * b[i]);
        put(pt, r0, c0 + n, 0.5 * h * b[i + 1]);
    }
    SparseMatrix l(op.rows(), op.unknowns());
    SparseMatrix p(op.rows(), op.unknowns());
    l.setFromTriplets(lt.begin(), lt.end());
    p.setFromTriplets(pt.begin(), pt.end());
    const SparseMatrix diff = l + p - op.matrix();

    IdentityCheck out;
    for (int k = 0; k < diff.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(diff, k); it; ++it)
            out.matrix_residual = std::max(out.matrix_residual, std::abs(it.value()));

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector x(op.unknowns());
    Matrix yv(n, static_cast<Eigen::Index>(grid.nodes()));
    for (Eigen::Index i = 0; i < x.size(); ++i)
        x(i) = normal(rng);
    for (Eigen::Index i = 0; i < yv.size(); ++i)
        yv.data()[i] = normal(rng);
    Matrix bx(n, static_cast<Eigen::Index>(grid.nodes()));
    for (std::size_t i = 0; i < grid.nodes(); ++i)
        bx.col(static_cast<Eigen::Index>(i)) = b[i] * x.segment(static_cast<Eigen::Index>(i) * n, n);
    const auto norms = base.norms_ptr();
    const GridFunction y = GridFunction::from_nodes(grid, norms, yv);
    const GridFunction y_shift = GridFunction::from_nodes(grid, norms, yv + bx);
    const Vector lhs = l * x - op.forcing(y);
    const Vector rhs = op.apply(x) - op.forcing(y_shift);
    out.application_residual = (lhs - rhs).lpNorm<Eigen::Infinity>();

    if (spec.magnitude > 0.0) {
        const auto u = perturbed_family(std::make_shared<const EvolutionFamily>(base), spec);
        for (std::size_t i = 0; i < grid.cells(); ++i) {
            const Matrix& tk = cells.step(i);
            const Matrix fused = (id - 0.5 * h * b[i + 1]).partialPivLu().solve(tk + 0.5 * h * tk * b[i]);
            const Matrix ui = u->propagator(grid.time(i + 1), grid.time(i));
            out.propagator_consistency = std::max(out.propagator_consistency, spectral_norm(fused - ui));
        }
    }
    return out;
}

SweepReport robustness_experiment(const EvolutionFamily& base, const PerturbationSpec& spec,
                                  const std::vector<double>& magnitudes, Exponent p, Exponent q,
                                  const ReconstructConfig& config)
{
    const auto& acfg = config.admissibility;
    SweepReport out;
    out.phi = phi_lq_norm(spec, q, acfg.half_width);
    out.phi_q = out.phi.value;

    const AdmissibilityReport base_rep = check_admissibility(base, p, q, acfg);
    if (base_rep.verdict != Verdict::Admissible)
        throw CertificationFailure("robustness experiment needs an admissible base family (verdict " +
                                   to_string(base_rep.verdict) + ")");
    out.h_inverse_norm = base_rep.g_norm_estimate;
    {
        std::vector<double> taus;
        for (int k = 0; k <= 8; ++k)
            taus.push_back(-acfg.half_width + (2.0 * acfg.half_width - 2.0) * k / 8.0);
        const std::vector<double> lags{0.25, 0.5, 1.0, 2.0};
        out.base_growth = base.growth() ? *base.growth() : estimate_growth_bound(base, taus, lags);
    }
    const double unit = spec.envelope_c * out.phi_q * out.h_inverse_norm;
    out.theoretical_threshold = unit > 0.0 ? 1.0 / unit : kInfinity;

    const auto base_ptr = std::make_shared<const EvolutionFamily>(base);
    const Grid id_grid = Grid::window(std::min(acfg.half_width, 5.0), acfg.h);
    for (double m : magnitudes) {
        SweepRow row;
        row.magnitude = m;
        try {
            const PerturbationSpec s = spec.with_magnitude(m);
            const Smallness sm = smallness_condition(s, out.phi_q, out.h_inverse_norm);
            row.lhs = sm.lhs;
            row.satisfied = sm.satisfied;
            const auto u = perturbed_family(base_ptr, s, acfg.h / 10.0);

            const GrowthBound bound = perturbed_growth_bound(s, out.base_growth, out.phi_q);
            const std::vector<double> taus{-4.0, -1.0, 0.0, 2.0};
            const std::vector<double> lags{0.5, 1.0, 2.0, 4.0};
            row.gronwall_ratio = check_gronwall(*u, s, bound, out.phi_q, taus, lags).max_ratio;
            row.identity_residual = operator_identity(base, s, id_grid, acfg.seed).application_residual;
            row.propagator_agreement =
                spectral_norm(perturbed_propagator(base, s, 1.0, -1.0, PropagatorMethod::Picard) -
                              u->propagator(1.0, -1.0));

            const ReconstructionReport rep = certify_dichotomy(*u, p, q, config);
            row.verdict = to_string(rep.admissibility.verdict);
            row.certified = rep.certificate.has_value();
            if (row.certified) {
                row.alpha_hat = rep.fitted.alpha;
                row.beta_hat = rep.fitted.beta;
                row.d_hat = rep.fitted.D;
            }
        } catch (const Error& e) {
            row.error = e.what();
            if (row.verdict.empty())
                row.verdict = "error";
        }
        if (!row.certified && (!out.empirical_threshold || m < *out.empirical_threshold))
            out.empirical_threshold = m;
        if (row.satisfied && !row.certified)
            out.consistent = false;
        out.rows.push_back(std::move(row));
    }
    return out;
}

void write_sweep_csv(std::ostream& out, const SweepReport& report)
{
    const auto old = out.precision(17);
    out << "M,lhs,verdict,alpha_hat,beta_hat,D_hat\n";
    for (const auto& r : report.rows)
        out << r.magnitude << ',' << r.lhs << ',' << r.verdict << ',' << r.alpha_hat << ',' << r.beta_hat << ','
            << r.d_hat << '\n';
    out.precision(old);
}

}  // namespace dichotomy
