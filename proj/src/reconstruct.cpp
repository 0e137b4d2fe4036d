#include "dichotomy/reconstruct.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace dichotomy {

SubspacePair subspace_pair(double tau, const Matrix& projection)
{
    const auto n = projection.rows();
    SubspacePair out;
    out.tau = tau;
    out.stable = column_space(projection, 1e-6);
    out.unstable = column_space(Matrix::Identity(n, n) - projection, 1e-6);
    const auto defect = [](const Matrix& b) {
        return b.cols() == 0 ? 0.0 : (b.transpose() * b - Matrix::Identity(b.cols(), b.cols())).norm();
    };
    out.orthonormality_defect = std::max(defect(out.stable), defect(out.unstable));
    if (out.stable.cols() == 0 || out.unstable.cols() == 0) {
        out.min_angle = std::numbers::pi / 2.0;
    } else {
        const double c = std::min(1.0, spectral_norm(out.stable.transpose() * out.unstable));
        out.min_angle = std::acos(c);
    }
    return out;
}

Membership stable_membership(const EvolutionFamily& family, double tau, const Vector& x, double horizon,
                             Exponent p, double step)
{
    if (!(horizon > 0.0) || !(step > 0.0))
        throw InvalidInput("stable_membership: horizon and step must be positive");
    if (x.size() != family.dimension())
        throw InvalidInput("stable_membership: vector dimension does not match the family");
    Membership out;
    const auto& norms = family.norms();
    const auto steps = static_cast<std::size_t>(std::ceil(2.0 * horizon / step - 1e-9));
    Vector v = x;
    double prev_t = tau;
    double prev_norm = norms(tau, x);
    double integral = 0.0;
    out.sup_horizon = prev_norm;
    out.sup_double = prev_norm;
    for (std::size_t k = 1; k <= steps; ++k) {
        const double t = std::min(tau + 2.0 * horizon, tau + static_cast<double>(k) * step);
        v = family.propagator(t, prev_t) * v;
        const double nv = norms(t, v);
        if (!std::isfinite(nv)) {
            out.overflow = true;
            out.member = false;
            return out;
        }
        if (!p.is_infinite())
            integral += 0.5 * (t - prev_t) * (std::pow(prev_norm, p.value()) + std::pow(nv, p.value()));
        if (t <= tau + horizon + 1e-12)
            out.sup_horizon = std::max(out.sup_horizon, nv);
        out.sup_double = std::max(out.sup_double, nv);
        prev_t = t;
        prev_norm = nv;
    }
    out.lp_tail = p.is_infinite() ? out.sup_double : std::pow(integral, 1.0 / p.value());
    out.member = out.sup_double <= out.sup_horizon * (1.0 + 1e-3);
    return out;
}

Matrix projection_at(const BoundedSolver& solver, double tau)
{
    const Grid& g = solver.grid();
    const auto k = g.node_index(tau);
    const auto k1 = g.node_index(tau + 1.0);
    if (!k || !k1)
        throw InvalidInput("projection_at: tau and tau + 1 must be grid nodes");
    const auto& cells = solver.op().cells();
    const int n = cells.dimension();
    const auto cols = static_cast<Eigen::Index>(g.nodes());

    Matrix p(n, n);
    // All n test inputs share the propagator prefix; build them column by column.
    std::vector<Matrix> phi;
    phi.reserve(*k1 - *k + 1);
    phi.push_back(Matrix::Identity(n, n));
    for (std::size_t i = *k; i < *k1; ++i)
        phi.push_back(cells.step(i) * phi.back());
    for (int j = 0; j < n; ++j) {
        Matrix left = Matrix::Zero(n, cols);
        Matrix right = Matrix::Zero(n, cols);
        for (std::size_t i = *k; i <= *k1; ++i) {
            const Vector v = phi[i - *k].col(j);
            if (i > *k)
                left.col(static_cast<Eigen::Index>(i)) = v;
            if (i < *k1)
                right.col(static_cast<Eigen::Index>(i)) = v;
        }
        const GridFunction gj(g, solver.norms_ptr(), std::move(left), std::move(right));
        const GridFunction v = solver.solve(gj);
        p.col(j) = v.at(*k) + Vector::Unit(n, j);
    }
    return p;
}

double projection_bound(double g_norm, GrowthBound growth)
{
    return growth.K * growth.K * std::exp(2.0 * growth.c) * g_norm + 1.0;
}

ConservativeRates doubling_time_and_rates(double g_norm, GrowthBound growth, Exponent p, Exponent q)
{
    require_ordered_pair(p, q);
    if (is_excluded_pair(p, q))
        throw ExcludedPair("(p, q) = (inf, 1) is excluded: the doubling-time exponent vanishes");
    ConservativeRates r;
    r.theta = 1.0 - q.reciprocal() + p.reciprocal();
    const double ke = growth.K * std::exp(growth.c);
    r.C = 2.0 * ke * g_norm;
    r.T = std::pow(4.0 * ke * g_norm * g_norm, 1.0 / r.theta);
    r.lambda = std::log(2.0) / r.T;
    r.D = 2.0 * r.C;
    return r;
}

namespace {

// Slope and intercept of the least-squares line through (x, y).
std::pair<double, double> line_fit(const std::vector<double>& x, const std::vector<double>& y)
{
    const auto m = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    const double denom = m * sxx - sx * sx;
    if (x.size() < 2 || std::abs(denom) <= 1e-14 * std::max(1.0, m * sxx))
        throw InvalidInput("rate fit needs at least two distinct lags");
    const double slope = (m * sxy - sx * sy) / denom;
    return {slope, (sy - slope * sx) / m};
}

}  // namespace

FittedRates fit_dichotomy_rates(const EvolutionFamily& family, const Grid& grid, const std::vector<Matrix>& steps,
                                const std::vector<Matrix>& projections, const std::vector<std::size_t>& lags)
{
    if (projections.size() != grid.nodes() || steps.size() != grid.cells())
        throw InvalidInput("fit_dichotomy_rates: projections and steps must cover the grid");
    const auto& norms = family.norms();
    const int rank = numerical_rank(projections.front());
    const bool stable = rank > 0;
    const bool unstable = rank < family.dimension();
    const std::size_t max_lag = lags.empty() ? 0 : *std::max_element(lags.begin(), lags.end());

    struct Sample {
        double lag;
        double s;
        double u;
    };
    std::vector<Sample> samples;
    std::vector<double> worst_s(max_lag + 1, 0.0);
    std::vector<double> worst_u(max_lag + 1, 0.0);
    for (std::size_t i = 0; i < grid.nodes(); ++i) {
        const double tau = grid.time(i);
        Matrix m = Matrix::Identity(family.dimension(), family.dimension());
        for (std::size_t l = 0; l <= max_lag && i + l < grid.nodes(); ++l) {
            if (l > 0)
                m = steps[i + l - 1] * m;
            if (l > 0 && std::find(lags.begin(), lags.end(), l) == lags.end())
                continue;
            const double t = grid.time(i + l);
            Sample smp{t - tau, 0.0, 0.0};
            if (stable)
                smp.s = operator_norm(m * projections[i], norms, t, norms, tau);
            if (unstable)
                smp.u = operator_norm(unstable_backward(m, projections[i], projections[i + l]), norms, tau, norms, t);
            worst_s[l] = std::max(worst_s[l], smp.s);
            worst_u[l] = std::max(worst_u[l], smp.u);
            samples.push_back(smp);
        }
    }

    std::vector<double> x;
    std::vector<double> ys;
    std::vector<double> yu;
    for (std::size_t l : lags) {
        if (l == 0 || l > max_lag || (worst_s[l] == 0.0 && worst_u[l] == 0.0))
            continue;
        x.push_back(static_cast<double>(l) * grid.step());
        ys.push_back(stable ? std::log(worst_s[l]) : 0.0);
        yu.push_back(unstable ? std::log(worst_u[l]) : 0.0);
    }

    FittedRates out;
    if (stable)
        out.alpha = -line_fit(x, ys).first;
    if (unstable)
        out.beta = -line_fit(x, yu).first;
    if ((stable && !(out.alpha > 0.0)) || (unstable && !(out.beta > 0.0)))
        throw CertificationFailure("fitted dichotomy rate is not positive (alpha = " + std::to_string(out.alpha) +
                                   ", beta = " + std::to_string(out.beta) + ")");
    if (!stable) {
        out.alpha = out.beta;
        out.alpha_placeholder = true;
    }
    if (!unstable) {
        out.beta = out.alpha;
        out.beta_placeholder = true;
    }

    double log_d = 0.0;
    for (const auto& s : samples) {
        if (stable && s.s > 0.0)
            log_d = std::max(log_d, std::log(s.s) + out.alpha * s.lag);
        if (unstable && s.u > 0.0)
            log_d = std::max(log_d, std::log(s.u) + out.beta * s.lag);
    }
    out.D = std::exp(log_d);
    for (const auto& s : samples) {
        out.max_stable_ratio = std::max(out.max_stable_ratio, s.s / (out.D * std::exp(-out.alpha * s.lag)));
        out.max_unstable_ratio = std::max(out.max_unstable_ratio, s.u / (out.D * std::exp(-out.beta * s.lag)));
    }
    return out;
}

ReconstructionReport certify_dichotomy(const EvolutionFamily& family, Exponent p, Exponent q,
                                       const ReconstructConfig& config)
{
    require_ordered_pair(p, q);
    if (is_excluded_pair(p, q))
        throw ExcludedPair("reconstruction is unavailable for (p, q) = (inf, 1)");

    ReconstructionReport rep;
    const auto& acfg = config.admissibility;
    rep.admissibility = check_admissibility(family, p, q, acfg);
    if (rep.admissibility.verdict != Verdict::Admissible) {
        rep.notes.push_back("admissibility verdict is " + to_string(rep.admissibility.verdict) +
                            "; no certificate");
        return rep;
    }

    const int n = family.dimension();
    const Grid grid = Grid::window(acfg.half_width, acfg.h);
    auto cells = std::make_shared<const CellPropagators>(family, grid);
    SolverOptions sopt = acfg.solver;
    sopt.mode = BoundaryMode::Projected;
    BoundedSolver solver(family, cells, sopt);
    if (!solver.ready()) {
        rep.notes.push_back(solver.closure().message);
        return rep;
    }

    const double per_unit = 1.0 / acfg.h;
    const auto unit_nodes = static_cast<std::size_t>(std::llround(per_unit));
    if (std::abs(per_unit - static_cast<double>(unit_nodes)) > 1e-9 * per_unit)
        throw InvalidInput("reconstruction needs a grid step dividing 1");
    const std::size_t stride = std::max<std::size_t>(1, config.node_stride);
    const auto margin_nodes = static_cast<std::size_t>(std::ceil(config.interior_margin / acfg.h - 1e-9));
    if (grid.cells() < 2 * margin_nodes + unit_nodes + stride)
        throw InvalidInput("window too short for the interior margin");
    std::vector<std::size_t> taus;
    for (std::size_t k = margin_nodes; k + unit_nodes + margin_nodes <= grid.cells(); k += stride)
        taus.push_back(k);
    if (taus.size() < 2)
        throw InvalidInput("reconstruction needs at least two interior nodes");

    const Grid cgrid(grid.time(taus.front()), static_cast<double>(stride) * acfg.h, taus.size() - 1);
    std::vector<Matrix> proj;
    proj.reserve(taus.size());
    for (std::size_t k : taus)
        proj.push_back(projection_at(solver, grid.time(k)));
    std::vector<Matrix> steps;
    for (std::size_t i = 0; i + 1 < taus.size(); ++i)
        steps.push_back(cells->between(taus[i], taus[i + 1]));

    // Rank, idempotency, subspace geometry.
    rep.rank = numerical_rank(proj.front());
    rep.min_subspace_angle = std::numbers::pi / 2.0;
    for (std::size_t i = 0; i < proj.size(); ++i) {
        if (numerical_rank(proj[i]) != rep.rank)
            rep.rank_constant = false;
        rep.max_idempotency_defect = std::max(rep.max_idempotency_defect, spectral_norm(proj[i] * proj[i] - proj[i]));
        rep.min_subspace_angle = std::min(rep.min_subspace_angle, subspace_pair(cgrid.time(i), proj[i]).min_angle);
    }
    if (!rep.rank_constant)
        throw CertificationFailure("rank of the reconstructed projections is not constant over the window");

    // Growth constants and conservative (proof) constants.
    {
        std::vector<double> gtaus;
        for (int k = 0; k <= 8; ++k)
            gtaus.push_back(grid.start() + (grid.end() - 2.0 - grid.start()) * k / 8.0);
        const std::vector<double> glags{0.25, 0.5, 1.0, 2.0};
        rep.growth = family.growth() ? *family.growth() : estimate_growth_bound(family, gtaus, glags);
    }
    const double g_norm = rep.admissibility.g_norm_estimate;
    rep.projection_bound_M = projection_bound(g_norm, rep.growth);
    rep.conservative = doubling_time_and_rates(g_norm, rep.growth, p, q);
    const auto& norms = family.norms();
    for (std::size_t i = 0; i < proj.size(); ++i) {
        const double t = cgrid.time(i);
        rep.max_projection_norm = std::max(rep.max_projection_norm, operator_norm(proj[i], norms, t, norms, t));
    }
    rep.projection_bound_holds = rep.max_projection_norm <= rep.projection_bound_M * (1.0 + 1e-3);

    // Invariance on consecutive nodes and on the fit lags.
    const auto cert_unit = std::max<std::size_t>(1, unit_nodes / stride);
    std::vector<std::size_t> lags{1};
    for (std::size_t l = cert_unit;
         static_cast<double>(l) * cgrid.step() <= config.max_fit_lag + 1e-9 && l <= cgrid.cells() / 2; l += cert_unit)
        lags.push_back(l);
    rep.invariance_tolerance = config.invariance_tolerance;
    if (rep.invariance_tolerance < 0.0)
        rep.invariance_tolerance =
            family.kind() == SystemKind::TimeVarying ? std::max(1e-6, 10.0 * acfg.h * acfg.h) : 1e-6;

    const Matrix id = Matrix::Identity(n, n);
    for (std::size_t i = 0; i < proj.size(); ++i) {
        Matrix m = id;
        const std::size_t max_lag = lags.back();
        for (std::size_t l = 1; l <= max_lag && i + l < proj.size(); ++l) {
            m = steps[i + l - 1] * m;
            if (std::find(lags.begin(), lags.end(), l) == lags.end())
                continue;
            const double res = spectral_norm(proj[i + l] * m - m * proj[i]) / std::max(1.0, spectral_norm(m));
            if (res > rep.worst_invariance.residual)
                rep.worst_invariance = {cgrid.time(i + l), cgrid.time(i), res};

            if (rep.rank < n) {
                const Matrix bu = column_space(id - proj[i], 1e-6);
                const Matrix image = m * bu;
                const Matrix back = unstable_backward(m, proj[i], proj[i + l]);
                rep.unstable_roundtrip = std::max(rep.unstable_roundtrip, spectral_norm(back * image - bu));
                // Growth lemma with the conservative (lambda, D).
                const double t = cgrid.time(i + l);
                const double tau = cgrid.time(i);
                for (Eigen::Index c = 0; c <= bu.cols(); ++c) {
                    const Vector x = c < bu.cols() ? Vector(bu.col(c)) : Vector(bu.rowwise().sum());
                    const double base = norms(tau, x);
                    if (base == 0.0)
                        continue;
                    const double lower = std::exp(rep.conservative.lambda * (t - tau)) * base / rep.conservative.D;
                    rep.growth_lemma_min_ratio = std::min(rep.growth_lemma_min_ratio, norms(t, m * x) / lower);
                }
            }
        }
    }
    rep.growth_lemma_holds = rep.growth_lemma_min_ratio >= 1.0;
    if (rep.worst_invariance.residual > rep.invariance_tolerance) {
        std::ostringstream msg;
        msg << "invariance residual " << rep.worst_invariance.residual << " exceeds " << rep.invariance_tolerance
            << " at (t, tau) = (" << rep.worst_invariance.t << ", " << rep.worst_invariance.tau << ")";
        throw CertificationFailure(msg.str());
    }

    std::vector<std::size_t> fit_lags(lags.begin() + 1, lags.end());
    if (fit_lags.size() < 2)
        fit_lags = lags;
    rep.fitted = fit_dichotomy_rates(family, cgrid, steps, proj, fit_lags);
    rep.stable_decay_holds = rep.fitted.max_stable_ratio <= 1.0 + 1e-9 && rep.fitted.max_unstable_ratio <= 1.0 + 1e-9;
    if (rep.fitted.alpha_placeholder)
        rep.notes.push_back("stable bundle is trivial; alpha is a placeholder");
    if (rep.fitted.beta_placeholder)
        rep.notes.push_back("unstable bundle is trivial; beta is a placeholder");
    rep.notes.push_back("unstable bundle is the finite-window surrogate (dominant backward-reachable subspace)");

    DichotomyCertificate cert{cgrid, std::move(proj), rep.fitted.alpha, rep.fitted.beta, rep.fitted.D, rep.rank,
                              false, std::make_shared<const EvolutionFamily>(family)};
    rep.certificate = std::move(cert);
    return rep;
}

}  // namespace dichotomy
