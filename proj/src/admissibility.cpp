#include "dichotomy/admissibility.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <random>

namespace dichotomy {

namespace {

using Triplet = Eigen::Triplet<double>;

void add_block(std::vector<Triplet>& out, Eigen::Index row, Eigen::Index col, const Matrix& block)
{
    for (Eigen::Index r = 0; r < block.rows(); ++r)
        for (Eigen::Index c = 0; c < block.cols(); ++c)
            if (block(r, c) != 0.0)
                out.emplace_back(row + r, col + c, block(r, c));
}

std::vector<Matrix> node_weights(const NormFamily& norms, const Grid& grid)
{
    std::vector<Matrix> w(grid.nodes());
    for (std::size_t i = 0; i < grid.nodes(); ++i)
        w[i] = norms.weight_surrogate(grid.time(i));
    return w;
}

// Trapezoid weights of the grid nodes.
double node_weight(const Grid& grid, std::size_t i)
{
    return (i == 0 || i == grid.cells()) ? 0.5 * grid.step() : grid.step();
}

Eigen::Index idx(std::size_t i, int n)
{
    return static_cast<Eigen::Index>(i) * n;
}

}  // namespace

// ---------------------------------------------------------------------------
// DiscreteOperator

DiscreteOperator::DiscreteOperator(const EvolutionFamily& family, Grid grid)
    : cells_(std::make_shared<const CellPropagators>(family, grid))
{
    build();
}

DiscreteOperator::DiscreteOperator(std::shared_ptr<const CellPropagators> cells) : cells_(std::move(cells))
{
    if (!cells_)
        throw InvalidInput("discrete operator needs cell propagators");
    build();
}

Eigen::Index DiscreteOperator::rows() const
{
    return static_cast<Eigen::Index>(grid().cells()) * dimension();
}

Eigen::Index DiscreteOperator::unknowns() const
{
    return static_cast<Eigen::Index>(grid().nodes()) * dimension();
}

void DiscreteOperator::build()
{
    const int n = dimension();
    const Matrix id = Matrix::Identity(n, n);
    std::vector<Triplet> trips;
    trips.reserve(grid().cells() * static_cast<std::size_t>(n * n + n));
    for (std::size_t i = 0; i < grid().cells(); ++i) {
        add_block(trips, idx(i, n), idx(i, n), -cells_->step(i));
        add_block(trips, idx(i, n), idx(i + 1, n), id);
    }
    matrix_.resize(rows(), unknowns());
    matrix_.setFromTriplets(trips.begin(), trips.end());
    matrix_.makeCompressed();
}

Vector DiscreteOperator::apply(const Vector& x) const
{
    if (x.size() != unknowns())
        throw InvalidInput("operator applied to a vector of the wrong size");
    const int n = dimension();
    Vector r(rows());
    for (std::size_t i = 0; i < grid().cells(); ++i)
        r.segment(idx(i, n), n) = x.segment(idx(i + 1, n), n) - cells_->step(i) * x.segment(idx(i, n), n);
    return r;
}

Vector DiscreteOperator::apply_adjoint(const Vector& r) const
{
    if (r.size() != rows())
        throw InvalidInput("adjoint applied to a vector of the wrong size");
    const int n = dimension();
    Vector x = Vector::Zero(unknowns());
    for (std::size_t i = 0; i < grid().cells(); ++i) {
        x.segment(idx(i, n), n) -= cells_->step(i).transpose() * r.segment(idx(i, n), n);
        x.segment(idx(i + 1, n), n) += r.segment(idx(i, n), n);
    }
    return x;
}

Vector DiscreteOperator::forcing(const GridFunction& y) const
{
    if (!(y.grid() == grid()) || y.dimension() != dimension())
        throw InvalidInput("forcing: input does not match the operator grid");
    const int n = dimension();
    const double h = grid().step();
    Vector b(rows());
    for (std::size_t i = 0; i < grid().cells(); ++i)
        b.segment(idx(i, n), n) = 0.5 * h * (cells_->step(i) * y.right(i) + y.left(i + 1));
    return b;
}

Vector DiscreteOperator::forcing_adjoint(const Vector& r) const
{
    const int n = dimension();
    const double h = grid().step();
    Vector y = Vector::Zero(unknowns());
    for (std::size_t i = 0; i < grid().cells(); ++i) {
        y.segment(idx(i, n), n) += 0.5 * h * cells_->step(i).transpose() * r.segment(idx(i, n), n);
        y.segment(idx(i + 1, n), n) += 0.5 * h * r.segment(idx(i, n), n);
    }
    return y;
}

Vector DiscreteOperator::residual(const GridFunction& x, const GridFunction& y) const
{
    return apply(stack(x)) - forcing(y);
}

double DiscreteOperator::scaled_norm() const
{
    return scaled_norm(NormFamily::constant(dimension()));
}

double DiscreteOperator::scaled_norm(const NormFamily& norms) const
{
    // Power iteration on B^T B with B = W_r H W_c^{-1}: rows weighted by
    // W(t_{i+1}), columns by W(t_i)^{-1}.
    const int n = dimension();
    const auto w = node_weights(norms, grid());
    std::vector<Matrix> winv(w.size());
    for (std::size_t i = 0; i < w.size(); ++i)
        winv[i] = w[i].inverse();
    const auto forward = [&](const Vector& v) {
        Vector u = v;
        for (std::size_t i = 0; i < w.size(); ++i)
            u.segment(idx(i, n), n) = winv[i] * v.segment(idx(i, n), n);
        Vector r = apply(u);
        for (std::size_t i = 0; i + 1 < w.size(); ++i)
            r.segment(idx(i, n), n) = w[i + 1] * r.segment(idx(i, n), n);
        return r;
    };
    const auto backward = [&](const Vector& r) {
        Vector s = r;
        for (std::size_t i = 0; i + 1 < w.size(); ++i)
            s.segment(idx(i, n), n) = w[i + 1].transpose() * r.segment(idx(i, n), n);
        Vector u = apply_adjoint(s);
        for (std::size_t i = 0; i < w.size(); ++i)
            u.segment(idx(i, n), n) = winv[i].transpose() * u.segment(idx(i, n), n);
        return u;
    };
    // Deterministic start with components on every mode (a constant vector
    // would lie in the kernel of the identity family).
    Vector v(unknowns());
    for (Eigen::Index i = 0; i < v.size(); ++i)
        v(i) = std::cos(0.61803398875 * static_cast<double>(i + 1) * static_cast<double>(i + 1));
    v.normalize();
    double sigma = 0.0;
    for (int k = 0; k < 100; ++k) {
        const Vector u = backward(forward(v));
        const double nrm = u.norm();
        if (nrm == 0.0)
            return 0.0;
        const double next = std::sqrt(nrm);
        v = u / nrm;
        const bool done = std::abs(next - sigma) <= 1e-6 * next;
        sigma = next;
        if (done)
            break;
    }
    return sigma / grid().step();
}

DiscreteOperator assemble_h(const EvolutionFamily& family, const Grid& grid)
{
    return DiscreteOperator(family, grid);
}

Vector stack(const GridFunction& f)
{
    const Matrix& v = f.right_values();
    return Eigen::Map<const Vector>(v.data(), v.size());
}

GridFunction unstack(const Grid& grid, NormFamilyPtr norms, const Vector& v)
{
    const int n = norms->dimension();
    if (v.size() != static_cast<Eigen::Index>(grid.nodes()) * n)
        throw InvalidInput("unstack: vector size does not match the grid");
    Matrix values = Eigen::Map<const Matrix>(v.data(), n, static_cast<Eigen::Index>(grid.nodes()));
    return GridFunction::from_nodes(grid, std::move(norms), std::move(values));
}

std::string to_string(BoundaryMode mode)
{
    return mode == BoundaryMode::Projected ? "projected" : "least-norm";
}

BoundaryMode parse_boundary_mode(const std::string& text)
{
    if (text == "projected")
        return BoundaryMode::Projected;
    if (text == "least-norm" || text == "least_norm")
        return BoundaryMode::LeastNorm;
    throw InvalidInput("unknown boundary mode '" + text + "' (expected projected or least-norm)");
}

// ---------------------------------------------------------------------------
// BoundedSolver

struct BoundedSolver::Factor {
    Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
    Eigen::SimplicialLDLT<SparseMatrix> ldlt;
    SparseMatrix scaled;  // H S, least-norm mode
    SparseMatrix rows;    // row weights of the projected system
};

BoundedSolver::BoundedSolver(const EvolutionFamily& family, Grid grid, SolverOptions options)
    : BoundedSolver(family, std::make_shared<const CellPropagators>(family, grid), options)
{
}

BoundedSolver::BoundedSolver(const EvolutionFamily& family, std::shared_ptr<const CellPropagators> cells,
                             SolverOptions options)
    : norms_(family.norms_ptr()), op_(std::move(cells)), options_(options),
      factor_(std::make_unique<Factor>())
{
    const int n = op_.dimension();
    const Grid& g = op_.grid();
    const std::size_t last = g.cells();

    if (options_.mode == BoundaryMode::LeastNorm) {
        std::vector<Triplet> trips;
        for (std::size_t i = 0; i < g.nodes(); ++i) {
            const Matrix winv = norms_->weight_surrogate(g.time(i)).inverse() / std::sqrt(node_weight(g, i));
            add_block(trips, idx(i, n), idx(i, n), winv);
        }
        SparseMatrix s(op_.unknowns(), op_.unknowns());
        s.setFromTriplets(trips.begin(), trips.end());
        factor_->scaled = op_.matrix() * s;
        const SparseMatrix gram = factor_->scaled * SparseMatrix(factor_->scaled.transpose());
        factor_->ldlt.compute(gram);
        if (factor_->ldlt.info() != Eigen::Success) {
            closure_.message = "least-norm Gram factorization failed";
            return;
        }
        factor_->scaled.makeCompressed();
        scale_ = std::move(s);
        ready_ = true;
        return;
    }

    const double horizon = options_.bootstrap_horizon;
    if (!(horizon > 0.0))
        throw InvalidInput("bootstrap horizon must be positive");
    const double t0 = g.start();
    const double tn = g.end();
    const Matrix w0 = norms_->weight_surrogate(t0);
    const Matrix wn = norms_->weight_surrogate(tn);

    const Matrix left_map = w0 * family.propagator(t0, t0 - horizon) * norms_->weight_surrogate(t0 - horizon).inverse();
    const Matrix right_map = norms_->weight_surrogate(tn + horizon) * family.propagator(tn + horizon, tn) * wn.inverse();
    if (!left_map.allFinite() || !right_map.allFinite())
        throw WindowTooLarge("bootstrap propagators overflow; reduce the bootstrap horizon");

    Eigen::JacobiSVD<Matrix> lsvd(left_map, Eigen::ComputeFullU);
    Eigen::JacobiSVD<Matrix> rsvd(right_map, Eigen::ComputeFullV);
    std::vector<Eigen::Index> left_small;
    std::vector<Eigen::Index> right_large;
    for (Eigen::Index k = 0; k < n; ++k) {
        const double ls = lsvd.singularValues()(k);
        const double rs = rsvd.singularValues()(k);
        const double lrate = ls > 0.0 ? std::log(ls) / horizon : -kInfinity;
        const double rrate = rs > 0.0 ? std::log(rs) / horizon : -kInfinity;
        closure_.min_rate_margin = std::min({closure_.min_rate_margin, std::abs(lrate), std::abs(rrate)});
        if (lrate <= 0.0)
            left_small.push_back(k);
        if (rrate >= 0.0)
            right_large.push_back(k);
    }
    closure_.left_rows = static_cast<int>(left_small.size());
    closure_.right_rows = static_cast<int>(right_large.size());
    if (closure_.min_rate_margin < options_.dead_band) {
        closure_.ambiguous = true;
        closure_.message = "boundary splitting ambiguous: a long-window singular value is within the dead band of 1";
        return;
    }
    if (closure_.left_rows + closure_.right_rows != n) {
        closure_.ambiguous = true;
        closure_.message = "stable dimension at the left end and unstable dimension at the right end do not add up";
        return;
    }

    left_rows_ = Matrix(closure_.left_rows, n);
    for (std::size_t k = 0; k < left_small.size(); ++k)
        left_rows_.row(static_cast<Eigen::Index>(k)) = lsvd.matrixU().col(left_small[k]).transpose() * w0;
    right_rows_ = Matrix(closure_.right_rows, n);
    for (std::size_t k = 0; k < right_large.size(); ++k)
        right_rows_.row(static_cast<Eigen::Index>(k)) = rsvd.matrixV().col(right_large[k]).transpose() * wn;

    std::vector<Triplet> trips;
    const SparseMatrix& hm = op_.matrix();
    for (int k = 0; k < hm.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(hm, k); it; ++it)
            trips.emplace_back(it.row(), it.col(), it.value());
    const Eigen::Index base = op_.rows();
    add_block(trips, base, 0, left_rows_);
    add_block(trips, base + closure_.left_rows, idx(last, n), right_rows_);
    SparseMatrix raw(op_.unknowns(), op_.unknowns());
    raw.setFromTriplets(trips.begin(), trips.end());

    // Factor in the weighted variables z_i = W_i x_i with row block i scaled
    // by W_{i+1}, so that nonuniform growth of the Euclidean propagators does
    // not enter the conditioning.
    std::vector<Triplet> col_trips;
    std::vector<Triplet> row_trips;
    for (std::size_t i = 0; i < g.nodes(); ++i) {
        const Matrix wi = norms_->weight_surrogate(g.time(i));
        add_block(col_trips, idx(i, n), idx(i, n), wi.inverse());
        if (i >= 1)
            add_block(row_trips, idx(i - 1, n), idx(i - 1, n), wi);
    }
    for (Eigen::Index r = base; r < op_.unknowns(); ++r)
        row_trips.emplace_back(r, r, 1.0);
    SparseMatrix col_scale(op_.unknowns(), op_.unknowns());
    col_scale.setFromTriplets(col_trips.begin(), col_trips.end());
    SparseMatrix row_scale(op_.unknowns(), op_.unknowns());
    row_scale.setFromTriplets(row_trips.begin(), row_trips.end());
    SparseMatrix a = row_scale * raw * col_scale;
    a.makeCompressed();
    scale_ = std::move(col_scale);
    factor_->rows = std::move(row_scale);
    factor_->lu.compute(a);
    if (factor_->lu.info() != Eigen::Success) {
        closure_.message = "closed boundary-value system is singular";
        return;
    }

    // Hager's 1-norm estimate of ||A^{-1}||_1 for the condition report.
    double a_norm = 0.0;
    for (int k = 0; k < a.outerSize(); ++k) {
        double col = 0.0;
        for (SparseMatrix::InnerIterator it(a, k); it; ++it)
            col += std::abs(it.value());
        a_norm = std::max(a_norm, col);
    }
    Vector x = Vector::Constant(a.cols(), 1.0 / static_cast<double>(a.cols()));
    double inv_norm = 0.0;
    for (int iter = 0; iter < 5; ++iter) {
        const Vector yv = factor_->lu.solve(x);
        const double est = yv.lpNorm<1>();
        const Vector xi = yv.unaryExpr([](double v) { return v >= 0.0 ? 1.0 : -1.0; });
        const Vector z = factor_->lu.transpose().solve(xi);
        Eigen::Index j = 0;
        const double zmax = z.cwiseAbs().maxCoeff(&j);
        if (est <= inv_norm || zmax <= z.dot(x)) {
            inv_norm = std::max(inv_norm, est);
            break;
        }
        inv_norm = est;
        x.setZero();
        x(j) = 1.0;
    }
    closure_.condition_estimate = a_norm * inv_norm;
    if (!std::isfinite(closure_.condition_estimate) || closure_.condition_estimate > 1e14) {
        closure_.message = "closed boundary-value system is ill-conditioned";
        return;
    }
    ready_ = true;
}

BoundedSolver::~BoundedSolver() = default;
BoundedSolver::BoundedSolver(BoundedSolver&&) noexcept = default;
BoundedSolver& BoundedSolver::operator=(BoundedSolver&&) noexcept = default;

Vector BoundedSolver::apply(const Vector& y_nodes) const
{
    if (!ready_)
        throw Error("bounded solver is not available: " + closure_.message);
    const GridFunction y = unstack(grid(), norms_, y_nodes);
    return stack(solve(y));
}

GridFunction BoundedSolver::solve(const GridFunction& y) const
{
    if (!ready_)
        throw Error("bounded solver is not available: " + closure_.message);
    const Vector b = op_.forcing(y);
    Vector x;
    if (options_.mode == BoundaryMode::LeastNorm) {
        const Vector mult = factor_->ldlt.solve(b);
        x = scale_ * (factor_->scaled.transpose() * mult);
    } else {
        Vector rhs = Vector::Zero(op_.unknowns());
        rhs.head(op_.rows()) = b;
        x = scale_ * factor_->lu.solve(factor_->rows * rhs);
    }
    return unstack(grid(), norms_, x);
}

Vector BoundedSolver::apply_transpose(const Vector& x_nodes) const
{
    if (!ready_)
        throw Error("bounded solver is not available: " + closure_.message);
    if (options_.mode == BoundaryMode::LeastNorm) {
        const Vector u = factor_->scaled * (scale_.transpose() * x_nodes);
        return op_.forcing_adjoint(factor_->ldlt.solve(u));
    }
    const Vector w = factor_->rows.transpose() * factor_->lu.transpose().solve(scale_.transpose() * x_nodes);
    return op_.forcing_adjoint(w.head(op_.rows()));
}

SolveResult solve_bounded(const EvolutionFamily& family, const GridFunction& y, Exponent p, Exponent q,
                          SolverOptions options)
{
    require_ordered_pair(p, q);
    BoundedSolver solver(family, y.grid(), options);
    SolveResult out;
    out.closure = solver.closure();
    if (!solver.ready()) {
        out.inconclusive = true;
        return out;
    }
    out.x = solver.solve(y);
    out.residual = mild_residual(*out.x, y, solver.op().cells());
    return out;
}

// ---------------------------------------------------------------------------
// kernel_check

std::string to_string(KernelTrend trend)
{
    switch (trend) {
    case KernelTrend::Trivial: return "trivial";
    case KernelTrend::Nontrivial: return "nontrivial";
    case KernelTrend::Inconclusive: return "inconclusive";
    }
    return "unknown";
}

namespace {

// Smallest eigenvalue of the SPD matrix m by block inverse (subspace)
// iteration with Rayleigh-Ritz.
double smallest_eigenvalue(const SparseMatrix& m)
{
    Eigen::SimplicialLDLT<SparseMatrix> ldlt(m);
    if (ldlt.info() != Eigen::Success)
        return 0.0;
    const Eigen::Index dim = m.rows();
    const Eigen::Index block = std::min<Eigen::Index>(6, dim);
    Matrix v(dim, block);
    for (Eigen::Index j = 0; j < block; ++j)
        for (Eigen::Index i = 0; i < dim; ++i)
            v(i, j) = std::cos(static_cast<double>((i + 1) * (j + 1)) * 0.61803398875);
    v.col(0).setOnes();
    double prev = kInfinity;
    for (int iter = 0; iter < 400; ++iter) {
        Matrix z = ldlt.solve(v);
        Eigen::HouseholderQR<Matrix> qr(z);
        v = qr.householderQ() * Matrix::Identity(dim, block);
        const Matrix ritz = v.transpose() * (m * v);
        Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (ritz + ritz.transpose()));
        v = v * es.eigenvectors();
        const double lam = std::max(0.0, es.eigenvalues()(0));
        if (std::abs(lam - prev) <= 1e-12 * std::max(lam, 1e-300))
            return lam;
        prev = lam;
    }
    return prev;
}

GridFunction homogeneous_witness(const CellPropagators& cells, NormFamilyPtr norms)
{
    const Grid& g = cells.grid();
    const int n = cells.dimension();
    Matrix gram = Matrix::Zero(n, n);
    std::vector<Matrix> phi(g.nodes());
    phi[0] = Matrix::Identity(n, n);
    for (std::size_t i = 0; i < g.nodes(); ++i) {
        if (i > 0)
            phi[i] = cells.step(i - 1) * phi[i - 1];
        const Matrix wphi = norms->weight_surrogate(g.time(i)) * phi[i];
        gram += node_weight(g, i) * wphi.transpose() * wphi;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
    const auto& ev = es.eigenvalues();
    Eigen::Index tied = 1;
    while (tied < n && ev(tied) <= ev(0) + 1e-8 * std::max(ev(0), 1e-300))
        ++tied;
    const Matrix basis = es.eigenvectors().leftCols(tied);
    Vector x0 = Vector::Zero(n);
    for (int j = 0; j < n && x0.norm() < 1e-8; ++j)
        x0 = basis * (basis.transpose() * Vector::Unit(n, j));
    x0.normalize();
    Eigen::Index lead = 0;
    x0.cwiseAbs().maxCoeff(&lead);
    if (x0(lead) < 0.0)
        x0 = -x0;
    Matrix values(n, static_cast<Eigen::Index>(g.nodes()));
    for (std::size_t i = 0; i < g.nodes(); ++i)
        values.col(static_cast<Eigen::Index>(i)) = phi[i] * x0;
    return GridFunction::from_nodes(g, std::move(norms), std::move(values));
}

}  // namespace

KernelReport kernel_check(const EvolutionFamily& family, double h, const std::vector<double>& half_widths,
                          double threshold_factor)
{
    if (half_widths.size() < 2)
        throw InvalidInput("kernel_check needs at least two window lengths");
    std::vector<double> widths = half_widths;
    std::sort(widths.begin(), widths.end());
    const int n = family.dimension();
    const auto& norms = family.norms();

    KernelReport report;
    std::shared_ptr<const CellPropagators> last_cells;
    for (double hw : widths) {
        const Grid g = Grid::window(hw, h);
        if (g.cells() < 2)
            throw InvalidInput("kernel_check window is too short for the grid step");
        auto cells = std::make_shared<const CellPropagators>(family, g);
        const auto w = node_weights(norms, g);
        // Rows i = 0..N-1 weighted by W_{i+1}; unknowns x_1..x_{N-1} scaled by W_j^{-1}.
        std::vector<Triplet> trips;
        const std::size_t N = g.cells();
        for (std::size_t i = 0; i < N; ++i) {
            if (i + 1 <= N - 1)
                add_block(trips, idx(i, n), idx(i, n), Matrix::Identity(n, n));
            if (i >= 1)
                add_block(trips, idx(i, n), idx(i - 1, n), -w[i + 1] * cells->step(i) * w[i].inverse());
        }
        SparseMatrix m(static_cast<Eigen::Index>(N) * n, static_cast<Eigen::Index>(N - 1) * n);
        m.setFromTriplets(trips.begin(), trips.end());
        const SparseMatrix mtm = SparseMatrix(m.transpose()) * m;
        const double sigma = std::sqrt(smallest_eigenvalue(mtm)) / h;

        DiscreteOperator op(cells);
        KernelWindow kw{hw, sigma, threshold_factor * op.scaled_norm(norms)};
        report.windows.push_back(kw);
        last_cells = cells;
    }

    // The trend is read off the two largest windows: early windows may still
    // show the transient decay of a trivial kernel before sigma levels off.
    const auto& prev = report.windows[report.windows.size() - 2];
    const auto& last = report.windows.back();
    report.sigma_min = last.sigma_min;
    const double ratio = prev.sigma_min > 0.0 ? last.sigma_min / prev.sigma_min : 0.0;
    const double span = prev.half_width / last.half_width;
    bool below = false;
    for (const auto& kw : report.windows)
        below = below || kw.sigma_min < kw.threshold;

    // Zigzag beyond 5% in both directions is treated as noise-dominated.
    bool up = false;
    bool down = false;
    for (std::size_t i = 1; i < report.windows.size(); ++i) {
        const double a = report.windows[i - 1].sigma_min;
        const double b = report.windows[i].sigma_min;
        up = up || b > 1.05 * a;
        down = down || b < 0.95 * a;
    }

    if (below || (ratio <= std::sqrt(span) && !(up && down)))
        report.trend = KernelTrend::Nontrivial;
    else if (ratio >= std::pow(span, 0.25) && !(up && down))
        report.trend = KernelTrend::Trivial;
    else
        report.trend = KernelTrend::Inconclusive;

    if (report.trend == KernelTrend::Nontrivial) {
        GridFunction wit = homogeneous_witness(*last_cells, family.norms_ptr());
        const double scale = y1_norm(wit, Exponent(2.0));
        if (scale > 0.0)
            wit = wit * (1.0 / scale);
        report.witness_residual = mild_residual(wit, GridFunction::zeros(wit.grid(), wit.norms_ptr()), *last_cells);
        double lo = kInfinity;
        double hi = 0.0;
        for (std::size_t i = 0; i < wit.grid().nodes(); ++i) {
            const double v = wit.norms()(wit.grid().time(i), wit.at(i));
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        report.witness_growth = lo > 0.0 ? hi / lo : kInfinity;
        report.witness = std::move(wit);
    }
    return report;
}

// ---------------------------------------------------------------------------
// estimate_g_norm

// ---------------------------------------------------------------------------
// estimate_g_norm

namespace {

double probe_ratio(const BoundedSolver& solver, const GridFunction& y, Exponent p, Exponent q)
{
    const double denom = lp_norm(y, q);
    if (!(denom > 0.0))
        return -1.0;
    return y1_norm(solver.solve(y), p) / denom;
}

}  // namespace

GNormEstimate estimate_g_norm(const BoundedSolver& solver, Exponent p, Exponent q, int random_probes,
                              std::uint64_t seed, int max_power_iterations)
{
    if (!solver.ready())
        throw Error("estimate_g_norm needs a ready solver: " + solver.closure().message);
    const Grid& g = solver.grid();
    const auto& norms = solver.norms_ptr();
    const int n = norms->dimension();

    GNormEstimate est;
    Vector best_nodes;
    const auto consider = [&](const GridFunction& y) {
        const double r = probe_ratio(solver, y, p, q);
        if (r < 0.0)
            return;
        ++est.probes;
        if (r > est.value) {
            est.value = r;
            best_nodes = stack(y);
        }
    };

    // Designed probes: constants over the window and unit-interval pulses.
    const double a = g.time(g.floor_index(0.5 * (g.start() + g.end())));
    for (int j = 0; j < n; ++j) {
        const Vector e = Vector::Unit(n, j);
        consider(GridFunction::sample(g, norms, [&](double) { return e; }));
        consider(GridFunction::sample_sided(g, norms, [&](double t, Side side) -> Vector {
            return indicator(a, a + 1.0, t, side) * e;
        }));
    }

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double span = g.end() - g.start();
    for (int k = 0; k < random_probes; ++k) {
        const double center = g.start() + span * (0.25 + 0.5 * unit(rng));
        const double width = 0.5 + 1.5 * unit(rng);
        Vector dir(n);
        for (int j = 0; j < n; ++j)
            dir(j) = normal(rng);
        if (dir.norm() == 0.0)
            dir = Vector::Unit(n, 0);
        consider(GridFunction::sample(g, norms, [&](double t) -> Vector {
            const double u = (t - center) / width;
            return std::exp(-u * u) * dir;
        }));
    }
    if (best_nodes.size() == 0)
        throw Error("estimate_g_norm: every probe was degenerate");

    // Power iteration y <- Omega^{-1} G^T Omega G y in the weighted L2 surrogate.
    std::vector<Matrix> omega(g.nodes());
    std::vector<Matrix> omega_inv(g.nodes());
    for (std::size_t i = 0; i < g.nodes(); ++i) {
        const Matrix w = norms->weight_surrogate(g.time(i));
        omega[i] = node_weight(g, i) * w.transpose() * w;
        omega_inv[i] = omega[i].inverse();
    }
    const auto weighted = [&](const std::vector<Matrix>& blocks, const Vector& v) {
        Vector out(v.size());
        for (std::size_t i = 0; i < blocks.size(); ++i)
            out.segment(idx(i, n), n) = blocks[i] * v.segment(idx(i, n), n);
        return out;
    };
    Vector y = best_nodes;
    y /= std::sqrt(y.dot(weighted(omega, y)));
    double gain = 0.0;
    est.warning = true;
    for (int k = 0; k < max_power_iterations; ++k) {
        const Vector x = solver.apply(y);
        const double next = std::sqrt(x.dot(weighted(omega, x)));
        ++est.power_iterations;
        const GridFunction yf = unstack(g, norms, y);
        const double denom = lp_norm(yf, q);
        if (denom > 0.0) {
            est.value = std::max(est.value, y1_norm(unstack(g, norms, x), p) / denom);
            ++est.probes;
        }
        if (k > 0 && std::abs(next - gain) <= 1e-3 * next) {
            est.warning = false;
            break;
        }
        gain = next;
        Vector z = weighted(omega_inv, solver.apply_transpose(weighted(omega, x)));
        const double nz = std::sqrt(z.dot(weighted(omega, z)));
        if (!(nz > 0.0)) {
            est.warning = false;
            break;
        }
        y = z / nz;
    }
    return est;
}

// ---------------------------------------------------------------------------
// check_admissibility

std::string to_string(Verdict verdict)
{
    switch (verdict) {
    case Verdict::Admissible: return "admissible";
    case Verdict::NotAdmissible: return "not-admissible";
    case Verdict::Inconclusive: return "inconclusive";
    }
    return "unknown";
}

void require_window_fits(const EvolutionFamily& family, double half_width)
{
    GrowthBound gb;
    if (family.growth()) {
        gb = *family.growth();
    } else {
        const std::vector<double> taus{-half_width, 0.0, half_width - 1.0};
        const std::vector<double> lags{0.5, 1.0};
        try {
            gb = estimate_growth_bound(family, taus, lags);
        } catch (const InvalidInput&) {
            throw WindowTooLarge("propagator overflows on the window");
        }
    }
    const double exponent = std::log(gb.K) + std::abs(gb.c) * 2.0 * half_width;
    if (!(exponent <= 700.0))
        throw WindowTooLarge("propagators over the window exceed the floating-point range (ln K + |c| 2 T_w = " +
                             std::to_string(exponent) + ")");
}

AdmissibilityReport check_admissibility(const EvolutionFamily& family, Exponent p, Exponent q,
                                        const AdmissibilityConfig& config)
{
    require_ordered_pair(p, q);
    AdmissibilityReport rep;
    rep.p = p;
    rep.q = q;
    rep.half_width = config.half_width;
    rep.h = config.h;
    rep.reconstruction_available = !is_excluded_pair(p, q);
    if (!rep.reconstruction_available)
        rep.notes.push_back("reconstruction unavailable for (p, q) = (inf, 1)");

    std::vector<double> sweep = config.sweep;
    if (sweep.empty())
        sweep = {config.half_width / 4.0, config.half_width / 2.0, config.half_width};
    const double widest = std::max(config.half_width, *std::max_element(sweep.begin(), sweep.end()));
    require_window_fits(family, widest + config.solver.bootstrap_horizon);

    rep.kernel = kernel_check(family, config.h, sweep, config.kernel_factor);
    rep.kernel_sigma_min = rep.kernel.sigma_min;
    rep.kernel_threshold = rep.kernel.windows.back().threshold;
    if (rep.kernel.trend == KernelTrend::Nontrivial) {
        rep.verdict = Verdict::NotAdmissible;
        rep.notes.push_back("bounded homogeneous solution found; the bounded solution is not unique");
        return rep;
    }
    if (rep.kernel.trend == KernelTrend::Inconclusive) {
        rep.verdict = Verdict::Inconclusive;
        rep.notes.push_back("kernel sweep trend is neither bounded nor decaying");
        return rep;
    }

    const Grid grid = Grid::window(config.half_width, config.h);
    auto cells = std::make_shared<const CellPropagators>(family, grid);
    BoundedSolver solver(family, cells, config.solver);
    rep.closure = solver.closure();
    if (!solver.ready()) {
        rep.verdict = Verdict::Inconclusive;
        rep.notes.push_back(solver.closure().message);
        return rep;
    }
    SolverOptions other = config.solver;
    other.mode = config.solver.mode == BoundaryMode::Projected ? BoundaryMode::LeastNorm : BoundaryMode::Projected;
    BoundedSolver alternate(family, cells, other);

    // Probe suite: unit pulses in every direction at the window centre.
    const int n = family.dimension();
    const auto& norms = family.norms_ptr();
    const double a = grid.time(grid.floor_index(0.0));
    rep.probe_support_margin = std::min(a - grid.start(), grid.end() - (a + 1.0));
    for (int j = 0; j < n; ++j) {
        const Vector e = Vector::Unit(n, j);
        const GridFunction y = GridFunction::sample_sided(grid, norms, [&](double t, Side side) -> Vector {
            return indicator(a, a + 1.0, t, side) * e;
        });
        const GridFunction x = solver.solve(y);
        rep.residual = std::max(rep.residual, mild_residual(x, y, *cells));
        if (alternate.ready()) {
            const GridFunction xa = alternate.solve(y);
            const double scale = std::max(1.0, lp_norm(x, Exponent::infinity()));
            rep.mode_discrepancy = std::max(rep.mode_discrepancy, lp_norm(x - xa, Exponent::infinity()) / scale);
        }
    }

    const GNormEstimate g = estimate_g_norm(solver, p, q, config.random_probes, config.seed);
    rep.g_norm_estimate = g.value;
    rep.g_norm_warning = g.warning;
    if (g.warning)
        rep.notes.push_back("power iteration for ||G|| did not stabilize within the budget");

    rep.verdict = rep.residual <= config.residual_tolerance ? Verdict::Admissible : Verdict::Inconclusive;
    if (rep.verdict == Verdict::Inconclusive)
        rep.notes.push_back("probe residual above tolerance");
    return rep;
}

}  // namespace dichotomy
