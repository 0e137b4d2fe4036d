#include "dichotomy/green.hpp"

#include <algorithm>
#include <cmath>

namespace dichotomy {

GreenSolution green_solve(const DichotomyCertificate& cert, const GridFunction& y)
{
    if (!cert.family)
        throw InvalidInput("certificate needs an evolution family");
    return green_solve(cert, y, CellPropagators(*cert.family, y.grid()));
}

GreenSolution green_solve(const DichotomyCertificate& cert, const GridFunction& y, const CellPropagators& cells)
{
    if (!cert.family)
        throw InvalidInput("certificate needs an evolution family");
    if (y.dimension() != cert.dimension())
        throw InvalidInput("green_solve: input dimension does not match the certificate");
    if (!(cells.grid() == y.grid()))
        throw InvalidInput("green_solve: propagator grid does not match the input grid");

    const Grid& g = y.grid();
    const std::size_t nodes = g.nodes();
    const int n = y.dimension();
    const double h = g.step();
    const Matrix id = Matrix::Identity(n, n);

    std::vector<Matrix> p(nodes);
    for (std::size_t i = 0; i < nodes; ++i)
        p[i] = cert.projection(g.time(i));

    Matrix x1 = Matrix::Zero(n, static_cast<Eigen::Index>(nodes));
    for (std::size_t i = 0; i + 1 < nodes; ++i) {
        const Matrix& step = cells.step(i);
        const auto c = static_cast<Eigen::Index>(i);
        x1.col(c + 1) = step * x1.col(c) + 0.5 * h * (step * (p[i] * y.right(i)) + p[i + 1] * y.left(i + 1));
    }

    Matrix x2 = Matrix::Zero(n, static_cast<Eigen::Index>(nodes));
    if (!cert.unstable_vacuous()) {
        for (std::size_t i = nodes - 1; i-- > 0;) {
            const Matrix back = unstable_backward(cells.step(i), p[i], p[i + 1]);
            const auto c = static_cast<Eigen::Index>(i);
            x2.col(c) = back * x2.col(c + 1) +
                        0.5 * h * (back * y.left(i + 1) + (id - p[i]) * y.right(i));
        }
    }

    GreenSolution out{GridFunction::from_nodes(g, y.norms_ptr(), x1 - x2),
                      GridFunction::from_nodes(g, y.norms_ptr(), x1),
                      GridFunction::from_nodes(g, y.norms_ptr(), x2)};

    // Window truncation: the improper integrals are cut at the window ends.
    const double rate = std::min(cert.stable_vacuous() ? cert.beta : cert.alpha,
                                 cert.unstable_vacuous() ? cert.alpha : cert.beta);
    const double margin = 10.0 / rate;
    double nearest = kInfinity;
    double y_sup = 0.0;
    for (std::size_t i = 0; i < nodes; ++i) {
        if (y.left(i).norm() == 0.0 && y.right(i).norm() == 0.0)
            continue;
        const double t = g.time(i);
        nearest = std::min({nearest, t - g.start(), g.end() - t});
        y_sup = std::max({y_sup, y.norms()(t, y.left(i)), y.norms()(t, y.right(i))});
    }
    if (std::isfinite(nearest)) {
        out.truncation_warning = nearest < margin;
        out.tail_estimate = cert.D * std::exp(-rate * nearest) * y_sup;
    }
    return out;
}

SolutionBounds dichotomy_solution_bounds(double D, double alpha, double beta, Exponent p, Exponent q)
{
    require_ordered_pair(p, q);
    if (!(alpha > 0.0) || !(beta > 0.0) || !(D > 0.0))
        throw InvalidInput("solution bounds need alpha, beta, D > 0");
    SolutionBounds b;
    b.sup_stable = D / (1.0 - std::exp(-alpha));
    b.sup_unstable = D / (1.0 - std::exp(-beta));
    const double inv_r = 1.0 + p.reciprocal() - q.reciprocal();
    if (inv_r <= 0.0) {
        // (p, q) = (inf, 1): the convolution kernel is only bounded; fall back
        // to the direct sup bound.
        b.r = kInfinity;
        b.lp_stable = b.sup_stable;
        b.lp_unstable = b.sup_unstable;
        return b;
    }
    b.r = 1.0 / inv_r;
    b.lp_stable = D / std::pow(alpha * b.r, inv_r);
    b.lp_unstable = D / std::pow(beta * b.r, inv_r);
    return b;
}

SolutionBounds dichotomy_solution_bounds(const DichotomyCertificate& cert, Exponent p, Exponent q)
{
    return dichotomy_solution_bounds(cert.D, cert.alpha, cert.beta, p, q);
}

}  // namespace dichotomy
