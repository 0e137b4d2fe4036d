#include "dichotomy/certificate.hpp"

#include <algorithm>
#include <cmath>

namespace dichotomy {

Matrix DichotomyCertificate::projection(double t) const
{
    if (projections.empty())
        throw InvalidInput("certificate has no projections");
    if (constant_projection)
        return projections.front();
    if (auto idx = grid.node_index(t))
        return projections[*idx];
    if (!family)
        throw InvalidInput("certificate without a family cannot transport projections");
    if (t < grid.start()) {
        const Matrix m = family->propagator(grid.start(), t);
        return m.partialPivLu().solve(projections.front() * m);
    }
    const std::size_t k = grid.floor_index(t);
    const Matrix m = family->propagator(t, grid.time(k));
    const Matrix pm = m * projections[k];
    // P(t) = m P_k m^{-1}  <=>  P(t) m = m P_k.
    return m.transpose().partialPivLu().solve(pm.transpose()).transpose();
}

DichotomyCertificate make_constant_certificate(EvolutionFamilyPtr family, Grid grid, const Matrix& projection,
                                               double alpha, double beta, double D)
{
    if (!family)
        throw InvalidInput("certificate needs an evolution family");
    const int n = family->dimension();
    if (projection.rows() != n || projection.cols() != n)
        throw InvalidInput("projection dimension does not match the family");
    if (!(alpha > 0.0) || !(beta > 0.0) || !(D >= 1.0))
        throw InvalidInput("certificate needs alpha > 0, beta > 0, D >= 1");
    DichotomyCertificate cert{grid, {projection}, alpha, beta, D, numerical_rank(projection), true,
                              std::move(family)};
    return cert;
}

int numerical_rank(const Matrix& m, double relative_threshold)
{
    if (m.size() == 0)
        return 0;
    Eigen::JacobiSVD<Matrix> svd(m);
    const auto& s = svd.singularValues();
    // Projections have singular values >= 1 on their range, so the
    // threshold is taken relative to max(1, sigma_max).
    const double ref = std::max(1.0, s(0));
    int r = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s(i) > relative_threshold * ref)
            ++r;
    return r;
}

Matrix unstable_backward(const Matrix& forward, const Matrix& projection_tau, const Matrix& projection_t,
                         double rank_threshold)
{
    const auto n = forward.rows();
    const Matrix q_tau = Matrix::Identity(n, n) - projection_tau;
    const Matrix q_t = Matrix::Identity(n, n) - projection_t;
    const Matrix basis = column_space(q_tau, 1e-6);
    if (basis.cols() == 0)
        return Matrix::Zero(n, n);
    const Matrix image = forward * basis;
    Eigen::JacobiSVD<Matrix> svd(image, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    if (s(s.size() - 1) <= rank_threshold * std::max(1.0, s(0)))
        throw SingularBundle("unstable bundle map is rank deficient");
    // Least squares on the unstable subspace: c = image^+ (Q(t) w).
    const Matrix pinv = svd.matrixV() * s.cwiseInverse().asDiagonal() * svd.matrixU().transpose();
    return basis * pinv * q_t;
}

CertificateCheck verify_certificate(const DichotomyCertificate& cert, const std::vector<std::size_t>& lags,
                                    std::size_t stride)
{
    if (!cert.family)
        throw InvalidInput("certificate needs an evolution family");
    const auto& family = *cert.family;
    const auto& norms = family.norms();
    const auto& grid = cert.grid;
    stride = std::max<std::size_t>(stride, 1);

    CertificateCheck check;
    for (std::size_t i = 0; i < grid.nodes(); i += stride) {
        const Matrix p = cert.projection(grid.time(i));
        check.max_idempotency_defect = std::max(check.max_idempotency_defect, spectral_norm(p * p - p));
        if (numerical_rank(p) != cert.rank)
            check.rank_constant = false;
    }

    for (std::size_t i = 0; i < grid.nodes(); i += stride) {
        const double tau = grid.time(i);
        const Matrix p_tau = cert.projection(tau);
        for (std::size_t lag : lags) {
            if (i + lag >= grid.nodes())
                continue;
            const double t = grid.time(i + lag);
            const double dt = t - tau;
            const Matrix m = family.propagator(t, tau);
            const Matrix p_t = cert.projection(t);
            const double scale = std::max(1.0, spectral_norm(m));
            check.max_invariance_residual =
                std::max(check.max_invariance_residual, spectral_norm(p_t * m - m * p_tau) / scale);

            if (!cert.stable_vacuous()) {
                const double s = operator_norm(m * p_tau, norms, t, norms, tau);
                check.max_stable_ratio =
                    std::max(check.max_stable_ratio, s / (cert.D * std::exp(-cert.alpha * dt)));
            }
            if (!cert.unstable_vacuous()) {
                const Matrix back = unstable_backward(m, p_tau, p_t);
                const double u = operator_norm(back, norms, tau, norms, t);
                check.max_unstable_ratio =
                    std::max(check.max_unstable_ratio, u / (cert.D * std::exp(-cert.beta * dt)));
            }
            ++check.samples;
        }
    }
    return check;
}

}  // namespace dichotomy
