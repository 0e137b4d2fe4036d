#pragma once

#include "dichotomy/core.hpp"
#include "dichotomy/evolution.hpp"
#include "dichotomy/grid.hpp"

#include <vector>

namespace dichotomy {

/// Machine-checkable record of an exponential dichotomy: projections P(t_i)
/// on a grid, decay rate alpha, expansion rate beta and constant D with
///   ||T(t,tau) P(tau) x||_t        <= D e^{-alpha (t - tau)} ||x||_tau
///   ||T(tau,t)| Q(t) x||_tau       <= D e^{-beta (t - tau)} ||x||_t
/// for t >= tau, Q = I - P. A bundle of dimension 0 makes its bound vacuous;
/// its rate is then only a placeholder.
struct DichotomyCertificate {
    Grid grid;
    std::vector<Matrix> projections;
    double alpha = 1.0;
    double beta = 1.0;
    double D = 1.0;
    int rank = 0;
    /// The same P at every node (analytic certificates of autonomous systems).
    bool constant_projection = false;
    EvolutionFamilyPtr family;

    int dimension() const { return family ? family->dimension() : 0; }
    bool stable_vacuous() const { return rank == 0; }
    bool unstable_vacuous() const { return rank == dimension(); }

    /// P(t): stored node value, the constant projection, or the nearest
    /// node transported along the flow, P(t) = T(t,t_k) P_k T(t,t_k)^{-1}.
    Matrix projection(double t) const;
};

/// Certificate with one projection for every node.
DichotomyCertificate make_constant_certificate(EvolutionFamilyPtr family, Grid grid, const Matrix& projection,
                                               double alpha, double beta, double D);

/// Numerical rank with a relative singular value threshold.
int numerical_rank(const Matrix& m, double relative_threshold = 1e-6);

/// T(tau,t)| Q(t) as a matrix: the inverse of T(t,tau) restricted to the
/// range of Q(tau), applied after Q(t). `forward` = T(t,tau).
/// Throws SingularBundle when the restricted map is rank deficient.
Matrix unstable_backward(const Matrix& forward, const Matrix& projection_tau, const Matrix& projection_t,
                         double rank_threshold = 1e-10);

struct CertificateCheck {
    double max_idempotency_defect = 0.0;
    bool rank_constant = true;
    double max_invariance_residual = 0.0;
    double max_stable_ratio = 0.0;    // ||T P||_{tau->t} / (D e^{-alpha dt})
    double max_unstable_ratio = 0.0;  // ||T^-1| Q||_{t->tau} / (D e^{-beta dt})
    std::size_t samples = 0;

    bool bounds_hold(double slack = 1e-9) const
    {
        return max_stable_ratio <= 1.0 + slack && max_unstable_ratio <= 1.0 + slack;
    }
};

/// Checks every certificate invariant on node pairs (i, i + lag) for the
/// given lags (in nodes), with tau nodes taken every `stride` nodes.
/// Invariance residuals are relative: ||P(t)T - T P(tau)|| / max(1, ||T||).
CertificateCheck verify_certificate(const DichotomyCertificate& cert, const std::vector<std::size_t>& lags,
                                    std::size_t stride);

}  // namespace dichotomy
