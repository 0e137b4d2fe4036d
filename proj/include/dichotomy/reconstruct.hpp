#pragma once

#include "dichotomy/admissibility.hpp"
#include "dichotomy/certificate.hpp"

#include <optional>
#include <string>
#include <vector>

namespace dichotomy {

/// Stable and unstable subspaces at tau (orthonormal bases of the range and
/// kernel of P(tau)).
struct SubspacePair {
    double tau = 0.0;
    Matrix stable;
    Matrix unstable;
    double min_angle = 0.0;  // smallest principal angle between the two, radians
    double orthonormality_defect = 0.0;
};

SubspacePair subspace_pair(double tau, const Matrix& projection);

struct Membership {
    bool member = false;
    bool overflow = false;
    double sup_horizon = 0.0;   // sup over [tau, tau + H] of ||T(t,tau)x||_t
    double sup_double = 0.0;    // same over [tau, tau + 2H]
    double lp_tail = 0.0;       // L^p norm of the orbit over [tau, tau + 2H]
};

/// Forward-boundedness test for x at tau: member when the orbit supremum does
/// not grow between horizons H and 2H (relative tolerance 1e-3).
Membership stable_membership(const EvolutionFamily& family, double tau, const Vector& x, double horizon,
                             Exponent p, double step = 0.01);

/// P(tau) from the test inputs g_j = chi_[tau,tau+1] T(t,tau) e_j: column j is
/// v_j(tau) + e_j with v_j the bounded solution. tau and tau + 1 must be nodes.
Matrix projection_at(const BoundedSolver& solver, double tau);

/// M = K^2 e^{2c} ||G|| + 1.
double projection_bound(double g_norm, GrowthBound growth);

struct ConservativeRates {
    double theta = 1.0;   // 1 - 1/q + 1/p
    double C = 0.0;       // 2 K e^c ||G||
    double T = 0.0;       // (4 K e^c ||G||^2)^{1/theta}
    double lambda = 0.0;  // ln 2 / T
    double D = 0.0;       // 2 C
};

/// Throws ExcludedPair for (p, q) = (inf, 1).
ConservativeRates doubling_time_and_rates(double g_norm, GrowthBound growth, Exponent p, Exponent q);

struct FittedRates {
    double alpha = 0.0;
    double beta = 0.0;
    double D = 1.0;
    bool alpha_placeholder = false;  // stable bundle trivial
    bool beta_placeholder = false;   // unstable bundle trivial
    double max_stable_ratio = 0.0;   // against (D, alpha) on the samples
    double max_unstable_ratio = 0.0;
};

/// Log-linear least-squares fit of max_tau ||T(t,tau)P(tau)|| and
/// max_tau ||T(tau,t)|Q(t)|| against the lag, then D covering every sample.
/// `steps[k]` = T(t_{k+1}, t_k) on the certificate grid; lags in nodes.
FittedRates fit_dichotomy_rates(const EvolutionFamily& family, const Grid& grid, const std::vector<Matrix>& steps,
                                const std::vector<Matrix>& projections, const std::vector<std::size_t>& lags);

struct ReconstructConfig {
    AdmissibilityConfig admissibility;
    double interior_margin = 5.0;
    std::size_t node_stride = 10;
    /// Invariance tolerance; negative selects 1e-6 for closed-form families
    /// and max(1e-6, 10 h^2) for integrated ones.
    double invariance_tolerance = -1.0;
    double max_fit_lag = 10.0;
};

struct InvarianceWitness {
    double t = 0.0;
    double tau = 0.0;
    double residual = 0.0;
};

struct ReconstructionReport {
    AdmissibilityReport admissibility;
    std::optional<DichotomyCertificate> certificate;
    GrowthBound growth;
    ConservativeRates conservative;
    double projection_bound_M = 0.0;
    double max_projection_norm = 0.0;
    bool projection_bound_holds = true;
    FittedRates fitted;
    int rank = 0;
    bool rank_constant = true;
    double max_idempotency_defect = 0.0;
    double invariance_tolerance = 0.0;
    InvarianceWitness worst_invariance;
    double unstable_roundtrip = 0.0;  // ||T^{-1}| T B_u - B_u|| over samples
    double growth_lemma_min_ratio = kInfinity;
    bool growth_lemma_holds = true;
    bool stable_decay_holds = true;
    double min_subspace_angle = 0.0;
    std::vector<std::string> notes;
};

/// Converse pipeline: admissibility check, projections over the interior of
/// the window, invariance/rank/round-trip checks, fitted and conservative
/// rates. Without an admissible verdict no certificate is produced.
/// Throws CertificationFailure on an invariance or rank failure, and
/// ExcludedPair for (inf, 1).
ReconstructionReport certify_dichotomy(const EvolutionFamily& family, Exponent p, Exponent q,
                                       const ReconstructConfig& config);

}  // namespace dichotomy
