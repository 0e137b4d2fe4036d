#pragma once

#include "dichotomy/certificate.hpp"
#include "dichotomy/norm_family.hpp"

#include <iosfwd>
#include <span>
#include <vector>

namespace dichotomy {

struct LyapunovOptions {
    double rate_margin = 0.5;
    double horizon = 40.0;
    double ds = 0.01;
    /// Times where the stabilization (L vs 2L) check and the envelope fit run.
    std::vector<double> sample_times;
    double stabilization_tolerance = 1e-6;
};

struct LyapunovNorms {
    NormFamilyPtr norms;  // envelope set to the fitted (C, eps)
    bool stabilized = true;
    double max_relative_change = 0.0;  // horizon L against 2L
    EnvelopeReport envelope;
    std::vector<double> table_times;
    Matrix table;  // column i holds ||e_j||_t at table_times[i]
};

/// Adapted norms
///   ||x||_t = sup_{0<=s<=L} e^{(alpha-m)s} ||T(t+s,t)P(t)x|| + sup_{0<=s<=L} e^{(beta-m)s} ||T(t-s,t)|Q(t)x||
/// with the suprema taken over s on a uniform ds grid. Under these norms the
/// certified splitting contracts at rate alpha - m (beta - m backward).
LyapunovNorms build_lyapunov_norms(const EvolutionFamily& family, const DichotomyCertificate& cert,
                                   const LyapunovOptions& options);

/// The raw adapted norm evaluator for a given horizon (no envelope fit).
NormFamily::Evaluator lyapunov_evaluator(EvolutionFamilyPtr family, DichotomyCertificate cert, double rate_margin,
                                         double horizon, double ds);

/// Constant-norm uniformity diagnostic: K(tau) = max_{0<=lag<=max_lag} ||T(tau+lag,tau)|| e^{rate lag},
/// the least constant making ||T(t,tau)|| <= K e^{-rate (t-tau)} hold from tau.
std::vector<double> uniform_constant_profile(const EvolutionFamily& family, std::span<const double> taus,
                                             double rate, double max_lag, double dlag);

void write_table_csv(std::ostream& out, const LyapunovNorms& norms);

}  // namespace dichotomy
