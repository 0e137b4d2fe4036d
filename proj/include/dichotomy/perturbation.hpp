#pragma once

#include "dichotomy/admissibility.hpp"
#include "dichotomy/reconstruct.hpp"

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace dichotomy {

/// B(t) = M e^{-eps |t|} phi(t) B0 with ||B0|| <= 1, so that
/// ||B(t)|| <= M e^{-eps |t|} phi(t).
struct PerturbationSpec {
    double magnitude = 0.0;   // M
    double envelope_c = 1.0;  // C of the norm family
    double eps = 0.0;         // eps of the norm family
    std::function<double(double)> phi;
    std::string phi_label;
    Matrix direction;  // B0

    Matrix operator()(double t) const;
    double envelope(double t) const;
    PerturbationSpec with_magnitude(double m) const;
};

/// Validates ||B0|| <= 1, phi >= 0 and takes (C, eps) from the norm family.
PerturbationSpec make_perturbation(double magnitude, const NormFamily& norms, std::function<double(double)> phi,
                                   std::string phi_label, Matrix direction);

/// Largest sampled ||B(t)|| - M e^{-eps|t|} phi(t).
double envelope_violation(const PerturbationSpec& spec, const std::vector<double>& times);

struct PhiNorm {
    double value = 0.0;  // ||phi||_q on the window
    double tail = 0.0;   // contribution of [T_w, 2T_w] on both sides (q-th power, or sup)
    bool tail_ok = true;  // tail < 1e-8
};

PhiNorm phi_lq_norm(const PerturbationSpec& spec, Exponent q, double half_width, double h = 1e-3);

/// Trapezoid integral of phi over [tau, t].
double phi_integral(const PerturbationSpec& spec, double tau, double t, double h = 1e-3);

/// U as a time-varying family with coefficient A(t) + B(t); returns `base`
/// itself when M = 0.
EvolutionFamilyPtr perturbed_family(EvolutionFamilyPtr base, const PerturbationSpec& spec, double h_int = 1e-3);

enum class PropagatorMethod { Integrate, Picard };

struct PicardOptions {
    double step = 1e-3;
    double h_min = 1e-6;
    double tolerance = 1e-10;
    int max_iterations = 200;
};

/// U(t, tau) from the Volterra equation U = T + int T(t,s) B(s) U(s,tau) ds,
/// either by integrating (A + B) or by Picard iteration on each trapezoid
/// step. Picard halves the step while (step/2)||B|| >= 1 and throws
/// ConvergenceFailure below h_min.
Matrix perturbed_propagator(const EvolutionFamily& base, const PerturbationSpec& spec, double t, double tau,
                            PropagatorMethod method, const PicardOptions& options = {});

struct Smallness {
    double lhs = 0.0;
    bool satisfied = true;
};

/// lhs = M C ||phi||_q ||H^{-1}||, satisfied when lhs < 1.
Smallness smallness_condition(const PerturbationSpec& spec, double phi_q, double h_inverse_norm);

/// (K e^{MCK||phi||_q}, c + MCK||phi||_q).
GrowthBound perturbed_growth_bound(const PerturbationSpec& spec, GrowthBound base, double phi_q);

struct GronwallCheck {
    double max_ratio = 0.0;  // sampled ||U(t,tau)|| over the bound
    double max_integral_ratio = 0.0;  // int_tau^t phi over ||phi||_q (t - tau + 1)
    int samples = 0;
    bool holds() const { return max_ratio <= 1.0 + 1e-9 && max_integral_ratio <= 1.0 + 1e-9; }
};

GronwallCheck check_gronwall(const EvolutionFamily& perturbed, const PerturbationSpec& spec, GrowthBound bound,
                             double phi_q, const std::vector<double>& taus, const std::vector<double>& lags);

struct IdentityCheck {
    double matrix_residual = 0.0;       // max |L + P - H| entrywise
    double application_residual = 0.0; // |L(x) - F y - (H x - F(y + B x))|_inf on random (x, y)
    double propagator_consistency = 0.0;  // fused step against the integrated U step, O(h^3)
};

/// Checks H = L + P for the trapezoid assembly on `grid`: L is the perturbed
/// operator written with base propagators, P(x) the forcing of B x.
IdentityCheck operator_identity(const EvolutionFamily& base, const PerturbationSpec& spec, const Grid& grid,
                                std::uint64_t seed);

struct SweepRow {
    double magnitude = 0.0;
    double lhs = 0.0;
    bool satisfied = false;
    std::string verdict;
    bool certified = false;
    double alpha_hat = 0.0;
    double beta_hat = 0.0;
    double d_hat = 0.0;
    double gronwall_ratio = 0.0;
    double identity_residual = 0.0;
    double propagator_agreement = 0.0;  // Picard against integration at one sample
    std::string error;
};

struct SweepReport {
    std::vector<SweepRow> rows;
    double phi_q = 0.0;
    PhiNorm phi;
    double h_inverse_norm = 0.0;
    GrowthBound base_growth;
    double theoretical_threshold = kInfinity;  // 1 / (C ||phi||_q ||H^{-1}||)
    std::optional<double> empirical_threshold;  // smallest swept M that was not certified
    bool consistent = true;  // every M with lhs < 1 certified
};

SweepReport robustness_experiment(const EvolutionFamily& base, const PerturbationSpec& spec,
                                  const std::vector<double>& magnitudes, Exponent p, Exponent q,
                                  const ReconstructConfig& config);

void write_sweep_csv(std::ostream& out, const SweepReport& report);

}  // namespace dichotomy
