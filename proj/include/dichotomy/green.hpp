#pragma once

#include "dichotomy/certificate.hpp"
#include "dichotomy/function_space.hpp"

namespace dichotomy {

/// Bounded solution built from a dichotomy certificate, together with its
/// stable and unstable parts (x = x1 - x2).
struct GreenSolution {
    GridFunction x;
    GridFunction stable_part;    // x1(t) = int_{-T_w}^{t} T(t,s) P(s) y(s) ds
    GridFunction unstable_part;  // x2(t) = int_{t}^{T_w} T(t,s)| Q(s) y(s) ds
    bool truncation_warning = false;
    /// D e^{-rate * distance} ||y||_inf for the support margin actually used.
    double tail_estimate = 0.0;
};

/// Solves the variation-of-constants equation for the bounded solution by
/// the stable/unstable integral formulas, both by propagator-weighted
/// trapezoid recursions (forward for x1, backward on the unstable bundle for
/// x2). The result satisfies the one-step identity used by mild_residual.
GreenSolution green_solve(const DichotomyCertificate& cert, const GridFunction& y);
GreenSolution green_solve(const DichotomyCertificate& cert, const GridFunction& y, const CellPropagators& cells);

/// Constants of the explicit solution bounds
///   ||x||_inf <= (D/(1-e^{-alpha}) + D/(1-e^{-beta})) ||y||_q
///   ||x||_p   <= (D/(alpha r)^{1/r} + D/(beta r)^{1/r}) ||y||_q,  1/r = 1 + 1/p - 1/q.
struct SolutionBounds {
    double r = 1.0;  // infinite only for (p, q) = (inf, 1)
    double sup_stable = 0.0;
    double sup_unstable = 0.0;
    double lp_stable = 0.0;
    double lp_unstable = 0.0;

    double sup_bound() const { return sup_stable + sup_unstable; }
    double lp_bound() const { return lp_stable + lp_unstable; }
};

SolutionBounds dichotomy_solution_bounds(double D, double alpha, double beta, Exponent p, Exponent q);
SolutionBounds dichotomy_solution_bounds(const DichotomyCertificate& cert, Exponent p, Exponent q);

}  // namespace dichotomy
