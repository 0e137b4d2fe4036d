#pragma once

#include "dichotomy/core.hpp"
#include "dichotomy/grid.hpp"
#include "dichotomy/norm_family.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dichotomy {

enum class SystemKind { ClosedFormScalar, Diagonal, ConstantMatrix, TimeVarying };

std::string to_string(SystemKind kind);

/// Growth constants for ||T(t,tau) x||_t <= K e^{c (t - tau)} ||x||_tau.
/// c is allowed to be negative (contractive families).
struct GrowthBound {
    double K = 1.0;
    double c = 0.0;
};

/// Evolutionary family T(t, tau), t >= tau, of a linear system x' = A(t) x.
///
/// Closed-form kinds evaluate T exactly; TimeVarying integrates
/// M' = A(t) M, M(tau) = I with classical RK4 and a step <= h_int.
class EvolutionFamily {
public:
    using ScalarLogPropagator = std::function<double(double, double)>;
    using ScalarCoefficient = std::function<double(double)>;
    using MatrixCoefficient = std::function<Matrix(double)>;

    /// T(t, tau) = exp(log_propagator(t, tau)); coefficient is d/dt of it.
    static EvolutionFamily closed_form_scalar(ScalarLogPropagator log_propagator,
                                              ScalarCoefficient coefficient, std::string label);
    static EvolutionFamily constant_scalar(double a);
    /// exp(-rate (t-tau) + t cos t - tau cos tau - sin t + sin tau): a scalar
    /// family that is exponentially stable but not uniformly so.
    static EvolutionFamily nonuniform_scalar(double rate);
    static EvolutionFamily diagonal(Vector rates);
    static EvolutionFamily constant_matrix(Matrix a);
    static EvolutionFamily time_varying(int dimension, MatrixCoefficient a, double h_int,
                                        std::string label);

    EvolutionFamily with_norms(NormFamilyPtr norms) const;
    EvolutionFamily with_growth(GrowthBound growth) const;

    SystemKind kind() const { return kind_; }
    int dimension() const { return dimension_; }
    double h_int() const { return h_int_; }
    const std::string& label() const { return label_; }
    const NormFamily& norms() const { return *norms_; }
    const NormFamilyPtr& norms_ptr() const { return norms_; }
    const std::optional<GrowthBound>& growth() const { return growth_; }

    /// T(t, tau); throws OrderError when t < tau.
    Matrix propagator(double t, double tau) const;
    /// A(t).
    Matrix coefficient(double t) const;

private:
    EvolutionFamily() = default;
    Matrix integrate(double t, double tau) const;

    SystemKind kind_ = SystemKind::ConstantMatrix;
    int dimension_ = 1;
    double h_int_ = 1e-3;
    std::string label_;
    ScalarLogPropagator log_propagator_;
    ScalarCoefficient scalar_coefficient_;
    Vector rates_;
    Matrix constant_;
    MatrixCoefficient matrix_coefficient_;
    NormFamilyPtr norms_;
    std::optional<GrowthBound> growth_;
};

using EvolutionFamilyPtr = std::shared_ptr<const EvolutionFamily>;

/// ||T(t,s) T(s,tau) - T(t,tau)||_2 for tau <= s <= t.
double cocycle_residual(const EvolutionFamily& family, double tau, double s, double t);

/// Sampled sup_{||x||_tau = 1} ||T(tau+lag, tau) x||_{tau+lag}.
double growth_ratio(const EvolutionFamily& family, double tau, double lag);

/// Least-squares fit of (log K, c) to log max_tau growth_ratio(tau, lag)
/// against lag, with K then inflated so the bound covers every sample.
GrowthBound estimate_growth_bound(const EvolutionFamily& family, std::span<const double> taus,
                                  std::span<const double> lags);

/// Propagators over the cells of a grid, computed once; longer propagators
/// are compositions in cocycle order.
class CellPropagators {
public:
    CellPropagators(const EvolutionFamily& family, Grid grid);

    const Grid& grid() const { return grid_; }
    int dimension() const { return dimension_; }
    /// T(t_{i+1}, t_i).
    const Matrix& step(std::size_t i) const { return steps_[i]; }
    /// T(t_j, t_i), j >= i.
    Matrix between(std::size_t i, std::size_t j) const;

private:
    Grid grid_;
    int dimension_;
    std::vector<Matrix> steps_;
};

}  // namespace dichotomy
