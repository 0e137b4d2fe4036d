#pragma once

#include "dichotomy/core.hpp"
#include "dichotomy/evolution.hpp"
#include "dichotomy/grid.hpp"
#include "dichotomy/norm_family.hpp"

#include <filesystem>
#include <functional>
#include <iosfwd>

namespace dichotomy {

/// Which one-sided limit a piecewise-continuous sampler should return.
enum class Side { Left, Right };

/// Indicator of [a, b] sampled as a one-sided limit.
double indicator(double a, double b, double t, Side side);

/// Grid-sampled R^n-valued function of time.
///
/// Inputs may jump at grid nodes, so each node stores a left and a right
/// limit (equal for continuous functions). Quadrature on cell [t_i, t_{i+1}]
/// uses the right limit at t_i and the left limit at t_{i+1}.
class GridFunction {
public:
    using Sampler = std::function<Vector(double)>;
    using SidedSampler = std::function<Vector(double, Side)>;

    GridFunction(Grid grid, NormFamilyPtr norms, Matrix left, Matrix right);

    static GridFunction zeros(Grid grid, NormFamilyPtr norms);
    /// Continuous samples; column i of `values` is x(t_i).
    static GridFunction from_nodes(Grid grid, NormFamilyPtr norms, Matrix values);
    static GridFunction sample(Grid grid, NormFamilyPtr norms, const Sampler& f);
    static GridFunction sample_sided(Grid grid, NormFamilyPtr norms, const SidedSampler& f);

    const Grid& grid() const { return grid_; }
    int dimension() const { return static_cast<int>(right_.rows()); }
    const NormFamily& norms() const { return *norms_; }
    const NormFamilyPtr& norms_ptr() const { return norms_; }

    /// Right limit at node i (the sample value of continuous functions).
    Vector at(std::size_t i) const { return right_.col(static_cast<Eigen::Index>(i)); }
    Vector left(std::size_t i) const { return left_.col(static_cast<Eigen::Index>(i)); }
    Vector right(std::size_t i) const { return right_.col(static_cast<Eigen::Index>(i)); }
    const Matrix& left_values() const { return left_; }
    const Matrix& right_values() const { return right_; }
    bool is_continuous() const;

    GridFunction operator+(const GridFunction& other) const;
    GridFunction operator-(const GridFunction& other) const;
    GridFunction operator*(double s) const;
    /// Pointwise M(t_i) f(t_i).
    GridFunction transformed(const std::function<Matrix(std::size_t)>& m) const;

private:
    void require_compatible(const GridFunction& other) const;

    Grid grid_;
    NormFamilyPtr norms_;
    Matrix left_;
    Matrix right_;
};

/// (integral ||f(t)||_t^p dt)^{1/p} by composite trapezoid; max over nodes
/// (both one-sided limits) for p = inf.
double lp_norm(const GridFunction& f, Exponent p);

/// Norm on L^p intersected with C_b: max(||f||_p, ||f||_inf).
double y1_norm(const GridFunction& f, Exponent p);

/// Max over cells of ||x_{i+1} - T_i x_i - (h/2)(T_i y_i^+ + y_{i+1}^-)||_{t_{i+1}},
/// the one-step defect of the variation-of-constants identity.
double mild_residual(const GridFunction& x, const GridFunction& y, const CellPropagators& cells);
double mild_residual(const GridFunction& x, const GridFunction& y, const EvolutionFamily& family);

/// Largest consecutive jump max_i ||x_{i+1} - x_i|| (Euclidean).
double max_consecutive_jump(const GridFunction& x);

/// Continuity bound implied by a one-step residual delta:
/// delta + max_i ||T_i - I|| max ||x|| + h max(1, max_i ||T_i||) max ||y||.
double continuity_bound(const GridFunction& x, const GridFunction& y, const CellPropagators& cells,
                        double delta);

/// CSV with header "t,x1..xn", 17 significant digits. Nodes with a jump
/// are written twice (left limit, then right limit).
void write_csv(std::ostream& out, const GridFunction& f);
void write_csv(const std::filesystem::path& path, const GridFunction& f);
GridFunction read_csv(std::istream& in, NormFamilyPtr norms);
GridFunction read_csv(const std::filesystem::path& path, NormFamilyPtr norms);

}  // namespace dichotomy
