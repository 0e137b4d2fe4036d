#pragma once

#include "dichotomy/evolution.hpp"
#include "dichotomy/function_space.hpp"

#include <Eigen/Sparse>

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace dichotomy {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Discretization of H: row block i encodes
///   x_{i+1} - T_i x_i = (h/2)(T_i y_i^+ + y_{i+1}^-),   T_i = T(t_{i+1}, t_i),
/// i.e. nN equations in n(N+1) unknowns. Unknowns are stacked node by node.
class DiscreteOperator {
public:
    DiscreteOperator(const EvolutionFamily& family, Grid grid);
    explicit DiscreteOperator(std::shared_ptr<const CellPropagators> cells);

    const Grid& grid() const { return cells_->grid(); }
    int dimension() const { return cells_->dimension(); }
    const CellPropagators& cells() const { return *cells_; }
    std::shared_ptr<const CellPropagators> cells_ptr() const { return cells_; }
    Eigen::Index rows() const;
    Eigen::Index unknowns() const;

    /// Left-hand side matrix (x part), nN x n(N+1).
    const SparseMatrix& matrix() const { return matrix_; }
    /// Row blocks x_{i+1} - T_i x_i for stacked x.
    Vector apply(const Vector& x) const;
    Vector apply_adjoint(const Vector& r) const;
    /// Right-hand side (h/2)(T_i y_i^+ + y_{i+1}^-).
    Vector forcing(const GridFunction& y) const;
    /// Adjoint of the forcing map on continuous node values (stacked).
    Vector forcing_adjoint(const Vector& r) const;
    /// apply(x) - forcing(y).
    Vector residual(const GridFunction& x, const GridFunction& y) const;

    /// Spectral norm of the operator scaled as d/dt (1/h times the matrix norm),
    /// with node weights W(t_i).
    double scaled_norm() const;
    double scaled_norm(const NormFamily& norms) const;

private:
    void build();

    std::shared_ptr<const CellPropagators> cells_;
    SparseMatrix matrix_;
};

DiscreteOperator assemble_h(const EvolutionFamily& family, const Grid& grid);

Vector stack(const GridFunction& f);
GridFunction unstack(const Grid& grid, NormFamilyPtr norms, const Vector& v);

enum class BoundaryMode { Projected, LeastNorm };

std::string to_string(BoundaryMode mode);
BoundaryMode parse_boundary_mode(const std::string& text);

struct SolverOptions {
    BoundaryMode mode = BoundaryMode::Projected;
    /// Horizon L of the long-window propagators used to split the ends.
    double bootstrap_horizon = 10.0;
    /// Singular values with |ln sigma| / L below this rate are ambiguous.
    double dead_band = 1e-3;
};

struct ClosureDiagnostics {
    int left_rows = 0;   // stable directions excluded at the left end
    int right_rows = 0;  // unstable directions excluded at the right end
    double min_rate_margin = kInfinity;  // min |ln sigma| / L over both ends
    bool ambiguous = false;
    double condition_estimate = 0.0;  // 1-norm estimate of the closed system
    std::string message;
};

/// Factorized bounded-solution solver on a fixed grid (the solution operator
/// G handle). Projected mode closes the system with P(-T_w)x(-T_w) = 0 and
/// Q(T_w)x(T_w) = 0; least-norm mode returns the minimum weighted-l2 solution.
class BoundedSolver {
public:
    BoundedSolver(const EvolutionFamily& family, Grid grid, SolverOptions options = {});
    BoundedSolver(const EvolutionFamily& family, std::shared_ptr<const CellPropagators> cells,
                  SolverOptions options = {});
    ~BoundedSolver();
    BoundedSolver(BoundedSolver&&) noexcept;
    BoundedSolver& operator=(BoundedSolver&&) noexcept;

    const DiscreteOperator& op() const { return op_; }
    const Grid& grid() const { return op_.grid(); }
    const NormFamilyPtr& norms_ptr() const { return norms_; }
    const SolverOptions& options() const { return options_; }
    const ClosureDiagnostics& closure() const { return closure_; }
    /// False when the closure is ambiguous or singular; solve() then throws.
    bool ready() const { return ready_; }

    GridFunction solve(const GridFunction& y) const;
    /// x = G y on stacked node values (y continuous).
    Vector apply(const Vector& y_nodes) const;
    /// G^T on stacked node values.
    Vector apply_transpose(const Vector& x_nodes) const;

private:
    struct Factor;

    NormFamilyPtr norms_;
    DiscreteOperator op_;
    SolverOptions options_;
    ClosureDiagnostics closure_;
    bool ready_ = false;
    Matrix left_rows_;   // acting on W_0 x_0
    Matrix right_rows_;  // acting on W_N x_N
    SparseMatrix scale_;  // least-norm substitution x = S z
    std::unique_ptr<Factor> factor_;
};

struct SolveResult {
    std::optional<GridFunction> x;
    double residual = 0.0;  // mild_residual
    ClosureDiagnostics closure;
    bool inconclusive = false;
};

SolveResult solve_bounded(const EvolutionFamily& family, const GridFunction& y, Exponent p, Exponent q,
                          SolverOptions options = {});

struct KernelWindow {
    double half_width = 0.0;
    double sigma_min = 0.0;
    double threshold = 0.0;  // 1e-6 * scaled ||H||
};

enum class KernelTrend { Trivial, Nontrivial, Inconclusive };

std::string to_string(KernelTrend trend);

struct KernelReport {
    std::vector<KernelWindow> windows;
    KernelTrend trend = KernelTrend::Inconclusive;
    double sigma_min = 0.0;  // on the last (largest) window
    /// Bounded homogeneous orbit on the largest window, normalized to unit
    /// Y1 norm, when the kernel is nontrivial.
    std::optional<GridFunction> witness;
    double witness_residual = 0.0;
    double witness_growth = 0.0;  // max ||x||_t / min ||x||_t along the orbit
};

/// Smallest singular value of the homogeneous map (y = 0, x(-T_w) = x(T_w) = 0)
/// per window, scaled as d/dt in the weighted L2 surrogate. Judged on the two
/// largest windows: sigma levelling off means a trivial kernel; decay at least
/// like T_w^{-1/2} (or a value under the threshold) means a bounded
/// homogeneous solution exists.
KernelReport kernel_check(const EvolutionFamily& family, double h, const std::vector<double>& half_widths,
                          double threshold_factor = 1e-6);

struct GNormEstimate {
    double value = 0.0;
    bool warning = false;
    int probes = 0;
    int power_iterations = 0;
};

/// Lower estimate of ||G|| in the (Y1 <- L^q) norms from probe solves, then
/// refined by power iteration on G^T G in the weighted L2 surrogate.
GNormEstimate estimate_g_norm(const BoundedSolver& solver, Exponent p, Exponent q, int random_probes,
                              std::uint64_t seed, int max_power_iterations = 60);

enum class Verdict { Admissible, NotAdmissible, Inconclusive };

std::string to_string(Verdict verdict);

struct AdmissibilityConfig {
    double half_width = 15.0;
    double h = 0.01;
    std::vector<double> sweep;  // kernel sweep half-widths; defaults to T_w/4, T_w/2, T_w
    SolverOptions solver;
    double residual_tolerance = 1e-6;
    double kernel_factor = 1e-6;
    int random_probes = 8;
    std::uint64_t seed = 0;
};

struct AdmissibilityReport {
    Verdict verdict = Verdict::Inconclusive;
    Exponent p{2.0};
    Exponent q{2.0};
    double half_width = 0.0;
    double h = 0.0;
    double g_norm_estimate = 0.0;
    bool g_norm_warning = false;
    double kernel_sigma_min = 0.0;
    double kernel_threshold = 0.0;
    KernelReport kernel;
    double residual = 0.0;
    double mode_discrepancy = 0.0;  // projected vs least-norm on the probe suite
    ClosureDiagnostics closure;
    double probe_support_margin = 0.0;
    bool reconstruction_available = true;
    std::vector<std::string> notes;
};

/// Throws WindowTooLarge when ln K + |c| 2 T_w exceeds the double range.
void require_window_fits(const EvolutionFamily& family, double half_width);

AdmissibilityReport check_admissibility(const EvolutionFamily& family, Exponent p, Exponent q,
                                        const AdmissibilityConfig& config);

}  // namespace dichotomy
