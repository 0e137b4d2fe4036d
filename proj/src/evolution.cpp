#include "dichotomy/evolution.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>

namespace dichotomy {

std::string to_string(SystemKind kind)
{
    switch (kind) {
    case SystemKind::ClosedFormScalar: return "closed-form-scalar";
    case SystemKind::Diagonal: return "diagonal";
    case SystemKind::ConstantMatrix: return "constant-matrix";
    case SystemKind::TimeVarying: return "time-varying";
    }
    return "unknown";
}

EvolutionFamily EvolutionFamily::closed_form_scalar(ScalarLogPropagator log_propagator,
                                                    ScalarCoefficient coefficient, std::string label)
{
    if (!log_propagator || !coefficient)
        throw InvalidInput("closed-form scalar family needs a log-propagator and a coefficient");
    EvolutionFamily f;
    f.kind_ = SystemKind::ClosedFormScalar;
    f.dimension_ = 1;
    f.label_ = std::move(label);
    f.log_propagator_ = std::move(log_propagator);
    f.scalar_coefficient_ = std::move(coefficient);
    f.norms_ = std::make_shared<const NormFamily>(NormFamily::constant(1));
    return f;
}

EvolutionFamily EvolutionFamily::constant_scalar(double a)
{
    if (!std::isfinite(a))
        throw InvalidInput("scalar coefficient must be finite");
    return closed_form_scalar([a](double t, double tau) { return a * (t - tau); },
                              [a](double) { return a; }, "scalar");
}

EvolutionFamily EvolutionFamily::nonuniform_scalar(double rate)
{
    const auto g = [](double u) { return u * std::cos(u) - std::sin(u); };
    return closed_form_scalar([rate, g](double t, double tau) { return -rate * (t - tau) + g(t) - g(tau); },
                              [rate](double t) { return -rate - t * std::sin(t); }, "nonuniform-scalar");
}

EvolutionFamily EvolutionFamily::diagonal(Vector rates)
{
    if (rates.size() < 1 || !rates.allFinite())
        throw InvalidInput("diagonal family needs finite rates");
    EvolutionFamily f;
    f.kind_ = SystemKind::Diagonal;
    f.dimension_ = static_cast<int>(rates.size());
    f.label_ = "diagonal";
    f.rates_ = std::move(rates);
    f.norms_ = std::make_shared<const NormFamily>(NormFamily::constant(f.dimension_));
    return f;
}

EvolutionFamily EvolutionFamily::constant_matrix(Matrix a)
{
    if (a.rows() != a.cols() || a.rows() < 1 || !a.allFinite())
        throw InvalidInput("constant coefficient must be a finite square matrix");
    EvolutionFamily f;
    f.kind_ = SystemKind::ConstantMatrix;
    f.dimension_ = static_cast<int>(a.rows());
    f.label_ = "constant-matrix";
    f.constant_ = std::move(a);
    f.norms_ = std::make_shared<const NormFamily>(NormFamily::constant(f.dimension_));
    return f;
}

EvolutionFamily EvolutionFamily::time_varying(int dimension, MatrixCoefficient a, double h_int,
                                              std::string label)
{
    if (dimension < 1 || !a)
        throw InvalidInput("time-varying family needs a positive dimension and a coefficient");
    if (!(h_int > 0.0))
        throw InvalidInput("integrator step must be positive");
    EvolutionFamily f;
    f.kind_ = SystemKind::TimeVarying;
    f.dimension_ = dimension;
    f.h_int_ = h_int;
    f.label_ = std::move(label);
    f.matrix_coefficient_ = std::move(a);
    f.norms_ = std::make_shared<const NormFamily>(NormFamily::constant(dimension));
    return f;
}

EvolutionFamily EvolutionFamily::with_norms(NormFamilyPtr norms) const
{
    if (!norms || norms->dimension() != dimension_)
        throw InvalidInput("norm family dimension does not match the evolution family");
    EvolutionFamily f = *this;
    f.norms_ = std::move(norms);
    return f;
}

EvolutionFamily EvolutionFamily::with_growth(GrowthBound growth) const
{
    EvolutionFamily f = *this;
    f.growth_ = growth;
    return f;
}

Matrix EvolutionFamily::coefficient(double t) const
{
    switch (kind_) {
    case SystemKind::ClosedFormScalar: return Matrix::Constant(1, 1, scalar_coefficient_(t));
    case SystemKind::Diagonal: return rates_.asDiagonal();
    case SystemKind::ConstantMatrix: return constant_;
    case SystemKind::TimeVarying: return matrix_coefficient_(t);
    }
    return Matrix();
}

Matrix EvolutionFamily::propagator(double t, double tau) const
{
    if (!std::isfinite(t) || !std::isfinite(tau))
        throw InvalidInput("propagator: non-finite time");
    if (t < tau)
        throw OrderError("propagator T(t, tau) requires t >= tau");
    if (t == tau)
        return Matrix::Identity(dimension_, dimension_);
    switch (kind_) {
    case SystemKind::ClosedFormScalar:
        return Matrix::Constant(1, 1, std::exp(log_propagator_(t, tau)));
    case SystemKind::Diagonal: {
        Vector d = (rates_ * (t - tau)).array().exp();
        return d.asDiagonal();
    }
    case SystemKind::ConstantMatrix: {
        const Matrix scaled = constant_ * (t - tau);
        return scaled.exp();
    }
    case SystemKind::TimeVarying: return integrate(t, tau);
    }
    return Matrix();
}

Matrix EvolutionFamily::integrate(double t, double tau) const
{
    const double span = t - tau;
    const auto steps = static_cast<long>(std::ceil(span / h_int_ - 1e-9));
    const long count = std::max(1L, steps);
    const double h = span / static_cast<double>(count);
    const int n = dimension_;
    Matrix m = Matrix::Identity(n, n);
    Matrix k1(n, n), k2(n, n), k3(n, n), k4(n, n), tmp(n, n);
    Matrix a0 = matrix_coefficient_(tau);
    for (long k = 0; k < count; ++k) {
        const double s = tau + static_cast<double>(k) * h;
        const Matrix a1 = matrix_coefficient_(s + 0.5 * h);
        Matrix a2 = matrix_coefficient_(s + h);
        k1.noalias() = a0 * m;
        tmp = m + (0.5 * h) * k1;
        k2.noalias() = a1 * tmp;
        tmp = m + (0.5 * h) * k2;
        k3.noalias() = a1 * tmp;
        tmp = m + h * k3;
        k4.noalias() = a2 * tmp;
        m += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        a0 = std::move(a2);
    }
    return m;
}

double cocycle_residual(const EvolutionFamily& family, double tau, double s, double t)
{
    if (!(tau <= s && s <= t))
        throw OrderError("cocycle residual requires tau <= s <= t");
    if (s == tau)
        return 0.0;
    const Matrix composed = family.propagator(t, s) * family.propagator(s, tau);
    return spectral_norm(composed - family.propagator(t, tau));
}

double growth_ratio(const EvolutionFamily& family, double tau, double lag)
{
    if (lag < 0.0)
        throw OrderError("growth ratio needs a nonnegative lag");
    const Matrix m = family.propagator(tau + lag, tau);
    return operator_norm(m, family.norms(), tau + lag, family.norms(), tau);
}

GrowthBound estimate_growth_bound(const EvolutionFamily& family, std::span<const double> taus,
                                  std::span<const double> lags)
{
    if (taus.empty() || lags.empty())
        throw InvalidInput("estimate_growth_bound needs a nonempty sample grid");

    std::vector<double> xs;
    std::vector<double> ys;
    std::vector<std::pair<double, double>> samples;  // (lag, log ratio)
    for (double lag : lags) {
        double worst = -kInfinity;
        for (double tau : taus) {
            const double r = growth_ratio(family, tau, lag);
            if (!(r > 0.0) || !std::isfinite(r))
                throw InvalidInput("estimate_growth_bound: degenerate or overflowing propagator sample");
            worst = std::max(worst, std::log(r));
            samples.emplace_back(lag, std::log(r));
        }
        xs.push_back(lag);
        ys.push_back(worst);
    }

    double c = 0.0;
    const auto m = static_cast<double>(xs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    const double denom = m * sxx - sx * sx;
    if (denom > 1e-12 * std::max(1.0, m * sxx))
        c = (m * sxy - sx * sy) / denom;

    double log_k = 0.0;  // K >= 1 from the lag-0 identity
    for (const auto& [lag, lr] : samples)
        log_k = std::max(log_k, lr - c * lag);
    // Snap round-off so exact families report exact constants.
    if (std::abs(c) < 1e-12)
        c = 0.0;
    if (log_k < 1e-12)
        log_k = 0.0;
    return GrowthBound{std::exp(log_k), c};
}

CellPropagators::CellPropagators(const EvolutionFamily& family, Grid grid)
    : grid_(grid), dimension_(family.dimension())
{
    steps_.reserve(grid_.cells());
    for (std::size_t i = 0; i < grid_.cells(); ++i)
        steps_.push_back(family.propagator(grid_.time(i + 1), grid_.time(i)));
}

Matrix CellPropagators::between(std::size_t i, std::size_t j) const
{
    if (j < i)
        throw OrderError("CellPropagators::between requires j >= i");
    if (j > grid_.cells())
        throw InvalidInput("CellPropagators::between: node out of range");
    Matrix m = Matrix::Identity(dimension_, dimension_);
    for (std::size_t k = i; k < j; ++k)
        m = steps_[k] * m;
    return m;
}

}  // namespace dichotomy
