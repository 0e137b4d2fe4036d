#include "dichotomy/norm_family.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace dichotomy {

std::string to_string(NormKind kind)
{
    switch (kind) {
    case NormKind::Constant: return "constant";
    case NormKind::ScalarWeighted: return "scalar-weighted";
    case NormKind::DiagonalWeighted: return "diagonal-weighted";
    case NormKind::Adapted: return "adapted";
    }
    return "unknown";
}

NormFamily NormFamily::constant(int dimension)
{
    if (dimension < 1)
        throw InvalidInput("norm family dimension must be positive");
    NormFamily f;
    f.kind_ = NormKind::Constant;
    f.dimension_ = dimension;
    f.label_ = "constant";
    return f;
}

NormFamily NormFamily::scalar_weighted(int dimension, ScalarWeight w, double envelope_c,
                                       double envelope_eps, std::string label)
{
    if (dimension < 1)
        throw InvalidInput("norm family dimension must be positive");
    if (!w)
        throw InvalidInput("scalar weight function is empty");
    NormFamily f;
    f.kind_ = NormKind::ScalarWeighted;
    f.dimension_ = dimension;
    f.envelope_c_ = envelope_c;
    f.envelope_eps_ = envelope_eps;
    f.label_ = std::move(label);
    f.weights_.push_back(std::move(w));
    return f;
}

NormFamily NormFamily::exponential_weight(int dimension, double rate, double scale)
{
    if (!(rate >= 0.0) || !(scale > 0.0))
        throw InvalidInput("exponential weight needs rate >= 0 and scale > 0");
    return scalar_weighted(
        dimension, [rate, scale](double t) { return scale * std::exp(rate * std::abs(t)); }, scale, rate,
        "exp-weight");
}

NormFamily NormFamily::diagonal_weighted(std::vector<ScalarWeight> weights, double envelope_c,
                                         double envelope_eps, std::string label)
{
    if (weights.empty())
        throw InvalidInput("diagonal weights must be nonempty");
    for (const auto& w : weights)
        if (!w)
            throw InvalidInput("diagonal weight function is empty");
    NormFamily f;
    f.kind_ = NormKind::DiagonalWeighted;
    f.dimension_ = static_cast<int>(weights.size());
    f.envelope_c_ = envelope_c;
    f.envelope_eps_ = envelope_eps;
    f.label_ = std::move(label);
    f.weights_ = std::move(weights);
    return f;
}

NormFamily NormFamily::diagonal_exponential(std::vector<double> rates)
{
    std::vector<ScalarWeight> ws;
    double eps = 0.0;
    for (double r : rates) {
        if (!(r >= 0.0))
            throw InvalidInput("diagonal exponential weight needs rates >= 0");
        eps = std::max(eps, r);
        ws.emplace_back([r](double t) { return std::exp(r * std::abs(t)); });
    }
    return diagonal_weighted(std::move(ws), 1.0, eps, "diag-exp-weight");
}

NormFamily NormFamily::adapted(int dimension, Evaluator evaluator, double envelope_c, double envelope_eps,
                               std::string label)
{
    if (dimension < 1)
        throw InvalidInput("norm family dimension must be positive");
    if (!evaluator)
        throw InvalidInput("adapted norm evaluator is empty");
    NormFamily f;
    f.kind_ = NormKind::Adapted;
    f.dimension_ = dimension;
    f.envelope_c_ = envelope_c;
    f.envelope_eps_ = envelope_eps;
    f.label_ = std::move(label);
    f.evaluator_ = std::move(evaluator);
    return f;
}

double NormFamily::operator()(double t, const Vector& x) const
{
    switch (kind_) {
    case NormKind::Constant: return x.norm();
    case NormKind::ScalarWeighted: return weights_.front()(t) * x.norm();
    case NormKind::DiagonalWeighted: {
        double s = 0.0;
        for (int j = 0; j < dimension_; ++j) {
            const double v = weights_[static_cast<std::size_t>(j)](t) * x(j);
            s += v * v;
        }
        return std::sqrt(s);
    }
    case NormKind::Adapted: return evaluator_(t, x);
    }
    return x.norm();
}

std::optional<Matrix> NormFamily::weight(double t) const
{
    switch (kind_) {
    case NormKind::Constant: return Matrix::Identity(dimension_, dimension_);
    case NormKind::ScalarWeighted:
        return Matrix(weights_.front()(t) * Matrix::Identity(dimension_, dimension_));
    case NormKind::DiagonalWeighted: {
        Matrix w = Matrix::Zero(dimension_, dimension_);
        for (int j = 0; j < dimension_; ++j)
            w(j, j) = weights_[static_cast<std::size_t>(j)](t);
        return w;
    }
    case NormKind::Adapted:
        if (dimension_ == 1)
            return Matrix::Constant(1, 1, evaluator_(t, Vector::Ones(1)));
        return std::nullopt;
    }
    return std::nullopt;
}

Matrix NormFamily::weight_surrogate(double t) const
{
    if (auto w = weight(t))
        return *w;
    Matrix w = Matrix::Zero(dimension_, dimension_);
    for (int j = 0; j < dimension_; ++j)
        w(j, j) = (*this)(t, Vector::Unit(dimension_, j));
    return w;
}

NormFamily NormFamily::with_envelope(double envelope_c, double envelope_eps) const
{
    NormFamily f = *this;
    f.envelope_c_ = envelope_c;
    f.envelope_eps_ = envelope_eps;
    return f;
}

double norm_at(const NormFamily& family, double t, const Vector& x)
{
    if (x.size() != family.dimension())
        throw InvalidInput("vector dimension does not match the norm family");
    if (!x.allFinite() || !std::isfinite(t))
        throw InvalidInput("norm_at: non-finite input");
    return family(t, x);
}

EnvelopeReport verify_envelope(const NormFamily& family, std::span<const double> sample_times,
                               std::span<const Vector> sample_vectors)
{
    if (sample_times.empty() || sample_vectors.empty())
        throw InvalidInput("verify_envelope needs nonempty samples");
    for (const auto& x : sample_vectors) {
        if (x.size() != family.dimension() || !x.allFinite())
            throw InvalidInput("verify_envelope: sample vector has wrong dimension or is non-finite");
        if (x.norm() == 0.0)
            throw InvalidInput("verify_envelope: sample vectors must be nonzero");
    }

    EnvelopeReport report;
    report.max_lower_violation = -kInfinity;
    report.max_upper_violation = -kInfinity;
    std::vector<double> abs_t;
    std::vector<double> log_ratio;
    abs_t.reserve(sample_times.size());
    log_ratio.reserve(sample_times.size());

    for (double t : sample_times) {
        double sup_ratio = 0.0;
        const double declared = family.envelope_c() * std::exp(family.envelope_eps() * std::abs(t));
        for (const auto& x : sample_vectors) {
            const double base = x.norm();
            const double nt = family(t, x);
            report.max_lower_violation = std::max(report.max_lower_violation, base - nt);
            report.max_upper_violation = std::max(report.max_upper_violation, nt - declared * base);
            sup_ratio = std::max(sup_ratio, nt / base);
        }
        abs_t.push_back(std::abs(t));
        log_ratio.push_back(std::log(sup_ratio));
    }

    // Least squares for log r = log C + eps |t|.
    const auto m = static_cast<double>(abs_t.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < abs_t.size(); ++i) {
        sx += abs_t[i];
        sy += log_ratio[i];
        sxx += abs_t[i] * abs_t[i];
        sxy += abs_t[i] * log_ratio[i];
    }
    const double denom = m * sxx - sx * sx;
    double eps = 0.0;
    if (denom > 1e-12 * std::max(1.0, m * sxx))
        eps = (m * sxy - sx * sy) / denom;
    eps = std::max(eps, 0.0);
    double log_c = -kInfinity;
    for (std::size_t i = 0; i < abs_t.size(); ++i)
        log_c = std::max(log_c, log_ratio[i] - eps * abs_t[i]);
    report.fitted_eps = eps;
    report.fitted_c = std::max(1.0, std::exp(log_c));
    return report;
}

namespace {

// Deterministic direction set for sampled operator norms.
std::vector<Vector> sample_directions(int k)
{
    std::vector<Vector> dirs;
    if (k == 1) {
        dirs.push_back(Vector::Ones(1));
        return dirs;
    }
    if (k == 2) {
        constexpr int count = 720;
        for (int i = 0; i < count; ++i) {
            const double a = std::numbers::pi * static_cast<double>(i) / count;
            Vector v(2);
            v << std::cos(a), std::sin(a);
            dirs.push_back(v);
        }
        return dirs;
    }
    for (int j = 0; j < k; ++j)
        dirs.push_back(Vector::Unit(k, j));
    std::mt19937_64 rng(0x5eedULL);
    std::normal_distribution<double> normal;
    for (int i = 0; i < 4096; ++i) {
        Vector v(k);
        for (int j = 0; j < k; ++j)
            v(j) = normal(rng);
        dirs.push_back(v.normalized());
    }
    return dirs;
}

double sampled_ratio(const Matrix& m, const Matrix& domain, const NormFamily& to, double t,
                     const NormFamily& from, double tau)
{
    const int k = static_cast<int>(domain.cols());
    const auto dirs = sample_directions(k);
    double best = 0.0;
    Vector best_c = dirs.front();
    for (const auto& c : dirs) {
        const Vector x = domain * c;
        const double den = from(tau, x);
        if (den <= 0.0)
            continue;
        const double r = to(t, m * x) / den;
        if (r > best) {
            best = r;
            best_c = c;
        }
    }
    if (k == 2) {
        // Local refinement of the best angle.
        double a0 = std::atan2(best_c(1), best_c(0));
        double width = std::numbers::pi / 720.0;
        for (int it = 0; it < 30; ++it) {
            for (double a : {a0 - width, a0 + width}) {
                Vector c(2);
                c << std::cos(a), std::sin(a);
                const Vector x = domain * c;
                const double den = from(tau, x);
                if (den <= 0.0)
                    continue;
                const double r = to(t, m * x) / den;
                if (r > best) {
                    best = r;
                    a0 = a;
                }
            }
            width *= 0.5;
        }
    }
    return best;
}

}  // namespace

double restricted_operator_norm(const Matrix& m, const Matrix& domain, const NormFamily& to, double t,
                                const NormFamily& from, double tau)
{
    if (domain.cols() == 0)
        return 0.0;
    const auto wt = to.weight(t);
    const auto wtau = from.weight(tau);
    if (wt && wtau) {
        // x = B c, ||W_tau B c|| = ||R c|| with W_tau B = Q R.
        const Matrix wb = *wtau * domain;
        Eigen::HouseholderQR<Matrix> qr(wb);
        const Matrix r = qr.matrixQR().topRows(domain.cols()).triangularView<Eigen::Upper>();
        const Matrix image = *wt * m * domain;
        const Matrix scaled =
            r.transpose().triangularView<Eigen::Lower>().solve(image.transpose()).transpose();
        return spectral_norm(scaled);
    }
    return sampled_ratio(m, domain, to, t, from, tau);
}

double operator_norm(const Matrix& m, const NormFamily& to, double t, const NormFamily& from, double tau)
{
    const auto wt = to.weight(t);
    const auto wtau = from.weight(tau);
    if (wt && wtau) {
        const Matrix scaled = *wt * m * wtau->inverse();
        return spectral_norm(scaled);
    }
    return sampled_ratio(m, Matrix::Identity(m.cols(), m.cols()), to, t, from, tau);
}

}  // namespace dichotomy
