#pragma once

#include "dichotomy/core.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dichotomy {

enum class NormKind { Constant, ScalarWeighted, DiagonalWeighted, Adapted };

std::string to_string(NormKind kind);

/// Time-dependent family of norms ||.||_t on R^n, sandwiched as
///   ||x|| <= ||x||_t <= C e^{eps |t|} ||x||
/// with the Euclidean base norm. Values are immutable; evaluation is pure
/// and may run concurrently.
///
/// Weighted kinds are Euclidean norms of W(t) x for a diagonal W(t) and
/// expose W(t) through weight(). Adapted families are general (sup-type)
/// norms given by an evaluator; for n = 1 they are still weighted.
class NormFamily {
public:
    using ScalarWeight = std::function<double(double)>;
    using Evaluator = std::function<double(double, const Vector&)>;

    static NormFamily constant(int dimension);
    /// ||x||_t = w(t) ||x||. The declared envelope is not verified here.
    static NormFamily scalar_weighted(int dimension, ScalarWeight w, double envelope_c,
                                      double envelope_eps, std::string label);
    /// w(t) = scale * e^{rate |t|}; envelope (scale, rate).
    static NormFamily exponential_weight(int dimension, double rate, double scale = 1.0);
    /// ||x||_t = ||diag(w_1(t), ..., w_n(t)) x||.
    static NormFamily diagonal_weighted(std::vector<ScalarWeight> weights, double envelope_c,
                                        double envelope_eps, std::string label);
    static NormFamily diagonal_exponential(std::vector<double> rates);
    static NormFamily adapted(int dimension, Evaluator evaluator, double envelope_c,
                              double envelope_eps, std::string label);

    NormKind kind() const { return kind_; }
    int dimension() const { return dimension_; }
    double envelope_c() const { return envelope_c_; }
    double envelope_eps() const { return envelope_eps_; }
    const std::string& label() const { return label_; }

    /// ||x||_t without input validation.
    double operator()(double t, const Vector& x) const;

    /// W(t) with ||x||_t = ||W(t) x||, when the family is weighted.
    std::optional<Matrix> weight(double t) const;
    /// W(t) when available, otherwise diag(||e_j||_t). Used to weight
    /// inner products.
    Matrix weight_surrogate(double t) const;

    /// Same family with a different declared envelope.
    NormFamily with_envelope(double envelope_c, double envelope_eps) const;

private:
    NormFamily() = default;

    NormKind kind_ = NormKind::Constant;
    int dimension_ = 1;
    double envelope_c_ = 1.0;
    double envelope_eps_ = 0.0;
    std::string label_;
    std::vector<ScalarWeight> weights_;  // one (scalar) or n (diagonal)
    Evaluator evaluator_;
};

using NormFamilyPtr = std::shared_ptr<const NormFamily>;

/// ||x||_t with validation: finite components, matching dimension.
double norm_at(const NormFamily& family, double t, const Vector& x);

struct EnvelopeReport {
    double max_lower_violation = 0.0;  // max over samples of ||x|| - ||x||_t (<= 0 when the axiom holds)
    double max_upper_violation = 0.0;  // max of ||x||_t - C e^{eps|t|} ||x|| for the declared (C, eps)
    double fitted_c = 1.0;
    double fitted_eps = 0.0;
    bool holds() const { return max_lower_violation <= 0.0 && max_upper_violation <= 0.0; }
};

/// Checks the envelope on samples and fits the least (C, eps) covering the
/// upper ratios: least squares of log(sup_x ||x||_t / ||x||) on |t|, then C
/// inflated to cover every sample.
EnvelopeReport verify_envelope(const NormFamily& family, std::span<const double> sample_times,
                               std::span<const Vector> sample_vectors);

/// sup_{x != 0} ||M x||_{to_t} / ||x||_{from_tau}. Exact for weighted
/// families (spectral norm of W(t) M W(tau)^{-1}); direction sampling
/// otherwise.
double operator_norm(const Matrix& m, const NormFamily& to, double t, const NormFamily& from,
                     double tau);

/// Same, but only over x in the column span of `domain` (orthonormal basis).
double restricted_operator_norm(const Matrix& m, const Matrix& domain, const NormFamily& to,
                                double t, const NormFamily& from, double tau);

}  // namespace dichotomy
