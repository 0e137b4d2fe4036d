#pragma once

#include <Eigen/Dense>

#include <limits>
#include <stdexcept>
#include <string>

namespace dichotomy {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

// Error hierarchy. Every failure the library reports is one of these.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
public:
    using Error::Error;
};

// Forward propagators only: T(t, tau) requires t >= tau.
class OrderError : public Error {
public:
    using Error::Error;
};

class InvalidExponent : public Error {
public:
    using Error::Error;
};

// (p, q) violates p >= q.
class InvalidPair : public Error {
public:
    using Error::Error;
};

// (p, q) = (inf, 1): the converse construction is unavailable.
class ExcludedPair : public Error {
public:
    using Error::Error;
};

class SingularBundle : public Error {
public:
    using Error::Error;
};

class WindowTooLarge : public Error {
public:
    using Error::Error;
};

class CertificationFailure : public Error {
public:
    using Error::Error;
};

class ConvergenceFailure : public Error {
public:
    using Error::Error;
};

/// Integrability exponent p in [1, inf].
class Exponent {
public:
    explicit Exponent(double value);

    static Exponent infinity() { return Exponent(kInfinity); }

    double value() const { return value_; }
    bool is_infinite() const { return value_ == kInfinity; }
    /// 1/p, with 1/inf = 0.
    double reciprocal() const { return is_infinite() ? 0.0 : 1.0 / value_; }

    std::string to_string() const;

    friend bool operator==(const Exponent&, const Exponent&) = default;
    friend auto operator<=>(const Exponent& a, const Exponent& b) { return a.value_ <=> b.value_; }

private:
    double value_;
};

/// Parses "inf", "infinity" or a decimal number.
Exponent parse_exponent(const std::string& text);

/// Throws InvalidPair unless p >= q.
void require_ordered_pair(const Exponent& p, const Exponent& q);

/// (p, q) = (inf, 1).
bool is_excluded_pair(const Exponent& p, const Exponent& q);

// Spectral-norm helpers (singular values via Jacobi SVD).
double spectral_norm(const Matrix& m);
double min_singular_value(const Matrix& m);

/// Orthonormal basis of the column space, numerical rank decided with a
/// relative singular value threshold.
Matrix column_space(const Matrix& m, double relative_threshold);

bool all_finite(const Vector& v);
bool all_finite(const Matrix& m);

}  // namespace dichotomy
