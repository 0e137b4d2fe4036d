#include "dichotomy/core.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

namespace dichotomy {

Exponent::Exponent(double value) : value_(value)
{
    if (std::isnan(value) || value < 1.0)
        throw InvalidExponent("exponent must lie in [1, inf], got " + std::to_string(value));
}

std::string Exponent::to_string() const
{
    if (is_infinite())
        return "inf";
    std::ostringstream os;
    os << value_;
    return os.str();
}

Exponent parse_exponent(const std::string& text)
{
    std::string lower;
    std::transform(text.begin(), text.end(), std::back_inserter(lower),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "inf" || lower == "infinity")
        return Exponent::infinity();
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(lower, &used);
    } catch (const std::exception&) {
        throw InvalidExponent("cannot parse exponent '" + text + "'");
    }
    if (used != lower.size())
        throw InvalidExponent("cannot parse exponent '" + text + "'");
    return Exponent(v);
}

void require_ordered_pair(const Exponent& p, const Exponent& q)
{
    if (p.value() < q.value())
        throw InvalidPair("exponents must satisfy p >= q (got p=" + p.to_string() + ", q=" +
                          q.to_string() + ")");
}

bool is_excluded_pair(const Exponent& p, const Exponent& q)
{
    return p.is_infinite() && q.value() == 1.0;
}

double spectral_norm(const Matrix& m)
{
    if (m.size() == 0)
        return 0.0;
    if (m.rows() == 1 || m.cols() == 1)
        return m.norm();
    Eigen::JacobiSVD<Matrix> svd(m);
    return svd.singularValues()(0);
}

double min_singular_value(const Matrix& m)
{
    if (m.size() == 0)
        return 0.0;
    Eigen::JacobiSVD<Matrix> svd(m);
    const auto& s = svd.singularValues();
    return s(s.size() - 1);
}

Matrix column_space(const Matrix& m, double relative_threshold)
{
    const Eigen::Index n = m.rows();
    if (m.size() == 0)
        return Matrix(n, 0);
    Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullU);
    const auto& s = svd.singularValues();
    const double top = s.size() > 0 ? s(0) : 0.0;
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (top > 0.0 && s(i) > relative_threshold * top)
            ++rank;
    return svd.matrixU().leftCols(rank);
}

bool all_finite(const Vector& v)
{
    return v.allFinite();
}

bool all_finite(const Matrix& m)
{
    return m.allFinite();
}

}  // namespace dichotomy
