#include "dichotomy/lyapunov_norms.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <ostream>
#include <unordered_map>

namespace dichotomy {

namespace {

double stable_sup(const EvolutionFamily& family, double t, const Vector& px, double rate, double horizon, double ds)
{
    const auto steps = static_cast<std::size_t>(std::ceil(horizon / ds - 1e-9));
    double best = px.norm();
    if (best == 0.0)
        return 0.0;
    if (family.kind() != SystemKind::TimeVarying) {
        for (std::size_t k = 1; k <= steps; ++k) {
            const double s = std::min(horizon, static_cast<double>(k) * ds);
            best = std::max(best, std::exp(rate * s) * (family.propagator(t + s, t) * px).norm());
        }
        return best;
    }
    Vector v = px;
    double prev = 0.0;
    for (std::size_t k = 1; k <= steps; ++k) {
        const double s = std::min(horizon, static_cast<double>(k) * ds);
        v = family.propagator(t + s, t + prev) * v;
        prev = s;
        best = std::max(best, std::exp(rate * s) * v.norm());
    }
    return best;
}

double unstable_sup(const EvolutionFamily& family, const DichotomyCertificate& cert, double t, const Vector& qx,
                    double rate, double horizon, double ds)
{
    double best = qx.norm();
    if (best == 0.0)
        return 0.0;
    const auto steps = static_cast<std::size_t>(std::ceil(horizon / ds - 1e-9));
    Vector v = qx;
    double prev = 0.0;
    Matrix p_prev = cert.projection(t);
    for (std::size_t k = 1; k <= steps; ++k) {
        const double s = std::min(horizon, static_cast<double>(k) * ds);
        const Matrix p_next = cert.projection(t - s);
        v = unstable_backward(family.propagator(t - prev, t - s), p_next, p_prev) * v;
        p_prev = p_next;
        prev = s;
        best = std::max(best, std::exp(rate * s) * v.norm());
    }
    return best;
}

}  // namespace

NormFamily::Evaluator lyapunov_evaluator(EvolutionFamilyPtr family, DichotomyCertificate cert, double rate_margin,
                                         double horizon, double ds)
{
    if (!family)
        throw InvalidInput("adapted norms need an evolution family");
    if (!(rate_margin > 0.0) || rate_margin >= std::min(cert.alpha, cert.beta))
        throw InvalidInput("rate margin must lie strictly inside (0, min(alpha, beta))");
    if (!(horizon > 0.0) || !(ds > 0.0))
        throw InvalidInput("adapted norm horizon and step must be positive");
    const bool scalar = family->dimension() == 1;
    auto eval = [family, cert = std::move(cert), rate_margin, horizon, ds](double t, const Vector& x) {
        const Matrix p = cert.projection(t);
        const Vector px = p * x;
        const Vector qx = x - px;
        double value = 0.0;
        if (!cert.stable_vacuous())
            value += stable_sup(*family, t, px, cert.alpha - rate_margin, horizon, ds);
        if (!cert.unstable_vacuous())
            value += unstable_sup(*family, cert, t, qx, cert.beta - rate_margin, horizon, ds);
        return value;
    };
    if (!scalar)
        return eval;
    // In one dimension ||x||_t = |x| ||1||_t, and every sup above costs
    // horizon/ds propagator calls, so remember ||1||_t per time.
    struct Cache {
        std::mutex lock;
        std::unordered_map<double, double> unit;
    };
    auto cache = std::make_shared<Cache>();
    return [eval = std::move(eval), cache](double t, const Vector& x) {
        const double scale = std::abs(x(0));
        if (scale == 0.0)
            return 0.0;
        {
            std::lock_guard<std::mutex> guard(cache->lock);
            if (auto it = cache->unit.find(t); it != cache->unit.end())
                return scale * it->second;
        }
        const double unit = eval(t, Vector::Ones(1));
        std::lock_guard<std::mutex> guard(cache->lock);
        cache->unit.emplace(t, unit);
        return scale * unit;
    };
}

LyapunovNorms build_lyapunov_norms(const EvolutionFamily& family, const DichotomyCertificate& cert,
                                   const LyapunovOptions& options)
{
    const int n = family.dimension();
    if (cert.dimension() != n)
        throw InvalidInput("certificate dimension does not match the family");
    auto fam = std::make_shared<const EvolutionFamily>(family);
    const auto eval = lyapunov_evaluator(fam, cert, options.rate_margin, options.horizon, options.ds);
    const auto eval_long = lyapunov_evaluator(fam, cert, options.rate_margin, 2.0 * options.horizon, options.ds);

    std::vector<double> times = options.sample_times;
    if (times.empty()) {
        const std::size_t stride = std::max<std::size_t>(1, cert.grid.cells() / 160);
        for (std::size_t i = 0; i < cert.grid.nodes(); i += stride)
            times.push_back(cert.grid.time(i));
    }
    std::vector<Vector> vectors;
    for (int j = 0; j < n; ++j)
        vectors.push_back(Vector::Unit(n, j));
    if (n > 1)
        vectors.push_back(Vector::Ones(n) / std::sqrt(static_cast<double>(n)));

    LyapunovNorms out;
    out.table_times = times;
    out.table = Matrix::Zero(n, static_cast<Eigen::Index>(times.size()));
    for (std::size_t i = 0; i < times.size(); ++i) {
        for (const Vector& v : vectors) {
            const double a = eval(times[i], v);
            const double b = eval_long(times[i], v);
            out.max_relative_change = std::max(out.max_relative_change, std::abs(b - a) / std::max(b, 1e-300));
        }
        for (int j = 0; j < n; ++j)
            out.table(j, static_cast<Eigen::Index>(i)) = eval(times[i], Vector::Unit(n, j));
    }
    out.stabilized = out.max_relative_change < options.stabilization_tolerance;

    const NormFamily raw = NormFamily::adapted(n, eval, 1.0, 0.0, "lyapunov");
    const EnvelopeReport fit = verify_envelope(raw, times, vectors);
    out.norms = std::make_shared<const NormFamily>(raw.with_envelope(fit.fitted_c, fit.fitted_eps));
    // Report against the fitted envelope that the family now declares.
    out.envelope = verify_envelope(*out.norms, times, vectors);
    return out;
}

std::vector<double> uniform_constant_profile(const EvolutionFamily& family, std::span<const double> taus,
                                             double rate, double max_lag, double dlag)
{
    if (!(max_lag > 0.0) || !(dlag > 0.0))
        throw InvalidInput("profile lags must be positive");
    std::vector<double> out;
    out.reserve(taus.size());
    const auto steps = static_cast<std::size_t>(std::ceil(max_lag / dlag - 1e-9));
    for (double tau : taus) {
        double k = 1.0;
        for (std::size_t i = 1; i <= steps; ++i) {
            const double lag = std::min(max_lag, static_cast<double>(i) * dlag);
            k = std::max(k, spectral_norm(family.propagator(tau + lag, tau)) * std::exp(rate * lag));
        }
        out.push_back(k);
    }
    return out;
}

void write_table_csv(std::ostream& out, const LyapunovNorms& norms)
{
    out << "t";
    for (Eigen::Index j = 0; j < norms.table.rows(); ++j)
        out << ",e" << (j + 1);
    out << '\n';
    const auto old = out.precision(17);
    for (std::size_t i = 0; i < norms.table_times.size(); ++i) {
        out << norms.table_times[i];
        for (Eigen::Index j = 0; j < norms.table.rows(); ++j)
            out << ',' << norms.table(j, static_cast<Eigen::Index>(i));
        out << '\n';
    }
    out.precision(old);
}

}  // namespace dichotomy
