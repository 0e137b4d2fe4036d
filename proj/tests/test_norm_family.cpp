#include "dichotomy/certificate.hpp"
#include "dichotomy/lyapunov_norms.hpp"
#include "dichotomy/norm_family.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace dichotomy;

namespace {

std::vector<NormFamily> sample_families()
{
    std::vector<NormFamily> out;
    out.push_back(NormFamily::constant(2));
    out.push_back(NormFamily::exponential_weight(2, 0.2, 1.5));
    out.push_back(NormFamily::diagonal_exponential({0.1, 0.3}));
    out.push_back(NormFamily::adapted(
        2, [](double t, const Vector& x) { return std::abs(x(0)) * (1 + std::abs(std::sin(t))) + std::abs(x(1)) + x.norm(); },
        1.0 + std::sqrt(5.0), 0.0, "sup-type"));
    return out;
}

}  // namespace

TEST_SUITE("norm_family")
{
    TEST_CASE("constant family is the Euclidean norm")
    {
        const NormFamily f = NormFamily::constant(3);
        const Vector x = (Vector(3) << 1.0, -2.0, 2.0).finished();
        CHECK(f(7.0, x) == doctest::Approx(3.0));
        CHECK(f.envelope_c() == 1.0);
        CHECK(f.envelope_eps() == 0.0);
    }

    TEST_CASE("exponential weight at t = 1 scales by e^0.2")
    {
        const NormFamily f = NormFamily::exponential_weight(1, 0.2);
        const Vector x = Vector::Constant(1, -2.0);
        CHECK(f(1.0, x) == doctest::Approx(2.0 * 1.221403).epsilon(1e-6));
        CHECK(f(-1.0, x) == doctest::Approx(2.0 * 1.221403).epsilon(1e-6));
        CHECK(f(0.0, x) == doctest::Approx(2.0));
    }

    TEST_CASE("diagonal exponential weights act per coordinate")
    {
        const NormFamily f = NormFamily::diagonal_exponential({0.1, 0.3});
        CHECK(f(-2.0, Vector::Unit(2, 1)) == doctest::Approx(std::exp(0.6)));
        CHECK(f(-2.0, Vector::Unit(2, 0)) == doctest::Approx(std::exp(0.2)));
        const auto w = f.weight(1.0);
        REQUIRE(w.has_value());
        CHECK((*w)(1, 1) == doctest::Approx(std::exp(0.3)));
    }

    TEST_CASE("verify_envelope fits the exponent of an exponential weight")
    {
        const NormFamily f = NormFamily::exponential_weight(2, 0.1);
        std::vector<double> times;
        for (int i = -20; i <= 20; ++i)
            times.push_back(i);
        const std::vector<Vector> vectors{Vector::Unit(2, 0), Vector::Unit(2, 1), Vector::Ones(2)};
        const EnvelopeReport r = verify_envelope(f, times, vectors);
        CHECK(r.holds());
        CHECK(r.fitted_eps == doctest::Approx(0.1).epsilon(1e-6));
        CHECK(r.fitted_c == doctest::Approx(1.0).epsilon(1e-6));
    }

    TEST_CASE("an understated envelope is reported as violated")
    {
        const NormFamily f = NormFamily::exponential_weight(1, 0.1).with_envelope(1.0, 0.05);
        const std::vector<double> times{-10.0, 0.0, 10.0};
        const std::vector<Vector> vectors{Vector::Ones(1)};
        const EnvelopeReport r = verify_envelope(f, times, vectors);
        CHECK_FALSE(r.holds());
        CHECK(r.max_upper_violation == doctest::Approx(std::exp(1.0) - std::exp(0.5)).epsilon(1e-9));
    }

    TEST_CASE("operator norms between weighted norms")
    {
        const NormFamily f = NormFamily::exponential_weight(2, 0.2);
        const Matrix id = Matrix::Identity(2, 2);
        CHECK(operator_norm(id, f, 1.0, f, 0.0) == doctest::Approx(std::exp(0.2)));
        const NormFamily c = NormFamily::constant(2);
        const Matrix m = (Matrix(2, 2) << 3.0, 0.0, 0.0, 1.0).finished();
        CHECK(operator_norm(m, c, 0.0, c, 0.0) == doctest::Approx(3.0));
    }

    TEST_CASE("norm_at validates its input")
    {
        const NormFamily f = NormFamily::constant(2);
        CHECK_THROWS_AS(norm_at(f, 0.0, Vector::Ones(3)), InvalidInput);
        Vector bad = Vector::Ones(2);
        bad(1) = std::nan("");
        CHECK_THROWS_AS(norm_at(f, 0.0, bad), InvalidInput);
        CHECK_THROWS_AS(NormFamily::exponential_weight(1, -1.0), InvalidInput);
    }

    TEST_CASE("property: positivity, homogeneity and triangle inequality")
    {
        std::mt19937_64 rng(11);
        std::normal_distribution<double> g;
        std::uniform_real_distribution<double> u(-10.0, 10.0);
        for (const NormFamily& f : sample_families()) {
            for (int k = 0; k < 200; ++k) {
                const double t = u(rng);
                const Vector x = (Vector(2) << g(rng), g(rng)).finished();
                const Vector y = (Vector(2) << g(rng), g(rng)).finished();
                const double lambda = g(rng) * 3.0;
                const double nx = f(t, x);
                CHECK(nx >= x.norm() * (1 - 1e-12));
                CHECK(nx <= f.envelope_c() * std::exp(f.envelope_eps() * std::abs(t)) * x.norm() * (1 + 1e-12));
                CHECK(f(t, lambda * x) == doctest::Approx(std::abs(lambda) * nx).epsilon(1e-12));
                CHECK(f(t, x + y) <= nx + f(t, y) + 1e-12);
            }
            CHECK(f(0.5, Vector::Zero(2)) == 0.0);
        }
    }

    TEST_CASE("property: adapted norms of a saddle satisfy the axioms and contract the splitting")
    {
        const auto fam = std::make_shared<const EvolutionFamily>(EvolutionFamily::diagonal((Vector(2) << -1.0, 1.0).finished()));
        const Grid g = Grid::window(5.0, 0.1);
        const Matrix P = (Matrix(2, 2) << 1.0, 0.0, 0.0, 0.0).finished();
        const auto cert = make_constant_certificate(fam, g, P, 1.0, 1.0, 1.0);
        LyapunovOptions opt;
        opt.horizon = 10.0;
        opt.ds = 0.05;
        const LyapunovNorms ln = build_lyapunov_norms(*fam, cert, opt);
        CHECK(ln.stabilized);
        CHECK(ln.envelope.holds());
        const NormFamily& f = *ln.norms;
        for (double tau : {-3.0, 0.0, 2.0}) {
            for (double lag : {0.5, 1.0, 3.0}) {
                const Vector x = Vector::Unit(2, 0);
                CHECK(f(tau + lag, fam->propagator(tau + lag, tau) * x) <= std::exp(-0.5 * lag) * f(tau, x) * (1 + 1e-9));
            }
        }
    }
}
