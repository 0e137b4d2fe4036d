#include "dichotomy/reconstruct.hpp"

#include <doctest.h>

#include <cmath>

using namespace dichotomy;

namespace {

EvolutionFamily saddle()
{
    return EvolutionFamily::diagonal((Vector(2) << -1.0, 1.0).finished());
}

ReconstructConfig config(double half_width)
{
    ReconstructConfig c;
    c.admissibility.half_width = half_width;
    return c;
}

}  // namespace

TEST_SUITE("reconstruct")
{
    TEST_CASE("projection bound constant")
    {
        CHECK(projection_bound(1.0, GrowthBound{1.0, 0.0}) == doctest::Approx(2.0));
        CHECK(projection_bound(1.0, GrowthBound{1.0, 1.0}) == doctest::Approx(8.389056).epsilon(1e-6));
        CHECK(projection_bound(0.5, GrowthBound{2.0, 0.0}) == doctest::Approx(3.0));
    }

    TEST_CASE("doubling time and conservative rates")
    {
        const ConservativeRates r = doubling_time_and_rates(1.0, GrowthBound{1.0, 1.0}, Exponent(2.0), Exponent(2.0));
        CHECK(r.theta == doctest::Approx(1.0));
        CHECK(r.C == doctest::Approx(5.436564).epsilon(1e-6));
        CHECK(r.T == doctest::Approx(10.873127).epsilon(1e-6));
        CHECK(r.lambda == doctest::Approx(std::log(2.0) / 10.873127).epsilon(1e-6));
        CHECK(r.lambda == doctest::Approx(0.063749).epsilon(1e-4));
        CHECK(r.D == doctest::Approx(2.0 * r.C));

        // theta = 1 - 1/2 + 0 = 1/2 squares the doubling time.
        const ConservativeRates h = doubling_time_and_rates(1.0, GrowthBound{1.0, 1.0}, Exponent::infinity(), Exponent(2.0));
        CHECK(h.theta == doctest::Approx(0.5));
        CHECK(h.T == doctest::Approx(10.873127 * 10.873127).epsilon(1e-6));

        CHECK_THROWS_AS(doubling_time_and_rates(1.0, GrowthBound{}, Exponent::infinity(), Exponent(1.0)), ExcludedPair);
    }

    TEST_CASE("projections from test inputs")
    {
        const Grid g = Grid::window(12.0, 0.01);
        {
            const BoundedSolver s(EvolutionFamily::constant_scalar(-1.0), g);
            CHECK(projection_at(s, 0.0)(0, 0) == doctest::Approx(1.0).epsilon(1e-6));
        }
        {
            const BoundedSolver s(EvolutionFamily::constant_scalar(1.0), g);
            CHECK(std::abs(projection_at(s, 0.0)(0, 0)) < 1e-6);
        }
        {
            const BoundedSolver s(saddle(), g);
            const Matrix P = projection_at(s, -2.0);
            const Matrix expected = (Matrix(2, 2) << 1.0, 0.0, 0.0, 0.0).finished();
            CHECK(spectral_norm(P - expected) < 1e-6);
        }
    }

    TEST_CASE("subspaces and forward boundedness")
    {
        const Matrix P = (Matrix(2, 2) << 1.0, 0.0, 0.0, 0.0).finished();
        const SubspacePair pair = subspace_pair(0.0, P);
        CHECK(pair.stable.cols() == 1);
        CHECK(pair.unstable.cols() == 1);
        CHECK(pair.min_angle == doctest::Approx(M_PI / 2));

        const EvolutionFamily f = saddle();
        CHECK(stable_membership(f, 0.0, Vector::Unit(2, 0), 5.0, Exponent(2.0)).member);
        CHECK_FALSE(stable_membership(f, 0.0, Vector::Unit(2, 1), 5.0, Exponent(2.0)).member);
    }

    TEST_CASE("saddle certification recovers the splitting and the rates")
    {
        const ReconstructionReport r = certify_dichotomy(saddle(), Exponent(2.0), Exponent(2.0), config(12.0));
        REQUIRE(r.certificate.has_value());
        CHECK(r.rank == 1);
        CHECK(r.rank_constant);
        CHECK(r.fitted.alpha == doctest::Approx(1.0).epsilon(0.05));
        CHECK(r.fitted.beta == doctest::Approx(1.0).epsilon(0.05));
        CHECK(r.worst_invariance.residual <= 1e-6);
        CHECK(r.projection_bound_holds);
        CHECK(r.growth_lemma_holds);
        const Matrix expected = (Matrix(2, 2) << 1.0, 0.0, 0.0, 0.0).finished();
        for (const Matrix& P : r.certificate->projections) {
            CHECK(spectral_norm(P - expected) < 1e-3);
            CHECK(spectral_norm(P * P - P) < 1e-6);
        }
        const CertificateCheck check = verify_certificate(*r.certificate, {1, 5, 20}, 10);
        CHECK(check.bounds_hold(1e-6));
    }

    TEST_CASE("a stable scalar has a vacuous unstable bundle")
    {
        const ReconstructionReport r = certify_dichotomy(EvolutionFamily::constant_scalar(-1.0), Exponent(2.0), Exponent(2.0), config(10.0));
        REQUIRE(r.certificate.has_value());
        CHECK(r.rank == 1);
        CHECK(r.fitted.alpha == doctest::Approx(1.0).epsilon(0.05));
        CHECK(r.fitted.beta_placeholder);
    }

    TEST_CASE("no certificate without admissibility, none at all for (inf, 1)")
    {
        const EvolutionFamily rot = EvolutionFamily::constant_matrix((Matrix(2, 2) << 0.0, 1.0, -1.0, 0.0).finished());
        const ReconstructionReport r = certify_dichotomy(rot, Exponent(2.0), Exponent(2.0), config(10.0));
        CHECK_FALSE(r.certificate.has_value());
        CHECK(r.admissibility.verdict == Verdict::NotAdmissible);
        CHECK_THROWS_AS(certify_dichotomy(saddle(), Exponent::infinity(), Exponent(1.0), config(10.0)), ExcludedPair);
    }
}
