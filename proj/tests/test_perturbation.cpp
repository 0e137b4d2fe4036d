#include "dichotomy/perturbation.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace dichotomy;

namespace {

double exp_abs(double t)
{
    return std::exp(-std::abs(t));
}

PerturbationSpec scalar_spec(double m)
{
    return make_perturbation(m, NormFamily::constant(1), exp_abs, "exp(-|t|)", Matrix::Ones(1, 1));
}

// U(t, tau) of x' = (-1 + M e^{-|t|}) x.
double scalar_u(double m, double t, double tau)
{
    return std::exp(-(t - tau) + m * oracle::simpson(exp_abs, tau, t, 20000));
}

}  // namespace

TEST_SUITE("perturbation")
{
    TEST_CASE("smallness condition")
    {
        CHECK(smallness_condition(scalar_spec(0.1), 1.0, 1.0).lhs == doctest::Approx(0.1));
        CHECK(smallness_condition(scalar_spec(0.1), 1.0, 1.0).satisfied);
        const Smallness big = smallness_condition(scalar_spec(2.0), 1.0, 1.0);
        CHECK(big.lhs == doctest::Approx(2.0));
        CHECK_FALSE(big.satisfied);
    }

    TEST_CASE("perturbed growth bound")
    {
        const GrowthBound up = perturbed_growth_bound(scalar_spec(0.1), GrowthBound{1.0, 1.0}, 1.0);
        CHECK(up.K == doctest::Approx(1.105171).epsilon(1e-6));
        CHECK(up.c == doctest::Approx(1.1));
        const GrowthBound down = perturbed_growth_bound(scalar_spec(0.1), GrowthBound{1.0, -1.0}, 1.0);
        CHECK(down.c == doctest::Approx(-0.9));
    }

    TEST_CASE("norms of the weight")
    {
        const PerturbationSpec s = scalar_spec(1.0);
        const PhiNorm two = phi_lq_norm(s, Exponent(2.0), 15.0);
        CHECK(two.value == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(two.tail_ok);
        CHECK(phi_lq_norm(s, Exponent(1.0), 15.0).value == doctest::Approx(2.0).epsilon(1e-6));
        CHECK(phi_lq_norm(s, Exponent::infinity(), 15.0).value == doctest::Approx(1.0));
        CHECK_FALSE(phi_lq_norm(s, Exponent(1.0), 2.0).tail_ok);
        CHECK(phi_integral(s, -1.0, 2.0) == doctest::Approx(2.0 - std::exp(-1.0) - std::exp(-2.0)).epsilon(1e-6));
    }

    TEST_CASE("perturbation envelope and validation")
    {
        const PerturbationSpec s = scalar_spec(0.3);
        CHECK(s(2.0)(0, 0) == doctest::Approx(0.3 * std::exp(-2.0)));
        CHECK(envelope_violation(s, {-3.0, 0.0, 1.5}) <= 1e-15);
        CHECK_THROWS_AS(make_perturbation(0.1, NormFamily::constant(1), exp_abs, "", Matrix::Constant(1, 1, 2.0)), InvalidInput);
        CHECK_THROWS_AS(make_perturbation(-0.1, NormFamily::constant(1), exp_abs, "", Matrix::Ones(1, 1)), InvalidInput);
        const PerturbationSpec w = make_perturbation(1.0, NormFamily::exponential_weight(1, 0.2, 2.0), exp_abs, "", Matrix::Ones(1, 1));
        CHECK(w.envelope_c == 2.0);
        CHECK(w.eps == 0.2);
        CHECK(w.envelope(1.0) == doctest::Approx(std::exp(-1.2)));
    }

    TEST_CASE("perturbed propagators against the closed form")
    {
        const EvolutionFamily base = EvolutionFamily::constant_scalar(-1.0);
        const PerturbationSpec s = scalar_spec(0.5);
        const double exact = scalar_u(0.5, 1.5, -1.0);
        CHECK(perturbed_propagator(base, s, 1.5, -1.0, PropagatorMethod::Integrate)(0, 0) == doctest::Approx(exact).epsilon(1e-8));
        CHECK(perturbed_propagator(base, s, 1.5, -1.0, PropagatorMethod::Picard)(0, 0) == doctest::Approx(exact).epsilon(1e-6));
        const auto base_ptr = std::make_shared<const EvolutionFamily>(base);
        CHECK(perturbed_family(base_ptr, scalar_spec(0.0)) == base_ptr);
        CHECK(perturbed_family(base_ptr, s)->propagator(1.5, -1.0)(0, 0) == doctest::Approx(exact).epsilon(1e-8));
    }

    TEST_CASE("Picard step control")
    {
        const EvolutionFamily base = EvolutionFamily::constant_scalar(-1.0);
        PicardOptions coarse;
        coarse.step = 1.0;
        coarse.h_min = 0.1;
        PicardOptions half = coarse;
        half.step = 0.5;
        // (d/2) M = 1.5 at d = 1 forces one halving.
        const Matrix a = perturbed_propagator(base, scalar_spec(3.0), 2.0, 0.0, PropagatorMethod::Picard, coarse);
        const Matrix b = perturbed_propagator(base, scalar_spec(3.0), 2.0, 0.0, PropagatorMethod::Picard, half);
        CHECK(a(0, 0) == b(0, 0));
        coarse.h_min = 0.75;
        CHECK_THROWS_AS(perturbed_propagator(base, scalar_spec(3.0), 2.0, 0.0, PropagatorMethod::Picard, coarse), ConvergenceFailure);
        const Matrix fine = perturbed_propagator(base, scalar_spec(3.0), 2.0, 0.0, PropagatorMethod::Picard);
        CHECK(fine(0, 0) == doctest::Approx(scalar_u(3.0, 2.0, 0.0)).epsilon(1e-6));
    }

    TEST_CASE("discrete identity H = L + P")
    {
        const EvolutionFamily base = EvolutionFamily::diagonal((Vector(2) << -1.0, 1.0).finished());
        const PerturbationSpec s = make_perturbation(0.4, base.norms(), exp_abs, "", (Matrix(2, 2) << 0.0, 1.0, 1.0, 0.0).finished());
        const IdentityCheck c = operator_identity(base, s, Grid::window(3.0, 0.01), 1);
        CHECK(c.matrix_residual <= 1e-10);
        CHECK(c.application_residual <= 1e-10);
        CHECK(c.propagator_consistency <= 1e-5);
    }

    TEST_CASE("Gronwall bound on the perturbed propagator")
    {
        const EvolutionFamily base = EvolutionFamily::constant_scalar(-1.0);
        const PerturbationSpec s = scalar_spec(0.2);
        const auto u = perturbed_family(std::make_shared<const EvolutionFamily>(base), s);
        const GrowthBound bound = perturbed_growth_bound(s, GrowthBound{1.0, -1.0}, 1.0);
        const GronwallCheck g = check_gronwall(*u, s, bound, 1.0, {-3.0, 0.0, 1.0}, {0.5, 1.0, 3.0});
        CHECK(g.holds());
        CHECK(g.samples > 0);
    }

    TEST_CASE("robustness sweep on the stable scalar")
    {
        ReconstructConfig cfg;
        cfg.admissibility.half_width = 12.0;
        const SweepReport r = robustness_experiment(EvolutionFamily::constant_scalar(-1.0), scalar_spec(0.0),
                                                    {0.0, 0.1, 0.2}, Exponent(2.0), Exponent(2.0), cfg);
        CHECK(r.phi_q == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(r.h_inverse_norm <= 1.0 + 1e-3);
        CHECK(r.consistent);
        CHECK_FALSE(r.empirical_threshold.has_value());
        REQUIRE(r.rows.size() == 3);
        for (const SweepRow& row : r.rows) {
            CHECK(row.certified);
            CHECK(row.lhs == doctest::Approx(row.magnitude * r.h_inverse_norm * r.phi_q));
            CHECK(row.gronwall_ratio <= 1.0 + 1e-9);
            CHECK(row.alpha_hat <= 1.0 + 0.05);
        }
        CHECK(r.rows[2].alpha_hat < r.rows[0].alpha_hat);
        std::ostringstream csv;
        write_sweep_csv(csv, r);
        CHECK(csv.str().rfind("M,lhs,verdict,alpha_hat,beta_hat,D_hat\n", 0) == 0);
    }
}
