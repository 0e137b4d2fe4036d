#include "dichotomy/admissibility.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace dichotomy;

namespace {

GridFunction pulse(const Grid& g, NormFamilyPtr norms, Vector direction)
{
    return GridFunction::sample_sided(g, norms, [direction](double t, Side s) { return Vector(direction * indicator(0.0, 1.0, t, s)); });
}

EvolutionFamily saddle()
{
    return EvolutionFamily::diagonal((Vector(2) << -1.0, 1.0).finished());
}

EvolutionFamily rotation()
{
    return EvolutionFamily::constant_matrix((Matrix(2, 2) << 0.0, 1.0, -1.0, 0.0).finished());
}

}  // namespace

TEST_SUITE("admissibility")
{
    TEST_CASE("one-cell assembly")
    {
        const EvolutionFamily f = EvolutionFamily::constant_scalar(-1.0);
        const Grid g(0.0, 0.5, 1);
        const DiscreteOperator op(f, g);
        REQUIRE(op.rows() == 1);
        REQUIRE(op.unknowns() == 2);
        const Matrix dense(op.matrix());
        CHECK(dense(0, 0) == doctest::Approx(-std::exp(-0.5)));
        CHECK(dense(0, 1) == doctest::Approx(1.0));
        const GridFunction y = GridFunction::sample(g, f.norms_ptr(), [](double) { return Vector::Ones(1); });
        CHECK(op.forcing(y)(0) == doctest::Approx(0.25 * (std::exp(-0.5) + 1.0)));
    }

    TEST_CASE("adjoints agree with the matrix transpose")
    {
        const EvolutionFamily f = saddle();
        const DiscreteOperator op(f, Grid::window(1.0, 0.1));
        std::mt19937_64 rng(5);
        std::normal_distribution<double> n;
        Vector x(op.unknowns()), r(op.rows());
        for (auto& v : x)
            v = n(rng);
        for (auto& v : r)
            v = n(rng);
        CHECK(op.apply(x).dot(r) == doctest::Approx(x.dot(op.apply_adjoint(r))));
        CHECK((op.apply(x) - op.matrix() * x).norm() < 1e-12);
    }

    TEST_CASE("bounded solve of the stable scalar in both boundary modes")
    {
        const EvolutionFamily f = EvolutionFamily::constant_scalar(-1.0);
        const Grid g = Grid::window(15.0, 0.01);
        const GridFunction y = pulse(g, f.norms_ptr(), Vector::Ones(1));
        for (BoundaryMode mode : {BoundaryMode::Projected, BoundaryMode::LeastNorm}) {
            SolverOptions opt;
            opt.mode = mode;
            const SolveResult r = solve_bounded(f, y, Exponent(2.0), Exponent(2.0), opt);
            REQUIRE(r.x.has_value());
            CHECK(r.residual <= 1e-6);
            CHECK(r.x->at(*g.node_index(1.0))(0) == doctest::Approx(0.632121).epsilon(1e-5));
            CHECK(r.x->at(*g.node_index(2.0))(0) == doctest::Approx(0.232544).epsilon(1e-5));
            for (std::size_t i = 0; i < g.nodes(); i += 53)
                CHECK(r.x->at(i)(0) == doctest::Approx(oracle::stable_pulse(g.time(i))).epsilon(1e-4));
        }
    }

    TEST_CASE("saddle closure excludes one direction at each end")
    {
        const BoundedSolver s(saddle(), Grid::window(10.0, 0.01));
        CHECK(s.ready());
        CHECK(s.closure().left_rows == 1);
        CHECK(s.closure().right_rows == 1);
        CHECK_FALSE(s.closure().ambiguous);
        const GridFunction y = pulse(s.grid(), s.norms_ptr(), Vector::Unit(2, 1));
        const GridFunction x = s.solve(y);
        CHECK(x.at(*s.grid().node_index(0.0))(1) == doctest::Approx(-0.632121).epsilon(1e-5));
    }

    TEST_CASE("rotation has no exponential splitting at the ends")
    {
        const BoundedSolver s(rotation(), Grid::window(10.0, 0.01));
        CHECK_FALSE(s.ready());
        CHECK(s.closure().ambiguous);
        CHECK_THROWS_AS(s.solve(GridFunction::zeros(s.grid(), s.norms_ptr())), Error);
    }

    TEST_CASE("kernel check separates trivial and nontrivial kernels")
    {
        const std::vector<double> sweep{5.0, 10.0, 20.0};
        const KernelReport stable = kernel_check(saddle(), 0.01, sweep);
        CHECK(stable.trend == KernelTrend::Trivial);
        CHECK_FALSE(stable.witness.has_value());

        const KernelReport zero = kernel_check(EvolutionFamily::constant_scalar(0.0), 0.01, sweep);
        CHECK(zero.trend == KernelTrend::Nontrivial);
        REQUIRE(zero.witness.has_value());
        CHECK(zero.witness_residual < 1e-9);
        CHECK(zero.witness_growth == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(zero.windows[0].sigma_min > zero.windows[1].sigma_min);
        CHECK(zero.windows[1].sigma_min > zero.windows[2].sigma_min);
        // Lowest mode of the Dirichlet problem for d/dt: pi / (2 T_w).
        CHECK(zero.windows[0].sigma_min == doctest::Approx(M_PI / 10.0).epsilon(1e-3));

        const KernelReport rot = kernel_check(rotation(), 0.01, sweep);
        CHECK(rot.trend == KernelTrend::Nontrivial);
        REQUIRE(rot.witness.has_value());
        CHECK(rot.witness_growth == doctest::Approx(1.0).epsilon(1e-6));
    }

    TEST_CASE("G norm of the stable scalar is one")
    {
        const BoundedSolver s(EvolutionFamily::constant_scalar(-1.0), Grid::window(15.0, 0.01));
        const GNormEstimate inf = estimate_g_norm(s, Exponent::infinity(), Exponent::infinity(), 4, 1);
        CHECK(inf.value == doctest::Approx(1.0).epsilon(1e-3));
        const GNormEstimate two = estimate_g_norm(s, Exponent(2.0), Exponent(2.0), 4, 1);
        CHECK(two.value <= 1.0 + 1e-3);
        CHECK(two.value >= 0.95);
    }

    TEST_CASE("verdicts")
    {
        AdmissibilityConfig cfg;
        cfg.half_width = 10.0;
        const AdmissibilityReport ok = check_admissibility(saddle(), Exponent(2.0), Exponent(2.0), cfg);
        CHECK(ok.verdict == Verdict::Admissible);
        CHECK(ok.residual <= 1e-6);
        CHECK(ok.mode_discrepancy < 1e-3);
        CHECK(ok.reconstruction_available);

        const AdmissibilityReport excluded = check_admissibility(saddle(), Exponent::infinity(), Exponent(1.0), cfg);
        CHECK(excluded.verdict == Verdict::Admissible);
        CHECK_FALSE(excluded.reconstruction_available);

        const AdmissibilityReport rot = check_admissibility(rotation(), Exponent(2.0), Exponent(2.0), cfg);
        CHECK(rot.verdict == Verdict::NotAdmissible);
        CHECK(rot.kernel.witness.has_value());

        CHECK_THROWS_AS(check_admissibility(saddle(), Exponent(1.0), Exponent(2.0), cfg), InvalidPair);
    }

    TEST_CASE("windows that overflow are refused")
    {
        CHECK_THROWS_AS(require_window_fits(EvolutionFamily::constant_scalar(-50.0), 15.0), WindowTooLarge);
        CHECK_NOTHROW(require_window_fits(EvolutionFamily::constant_scalar(-1.0), 15.0));
        CHECK_THROWS_AS(parse_boundary_mode("periodic"), InvalidInput);
        CHECK(parse_boundary_mode("least-norm") == BoundaryMode::LeastNorm);
    }

    TEST_CASE("property: the solver is linear and its transpose is the adjoint")
    {
        const BoundedSolver s(saddle(), Grid::window(6.0, 0.02));
        std::mt19937_64 rng(9);
        std::normal_distribution<double> n;
        const Eigen::Index size = static_cast<Eigen::Index>(2 * s.grid().nodes());
        for (int k = 0; k < 5; ++k) {
            Vector a(size), b(size);
            for (auto& v : a)
                v = n(rng);
            for (auto& v : b)
                v = n(rng);
            const double la = n(rng), lb = n(rng);
            const Vector lhs = s.apply(la * a + lb * b);
            const Vector rhs = la * s.apply(a) + lb * s.apply(b);
            CHECK((lhs - rhs).norm() <= 1e-9 * std::max(1.0, rhs.norm()));
            CHECK(s.apply(a).dot(b) == doctest::Approx(a.dot(s.apply_transpose(b))).epsilon(1e-9));
        }
    }
}
