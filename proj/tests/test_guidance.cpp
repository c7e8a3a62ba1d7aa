#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cflow/guidance.hpp"

#include <cmath>
#include <random>

using namespace cflow;

namespace {

GuidanceProblem problem(const Vec& rho, const Mat& eta, double p_delta = 1.0)
{
    GuidanceProblem p;
    p.rho = rho;
    p.eta = eta;
    p.p_u = Vec::Ones(eta.cols());
    p.p_delta = Vec::Constant(rho.size(), p_delta);
    return p;
}

GuidanceProblem random_problem(std::mt19937_64& rng, Index rows, Index d, double rho_shift = 0.0)
{
    std::normal_distribution<double> n;
    std::uniform_real_distribution<double> w(0.5, 5.0);
    GuidanceProblem p;
    p.rho = Vec::NullaryExpr(rows, [&] { return n(rng) + rho_shift; });
    p.eta = Mat::NullaryExpr(rows, d, [&] { return n(rng); });
    p.p_u = Vec::NullaryExpr(d, [&] { return w(rng); });
    p.p_delta = Vec::NullaryExpr(rows, [&] { return w(rng); });
    return p;
}

double qp_objective(const GuidanceProblem& p, const Vec& u)
{
    const Vec delta = (p.rho + p.eta * u).cwiseMax(0.0);
    return u.dot(p.p_u.cwiseProduct(u)) + delta.dot(p.p_delta.cwiseProduct(delta));
}

// Brute-force minimizer over a grid, refined three times around the best point.
Vec grid_minimizer(const GuidanceProblem& p, double half = 10.0)
{
    const Index d = p.dim();
    Vec centre = Vec::Zero(d);
    double step = half / 20.0;
    for (int pass = 0; pass < 4; ++pass) {
        Vec best = centre;
        double best_f = qp_objective(p, centre);
        const int n = 41;
        Index total = 1;
        for (Index i = 0; i < d; ++i)
            total *= n;
        for (Index idx = 0; idx < total; ++idx) {
            Vec u = centre;
            Index r = idx;
            for (Index i = 0; i < d; ++i) {
                u(i) += (double(r % n) - 20.0) * step;
                r /= n;
            }
            const double f = qp_objective(p, u);
            if (f < best_f) {
                best_f = f;
                best = u;
            }
        }
        centre = best;
        step /= 10.0;
    }
    return centre;
}

} // namespace

TEST_CASE("class-K gain")
{
    ClassKGain g;
    CHECK(g(0.3, 0.0) == 0.0);
    CHECK(g(0.3, 1.0) < g(0.3, 2.0));
    CHECK(g.phi(0.2) < g.phi(0.6));
    // Clamped at the flow clamp time.
    CHECK(g.phi(1.0) == g.phi(1.0 - g.clamp_eps));
    g.step_cap = 1.0;
    CHECK(0.01 * g.c_gain * g.phi_effective(0.999, 0.01) <= 1.0 + 1e-12);
}

TEST_CASE("assemble rows")
{
    const ClassKGain gain;
    ConstraintRow r;
    r.residual = 0.4;
    r.gradient = Vec::Zero(2);
    r.reference = {0.4, 0.0};
    GuidanceProblem p = assemble({r}, gain, 0.5, Vec::Zero(2), Vec::Ones(2), Vec::Ones(1));
    CHECK(p.rows() == 1);
    CHECK(p.rho(0) == 0.0);

    // eta = [1, 0], v = [3, 0], gamma term 1, reference derivative -0.5.
    ConstraintRow q;
    q.gradient = Vec2(1.0, 0.0);
    const double phi = gain.phi(0.5);
    q.residual = 0.0;
    q.reference = {1.0 / (gain.c_gain * phi), -0.5};
    p = assemble({q}, gain, 0.5, Vec2(3.0, 0.0), Vec::Ones(2), Vec::Ones(1));
    CHECK(p.rho(0) == doctest::Approx(2.5));

    ConstraintRow bad;
    bad.gradient = Vec::Zero(3);
    CHECK_THROWS_AS(assemble({bad}, gain, 0.5, Vec::Zero(2), Vec::Ones(2), Vec::Ones(1)), Error);
}

TEST_CASE("closed form examples")
{
    Mat eta(1, 2);
    eta << 1.0, 0.0;
    GuidanceSolution s = solve_closed_form(problem(Vec::Constant(1, -1.0), eta));
    CHECK(s.u.norm() == 0.0);
    CHECK(s.delta.norm() == 0.0);

    s = solve_closed_form(problem(Vec::Constant(1, 1.0), eta));
    CHECK(s.u(0) == doctest::Approx(-0.5));
    CHECK(s.u(1) == doctest::Approx(0.0));
    CHECK(s.delta(0) == doctest::Approx(0.5));

    s = solve_closed_form(problem(Vec::Constant(1, 1.0), eta, 100.0));
    CHECK(s.u(0) == doctest::Approx(-100.0 / 101.0));
    CHECK(s.delta(0) == doctest::Approx(1.0 / 101.0));
}

TEST_CASE("closed form matches grid search")
{
    std::mt19937_64 rng(21);
    for (int i = 0; i < 10; ++i) {
        const GuidanceProblem p = random_problem(rng, 1, 2, 3.0);
        const Vec oracle = grid_minimizer(p);
        CHECK((solve_closed_form(p).u - oracle).norm() < 1e-3);
    }
}

TEST_CASE("closed form satisfies KKT")
{
    std::mt19937_64 rng(1);
    for (int i = 0; i < 1000; ++i) {
        const GuidanceProblem p = random_problem(rng, 3, 5, 10.0);
        REQUIRE((p.rho.array() > 0.0).all());
        const GuidanceSolution s = solve_closed_form(p);
        CHECK(kkt_residual(p, s, QpForm::SlackEquality) <= 1e-8);
        CHECK((p.rho + p.eta * s.u - s.delta).cwiseAbs().maxCoeff() <= 1e-9);
    }
}

TEST_CASE("kkt residual detects perturbation")
{
    std::mt19937_64 rng(2);
    const GuidanceProblem p = random_problem(rng, 2, 3, 10.0);
    GuidanceSolution s = solve_closed_form(p);
    CHECK(kkt_residual(p, s, QpForm::SlackEquality) <= 1e-9);
    s.u(0) += 1e-3;
    CHECK(kkt_residual(p, s, QpForm::SlackEquality) >= 1e-4);

    GuidanceProblem empty;
    empty.eta = Mat(0, 2);
    empty.p_u = Vec::Ones(2);
    CHECK(kkt_residual(empty, GuidanceSolution{Vec::Zero(2), Vec(), false, false}, QpForm::Inequality) == 0.0);
}

TEST_CASE("active set small cases")
{
    Mat eta(2, 1);
    eta << 1.0, -1.0;
    const GuidanceSolution s = solve_active_set(problem(Vec::Constant(2, 1.0), eta));
    CHECK(std::abs(s.u(0)) < 1e-12);
    CHECK(s.delta(0) == doctest::Approx(1.0));
    CHECK(s.delta(1) == doctest::Approx(1.0));

    const GuidanceSolution z = solve_active_set(problem(Vec::Constant(2, -1.0), eta));
    CHECK(z.u.norm() == 0.0);
    CHECK(!z.active);
}

TEST_CASE("active set matches closed form on one positive row")
{
    std::mt19937_64 rng(3);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const GuidanceProblem p = random_problem(rng, 1, 3, 4.0);
        if (p.rho(0) <= 0.0)
            continue;
        worst = std::max(worst, (solve_active_set(p).u - solve_closed_form(p).u).cwiseAbs().maxCoeff());
    }
    CHECK(worst <= 1e-8);
}

TEST_CASE("active set matches grid oracle")
{
    std::mt19937_64 rng(4);
    for (int i = 0; i < 20; ++i) {
        const Index d = 1 + i % 3, rows = 1 + (i / 3) % 3;
        const GuidanceProblem p = random_problem(rng, rows, d);
        const Vec oracle = grid_minimizer(p);
        CHECK((solve_active_set(p).u - oracle).cwiseAbs().maxCoeff() < 1e-3);
    }
}

TEST_CASE("many rows take the Newton path")
{
    std::mt19937_64 rng(5);
    for (int i = 0; i < 50; ++i) {
        const GuidanceProblem p = random_problem(rng, 40, 20);
        const GuidanceSolution s = solve_active_set(p);
        CHECK(kkt_residual(p, s, QpForm::Inequality) <= 1e-8 * (1.0 + p.rho.cwiseAbs().maxCoeff()));
    }
}

TEST_CASE("Newton path with badly scaled rows")
{
    // Large gradients, near-parallel row pairs and heavy slack weights.
    std::mt19937_64 rng(6);
    std::normal_distribution<double> n;
    GuidanceProblem p = random_problem(rng, 60, 120);
    for (Index j = 0; j < 30; ++j) {
        p.eta.row(2 * j + 1) = -p.eta.row(2 * j) * (1.0 + 1e-6 * n(rng));
        p.eta.row(2 * j) *= 1e5;
        p.rho(2 * j) *= 1e6;
    }
    p.p_delta.setConstant(1e4);
    const GuidanceSolution s = solve_active_set(p);
    CHECK(s.u.allFinite());
    CHECK(qp_objective(p, s.u) <= qp_objective(p, Vec::Zero(p.dim())));
}

TEST_CASE("slack weight monotonicity")
{
    std::mt19937_64 rng(7);
    for (int i = 0; i < 100; ++i) {
        GuidanceProblem p = random_problem(rng, 1, 3, 3.0);
        double prev_delta = INFINITY, prev_u = 0.0;
        for (double w : {0.1, 1.0, 10.0, 100.0, 1000.0}) {
            p.p_delta.setConstant(w);
            const GuidanceSolution s = solve(p);
            CHECK(s.delta.norm() <= prev_delta + 1e-12);
            CHECK(s.u.norm() >= prev_u - 1e-12);
            prev_delta = s.delta.norm();
            prev_u = s.u.norm();
        }
    }
}

TEST_CASE("solve dispatch")
{
    std::mt19937_64 rng(8);
    const GuidanceProblem neg = random_problem(rng, 3, 2, -10.0);
    CHECK(solve(neg).u.norm() == 0.0);
    const GuidanceProblem pos = random_problem(rng, 2, 4, 10.0);
    CHECK((solve(pos).u - solve_closed_form(pos).u).norm() < 1e-12);
    GuidanceProblem mixed = random_problem(rng, 3, 4, 0.0);
    mixed.rho << 2.0, -1.0, 0.5;
    CHECK(kkt_residual(mixed, solve(mixed), QpForm::Inequality) <= 1e-8);
}
