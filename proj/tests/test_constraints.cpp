#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cflow/bench.hpp"
#include "cflow/constraints.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace cflow;

namespace {

constexpr double kPi = std::numbers::pi;

Vec randn(std::mt19937_64& rng, Index n, double s = 1.0)
{
    std::normal_distribution<double> d;
    return Vec::NullaryExpr(n, [&] { return s * d(rng); });
}

// Relative error of `grad` against central differences of `f` at x.
double fd_error(const std::function<double(const Vec&)>& f, const Vec& grad, const Vec& x, double h = 1e-6)
{
    Vec fd(x.size());
    for (Index i = 0; i < x.size(); ++i) {
        Vec xp = x, xm = x;
        xp(i) += h;
        xm(i) -= h;
        fd(i) = (f(xp) - f(xm)) / (2.0 * h);
    }
    return (grad - fd).norm() / std::max(1.0, fd.norm());
}

Trajectory random_traj(std::mt19937_64& rng, const Layout& l, double s = 1.0)
{
    return Trajectory(l, randn(rng, l.dim(), s));
}

} // namespace

TEST_CASE("selection blocks reassemble the trajectory")
{
    std::mt19937_64 rng(1);
    const Layout l{7, 4, 2};
    const Trajectory t = random_traj(rng, l);
    CHECK(Trajectory::from_parts(t.states(), t.actions()).data == t.data);
    CHECK(interleave(l, pack_states(l, t.data), pack_actions(l, t.data)) == t.data);
    CHECK(t.state(3) == t.data.segment(3 * 6, 4));
    CHECK(t.action(3) == t.data.segment(3 * 6 + 4, 2));
}

TEST_CASE("consistency residual")
{
    const DynamicsModel m = make_pendulum();
    Trajectory t = rollout_trajectory(m, Eigen::Vector4d(0.3, -0.2, 0.1, 0.0), Mat::Constant(5, 2, 1.5));
    for (int k = 0; k < t.H(); ++k) {
        const EqualityPart p = dyn_consistency(t, m, k);
        CHECK(p.residual < 1e-12);
        CHECK(p.grad_sq.values.norm() < 1e-12);
    }
    t.state(3)(0) += 1e-3;
    CHECK(dyn_consistency(t, m, 2).residual == doctest::Approx(1e-3).epsilon(1e-6));

    Trajectory up(Layout{2, 4, 2});
    for (int k = 0; k <= 2; ++k)
        up.state(k) = Eigen::Vector4d(kPi, kPi, 0.0, 0.0);
    CHECK(dyn_consistency(up, m, 0).residual < 1e-12);
}

TEST_CASE("consistency gradients match finite differences")
{
    std::mt19937_64 rng(2);
    for (const std::string name : {"pendulum2", "car_kin"}) {
        const DynamicsModel m = make_model(name);
        const Layout l{4, 4, 2};
        double worst = 0.0;
        for (int i = 0; i < 100; ++i) {
            Trajectory t = random_traj(rng, l, 0.5);
            const int k = i % l.H;
            auto f = [&](const Vec& x) {
                const double r = dyn_consistency(l, x, m, k).residual;
                return r * r;
            };
            worst = std::max(worst, fd_error(f, dyn_consistency(t, m, k).grad_sq.to_dense(l.dim()), t.data));
        }
        CHECK(worst <= 1e-5);
    }
}

TEST_CASE("initial alignment")
{
    const Layout l{3, 4, 2};
    Trajectory t(l);
    const Vec s_cur = Eigen::Vector4d(0.1, 0.2, 0.3, 0.4);
    t.state(0) = s_cur;
    EqualityPart p = initial_alignment(t, s_cur);
    CHECK(p.residual == 0.0);
    CHECK(p.grad_sq.to_dense(l.dim()).norm() == 0.0);

    t.state(0)(0) += 1.0;
    p = initial_alignment(t, s_cur);
    CHECK(p.residual == doctest::Approx(1.0));
    const Vec g = p.grad_sq.to_dense(l.dim());
    CHECK(g(0) == doctest::Approx(2.0));
    CHECK(g.tail(l.dim() - 1).norm() == 0.0);
}

TEST_CASE("equality aggregate")
{
    const Layout l{3, 4, 2};
    CHECK(aggregate_equality({}, l.dim()).value == 0.0);

    const DynamicsModel m = make_car();
    std::mt19937_64 rng(3);
    const Trajectory t = random_traj(rng, l);
    const Vec s_cur = randn(rng, 4);
    const EqualityPart one = initial_alignment(t, s_cur);
    CHECK(aggregate_equality({one}, l.dim()).value == doctest::Approx(one.residual * one.residual));

    auto agg = [&](const Vec& x) {
        std::vector<EqualityPart> parts{initial_alignment(l, x, s_cur)};
        for (int k = 0; k < l.H; ++k)
            parts.push_back(dyn_consistency(l, x, m, k));
        return aggregate_equality(parts, l.dim());
    };
    CHECK(fd_error([&](const Vec& x) { return agg(x).value; }, agg(t.data).gradient, t.data) <= 1e-5);

    // Zero exactly when every part is zero.
    Trajectory c = rollout_trajectory(m, s_cur, Mat::Constant(3, 2, 0.1));
    CHECK(agg(c.data).value == 0.0);
    c.state(2)(1) += 1e-4;
    CHECK(agg(c.data).value > 0.0);
}

TEST_CASE("pendulum wall barrier")
{
    const Scene sc = pendulum_scene(2);
    const WorkspaceMap ws = workspace_for("pendulum2");
    Trajectory t(Layout{2, 4, 2});
    t.state(1) = Eigen::Vector4d(kPi / 2, kPi / 2, 0.0, 0.0);
    CHECK(state_barrier(t, sc.obstacles, ws, 1).value == doctest::Approx(-3.0));
}

TEST_CASE("ellipse signed distance")
{
    const Ellipse e{Vec2(1.0, 2.0), Vec2(3.0, 0.5), 0.4};
    CHECK(e.signed_distance(e.center) == doctest::Approx(-0.5));
    CHECK(e.contains(e.center));
    const Vec2 major = e.center + 3.0 * Vec2(std::cos(0.4), std::sin(0.4));
    CHECK(std::abs(e.signed_distance(major)) < 1e-12);
    CHECK(e.signed_distance(Vec2(20.0, 20.0)) > 0.0);

    ObstacleSet obs;
    obs.ellipses.push_back(e);
    const Vec2 p(0.3, 2.1);
    const Clearance c = obs.clearance(p);
    auto f = [&](const Vec& x) { return obs.clearance(Vec2(x(0), x(1))).value; };
    CHECK(fd_error(f, c.grad, p) <= 1e-6);
}

TEST_CASE("state barrier gradients")
{
    std::mt19937_64 rng(4);
    const Scene ps = pendulum_scene(3);
    const Scene cs = car_scene(3, true);
    const WorkspaceMap pws = workspace_for("pendulum2");
    const WorkspaceMap cws = workspace_for("car_kin");
    const Layout l{3, 4, 2};
    std::uniform_real_distribution<double> ux(30.0, 60.0), uy(-6.0, 6.0);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        Trajectory t = random_traj(rng, l, 2.0);
        const int k = i % (l.H + 1);
        auto fp = [&](const Vec& x) { return state_barrier(l, x, ps.obstacles, pws, k).value; };
        worst = std::max(worst, fd_error(fp, state_barrier(t, ps.obstacles, pws, k).grad.to_dense(l.dim()), t.data));
        t.state(k).head(2) = Vec2(ux(rng), uy(rng));
        auto fc = [&](const Vec& x) { return state_barrier(l, x, cs.obstacles, cws, k).value; };
        worst = std::max(worst, fd_error(fc, state_barrier(t, cs.obstacles, cws, k).grad.to_dense(l.dim()), t.data));
    }
    CHECK(worst <= 1e-5);
}

TEST_CASE("barrier sign matches geometric membership")
{
    const Scene cs = car_scene(3, true);
    const WorkspaceMap ws = workspace_for("car_kin");
    int mismatches = 0, unsafe = 0;
    for (int i = 0; i < 100; ++i)
        for (int j = 0; j < 100; ++j) {
            const Vec2 p(20.0 + 0.5 * i, -10.0 + 0.2 * j + 0.01);
            Vec s = Vec::Zero(4);
            s.head(2) = p;
            const bool safe = cs.obstacles.geometric_safe(p);
            unsafe += !safe;
            mismatches += (state_barrier_value(s, cs.obstacles, ws) <= 0.0) != safe;
        }
    CHECK(unsafe > 0);
    CHECK(mismatches == 0);
}

TEST_CASE("far from obstacles mid-corridor is safe")
{
    const Scene cs = car_scene(3, true);
    Vec s = Vec::Zero(4);
    s.head(2) = Vec2(5.0, 3.0 * std::sin(2.0 * kPi * 5.0 / 100.0));
    CHECK(state_barrier_value(s, cs.obstacles, workspace_for("car_kin")) < 0.0);
}

TEST_CASE("action barriers")
{
    const Layout l{2, 4, 2};
    Trajectory t(l);
    t.action(0) = Vec2(30.0, 0.0);
    const Vec bounds = Vec2(30.0, 30.0);
    CHECK(action_barrier(t, bounds, 0, 0).value == doctest::Approx(0.0));
    CHECK(action_barrier(t, bounds, 0, 1).value == doctest::Approx(-900.0));

    t.action(1) = Vec2(kPi, 0.0);
    CHECK(action_barrier(t, Vec2(kPi, 35.0), 1, 0).value == doctest::Approx(0.0).epsilon(1e-12));

    std::mt19937_64 rng(5);
    const Trajectory r = random_traj(rng, l, 5.0);
    for (int k = 0; k < l.H; ++k)
        for (int i = 0; i < 2; ++i) {
            auto f = [&](const Vec& x) { return action_barrier(l, x, bounds, k, i).value; };
            CHECK(fd_error(f, action_barrier(r, bounds, k, i).grad.to_dense(l.dim()), r.data) <= 1e-6);
        }
    CHECK(action_barriers(l, r.data, bounds, 1).size() == 2);
}
