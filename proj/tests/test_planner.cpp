#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cflow/bench.hpp"
#include "cflow/planner.hpp"

#include <cmath>
#include <random>

using namespace cflow;

namespace {

Vec randn(std::mt19937_64& rng, Index n, double s = 1.0)
{
    std::normal_distribution<double> d;
    return Vec::NullaryExpr(n, [&] { return s * d(rng); });
}

Scene free_scene(int H)
{
    Scene s;
    s.name = "free";
    s.model = "pendulum2";
    s.H = H;
    return s;
}

Trajectory smooth_rollout(const DynamicsModel& m, int H, double phase)
{
    Mat acts(H, 2);
    for (int k = 0; k < H; ++k)
        acts.row(k) << 2.0 * std::sin(0.3 * k + phase), -1.5 * std::cos(0.2 * k);
    return rollout_trajectory(m, Eigen::Vector4d(0.2, -0.1, 0.0, 0.3), acts);
}

} // namespace

TEST_CASE("parse plan mode")
{
    CHECK(parse_plan_mode("traj") == PlanMode::Trajectory);
    CHECK(parse_plan_mode("path") == PlanMode::Path);
    CHECK(parse_plan_mode("gpc") == PlanMode::Gpc);
    CHECK_THROWS_AS(parse_plan_mode("other"), Error);
}

TEST_CASE("guided sample drives a 1-d barrier to zero")
{
    auto system = [](const Vec& x) {
        ConstraintEval e;
        e.g = 0.0;
        e.eta_g = Vec::Zero(1);
        e.h = Vec::Constant(1, x(0) - 1.0);
        e.eta_h = Mat::Ones(1, 1);
        return e;
    };
    PlannerConfig cfg;
    const GuidedRun run = guided_sample([](double, const Vec& x) { return Vec(Vec::Zero(x.size())); }, system,
                                        Vec::Constant(1, 3.0), Vec::Ones(1), cfg);
    CHECK(run.final.h(0) <= 1e-3);
    CHECK(run.diagnostics.size() >= size_t(cfg.steps));
    // Already-safe starts are left alone.
    const GuidedRun safe = guided_sample([](double, const Vec& x) { return Vec(Vec::Zero(x.size())); }, system,
                                         Vec::Constant(1, -2.0), Vec::Ones(1), cfg);
    CHECK(safe.trace.final()(0) == -2.0);
}

TEST_CASE("single consistent trajectory is reproduced")
{
    const DynamicsModel m = make_pendulum();
    const Trajectory t1 = smooth_rollout(m, 5, 0.0);
    const VelocityField f = VelocityField::empirical(t1.data.transpose());
    PlannerConfig cfg;
    cfg.seed = 3;
    const PlanResult r = plan_trajectory(free_scene(5), m, f, cfg);
    CHECK(r.certified);
    CHECK((r.traj.data - t1.data).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("infeasible wall is not certified")
{
    const DynamicsModel m = make_pendulum();
    Scene sc = free_scene(4);
    // The tip can never reach x >= 10.
    sc.obstacles.walls.push_back(Wall{Vec2(1.0, 0.0), 10.0});
    sc.infeasible_test = true;
    const VelocityField f = VelocityField::empirical(smooth_rollout(m, 4, 0.5).data.transpose());
    const PlanResult r = plan_trajectory(sc, m, f, PlannerConfig{});
    CHECK(!r.certified);
    CHECK(r.h_max_final > 0.0);
}

TEST_CASE("dimension mismatch is a shape error")
{
    const DynamicsModel m = make_pendulum();
    const VelocityField f = VelocityField::constant(Vec::Zero(3));
    for (PlanMode mode : {PlanMode::Trajectory, PlanMode::Path, PlanMode::Gpc}) {
        try {
            plan(mode, free_scene(3), m, f, PlannerConfig{});
            FAIL("expected a shape error");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::ShapeError);
        }
    }
}

TEST_CASE("path mode reduces the consistency residual")
{
    const DynamicsModel m = make_pendulum();
    std::vector<Trajectory> data;
    for (int i = 0; i < 3; ++i)
        data.push_back(smooth_rollout(m, 5, 0.7 * i));
    const VelocityField f = VelocityField::gaussian_mixture(Vec::Constant(3, 1.0 / 3), dataset_for_mode(PlanMode::Path, data),
                                                            Vec::Constant(3, 0.1));
    PlannerConfig cfg;
    cfg.seed = 5;
    const PlanResult r = plan_path(free_scene(5), m, f, cfg);
    REQUIRE(!r.diagnostics.empty());
    CHECK(r.g_final < r.diagnostics.front().g);
    CHECK(r.traj.layout == Layout{5, 4, 2});
}

TEST_CASE("dataset projections")
{
    const DynamicsModel m = make_car();
    const std::vector<Trajectory> data{smooth_rollout(m, 4, 0.0), smooth_rollout(m, 4, 1.0)};
    const Layout l = data[0].layout;
    CHECK(dataset_for_mode(PlanMode::Trajectory, data).cols() == l.dim());
    CHECK(dataset_for_mode(PlanMode::Path, data).cols() == l.states_dim());
    CHECK(dataset_for_mode(PlanMode::Gpc, data).cols() == gpc_dim(l));
    CHECK_THROWS_AS(dataset_for_mode(PlanMode::Path, {}), Error);
}

TEST_CASE("gpc coordinates round trip")
{
    const DynamicsModel m = make_car();
    const Trajectory t = smooth_rollout(m, 6, 0.2);
    const Trajectory back = gpc_reconstruct(m, t.layout, gpc_coordinates(t));
    CHECK((back.data - t.data).norm() == 0.0);
    CHECK_THROWS_AS(gpc_reconstruct(m, t.layout, Vec::Zero(3)), Error);
}

TEST_CASE("gpc jacobian with one step is the step jacobian")
{
    const DynamicsModel m = make_pendulum();
    const Layout l{1, 4, 2};
    std::mt19937_64 rng(1);
    const Vec c = randn(rng, gpc_dim(l));
    const RecursiveJacobian J = gpc_jacobian(m, l, c);
    const StepJacobians f = jacobians(m, c.head(4), c.tail(2));
    CHECK((J.s0[1] - f.Js).norm() < 1e-12);
    CHECK((J.a[1][0] - f.Ja).norm() < 1e-12);
}

TEST_CASE("gpc jacobian of a linear model is a power of the transition")
{
    LinearParams lp;
    lp.A = (Mat(2, 2) << 0.0, 1.0, -1.0, -0.2).finished();
    lp.B = (Mat(2, 1) << 0.0, 1.0).finished();
    const DynamicsModel m = make_linear(lp);
    const Layout l{3, 2, 1};
    const Vec c = Vec::LinSpaced(gpc_dim(l), -1.0, 1.0);
    const RecursiveJacobian J = gpc_jacobian(m, l, c);
    const StepJacobians f = jacobians(m, Vec::Zero(2), Vec::Zero(1));
    CHECK((J.s0[3] - f.Js * f.Js * f.Js).norm() < 1e-12);
    CHECK((J.a[3][0] - f.Js * f.Js * f.Ja).norm() < 1e-12);
}

TEST_CASE("gpc jacobian matches finite differences")
{
    const DynamicsModel m = make_car();
    const Layout l{4, 4, 2};
    std::mt19937_64 rng(2);
    Vec c = randn(rng, gpc_dim(l), 0.3);
    c(3) = 5.0;
    const RecursiveJacobian J = gpc_jacobian(m, l, c);
    const Mat D = J.dense();
    Mat fd(l.dim(), c.size());
    for (Index i = 0; i < c.size(); ++i) {
        Vec cp = c, cm = c;
        cp(i) += 1e-6;
        cm(i) -= 1e-6;
        fd.col(i) = (gpc_reconstruct(m, l, cp).data - gpc_reconstruct(m, l, cm).data) / 2e-6;
    }
    CHECK((D - fd).norm() / fd.norm() < 1e-6);
    const Vec y = randn(rng, l.dim());
    CHECK((J.apply_transpose(y) - D.transpose() * y).norm() < 1e-10);
}

TEST_CASE("gpc plans are dynamically consistent")
{
    const DynamicsModel m = make_pendulum();
    std::vector<Trajectory> data;
    for (int i = 0; i < 3; ++i)
        data.push_back(smooth_rollout(m, 4, 0.5 * i));
    Scene sc = free_scene(4);
    sc.s_cur = Eigen::Vector4d(0.25, -0.1, 0.0, 0.3);
    const VelocityField f = VelocityField::gaussian_mixture(Vec::Constant(3, 1.0 / 3), dataset_for_mode(PlanMode::Gpc, data),
                                                            Vec::Constant(3, 0.1));
    PlannerConfig cfg;
    cfg.seed = 9;
    const PlanResult r = plan_gpc(sc, m, f, cfg);
    CHECK(kc_forward(r.traj, m) < 1e-12);
    // Only the start alignment remains in the equality residual.
    CHECK(r.g_final == doctest::Approx((r.traj.state(0) - sc.s_cur).squaredNorm()).epsilon(1e-9));
    CHECK(r.g_final <= cfg.tol_eq);
}

TEST_CASE("receding-horizon gpc stays safe")
{
    const DynamicsModel m = make_pendulum();
    Scene sc = pendulum_scene(5);
    // Prior rollouts push the tip through the wall.
    std::vector<Trajectory> data;
    for (int i = 0; i < 4; ++i)
        data.push_back(rollout_trajectory(m, Eigen::Vector4d(-0.4, -0.4, 0.0, 0.0),
                                          Mat::Constant(5, 2, -10.0 - 2.0 * i)));
    const VelocityField f = VelocityField::gaussian_mixture(Vec::Constant(4, 0.25), dataset_for_mode(PlanMode::Gpc, data),
                                                            Vec::Constant(4, 0.1));
    const WorkspaceMap ws = workspace_for("pendulum2");
    Vec s = Eigen::Vector4d(-0.4, -0.4, 0.0, 0.0);
    for (int step = 0; step < 10; ++step) {
        sc.s_cur = s;
        PlannerConfig cfg;
        cfg.seed = std::uint64_t(step);
        const PlanResult r = plan_gpc(sc, m, f, cfg);
        INFO("step " << step << " g " << r.g_final << " h " << r.h_max_final);
        s = discretize(m, s, r.traj.action(0));
        CHECK(state_barrier_value(s, sc.obstacles, ws) <= 0.0);
    }
}
