#include "cflow/planner.hpp"

#include <cmath>
#include <random>

namespace cflow {

PlanMode parse_plan_mode(const std::string& s)
{
    if (s == "traj")
        return PlanMode::Trajectory;
    if (s == "path")
        return PlanMode::Path;
    if (s == "gpc")
        return PlanMode::Gpc;
    throw Error(ErrorCode::InvalidArgument, "unknown plan mode '" + s + "'");
}

GuidedRun guided_sample(const std::function<Vec(double, const Vec&)>& rhs, const ConstraintSystem& system,
                        const Vec& x0, const Vec& p_u, const PlannerConfig& cfg)
{
    GuidedRun run;
    run.initial = system(x0);
    const Index nh = run.initial.h.size();

    if (cfg.conventional_pt) {
        run.schedules.assign(size_t(nh + 1), ZeroingSchedule::zero());
    } else if (cfg.free_generation) {
        const FreeGenerationBudget b{cfg.c_pt, cfg.c_gamma, cfg.c_r, cfg.free_generation->v_bar};
        run.schedules.push_back(ZeroingSchedule::linear(
            free_generation_floor(b, run.initial.g, cfg.free_generation->lipschitz_g, ResidualKind::Equality),
            cfg.c_gamma, cfg.t_pre, cfg.c_r));
        for (Index j = 0; j < nh; ++j)
            run.schedules.push_back(ZeroingSchedule::linear(
                free_generation_floor(b, run.initial.h(j), cfg.free_generation->lipschitz_h, ResidualKind::Inequality),
                cfg.c_gamma, cfg.t_pre, cfg.c_r));
    } else {
        if (cfg.margin < 0.0)
            throw Error(ErrorCode::InvalidArgument, "margin must be nonnegative");
        run.schedules.push_back(ZeroingSchedule::linear(cfg.margin * run.initial.g, cfg.c_gamma, cfg.t_pre));
        for (Index j = 0; j < nh; ++j)
            run.schedules.push_back(ZeroingSchedule::linear(run.initial.h(j), cfg.c_gamma, cfg.t_pre));
    }

    const ClassKGain gain{cfg.c_pt, cfg.clamp_eps, cfg.step_cap};
    const double h = (1.0 - cfg.clamp_eps) / cfg.steps;
    const Vec p_delta = Vec::Constant(nh + 1, cfg.p_delta);
    std::vector<ConstraintRow> rows(size_t(nh + 1));

    auto hook = [&](double t, const Vec& x, const Vec& v) -> Vec {
        const ConstraintEval e = system(x);
        rows[0] = {e.g, e.eta_g, run.schedules[0].eval(t)};
        for (Index j = 0; j < nh; ++j)
            rows[size_t(j + 1)] = {e.h(j), e.eta_h.row(j).transpose(), run.schedules[size_t(j + 1)].eval(t)};
        const GuidanceProblem p = assemble(rows, gain, t, v, p_u, p_delta, h);
        const GuidanceSolution sol = solve(p);
        StepDiagnostics d;
        d.t = t;
        d.u_norm = sol.u.norm();
        d.max_rho = p.rho.maxCoeff();
        d.max_delta = sol.delta.size() ? sol.delta.maxCoeff() : 0.0;
        d.g = e.g;
        d.max_h = nh ? e.h.maxCoeff() : -std::numeric_limits<double>::infinity();
        run.diagnostics.push_back(d);
        return sol.u;
    };
    run.trace = integrate_rhs(rhs, hook, x0, cfg.steps, cfg.clamp_eps);
    run.final = system(run.trace.final());
    return run;
}

ConstraintEval evaluate_scene(const Scene& scene, const DynamicsModel& m, const WorkspaceMap& ws, const Layout& l,
                              const Vec& x, bool with_consistency)
{
    const Index d = l.dim();
    std::vector<EqualityPart> parts;
    if (scene.s_cur.size())
        parts.push_back(initial_alignment(l, x, scene.s_cur));
    if (with_consistency)
        for (int k = 0; k < l.H; ++k)
            parts.push_back(dyn_consistency(l, x, m, k));
    const EqualityAggregate agg = aggregate_equality(parts, d);

    std::vector<Barrier> bars;
    if (!scene.obstacles.empty())
        for (int k = 0; k <= l.H; ++k)
            bars.push_back(state_barrier(l, x, scene.obstacles, ws, k));
    if (scene.action_bounds.size())
        for (int k = 0; k < l.H; ++k)
            for (const Barrier& b : action_barriers(l, x, scene.action_bounds, k))
                bars.push_back(b);

    ConstraintEval e;
    e.g = agg.value;
    e.eta_g = agg.gradient;
    e.h.resize(Index(bars.size()));
    e.eta_h = Mat::Zero(Index(bars.size()), d);
    for (size_t j = 0; j < bars.size(); ++j) {
        e.h(Index(j)) = bars[j].value;
        e.eta_h.row(Index(j)).segment(bars[j].grad.offset, bars[j].grad.values.size())
            = bars[j].grad.values.transpose();
    }
    return e;
}

namespace {

Layout scene_layout(const Scene& scene, const DynamicsModel& m) { return Layout{scene.H, m.ds(), m.da()}; }

PlanResult finish(const Layout& l, const Vec& x_traj, const GuidedRun& run, const ConstraintEval& final_traj,
                  const PlannerConfig& cfg)
{
    PlanResult r;
    r.traj = Trajectory(l, x_traj);
    r.g_final = final_traj.g;
    r.h_final = final_traj.h;
    r.h_max_final = final_traj.h.size() ? final_traj.h.maxCoeff() : -std::numeric_limits<double>::infinity();
    r.certified = r.g_final <= cfg.tol_eq && r.h_max_final <= cfg.tol_ineq;
    r.diagnostics = run.diagnostics;
    r.schedules = run.schedules;
    return r;
}

void check_dim(const VelocityField& f, Index d, const char* what)
{
    if (f.dim() != d)
        throw Error(ErrorCode::ShapeError, std::string(what) + ": prior dimension " + std::to_string(f.dim())
                                               + " != flow dimension " + std::to_string(d));
}

} // namespace

PlanResult plan_trajectory(const Scene& scene, const DynamicsModel& m, const VelocityField& field,
                           const PlannerConfig& cfg)
{
    const Layout l = scene_layout(scene, m);
    check_dim(field, l.dim(), "plan_trajectory");
    const WorkspaceMap ws = scene.obstacles.empty() ? WorkspaceMap{} : workspace_for(m.name());
    std::mt19937_64 rng(cfg.seed);
    const Vec x0 = sample_prior(rng, l.dim());
    auto system = [&](const Vec& x) { return evaluate_scene(scene, m, ws, l, x); };
    const GuidedRun run = guided_sample([&](double t, const Vec& x) { return field(t, x); }, system, x0,
                                        Vec::Constant(l.dim(), cfg.p_u), cfg);
    return finish(l, run.trace.final(), run, run.final, cfg);
}

PlanResult plan_path(const Scene& scene, const DynamicsModel& m, const VelocityField& field_s,
                     const PlannerConfig& cfg)
{
    const Layout l = scene_layout(scene, m);
    const Index ns = l.states_dim(), na = l.actions_dim();
    check_dim(field_s, ns, "plan_path");
    const WorkspaceMap ws = scene.obstacles.empty() ? WorkspaceMap{} : workspace_for(m.name());
    std::mt19937_64 rng(cfg.seed);
    Vec x0(ns + na);
    x0.head(ns) = sample_prior(rng, ns);
    std::normal_distribution<double> n01(0.0, 1.0);
    for (Index i = 0; i < na; ++i) {
        const double bound = scene.action_bounds.size() ? scene.action_bounds(i % l.da) : 1.0;
        x0(ns + i) = cfg.action_init_scale * bound * n01(rng);
    }
    auto to_traj = [&](const Vec& x) { return interleave(l, x.head(ns), x.tail(na)); };
    auto system = [&](const Vec& x) {
        ConstraintEval e = evaluate_scene(scene, m, ws, l, to_traj(x));
        ConstraintEval out;
        out.g = e.g;
        out.eta_g.resize(ns + na);
        out.eta_g << pack_states(l, e.eta_g), pack_actions(l, e.eta_g);
        out.h = e.h;
        out.eta_h.resize(e.eta_h.rows(), ns + na);
        for (Index j = 0; j < e.eta_h.rows(); ++j) {
            const Vec row = e.eta_h.row(j).transpose();
            out.eta_h.row(j).head(ns) = pack_states(l, row).transpose();
            out.eta_h.row(j).tail(na) = pack_actions(l, row).transpose();
        }
        return out;
    };
    auto rhs = [&](double t, const Vec& x) {
        Vec v = Vec::Zero(ns + na);
        v.head(ns) = field_s(t, Vec(x.head(ns)));
        return v;
    };
    Vec p_u(ns + na);
    p_u.head(ns).setConstant(cfg.p_u_state);
    p_u.tail(na).setConstant(cfg.p_u_action);
    const GuidedRun run = guided_sample(rhs, system, x0, p_u, cfg);
    return finish(l, to_traj(run.trace.final()), run, run.final, cfg);
}

Index gpc_dim(const Layout& l) { return Index(l.ds) + l.actions_dim(); }

Vec gpc_coordinates(const Trajectory& t)
{
    Vec c(gpc_dim(t.layout));
    c << t.state(0), pack_actions(t.layout, t.data);
    return c;
}

Trajectory gpc_reconstruct(const DynamicsModel& m, const Layout& l, const Vec& c)
{
    if (c.size() != gpc_dim(l))
        throw Error(ErrorCode::ShapeError, "gpc flow state has wrong length");
    Mat actions(l.H, l.da);
    for (int k = 0; k < l.H; ++k)
        actions.row(k) = c.segment(l.ds + Index(k) * l.da, l.da).transpose();
    return rollout_trajectory(m, c.head(l.ds), actions);
}

RecursiveJacobian gpc_jacobian(const DynamicsModel& m, const Layout& l, const Vec& c)
{
    const Trajectory T = gpc_reconstruct(m, l, c);
    RecursiveJacobian J;
    J.layout = l;
    J.s0.resize(size_t(l.H + 1));
    J.a.resize(size_t(l.H + 1));
    J.s0[0] = Mat::Identity(l.ds, l.ds);
    for (int k = 1; k <= l.H; ++k) {
        const StepJacobians f = jacobians(m, T.state(k - 1), T.action(k - 1));
        J.s0[size_t(k)] = f.Js * J.s0[size_t(k - 1)];
        J.a[size_t(k)].resize(size_t(k));
        for (int p = 0; p < k - 1; ++p)
            J.a[size_t(k)][size_t(p)] = f.Js * J.a[size_t(k - 1)][size_t(p)];
        J.a[size_t(k)][size_t(k - 1)] = f.Ja;
    }
    return J;
}

Vec RecursiveJacobian::apply(const Vec& w) const
{
    const Layout& l = layout;
    if (w.size() != gpc_dim(l))
        throw Error(ErrorCode::ShapeError, "RecursiveJacobian::apply: wrong input length");
    Vec y(l.dim());
    const auto ws0 = w.head(l.ds);
    auto wa = [&](int p) { return w.segment(l.ds + Index(p) * l.da, l.da); };
    for (int k = 0; k <= l.H; ++k) {
        Vec sk = s0[size_t(k)] * ws0;
        for (int p = 0; p < k; ++p)
            sk += a[size_t(k)][size_t(p)] * wa(p);
        state_block(l, y, k) = sk;
        if (k < l.H)
            action_block(l, y, k) = wa(k);
    }
    return y;
}

Vec RecursiveJacobian::apply_transpose(const Vec& y) const
{
    const Layout& l = layout;
    if (y.size() != l.dim())
        throw Error(ErrorCode::ShapeError, "RecursiveJacobian::apply_transpose: wrong input length");
    Vec w = Vec::Zero(gpc_dim(l));
    for (int k = 0; k < l.H; ++k)
        w.segment(l.ds + Index(k) * l.da, l.da) = action_block(l, y, k);
    for (int k = 0; k <= l.H; ++k) {
        const auto yk = state_block(l, y, k);
        if (yk.isZero(0.0))
            continue;
        w.head(l.ds) += s0[size_t(k)].transpose() * yk;
        for (int p = 0; p < k; ++p)
            w.segment(l.ds + Index(p) * l.da, l.da) += a[size_t(k)][size_t(p)].transpose() * yk;
    }
    return w;
}

Mat RecursiveJacobian::dense() const
{
    const Index n = gpc_dim(layout);
    Mat J(layout.dim(), n);
    for (Index i = 0; i < n; ++i)
        J.col(i) = apply(Vec::Unit(n, i));
    return J;
}

PlanResult plan_gpc(const Scene& scene, const DynamicsModel& m, const VelocityField& field_c,
                    const PlannerConfig& cfg)
{
    const Layout l = scene_layout(scene, m);
    const Index n = gpc_dim(l);
    check_dim(field_c, n, "plan_gpc");
    const WorkspaceMap ws = scene.obstacles.empty() ? WorkspaceMap{} : workspace_for(m.name());
    std::mt19937_64 rng(cfg.seed);
    const Vec x0 = sample_prior(rng, n);
    auto system = [&](const Vec& c) {
        const Trajectory T = gpc_reconstruct(m, l, c);
        const RecursiveJacobian J = gpc_jacobian(m, l, c);
        const ConstraintEval e = evaluate_scene(scene, m, ws, l, T.data, false);
        ConstraintEval out;
        out.g = e.g;
        out.eta_g = J.apply_transpose(e.eta_g);
        out.h = e.h;
        out.eta_h.resize(e.eta_h.rows(), n);
        for (Index j = 0; j < e.eta_h.rows(); ++j)
            out.eta_h.row(j) = J.apply_transpose(e.eta_h.row(j).transpose()).transpose();
        return out;
    };
    // Moving s^0 shifts every state, so barriers are cheaper to meet through
    // the actions once the initial-state block costs more.
    Vec p_u = Vec::Constant(n, cfg.p_u_action);
    p_u.head(l.ds).setConstant(cfg.p_u_state);
    const GuidedRun run = guided_sample([&](double t, const Vec& x) { return field_c(t, x); }, system, x0, p_u, cfg);
    const Trajectory T = gpc_reconstruct(m, l, run.trace.final());
    return finish(l, T.data, run, run.final, cfg);
}

PlanResult plan(PlanMode mode, const Scene& scene, const DynamicsModel& m, const VelocityField& field,
                const PlannerConfig& cfg)
{
    switch (mode) {
    case PlanMode::Trajectory: return plan_trajectory(scene, m, field, cfg);
    case PlanMode::Path: return plan_path(scene, m, field, cfg);
    case PlanMode::Gpc: return plan_gpc(scene, m, field, cfg);
    }
    throw Error(ErrorCode::InvalidArgument, "unknown plan mode");
}

Mat dataset_for_mode(PlanMode mode, const std::vector<Trajectory>& data)
{
    if (data.empty())
        throw Error(ErrorCode::EmptyPrior, "no trajectories");
    const Layout& l = data.front().layout;
    const Index n = mode == PlanMode::Trajectory ? l.dim() : mode == PlanMode::Path ? l.states_dim() : gpc_dim(l);
    Mat out(Index(data.size()), n);
    for (size_t i = 0; i < data.size(); ++i) {
        if (!(data[i].layout == l))
            throw Error(ErrorCode::ShapeError, "dataset trajectories disagree in layout");
        switch (mode) {
        case PlanMode::Trajectory: out.row(Index(i)) = data[i].data.transpose(); break;
        case PlanMode::Path: out.row(Index(i)) = pack_states(l, data[i].data).transpose(); break;
        case PlanMode::Gpc: out.row(Index(i)) = gpc_coordinates(data[i]).transpose(); break;
        }
    }
    return out;
}

} // namespace cflow
