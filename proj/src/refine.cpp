#include "cflow/refine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace cflow {

std::vector<std::pair<char, Window>> WindowPlan::ordered() const
{
    std::vector<std::pair<char, Window>> out;
    for (int i = 0; i < m(); ++i) {
        out.emplace_back('f', frozen[size_t(i)]);
        out.emplace_back('v', violation[size_t(i)]);
        out.emplace_back('r', recovery[size_t(i)]);
    }
    out.emplace_back('f', frozen.back());
    return out;
}

WindowPlan extract_windows(const std::vector<double>& h, int pad, int rec)
{
    if (h.empty())
        throw Error(ErrorCode::InvalidArgument, "extract_windows needs H+1 values");
    if (pad < 0 || rec < 0)
        throw Error(ErrorCode::InvalidArgument, "pad and recovery length must be nonnegative");
    const int H = int(h.size()) - 1;
    WindowPlan plan;
    plan.pad = pad;
    plan.rec = rec;
    plan.H = H;

    std::vector<Window> merged;
    for (int k = 0; k <= H; ++k) {
        if (!(h[size_t(k)] > 0.0))
            continue;
        int end = k;
        while (end + 1 <= H && h[size_t(end + 1)] > 0.0)
            ++end;
        const Window w{std::max(0, k - pad), std::min(H, end + pad)};
        if (!merged.empty() && w.lo <= merged.back().hi)
            merged.back().hi = std::max(merged.back().hi, w.hi);
        else
            merged.push_back(w);
        k = end;
    }

    int next = 0;
    for (size_t i = 0; i < merged.size(); ++i) {
        const Window& v = merged[i];
        plan.frozen.push_back({next, v.lo - 1});
        plan.violation.push_back(v);
        const int limit = i + 1 < merged.size() ? merged[i + 1].lo - 1 : H;
        const Window r{v.hi + 1, std::min(v.hi + rec, limit)};
        plan.recovery.push_back(r.empty() ? Window{v.hi + 1, v.hi} : r);
        next = std::max(v.hi, r.hi) + 1;
    }
    plan.frozen.push_back({next, H});
    if (plan.frozen.back().empty())
        plan.frozen.back() = {H + 1, H};
    return plan;
}

CemResult cem_minimize(const std::function<double(const Vec&)>& cost, const Vec& mean0, const CemConfig& cfg,
                       const Vec& init_std, const Vec& lower, const Vec& upper)
{
    if (cfg.population < 2 * cfg.elites || cfg.elites < 1)
        throw Error(ErrorCode::InvalidArgument, "CEM needs population >= 2 * elites >= 2");
    if (!(cfg.std_floor > 0.0))
        throw Error(ErrorCode::InvalidArgument, "CEM std floor must be positive");
    const Index n = mean0.size();
    const bool boxed = lower.size() == n && upper.size() == n;
    auto clip = [&](Vec x) {
        if (boxed)
            x = x.cwiseMax(lower).cwiseMin(upper);
        return x;
    };

    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> n01(0.0, 1.0);
    Vec mean = clip(mean0);
    Vec std = init_std.size() == n ? init_std : Vec::Constant(n, cfg.init_std);
    std = std.cwiseMax(cfg.std_floor);

    CemResult res;
    res.best = mean;
    res.best_cost = cost(mean);
    if (!std::isfinite(res.best_cost))
        res.best_cost = std::numeric_limits<double>::infinity();

    std::vector<Vec> samples(size_t(cfg.population));
    std::vector<double> costs(size_t(cfg.population));
    std::vector<int> order(size_t(cfg.population));
    int stale = 0;
    for (int it = 0; it < cfg.iterations; ++it) {
        if (res.best_cost <= cfg.target_cost)
            break;
        res.iterations = it + 1;
        bool any_finite = false;
        for (int i = 0; i < cfg.population; ++i) {
            Vec x(n);
            for (Index j = 0; j < n; ++j)
                x(j) = mean(j) + std(j) * n01(rng);
            samples[size_t(i)] = clip(std::move(x));
            const double c = cost(samples[size_t(i)]);
            costs[size_t(i)] = std::isfinite(c) ? c : std::numeric_limits<double>::infinity();
            any_finite = any_finite || std::isfinite(c);
        }
        if (!any_finite)
            throw Error(ErrorCode::CemDiverged, "no finite cost at iteration " + std::to_string(it));
        std::iota(order.begin(), order.end(), 0);
        std::partial_sort(order.begin(), order.begin() + cfg.elites, order.end(),
                          [&](int a, int b) { return costs[size_t(a)] < costs[size_t(b)]; });
        Vec m = Vec::Zero(n);
        for (int e = 0; e < cfg.elites; ++e)
            m += samples[size_t(order[size_t(e)])];
        m /= cfg.elites;
        Vec var = Vec::Zero(n);
        for (int e = 0; e < cfg.elites; ++e)
            var += (samples[size_t(order[size_t(e)])] - m).cwiseAbs2();
        var /= cfg.elites;
        mean = m;
        std = var.cwiseSqrt().cwiseMax(cfg.std_floor);

        const double top = costs[size_t(order[0])];
        if (top < res.best_cost) {
            res.best_cost = top;
            res.best = samples[size_t(order[0])];
            stale = 0;
        } else if (cfg.patience > 0 && ++stale >= cfg.patience) {
            break;
        }
    }
    return res;
}

std::vector<double> state_violations(const Trajectory& traj, const Scene& scene, const WorkspaceMap& ws)
{
    std::vector<double> h(size_t(traj.H() + 1));
    for (int k = 0; k <= traj.H(); ++k)
        h[size_t(k)] = state_barrier_value(traj.state(k), scene.obstacles, ws);
    return h;
}

namespace {

enum class WindowCost { Frozen, Violation, Recovery };

struct Refiner {
    const Scene& scene;
    const DynamicsModel& m;
    const RefineConfig& cfg;
    WorkspaceMap ws;
    Vec bounds;
    std::uint64_t calls = 0;
    // Grows by 10x on each pass that leaves a violation (penalty continuation).
    double penalty_scale = 1.0;

    Refiner(const Scene& s, const DynamicsModel& model, const RefineConfig& c)
        : scene(s), m(model), cfg(c), ws(s.obstacles.empty() ? WorkspaceMap{} : workspace_for(model.name()))
    {
        bounds = scene.action_bounds.size() ? scene.action_bounds : Vec::Constant(m.da(), 1e6);
    }

    double smooth(const Vec& prev, const Vec& a) const { return (a - prev).cwiseQuotient(bounds).squaredNorm(); }

    double penalties(const Vec& s) const
    {
        if (scene.obstacles.empty())
            return 0.0;
        const Vec2 p = ws.position(s);
        const double mg = cfg.safety_margin;
        const double po = std::max(0.0, mg - scene.obstacles.obstacle_clearance(p));
        const double pt = std::max(0.0, mg - scene.obstacles.corridor_clearance(p));
        return penalty_scale * (cfg.weights.obs * po * po + cfg.weights.trk * pt * pt);
    }

    // Optimizes actions k0..k1 of `cur`, rolling out from cur.state(k0), and
    // writes the actions and the produced states s^{k0+1}..s^{k1+1}.
    void optimize(Trajectory& cur, const Trajectory& ref, int k0, int k1, WindowCost kind)
    {
        const int n = k1 - k0 + 1;
        if (n <= 0)
            return;
        const int da = m.da();
        const Vec entry = cur.state(k0);
        const bool has_prev = k0 > 0;
        const Vec prev = has_prev ? Vec(cur.action(k0 - 1)) : Vec();
        Vec U0(Index(n) * da), lo(Index(n) * da), hi(Index(n) * da), sd(Index(n) * da);
        const double frac = kind == WindowCost::Frozen ? cfg.frozen_std_fraction : cfg.vio_std_fraction;
        for (int i = 0; i < n; ++i) {
            U0.segment(Index(i) * da, da) = cur.action(k0 + i);
            lo.segment(Index(i) * da, da) = -bounds;
            hi.segment(Index(i) * da, da) = bounds;
            sd.segment(Index(i) * da, da) = frac * bounds;
        }
        const RefineWeights& w = cfg.weights;
        auto cost = [&](const Vec& U) {
            Vec s = entry;
            double c = 0.0;
            for (int i = 0; i < n; ++i) {
                const Vec a = U.segment(Index(i) * da, da);
                const Vec aprev = i > 0 ? Vec(U.segment(Index(i - 1) * da, da)) : prev;
                s = discretize(m, s, a);
                const int k = k0 + i + 1;
                const double dev = (s - ref.state(k)).squaredNorm();
                const double sm = (i > 0 || has_prev) ? smooth(aprev, a) : 0.0;
                switch (kind) {
                case WindowCost::Frozen: c += dev + w.pref_smooth * sm + penalties(s); break;
                case WindowCost::Violation:
                    c += penalties(s) + w.rmse * dev + w.smooth * sm;
                    if (i == n - 1)
                        c += w.term * dev;
                    break;
                case WindowCost::Recovery:
                    c += w.smooth * sm;
                    if (i == n - 1)
                        c += w.end * dev;
                    break;
                }
                if (!std::isfinite(c))
                    return c;
            }
            return c;
        };
        CemConfig cc = cfg.cem;
        cc.seed = cfg.cem.seed + 7919 * (calls++);
        if (kind == WindowCost::Frozen)
            cc.target_cost = 1e-14;
        const CemResult r = cem_minimize(cost, U0, cc, sd, lo, hi);
        Vec s = entry;
        for (int i = 0; i < n; ++i) {
            cur.action(k0 + i) = r.best.segment(Index(i) * da, da);
            s = discretize(m, s, cur.action(k0 + i));
            cur.state(k0 + i + 1) = s;
        }
    }

    void optimize_chunked(Trajectory& cur, const Trajectory& ref, int k0, int k1, WindowCost kind)
    {
        const int chunk = std::max(1, cfg.chunk);
        for (int a = k0; a <= k1; a += chunk)
            optimize(cur, ref, a, std::min(k1, a + chunk - 1), kind);
    }

    // One left-to-right pass over the windows of `plan`.
    void pass(Trajectory& cur, const Trajectory& ref, const WindowPlan& plan)
    {
        const int H = cur.H();
        for (const auto& [tag, win] : plan.ordered()) {
            if (win.empty())
                continue;
            const int k1 = std::min(win.hi, H - 1);
            switch (tag) {
            case 'f': optimize_chunked(cur, ref, win.lo, k1, WindowCost::Frozen); break;
            case 'v': optimize(cur, ref, win.lo, k1, WindowCost::Violation); break;
            case 'r': optimize(cur, ref, win.lo, k1, WindowCost::Recovery); break;
            default: break;
            }
        }
    }
};

double max_of(const std::vector<double>& v) { return *std::max_element(v.begin(), v.end()); }

double kc_forward_rmse(const Trajectory& t, const DynamicsModel& m)
{
    double acc = 0.0;
    for (int k = 0; k < t.H(); ++k)
        acc += (Vec(t.state(k + 1)) - discretize(m, t.state(k), t.action(k))).squaredNorm();
    return std::sqrt(acc / t.H());
}

} // namespace

Trajectory refine_frozen(const Trajectory& traj, const WindowPlan& plan, const DynamicsModel& m,
                         const Scene& scene, const RefineConfig& cfg)
{
    Refiner r(scene, m, cfg);
    Trajectory cur = traj;
    for (const Window& w : plan.frozen) {
        if (w.size() < 2)
            continue;
        r.optimize_chunked(cur, traj, w.lo, w.hi - 1, WindowCost::Frozen);
    }
    return cur;
}

RefineReport refine_violation(const Trajectory& traj, const WindowPlan& plan, const Scene& scene,
                              const DynamicsModel& m, const RefineConfig& cfg)
{
    Refiner r(scene, m, cfg);
    RefineReport rep;
    Trajectory ref = traj;
    Trajectory cur = traj;
    if (scene.s_cur.size())
        cur.state(0) = scene.s_cur;
    WindowPlan wp = plan;
    std::vector<double> h;
    for (int outer = 1; outer <= cfg.max_outer; ++outer) {
        rep.plans.push_back(wp);
        r.pass(cur, ref, wp);
        rep.outer_iterations = outer;
        h = state_violations(cur, scene, r.ws);
        if (max_of(h) <= 0.0) {
            rep.success = true;
            break;
        }
        // Momentum carries a state into the wall well before contact, so
        // repeated failures reach further back.
        wp = extract_windows(h, cfg.pad + outer, cfg.rec);
        ref = cur;
        r.penalty_scale = std::min(1e6, r.penalty_scale * 10.0);
    }
    rep.traj = cur;
    rep.kc_f = kc_forward_rmse(cur, m);
    rep.max_h = max_of(h);
    if (!rep.success) {
        const Window& w = wp.violation.front();
        rep.failure = "window [" + std::to_string(w.lo) + ", " + std::to_string(w.hi) + "] still violated after "
                      + std::to_string(cfg.max_outer) + " passes (max h = " + std::to_string(rep.max_h) + ")";
        throw Error(ErrorCode::RefinementFailed, rep.failure);
    }
    return rep;
}

RefineReport refine(const Trajectory& traj, const Scene& scene, const DynamicsModel& m, const RefineConfig& cfg)
{
    const WorkspaceMap ws = scene.obstacles.empty() ? WorkspaceMap{} : workspace_for(m.name());
    return refine_violation(traj, extract_windows(state_violations(traj, scene, ws), cfg.pad, cfg.rec), scene, m,
                            cfg);
}

} // namespace cflow
