#include "cflow/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>

namespace cflow {

namespace {

constexpr double kPi = std::numbers::pi;

double wrap_angle(double a) { return std::remainder(a, 2.0 * kPi); }

bool is_pendulum(const std::string& model) { return model == "pendulum2"; }

Vec state_error(const Scene& scene, const Vec& s)
{
    Vec e = s - *scene.goal;
    if (is_pendulum(scene.model)) {
        e(0) = wrap_angle(e(0));
        e(1) = wrap_angle(e(1));
    }
    return e;
}

WorkspaceMap scene_workspace(const Scene& scene)
{
    return scene.obstacles.empty() ? WorkspaceMap{} : workspace_for(scene.model);
}

bool states_safe(const Mat& states, const Scene& scene, const WorkspaceMap& ws)
{
    if (scene.obstacles.empty())
        return true;
    for (Index k = 0; k < states.rows(); ++k)
        if (state_barrier_value(states.row(k).transpose(), scene.obstacles, ws) > 0.0)
            return false;
    return true;
}

// Corridor centerline y = A sin(2 pi x / P).
constexpr double kTrackAmp = 3.0;
constexpr double kTrackPeriod = 100.0;
constexpr double kTrackHalfWidth = 5.0;
constexpr double kCarSpeed = 8.0;

double track_y(double x) { return kTrackAmp * std::sin(2.0 * kPi * x / kTrackPeriod); }
double track_dy(double x) { return kTrackAmp * 2.0 * kPi / kTrackPeriod * std::cos(2.0 * kPi * x / kTrackPeriod); }

double median(std::vector<double> v)
{
    if (v.empty())
        return 0.0;
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

} // namespace

double kc_forward(const Trajectory& traj, const DynamicsModel& m)
{
    if (traj.layout.ds != m.ds() || traj.layout.da != m.da())
        throw Error(ErrorCode::ShapeError, "trajectory layout does not match the model");
    double acc = 0.0;
    for (int k = 0; k < traj.H(); ++k)
        acc += (Vec(traj.state(k + 1)) - discretize(m, traj.state(k), traj.action(k))).squaredNorm();
    return std::sqrt(acc / traj.H());
}

InverseResult kc_inverse(const Trajectory& traj, const DynamicsModel& m, const Vec& bounds)
{
    InverseResult out;
    double acc = 0.0;
    for (int k = 0; k < traj.H(); ++k) {
        const Vec s = traj.state(k);
        const Vec target = traj.state(k + 1);
        const double tol = 1e-10 * (1.0 + target.norm());
        Vec a = Vec::Zero(m.da());
        bool converged = false;
        for (int it = 0; it < 60; ++it) {
            const StepJacobians J = jacobians(m, s, a);
            const Vec r = J.next - target;
            if (!r.allFinite())
                break;
            const Vec step = J.Ja.completeOrthogonalDecomposition().solve(r);
            a -= step;
            if (r.norm() <= tol || step.norm() <= 1e-14 * (1.0 + a.norm())) {
                converged = (discretize(m, s, a) - target).norm() <= 1e-8 * (1.0 + target.norm());
                break;
            }
        }
        const bool in_box =
            bounds.size() == 0 || ((a.cwiseAbs() - bounds).array() <= 1e-9 * (1.0 + bounds.array())).all();
        if (!converged || !in_box) {
            ++out.excluded;
            continue;
        }
        ++out.used;
        acc += (a - Vec(traj.action(k))).squaredNorm();
    }
    out.rmse = out.used ? std::sqrt(acc / out.used) : 0.0;
    return out;
}

double scene_cost(const Trajectory& traj, const Scene& scene)
{
    double c = 0.0;
    if (scene.goal && scene.cost_Q.size()) {
        for (int k = 0; k <= traj.H(); ++k) {
            const Vec e = state_error(scene, traj.state(k));
            c += e.dot(scene.cost_Q.cwiseProduct(e));
        }
    }
    for (int k = 0; k < traj.H(); ++k) {
        const Vec a = traj.action(k);
        if (scene.cost_R.size())
            c += a.dot(scene.cost_R.cwiseProduct(a));
        c += scene.w_ctrl * a.squaredNorm();
        if (k > 0)
            c += scene.w_smooth * (a - Vec(traj.action(k - 1))).squaredNorm();
    }
    return c;
}

TrajectoryChecks check_trajectory(const Trajectory& traj, const Scene& scene, const DynamicsModel& m, double kc_tol)
{
    TrajectoryChecks c;
    const WorkspaceMap ws = scene_workspace(scene);
    c.safe_states = states_safe(traj.states(), scene, ws);
    const Vec s0 = scene.s_cur.size() ? scene.s_cur : Vec(traj.state(0));
    c.safe_rollout = states_safe(rollout(m, s0, traj.actions()), scene, ws);
    c.actions_ok = true;
    if (scene.action_bounds.size())
        for (int k = 0; k < traj.H(); ++k)
            c.actions_ok = c.actions_ok && (traj.action(k).cwiseAbs().array() <= scene.action_bounds.array()).all();
    c.consistent = kc_forward(traj, m) <= kc_tol;
    c.aligned = (Vec(traj.state(0)) - s0).norm() <= kc_tol;
    return c;
}

MetricsReport score(const std::vector<Trajectory>& trajs, const Scene& scene, const DynamicsModel& m,
                    const std::vector<double>& times_ms)
{
    MetricsReport r;
    r.count = int(trajs.size());
    if (trajs.empty())
        return r;
    int ns = 0, na = 0, nar = 0, nt = 0;
    double kci = 0.0;
    for (const Trajectory& t : trajs) {
        const TrajectoryChecks c = check_trajectory(t, scene, m);
        ns += c.safe_states;
        na += c.safe_rollout;
        nar += c.actions_ok;
        nt += c.all();
        r.kc_f += kc_forward(t, m);
        const InverseResult inv = kc_inverse(t, m, scene.action_bounds);
        kci += inv.rmse;
        r.kc_i_excluded += inv.excluded;
        r.cost += scene_cost(t, scene);
    }
    const double n = double(trajs.size());
    r.sr_s = 100.0 * ns / n;
    r.sr_a = 100.0 * na / n;
    r.ar = 100.0 * nar / n;
    r.tsr = 100.0 * nt / n;
    r.kc_f /= n;
    r.kc_i = kci / n;
    r.cost /= n;
    if (!times_ms.empty()) {
        double acc = 0.0;
        for (double t : times_ms)
            acc += t;
        r.time_ms = acc / double(times_ms.size());
    }
    return r;
}

Scene pendulum_scene(int H)
{
    Scene s;
    s.name = "pendulum";
    s.model = "pendulum2";
    s.H = H;
    s.s_cur = Vec::Zero(4);
    s.action_bounds = Vec::Constant(2, 30.0);
    s.obstacles.walls.push_back(Wall{Vec2(1.0, 0.0), -1.0});
    s.goal = Vec((Vec(4) << kPi, kPi, 0.0, 0.0).finished());
    s.cost_Q = (Vec(4) << 10.0, 10.0, 1.0, 1.0).finished();
    s.cost_R = Vec::Constant(2, 0.1);
    return s;
}

Scene car_scene(int H, bool with_obstacles)
{
    Scene s;
    s.name = with_obstacles ? "car" : "car_free";
    s.model = "car_kin";
    s.H = H;
    s.s_cur = (Vec(4) << 0.0, track_y(0.0), std::atan(track_dy(0.0)), kCarSpeed).finished();
    const CarParams cp;
    s.action_bounds = (Vec(2) << cp.steer_max, cp.accel_max).finished();
    std::vector<Vec2> left, right;
    for (double x = -10.0; x <= 150.0 + 1e-9; x += 1.0) {
        const Vec2 c(x, track_y(x));
        const Vec2 n = Vec2(-track_dy(x), 1.0).normalized();
        left.push_back(c + kTrackHalfWidth * n);
        right.push_back(c - kTrackHalfWidth * n);
    }
    s.obstacles.corridor = Corridor::from_boundaries(left, right);
    if (with_obstacles) {
        // Three overlapping ellipses around one point of the centerline, 1 m per 10 px.
        const Vec2 c(45.0, track_y(45.0));
        const double deg = kPi / 180.0;
        s.obstacles.ellipses.push_back(Ellipse{c + Vec2(0.8, -0.8), Vec2(4.0, 1.0), 30.0 * deg});
        s.obstacles.ellipses.push_back(Ellipse{c + Vec2(-0.9, 0.9), Vec2(4.0, 1.0), 30.0 * deg});
        s.obstacles.ellipses.push_back(Ellipse{c, Vec2(3.0, 1.0), -45.0 * deg});
    }
    s.w_ctrl = 1e-3;
    s.w_smooth = 5e-2;
    return s;
}

Scene scene_by_name(const std::string& name)
{
    if (name == "pendulum")
        return pendulum_scene();
    if (name == "car")
        return car_scene();
    if (name == "car_free")
        return car_scene(100, false);
    throw Error(ErrorCode::InvalidArgument, "unknown scene '" + name + "'");
}

Vec sample_start(const Scene& scene, std::mt19937_64& rng)
{
    const WorkspaceMap ws = scene_workspace(scene);
    if (is_pendulum(scene.model)) {
        std::uniform_real_distribution<double> ang(-kPi, kPi);
        for (int tries = 0; tries < 10000; ++tries) {
            Vec s = Vec::Zero(4);
            s(0) = ang(rng);
            s(1) = ang(rng);
            if (scene.obstacles.empty() || state_barrier_value(s, scene.obstacles, ws) <= -0.05)
                return s;
        }
    } else if (scene.model == "car_kin") {
        std::uniform_real_distribution<double> off(-1.0, 1.0), head(-0.05, 0.05), speed(7.0, 9.0);
        Vec s(4);
        s << 0.0, track_y(0.0) + off(rng), std::atan(track_dy(0.0)) + head(rng), speed(rng);
        return s;
    } else {
        std::normal_distribution<double> n;
        Vec s(scene.s_cur.size());
        for (Index i = 0; i < s.size(); ++i)
            s(i) = scene.s_cur(i) + 0.1 * n(rng);
        return s;
    }
    throw Error(ErrorCode::InvalidArgument, "no safe start found for scene '" + scene.name + "'");
}

Vec mpc_action(const Scene& scene, const DynamicsModel& m, const Vec& s, Mat& warm, int k, const DatasetConfig& cfg,
               std::uint64_t seed)
{
    const int N = cfg.mpc_horizon;
    const int da = m.da();
    if (warm.rows() != N || warm.cols() != da)
        warm = Mat::Zero(N, da);
    const Vec bounds = scene.action_bounds.size() ? scene.action_bounds : Vec::Constant(da, 1e6);
    const WorkspaceMap ws = scene_workspace(scene);
    const bool pend = is_pendulum(scene.model);

    auto cost = [&](const Vec& U) {
        Vec x = s;
        double c = 0.0;
        for (int i = 0; i < N; ++i) {
            const Vec a = U.segment(Index(i) * da, da);
            x = discretize(m, x, a);
            double stage;
            if (pend) {
                const Vec e = state_error(scene, x);
                stage = e.dot(scene.cost_Q.cwiseProduct(e)) + a.dot(scene.cost_R.cwiseProduct(a));
                if (i == N - 1)
                    stage *= 5.0;
            } else {
                const double lat = x(1) - track_y(x(0));
                const double dv = x(3) - kCarSpeed;
                const double dh = wrap_angle(x(2) - std::atan(track_dy(x(0))));
                stage = lat * lat + dh * dh + 0.1 * dv * dv + scene.w_ctrl * a.squaredNorm();
                const Vec aprev = i > 0 ? Vec(U.segment(Index(i - 1) * da, da)) : Vec(warm.row(0).transpose());
                stage += scene.w_smooth * (a - aprev).squaredNorm();
            }
            if (!scene.obstacles.empty()) {
                const double viol = std::max(0.0, state_barrier_value(x, scene.obstacles, ws) + 0.05);
                stage += 1e3 * viol * viol;
            }
            c += stage;
            if (!std::isfinite(c))
                return c;
        }
        return c;
    };

    Vec U0(Index(N) * da), lo(Index(N) * da), hi(Index(N) * da), sd(Index(N) * da);
    for (int i = 0; i < N; ++i) {
        U0.segment(Index(i) * da, da) = warm.row(std::min(i + 1, N - 1)).transpose();
        lo.segment(Index(i) * da, da) = -bounds;
        hi.segment(Index(i) * da, da) = bounds;
        sd.segment(Index(i) * da, da) = cfg.std_fraction * bounds;
    }
    CemConfig cc;
    cc.population = cfg.population;
    cc.elites = cfg.elites;
    cc.iterations = cfg.iterations;
    cc.seed = seed + 104729ULL * std::uint64_t(k);
    const CemResult r = cem_minimize(cost, U0, cc, sd, lo, hi);
    for (int i = 0; i < N; ++i)
        warm.row(i) = r.best.segment(Index(i) * da, da).transpose();
    return warm.row(0).transpose();
}

DatasetResult make_dataset(const Scene& scene, const DynamicsModel& m, const DatasetConfig& cfg)
{
    if (cfg.count <= 0)
        throw Error(ErrorCode::InvalidArgument, "dataset count must be positive");
    DatasetResult out;
    std::mt19937_64 rng(cfg.seed);
    const WorkspaceMap ws = scene_workspace(scene);
    const int max_attempts = cfg.count * std::max(1, cfg.max_attempts_factor);
    while (int(out.trajectories.size()) < cfg.count) {
        if (out.attempts >= max_attempts)
            throw Error(ErrorCode::InvalidArgument,
                        "dataset generation dropped too many rollouts (" + std::to_string(out.dropped) + " of "
                            + std::to_string(out.attempts) + ")");
        ++out.attempts;
        const Vec s0 = sample_start(scene, rng);
        Mat states(scene.H + 1, m.ds()), actions(scene.H, m.da());
        states.row(0) = s0.transpose();
        Mat warm;
        Vec s = s0;
        const std::uint64_t seed = rng();
        for (int k = 0; k < scene.H; ++k) {
            const Vec a = mpc_action(scene, m, s, warm, k, cfg, seed);
            actions.row(k) = a.transpose();
            s = discretize(m, s, a);
            states.row(k + 1) = s.transpose();
        }
        bool keep = s.allFinite() && states_safe(states, scene, ws);
        if (keep && is_pendulum(scene.model)) {
            const Vec e = state_error(scene, s);
            keep = std::max(std::abs(e(0)), std::abs(e(1))) <= cfg.goal_tolerance;
        }
        if (!keep) {
            ++out.dropped;
            continue;
        }
        out.trajectories.push_back(Trajectory::from_parts(states, actions));
    }
    return out;
}

std::vector<Trajectory> nearest_by_start(const std::vector<Trajectory>& data, const Scene& scene, int k)
{
    if (data.empty())
        throw Error(ErrorCode::EmptyPrior, "no trajectories to select from");
    if (k <= 0 || k >= int(data.size()) || scene.s_cur.size() == 0)
        return data;
    const bool pend = is_pendulum(scene.model);
    std::vector<std::pair<double, Trajectory>> ranked;
    for (Trajectory t : data) {
        if (pend) {
            for (int i = 0; i < 2; ++i) {
                const double shift = 2.0 * kPi * std::round((scene.s_cur(i) - t.state(0)(i)) / (2.0 * kPi));
                for (int j = 0; j <= t.H(); ++j)
                    t.state(j)(i) += shift;
            }
        }
        ranked.emplace_back((Vec(t.state(0)) - scene.s_cur).norm(), std::move(t));
    }
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<Trajectory> out;
    for (int i = 0; i < k; ++i)
        out.push_back(std::move(ranked[size_t(i)].second));
    return out;
}

VelocityField make_prior(PlanMode mode, const std::vector<Trajectory>& data, const std::string& kind, double sigma,
                         double clamp_eps)
{
    if (data.empty())
        throw Error(ErrorCode::EmptyPrior, "no trajectories for the prior");
    Mat pts = dataset_for_mode(mode, data);
    if (kind == "empirical")
        return VelocityField::empirical(std::move(pts), clamp_eps);
    if (kind == "gmm") {
        const Index n = pts.rows();
        return VelocityField::gaussian_mixture(Vec::Constant(n, 1.0 / double(n)), std::move(pts),
                                               Vec::Constant(n, sigma), clamp_eps);
    }
    throw Error(ErrorCode::InvalidArgument, "unknown prior kind '" + kind + "'");
}

BenchReport bench_run(const Scene& scene, const DynamicsModel& m, const std::vector<Trajectory>& data,
                      const BenchConfig& cfg)
{
    BenchReport rep;
    std::vector<double> times;
    for (int i = 0; i < cfg.trials; ++i) {
        std::mt19937_64 rng(cfg.seed * 1000003ULL + std::uint64_t(i));
        Scene sc = scene;
        sc.s_cur = sample_start(scene, rng);
        PlannerConfig pc = cfg.planner;
        pc.seed = rng();
        RefineConfig rc = cfg.refine;
        rc.cem.seed = rng();

        TrialRecord rec;
        rec.trial = i;
        const auto t0 = std::chrono::steady_clock::now();
        Trajectory out;
        try {
            const VelocityField prior = make_prior(cfg.mode, nearest_by_start(data, sc, cfg.neighbors), cfg.prior,
                                                   cfg.prior_sigma, cfg.planner.clamp_eps);
            const PlanResult pr = plan(cfg.mode, sc, m, prior, pc);
            rec.certified = pr.certified;
            rec.g_guided = pr.g_final;
            rec.h_guided = pr.h_max_final;
            out = pr.traj;
            const RefineReport rr = refine(pr.traj, sc, m, rc);
            rec.refined = rr.success;
            rec.outer = rr.outer_iterations;
            out = rr.traj;
        } catch (const Error& e) {
            rec.error = e.what();
        }
        const auto t1 = std::chrono::steady_clock::now();
        rec.time_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
        if (out.data.size() == 0) {
            out = Trajectory(Layout{sc.H, m.ds(), m.da()});
            out.state(0) = sc.s_cur;
        }
        rec.kc_f = kc_forward(out, m);
        rec.checks = check_trajectory(out, sc, m);
        times.push_back(rec.time_ms);
        rep.trials.push_back(rec);
        rep.outputs.push_back(out);
    }
    // Each trial is scored against its own start.
    MetricsReport agg;
    agg.count = cfg.trials;
    for (int i = 0; i < cfg.trials; ++i) {
        Scene sc = scene;
        std::mt19937_64 rng(cfg.seed * 1000003ULL + std::uint64_t(i));
        sc.s_cur = sample_start(scene, rng);
        const MetricsReport r = score({rep.outputs[size_t(i)]}, sc, m);
        agg.sr_s += r.sr_s;
        agg.sr_a += r.sr_a;
        agg.ar += r.ar;
        agg.tsr += r.tsr;
        agg.kc_f += r.kc_f;
        agg.kc_i += r.kc_i;
        agg.kc_i_excluded += r.kc_i_excluded;
        agg.cost += r.cost;
    }
    if (cfg.trials > 0) {
        const double n = cfg.trials;
        agg.sr_s /= n;
        agg.sr_a /= n;
        agg.ar /= n;
        agg.tsr /= n;
        agg.kc_f /= n;
        agg.kc_i /= n;
        agg.cost /= n;
        double acc = 0.0;
        for (double t : times)
            acc += t;
        agg.time_ms = acc / n;
    }
    rep.metrics = agg;
    rep.median_time_ms = median(times);
    return rep;
}

void write_trials_csv(const std::string& path, const BenchReport& rep)
{
    std::ofstream f(path);
    if (!f)
        throw Error(ErrorCode::IoError, "cannot write " + path);
    f.precision(10);
    f << "trial,certified,refined,outer,g_guided,h_guided,kc_f,safe_states,safe_rollout,actions_ok,consistent,"
         "aligned,time_ms,error\n";
    for (const TrialRecord& r : rep.trials) {
        std::string err = r.error;
        std::replace(err.begin(), err.end(), ',', ';');
        f << r.trial << ',' << r.certified << ',' << r.refined << ',' << r.outer << ',' << r.g_guided << ','
          << r.h_guided << ',' << r.kc_f << ',' << r.checks.safe_states << ',' << r.checks.safe_rollout << ','
          << r.checks.actions_ok << ',' << r.checks.consistent << ',' << r.checks.aligned << ',' << r.time_ms << ','
          << '"' << err << '"' << '\n';
    }
}

ConstraintEval ToyScene::evaluate(const Vec& x) const
{
    ConstraintEval e;
    const double r = a.dot(x.head<2>()) - b;
    e.g = r * r;
    e.eta_g = Vec::Zero(x.size());
    e.eta_g.head<2>() = 2.0 * r * a;
    Vec2 grad;
    const double d = ellipse.signed_distance(x.head<2>(), &grad);
    e.h = Vec::Constant(1, -d);
    e.eta_h = Mat::Zero(1, x.size());
    e.eta_h.row(0).head<2>() = -grad.transpose();
    return e;
}

ToyScene::Bounds ToyScene::free_generation_bounds(double r0, double c_r) const
{
    // Every GMM component velocity is mu + rate(t) (x - t mu) with
    // rate = (t s^2 - (1 - t)) / (t^2 s^2 + (1 - t)^2); sup |rate| over [0, c_r] on a fine grid.
    double rate_max = 0.0;
    for (Index i = 0; i < field.sigmas().size(); ++i) {
        const double s2 = field.sigmas()(i) * field.sigmas()(i);
        for (int j = 0; j <= 4000; ++j) {
            const double t = c_r * j / 4000.0;
            const double q = t * t * s2 + (1.0 - t) * (1.0 - t);
            rate_max = std::max(rate_max, std::abs((t * s2 - (1.0 - t)) / q));
        }
    }
    rate_max *= 1.01;
    double mu_max = 0.0;
    for (Index i = 0; i < field.points().rows(); ++i)
        mu_max = std::max(mu_max, field.points().row(i).norm());
    // ||v|| <= A + rate_max ||x||; Gronwall on the Euler recursion bounds ||x_t||.
    const double A = mu_max * (1.0 + rate_max);
    Bounds out;
    out.radius = rate_max > 0.0 ? (r0 + A / rate_max) * std::exp(rate_max * c_r) - A / rate_max : r0 + A * c_r;
    out.v_bar = A + rate_max * out.radius;
    const double an = a.norm();
    out.lipschitz_g = 2.0 * (an * out.radius + std::abs(b)) * an;
    const double amin = ellipse.axes.minCoeff();
    out.lipschitz_h = 2.0 * (out.radius + ellipse.center.norm()) / amin;
    return out;
}

ToyScene toy_scene()
{
    Mat means(3, 2);
    means << 2.0, 2.0, -2.0, 1.0, 1.0, -2.0;
    ToyScene s{VelocityField::gaussian_mixture(Vec::Constant(3, 1.0 / 3.0), means, Vec::Constant(3, 0.3)),
               Ellipse{Vec2(0.5, 0.5), Vec2(0.6, 0.4), 0.3}, Vec2(1.0, 1.0), 1.0};
    return s;
}

ScheduleCurves schedule_curves(double r0, const std::vector<double>& c_gamma, int samples, int grid_steps)
{
    if (samples < 2 || grid_steps < 1)
        throw Error(ErrorCode::InvalidArgument, "schedule_curves needs at least two samples");
    ScheduleCurves out;
    out.c_gamma = c_gamma;
    out.closed.resize(samples, Index(c_gamma.size()));
    out.numeric.resize(samples, Index(c_gamma.size()));
    std::vector<double> grid(size_t(grid_steps) + 1);
    for (int j = 0; j <= grid_steps; ++j)
        grid[size_t(j)] = (1.0 - 1e-6) * j / grid_steps;
    for (int i = 0; i < samples; ++i)
        out.t.push_back(double(i) / (samples - 1));
    for (size_t c = 0; c < c_gamma.size(); ++c) {
        const double cg = c_gamma[c];
        const ZeroingSchedule closed = ZeroingSchedule::linear(r0, cg);
        const ZeroingSchedule num =
            ZeroingSchedule::numeric(r0, [cg](double, double r) { return cg * r; }, grid);
        for (int i = 0; i < samples; ++i) {
            out.closed(i, Index(c)) = closed.eval(out.t[size_t(i)]).value;
            out.numeric(i, Index(c)) = num.eval(out.t[size_t(i)]).value;
        }
    }
    return out;
}

GuidanceComparison compare_ptzf_conventional(std::uint64_t seed, double c_r)
{
    const ToyScene toy = toy_scene();
    std::mt19937_64 rng(seed);
    const Vec x0 = sample_prior(rng, 2);
    const ToyScene::Bounds b = toy.free_generation_bounds(x0.norm(), c_r);
    auto rhs = [&](double t, const Vec& x) { return toy.field(t, x); };
    auto sys = [&](const Vec& x) { return toy.evaluate(x); };

    PlannerConfig pc;
    pc.c_r = c_r;
    pc.free_generation = FreeGenerationConfig{b.v_bar, b.lipschitz_g, b.lipschitz_h};
    GuidanceComparison out;
    out.c_r = c_r;
    out.ptzf = guided_sample(rhs, sys, x0, Vec::Ones(2), pc);

    PlannerConfig conv;
    conv.conventional_pt = true;
    out.conventional = guided_sample(rhs, sys, x0, Vec::Ones(2), conv);

    for (const StepDiagnostics& d : out.ptzf.diagnostics)
        if (d.t <= c_r)
            out.max_u_ptzf_early = std::max(out.max_u_ptzf_early, d.u_norm);
    for (const StepDiagnostics& d : out.conventional.diagnostics)
        if (d.t <= c_r)
            out.max_u_conventional_early = std::max(out.max_u_conventional_early, d.u_norm);
    return out;
}

} // namespace cflow
