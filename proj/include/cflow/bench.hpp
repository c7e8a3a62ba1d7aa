#pragma once

#include "cflow/planner.hpp"
#include "cflow/refine.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace cflow {

struct MetricsReport {
    double sr_s = 0.0;
    double sr_a = 0.0;
    double ar = 0.0;
    double tsr = 0.0;
    double kc_f = 0.0;
    double kc_i = 0.0;
    int kc_i_excluded = 0;
    double cost = 0.0;
    double time_ms = 0.0;
    int count = 0;
};

/// sqrt(mean_k ||s^{k+1} - f(s^k, a^k)||^2).
double kc_forward(const Trajectory& traj, const DynamicsModel& m);

struct InverseResult {
    double rmse = 0.0;
    int excluded = 0;
    int used = 0;
};

/// Recovers each a^k by Gauss-Newton on f(s^k, a) = s^{k+1} from a = 0.
/// Steps that do not converge, or converge outside |a_i| <= bound_i, are excluded.
InverseResult kc_inverse(const Trajectory& traj, const DynamicsModel& m, const Vec& bounds = Vec());

/// Scene cost of one trajectory.
double scene_cost(const Trajectory& traj, const Scene& scene);

struct TrajectoryChecks {
    bool safe_states = false;
    bool safe_rollout = false;
    bool actions_ok = false;
    bool consistent = false;
    bool aligned = false;

    bool all() const { return safe_states && safe_rollout && actions_ok && consistent && aligned; }
};

TrajectoryChecks check_trajectory(const Trajectory& traj, const Scene& scene, const DynamicsModel& m,
                                  double kc_tol = 1e-6);

MetricsReport score(const std::vector<Trajectory>& trajs, const Scene& scene, const DynamicsModel& m,
                    const std::vector<double>& times_ms = {});

/// Scene library.
Scene pendulum_scene(int H = 30);
/// Synthetic S-shaped corridor, optionally with the three-ellipse cluster.
Scene car_scene(int H = 100, bool with_obstacles = true);
Scene scene_by_name(const std::string& name);
/// Random start for a trial: safe pendulum angles in [-pi, pi) at rest, car near the corridor start.
Vec sample_start(const Scene& scene, std::mt19937_64& rng);

struct DatasetConfig {
    int count = 48;
    std::uint64_t seed = 0;
    int mpc_horizon = 10;
    int population = 48;
    int elites = 6;
    int iterations = 8;
    double std_fraction = 0.3; // CEM std / action bound
    int max_attempts_factor = 4;
    double goal_tolerance = 0.5; // pendulum: max wrapped angle error at the end
};

struct DatasetResult {
    std::vector<Trajectory> trajectories;
    int attempts = 0;
    int dropped = 0;
};

/// Receding-horizon CEM controller from randomized starts; only safe,
/// goal-reaching rollouts are kept.
DatasetResult make_dataset(const Scene& scene, const DynamicsModel& m, const DatasetConfig& cfg);

/// One MPC action from state s (exposed for tests).
Vec mpc_action(const Scene& scene, const DynamicsModel& m, const Vec& s, Mat& warm, int k, const DatasetConfig& cfg,
               std::uint64_t seed);

struct BenchConfig {
    PlanMode mode = PlanMode::Trajectory;
    std::string prior = "gmm"; // gmm | empirical
    double prior_sigma = 0.1;
    int neighbors = 8; // prior built per trial from this many nearest starts; 0 = whole dataset
    PlannerConfig planner;
    RefineConfig refine;
    int trials = 20;
    std::uint64_t seed = 0;
};

struct TrialRecord {
    int trial = 0;
    bool certified = false;
    bool refined = false;
    int outer = 0;
    double g_guided = 0.0;
    double h_guided = 0.0;
    double kc_f = 0.0;
    double time_ms = 0.0;
    TrajectoryChecks checks;
    std::string error;
};

struct BenchReport {
    MetricsReport metrics;
    std::vector<TrialRecord> trials;
    std::vector<Trajectory> outputs;
    double median_time_ms = 0.0;
};

/// The k dataset trajectories whose start states are closest to s_cur. For the
/// pendulum, angles are first shifted by multiples of 2 pi onto the branch of
/// s_cur (dynamics and wall are 2 pi periodic). k <= 0 keeps everything.
std::vector<Trajectory> nearest_by_start(const std::vector<Trajectory>& data, const Scene& scene, int k);

VelocityField make_prior(PlanMode mode, const std::vector<Trajectory>& data, const std::string& kind, double sigma,
                         double clamp_eps = 1e-3);

/// sample -> guide -> refine -> score.
BenchReport bench_run(const Scene& scene, const DynamicsModel& m, const std::vector<Trajectory>& data,
                      const BenchConfig& cfg);

void write_trials_csv(const std::string& path, const BenchReport& rep);

/// Two-dimensional scene: Gaussian-mixture prior, one ellipse, one linear equality a.x = b.
struct ToyScene {
    VelocityField field;
    Ellipse ellipse;
    Vec2 a;
    double b = 0.0;

    ConstraintEval evaluate(const Vec& x) const;
    /// Bounds valid on [0, c_r] for a start of norm r0: {radius, v_bar, L_g, L_h}.
    struct Bounds {
        double radius = 0.0;
        double v_bar = 0.0;
        double lipschitz_g = 0.0;
        double lipschitz_h = 0.0;
    };
    Bounds free_generation_bounds(double r0, double c_r) const;
};

ToyScene toy_scene();

/// Closed-form and numeric r(t) for the given rates, on `samples` points of [0, 1].
struct ScheduleCurves {
    std::vector<double> t;
    std::vector<double> c_gamma;
    Mat closed; // samples x rates
    Mat numeric;
};
ScheduleCurves schedule_curves(double r0, const std::vector<double>& c_gamma, int samples, int grid_steps);

/// Guidance traces on the toy scene for the free-generation floor (PTZF) and
/// for zero references (conventional prescribed-time guidance), same seed.
struct GuidanceComparison {
    GuidedRun ptzf;
    GuidedRun conventional;
    double c_r = 0.3;
    double max_u_ptzf_early = 0.0;
    double max_u_conventional_early = 0.0;
};
GuidanceComparison compare_ptzf_conventional(std::uint64_t seed, double c_r = 0.3);

} // namespace cflow
