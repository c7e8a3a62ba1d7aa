#pragma once

#include "cflow/constraints.hpp"
#include "cflow/dynamics.hpp"
#include "cflow/flow.hpp"
#include "cflow/guidance.hpp"
#include "cflow/ptzf.hpp"
#include "cflow/trajectory.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace cflow {

struct Scene {
    std::string name;
    std::string model = "pendulum2";
    int H = 30;
    Vec s_cur;
    Vec action_bounds; // symmetric |a_i| <= bound_i; empty = unbounded
    ObstacleSet obstacles;
    std::optional<Vec> goal;
    // Scene cost: sum (s-goal)'Q(s-goal) + a'R a, plus w_ctrl ||a||^2 + w_smooth ||da||^2.
    Vec cost_Q;
    Vec cost_R;
    double w_ctrl = 0.0;
    double w_smooth = 0.0;
    bool infeasible_test = false;
};

enum class PlanMode { Trajectory, Path, Gpc };

PlanMode parse_plan_mode(const std::string& s);

/// Inputs to the free-generation floor. When set, every schedule starts at the floor.
struct FreeGenerationConfig {
    double v_bar = 0.0;
    double lipschitz_g = 0.0;
    double lipschitz_h = 0.0;
};

struct PlannerConfig {
    int steps = 200;
    double clamp_eps = 1e-3;
    double c_pt = 2.0;
    double c_gamma = 1.0;
    double t_pre = 1.0;  // schedules reach zero here; must not exceed 1
    double margin = 2.0;
    double c_r = 0.0;
    double p_delta = 1e4;
    double p_u = 1.0;
    double p_u_state = 10.0;  // path mode state block, GPC initial-state block
    double p_u_action = 1.0;  // path mode virtual actions, GPC actions
    double step_cap = 1.0;    // cap on h * c_pt * phi per Euler step; 0 disables
    double action_init_scale = 0.1;
    double tol_eq = 1e-4;
    double tol_ineq = 1e-4;
    bool conventional_pt = false; // zero references: plain prescribed-time gain without PTZF
    std::optional<FreeGenerationConfig> free_generation;
    std::uint64_t seed = 0;
};

struct StepDiagnostics {
    double t = 0.0;
    double u_norm = 0.0;
    double max_rho = 0.0;
    double max_delta = 0.0;
    double g = 0.0;
    double max_h = 0.0;
};

/// Constraint values at a flow state with gradients in flow coordinates.
struct ConstraintEval {
    double g = 0.0;
    Vec eta_g;
    Vec h;
    Mat eta_h; // one row per inequality
};

using ConstraintSystem = std::function<ConstraintEval(const Vec& x)>;

struct GuidedRun {
    FlowTrace trace;
    std::vector<StepDiagnostics> diagnostics;
    ConstraintEval initial;
    ConstraintEval final;
    std::vector<ZeroingSchedule> schedules; // equality first
};

/// Euler sampler on dx/dt = v(t,x) + u(t,x), with u from the guidance QP
/// assembled from `system` at every step.
GuidedRun guided_sample(const std::function<Vec(double, const Vec&)>& rhs, const ConstraintSystem& system,
                        const Vec& x0, const Vec& p_u, const PlannerConfig& cfg);

struct PlanResult {
    Trajectory traj;
    bool certified = false;
    double g_final = 0.0;
    double h_max_final = 0.0;
    Vec h_final;
    std::vector<StepDiagnostics> diagnostics;
    std::vector<ZeroingSchedule> schedules;
};

/// Constraint system of a scene over the full trajectory vector.
ConstraintEval evaluate_scene(const Scene& scene, const DynamicsModel& m, const WorkspaceMap& ws, const Layout& l,
                              const Vec& x, bool with_consistency = true);

PlanResult plan_trajectory(const Scene& scene, const DynamicsModel& m, const VelocityField& field,
                           const PlannerConfig& cfg);
PlanResult plan_path(const Scene& scene, const DynamicsModel& m, const VelocityField& field_s,
                     const PlannerConfig& cfg);
PlanResult plan_gpc(const Scene& scene, const DynamicsModel& m, const VelocityField& field_c,
                    const PlannerConfig& cfg);
PlanResult plan(PlanMode mode, const Scene& scene, const DynamicsModel& m, const VelocityField& field,
                const PlannerConfig& cfg);

/// Blocks of dT/dc for the GPC flow state c = [s0, a0, ..., a^{H-1}].
struct RecursiveJacobian {
    Layout layout;
    std::vector<Mat> s0;              // s0[k] = d s^k / d s^0
    std::vector<std::vector<Mat>> a;  // a[k][p] = d s^k / d a^p, p < k

    /// J_F w for w in flow coordinates.
    Vec apply(const Vec& w) const;
    /// J_F' y for y over the trajectory vector.
    Vec apply_transpose(const Vec& y) const;
    Mat dense() const;
};

Index gpc_dim(const Layout& l);
Vec gpc_coordinates(const Trajectory& t);
Trajectory gpc_reconstruct(const DynamicsModel& m, const Layout& l, const Vec& c);
RecursiveJacobian gpc_jacobian(const DynamicsModel& m, const Layout& l, const Vec& c);

/// Flow-state projections used to build priors for each mode.
Mat dataset_for_mode(PlanMode mode, const std::vector<Trajectory>& data);

} // namespace cflow
