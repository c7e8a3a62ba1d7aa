#pragma once

#include "cflow/bench.hpp"
#include "cflow/planner.hpp"
#include "cflow/refine.hpp"
#include "cflow/trajectory.hpp"

#include <string>
#include <vector>

namespace cflow {

/// Dataset CSV: one trajectory per row, interleaved layout. The layout goes
/// to a sidecar `<path>.json` with keys H, d_s, d_a, model.
void write_dataset(const std::string& path, const std::vector<Trajectory>& trajs, const std::string& model = "");
std::vector<Trajectory> read_dataset(const std::string& path, std::string* model = nullptr);

/// Scene JSON: model, H, s_cur, action_bounds, goal, cost weights, ellipses
/// {center, axes, rotation_deg}, walls {normal, offset}, corridor {left, right}.
/// A string field "preset" starts from a built-in scene and overrides the rest.
Scene load_scene(const std::string& path);
void save_scene(const std::string& path, const Scene& scene);

/// Keys: steps, t_pre, c_r, c_gamma, margin, c_pt, p_delta, p_u, clamp_eps, step_cap, seed.
/// Missing keys keep their defaults.
PlannerConfig load_planner_config(const std::string& path, PlannerConfig base = {});
RefineConfig load_refine_config(const std::string& path, RefineConfig base = {});

void write_diagnostics_csv(const std::string& path, const std::vector<StepDiagnostics>& diag);
void write_refine_report(const std::string& path, const RefineReport& rep);
void write_plan_report(const std::string& path, const PlanResult& res);
void write_metrics_json(const std::string& path, const MetricsReport& m, double median_time_ms);

} // namespace cflow
