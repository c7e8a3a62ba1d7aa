#pragma once

#include "cflow/constraints.hpp"
#include "cflow/dynamics.hpp"
#include "cflow/planner.hpp"
#include "cflow/trajectory.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace cflow {

/// Inclusive index interval; empty when lo > hi.
struct Window {
    int lo = 0;
    int hi = -1;

    bool empty() const { return lo > hi; }
    int size() const { return empty() ? 0 : hi - lo + 1; }
    bool contains(int k) const { return k >= lo && k <= hi; }
    bool operator==(const Window&) const = default;
};

/// frozen[0], violation[0], recovery[0], frozen[1], ..., frozen[m] in time order.
struct WindowPlan {
    std::vector<Window> frozen;
    std::vector<Window> violation;
    std::vector<Window> recovery;
    int pad = 0;
    int rec = 0;
    int H = 0;

    int m() const { return int(violation.size()); }
    /// All windows in time order, tagged 'f', 'v' or 'r'.
    std::vector<std::pair<char, Window>> ordered() const;
};

/// Violations are indices with h > 0 over 0..H. Dilated intervals that intersect are merged.
WindowPlan extract_windows(const std::vector<double>& h, int pad, int rec);

struct CemConfig {
    int population = 64;
    int elites = 8;
    int iterations = 100;
    double init_std = 1.0;
    double std_floor = 1e-4;
    double target_cost = -std::numeric_limits<double>::infinity();
    int patience = 0; // stop after this many iterations without improvement; 0 = never
    std::uint64_t seed = 0;
};

struct CemResult {
    Vec best;
    double best_cost = 0.0;
    int iterations = 0;
};

/// Samples are clipped to [lower, upper] when those are given (same size as mean0).
CemResult cem_minimize(const std::function<double(const Vec&)>& cost, const Vec& mean0, const CemConfig& cfg,
                       const Vec& init_std = Vec(), const Vec& lower = Vec(), const Vec& upper = Vec());

struct RefineWeights {
    double obs = 30.0;
    double trk = 3.0;
    double rmse = 1.0;
    double term = 10.0;
    double smooth = 6.0;      // violation / recovery windows
    double pref_smooth = 1e-3; // frozen windows
    double start = 10.0;
    double end = 10.0;
};

struct RefineConfig {
    int pad = 2;
    int rec = 5;
    int max_outer = 20;
    int chunk = 8;            // longest action block one CEM call optimizes
    double safety_margin = 1e-3;
    double vio_std_fraction = 0.1;     // initial CEM std / action bound, violation and recovery windows
    double frozen_std_fraction = 0.1;  // same for frozen windows
    RefineWeights weights;
    CemConfig cem{.patience = 20};
};

struct RefineReport {
    Trajectory traj;
    bool success = false;
    int outer_iterations = 0;
    std::vector<WindowPlan> plans;
    double kc_f = 0.0;
    double max_h = 0.0;
    std::string failure;
};

/// Re-optimize the actions of every frozen window to track the window's
/// states from its entry state; states inside the window become rollouts.
Trajectory refine_frozen(const Trajectory& traj, const WindowPlan& plan, const DynamicsModel& m,
                         const Scene& scene, const RefineConfig& cfg);

/// Sequential pass over all windows from s_cur: frozen windows track the
/// reference, violation windows pay obstacle and corridor penalties,
/// recovery windows re-join the reference. Repeats until every state is safe,
/// throws RefinementFailed after max_outer passes.
RefineReport refine_violation(const Trajectory& traj, const WindowPlan& plan, const Scene& scene,
                              const DynamicsModel& m, const RefineConfig& cfg);

/// extract_windows + refine_violation.
RefineReport refine(const Trajectory& traj, const Scene& scene, const DynamicsModel& m, const RefineConfig& cfg);

/// Per-step state barrier values h(s^k), k = 0..H.
std::vector<double> state_violations(const Trajectory& traj, const Scene& scene, const WorkspaceMap& ws);

/// Clamped uniform cubic B-spline fitted by least squares.
class SplineCodec {
public:
    SplineCodec(int control_points, int samples);

    Vec encode(const Vec& channel) const;
    Vec decode(const Vec& coeffs) const;
    /// Encode each column.
    Mat encode(const Mat& channels) const;
    Mat decode_all(const Mat& coeffs) const;

    int control_points() const { return n_; }
    int samples() const { return samples_; }
    const Vec& knots() const { return knots_; }
    const Mat& basis() const { return basis_; }

private:
    int n_;
    int samples_;
    Vec knots_;
    Mat basis_; // samples x control points
    Eigen::ColPivHouseholderQR<Mat> qr_;
};

Vec spline_encode(const Vec& channel, int control_points);
Vec spline_decode(const Vec& coeffs, int samples);

/// Cox-de Boor basis value N_{i,p}(u).
double bspline_basis(const Vec& knots, int i, int p, double u);

} // namespace cflow
