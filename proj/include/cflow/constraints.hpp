#pragma once

#include "cflow/dynamics.hpp"
#include "cflow/trajectory.hpp"
#include "cflow/types.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace cflow {

/// Rotated ellipse with semi-axes `axes`. The signed distance is the
/// normalized quadratic ((p-c)' Q (p-c) - 1) * min(axes): negative inside.
struct Ellipse {
    Vec2 center = Vec2::Zero();
    Vec2 axes = Vec2::Ones();
    double rotation = 0.0; // radians

    double signed_distance(const Vec2& p, Vec2* grad = nullptr) const;
    bool contains(const Vec2& p) const;
};

/// Half-plane n.p >= offset is safe; distance n.p - offset with unit n.
struct Wall {
    Vec2 normal = Vec2(1.0, 0.0);
    double offset = 0.0;

    double signed_distance(const Vec2& p, Vec2* grad = nullptr) const;
};

/// Signed distance to a polyline, positive on the side its normals point to.
class Polyline {
public:
    Polyline() = default;
    /// `inward_left`: normals are the left-hand perpendiculars of the segments.
    Polyline(std::vector<Vec2> points, bool inward_left);

    double signed_distance(const Vec2& p, Vec2* grad = nullptr) const;
    const std::vector<Vec2>& points() const { return points_; }
    const std::vector<Vec2>& normals() const { return normals_; }
    bool inward_left() const { return inward_left_; }

private:
    std::vector<Vec2> points_;
    std::vector<Vec2> normals_;
    bool inward_left_ = true;
};

/// Track between a left and a right boundary, both ordered along the travel direction.
struct Corridor {
    Polyline left;
    Polyline right;

    static Corridor from_boundaries(std::vector<Vec2> left, std::vector<Vec2> right);
    /// Point-in-polygon test on left + reversed right (brute-force membership).
    bool contains(const Vec2& p) const;
};

struct Clearance {
    double value = 0.0; // min signed distance, positive = safe
    Vec2 grad = Vec2::Zero();
    int source = -1; // index in evaluation order; -1 if the set is empty
};

/// Evaluation order for min-of-distances ties: corridor left, corridor right,
/// ellipses, walls. The first minimizer wins.
struct ObstacleSet {
    std::vector<Ellipse> ellipses;
    std::vector<Wall> walls;
    std::optional<Corridor> corridor;

    bool empty() const { return ellipses.empty() && walls.empty() && !corridor; }
    Clearance clearance(const Vec2& p) const;
    /// min over ellipses and walls only (+inf when none).
    double obstacle_clearance(const Vec2& p) const;
    /// min(d_L, d_R) (+inf without a corridor).
    double corridor_clearance(const Vec2& p) const;
    /// Geometric predicate: inside the corridor polygon, outside every ellipse, on the safe side of every wall.
    bool geometric_safe(const Vec2& p) const;
};

/// Map from a state to the planar point the obstacle set is checked against.
struct WorkspaceMap {
    std::function<Vec2(const Vec&)> position;
    std::function<Eigen::Matrix<double, 2, Eigen::Dynamic>(const Vec&)> jacobian;
};

WorkspaceMap pendulum_end_effector(const PendulumParams& p = {});
WorkspaceMap planar_position(int ds, int ix = 0, int iy = 1);
WorkspaceMap workspace_for(const std::string& model_name);

/// Residual of one equality part and the gradient of its square.
struct EqualityPart {
    double residual = 0.0;
    Segment grad_sq;
};

struct EqualityAggregate {
    double value = 0.0;
    Vec gradient;
};

enum class BarrierKind { State, Action };

struct Barrier {
    double value = 0.0;
    Segment grad;
    BarrierKind kind = BarrierKind::State;
    int k = 0;
    int component = 0;
};

/// ||s^{k+1} - f^k(s^k, a^k)||.
EqualityPart dyn_consistency(const Layout& l, const Vec& x, const DynamicsModel& m, int k);
/// ||s^0 - s_cur||.
EqualityPart initial_alignment(const Layout& l, const Vec& x, const Vec& s_cur);
EqualityAggregate aggregate_equality(const std::vector<EqualityPart>& parts, Index dim);

/// h = -clearance(p(s^k)).
Barrier state_barrier(const Layout& l, const Vec& x, const ObstacleSet& obs, const WorkspaceMap& ws, int k);
/// h_i = (a^k_i)^2 - bound_i^2.
Barrier action_barrier(const Layout& l, const Vec& x, const Vec& bounds, int k, int i);
std::vector<Barrier> action_barriers(const Layout& l, const Vec& x, const Vec& bounds, int k);

/// State barrier value of a single state.
double state_barrier_value(const Vec& s, const ObstacleSet& obs, const WorkspaceMap& ws);

inline EqualityPart dyn_consistency(const Trajectory& t, const DynamicsModel& m, int k)
{
    return dyn_consistency(t.layout, t.data, m, k);
}
inline EqualityPart initial_alignment(const Trajectory& t, const Vec& s_cur)
{
    return initial_alignment(t.layout, t.data, s_cur);
}
inline Barrier state_barrier(const Trajectory& t, const ObstacleSet& obs, const WorkspaceMap& ws, int k)
{
    return state_barrier(t.layout, t.data, obs, ws, k);
}
inline Barrier action_barrier(const Trajectory& t, const Vec& bounds, int k, int i)
{
    return action_barrier(t.layout, t.data, bounds, k, i);
}

} // namespace cflow
