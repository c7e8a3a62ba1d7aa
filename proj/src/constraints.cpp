#include "cflow/constraints.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace cflow {

namespace {

Eigen::Matrix2d rot2(double a)
{
    Eigen::Matrix2d R;
    R << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
    return R;
}

Vec2 left_perp(const Vec2& t) { return Vec2(-t.y(), t.x()); }

} // namespace

double Ellipse::signed_distance(const Vec2& p, Vec2* grad) const
{
    const Eigen::Matrix2d R = rot2(rotation);
    const Eigen::Matrix2d Q = R * Vec2(1.0 / (axes.x() * axes.x()), 1.0 / (axes.y() * axes.y())).asDiagonal() * R.transpose();
    const Vec2 e = p - center;
    const double scale = axes.minCoeff();
    if (grad)
        *grad = 2.0 * scale * (Q * e);
    return (e.dot(Q * e) - 1.0) * scale;
}

bool Ellipse::contains(const Vec2& p) const
{
    // Coordinates in the ellipse frame, checked against the canonical equation.
    const Vec2 e = rot2(-rotation) * (p - center);
    const double q = (e.x() / axes.x()) * (e.x() / axes.x()) + (e.y() / axes.y()) * (e.y() / axes.y());
    return q < 1.0;
}

double Wall::signed_distance(const Vec2& p, Vec2* grad) const
{
    const Vec2 n = normal.normalized();
    if (grad)
        *grad = n;
    return n.dot(p) - offset;
}

Polyline::Polyline(std::vector<Vec2> points, bool inward_left) : points_(std::move(points)), inward_left_(inward_left)
{
    if (points_.size() < 2)
        throw Error(ErrorCode::InvalidArgument, "polyline needs at least two points");
    normals_.reserve(points_.size() - 1);
    for (size_t i = 0; i + 1 < points_.size(); ++i) {
        const Vec2 t = points_[i + 1] - points_[i];
        if (t.norm() == 0.0)
            throw Error(ErrorCode::InvalidArgument, "polyline has a repeated point");
        const Vec2 n = left_perp(t.normalized());
        normals_.push_back(inward_left ? n : Vec2(-n));
    }
}

double Polyline::signed_distance(const Vec2& p, Vec2* grad) const
{
    double best = std::numeric_limits<double>::infinity();
    Vec2 closest = points_.front();
    Vec2 pseudo = normals_.front();
    for (size_t i = 0; i < normals_.size(); ++i) {
        const Vec2 a = points_[i], b = points_[i + 1];
        const Vec2 ab = b - a;
        const double s = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
        const Vec2 q = a + s * ab;
        const double d2 = (p - q).squaredNorm();
        if (d2 < best) {
            best = d2;
            closest = q;
            // At a vertex the sign comes from the averaged normal of both segments.
            if (s <= 0.0 && i > 0)
                pseudo = (normals_[i - 1] + normals_[i]).normalized();
            else if (s >= 1.0 && i + 1 < normals_.size())
                pseudo = (normals_[i] + normals_[i + 1]).normalized();
            else
                pseudo = normals_[i];
        }
    }
    const Vec2 e = p - closest;
    const double dist = std::sqrt(best);
    const double sign = pseudo.dot(e) >= 0.0 ? 1.0 : -1.0;
    if (grad)
        *grad = dist > 1e-12 ? Vec2(sign * e / dist) : pseudo;
    return sign * dist;
}

Corridor Corridor::from_boundaries(std::vector<Vec2> left, std::vector<Vec2> right)
{
    Corridor c;
    // Travel direction runs along the polylines; the left boundary's inside is to its right.
    c.left = Polyline(std::move(left), false);
    c.right = Polyline(std::move(right), true);
    return c;
}

bool Corridor::contains(const Vec2& p) const
{
    std::vector<Vec2> poly(left.points());
    poly.insert(poly.end(), right.points().rbegin(), right.points().rend());
    bool inside = false;
    for (size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
        const Vec2& a = poly[i];
        const Vec2& b = poly[j];
        if ((a.y() > p.y()) != (b.y() > p.y())) {
            const double x = (b.x() - a.x()) * (p.y() - a.y()) / (b.y() - a.y()) + a.x();
            if (p.x() < x)
                inside = !inside;
        }
    }
    return inside;
}

Clearance ObstacleSet::clearance(const Vec2& p) const
{
    Clearance c;
    c.value = std::numeric_limits<double>::infinity();
    int idx = 0;
    auto consider = [&](double v, const Vec2& g) {
        if (v < c.value) {
            c.value = v;
            c.grad = g;
            c.source = idx;
        }
        ++idx;
    };
    Vec2 g;
    if (corridor) {
        consider(corridor->left.signed_distance(p, &g), g);
        consider(corridor->right.signed_distance(p, &g), g);
    }
    for (const Ellipse& e : ellipses)
        consider(e.signed_distance(p, &g), g);
    for (const Wall& w : walls)
        consider(w.signed_distance(p, &g), g);
    return c;
}

double ObstacleSet::obstacle_clearance(const Vec2& p) const
{
    double v = std::numeric_limits<double>::infinity();
    for (const Ellipse& e : ellipses)
        v = std::min(v, e.signed_distance(p));
    for (const Wall& w : walls)
        v = std::min(v, w.signed_distance(p));
    return v;
}

double ObstacleSet::corridor_clearance(const Vec2& p) const
{
    if (!corridor)
        return std::numeric_limits<double>::infinity();
    return std::min(corridor->left.signed_distance(p), corridor->right.signed_distance(p));
}

bool ObstacleSet::geometric_safe(const Vec2& p) const
{
    if (corridor && !corridor->contains(p))
        return false;
    for (const Ellipse& e : ellipses)
        if (e.contains(p))
            return false;
    for (const Wall& w : walls)
        if (w.normal.dot(p) < w.offset * w.normal.norm())
            return false;
    return true;
}

WorkspaceMap pendulum_end_effector(const PendulumParams& p)
{
    WorkspaceMap w;
    w.position = [p](const Vec& s) {
        return Vec2(p.l1 * std::sin(s(0)) + p.l2 * std::sin(s(1)), p.l1 * std::cos(s(0)) + p.l2 * std::cos(s(1)));
    };
    w.jacobian = [p](const Vec& s) {
        Eigen::Matrix<double, 2, Eigen::Dynamic> J = Eigen::Matrix<double, 2, Eigen::Dynamic>::Zero(2, s.size());
        J(0, 0) = p.l1 * std::cos(s(0));
        J(0, 1) = p.l2 * std::cos(s(1));
        J(1, 0) = -p.l1 * std::sin(s(0));
        J(1, 1) = -p.l2 * std::sin(s(1));
        return J;
    };
    return w;
}

WorkspaceMap planar_position(int ds, int ix, int iy)
{
    WorkspaceMap w;
    w.position = [ix, iy](const Vec& s) { return Vec2(s(ix), s(iy)); };
    w.jacobian = [ds, ix, iy](const Vec&) {
        Eigen::Matrix<double, 2, Eigen::Dynamic> J = Eigen::Matrix<double, 2, Eigen::Dynamic>::Zero(2, ds);
        J(0, ix) = 1.0;
        J(1, iy) = 1.0;
        return J;
    };
    return w;
}

WorkspaceMap workspace_for(const std::string& model_name)
{
    if (model_name == "pendulum2")
        return pendulum_end_effector();
    if (model_name == "car_kin")
        return planar_position(4);
    throw Error(ErrorCode::InvalidArgument, "no workspace map for model '" + model_name + "'");
}

EqualityPart dyn_consistency(const Layout& l, const Vec& x, const DynamicsModel& m, int k)
{
    if (k < 0 || k >= l.H)
        throw Error(ErrorCode::InvalidArgument, "consistency index out of range");
    const StepJacobians J = jacobians(m, state_block(l, x, k), action_block(l, x, k));
    const Vec res = state_block(l, x, k + 1) - J.next;
    EqualityPart part;
    part.residual = res.norm();
    part.grad_sq.offset = l.state_offset(k);
    part.grad_sq.values.resize(2 * l.ds + l.da);
    part.grad_sq.values.head(l.ds) = -2.0 * J.Js.transpose() * res;
    part.grad_sq.values.segment(l.ds, l.da) = -2.0 * J.Ja.transpose() * res;
    part.grad_sq.values.tail(l.ds) = 2.0 * res;
    return part;
}

EqualityPart initial_alignment(const Layout& l, const Vec& x, const Vec& s_cur)
{
    if (s_cur.size() != l.ds)
        throw Error(ErrorCode::ShapeError, "s_cur dimension mismatch");
    const Vec e = state_block(l, x, 0) - s_cur;
    EqualityPart part;
    part.residual = e.norm();
    part.grad_sq.offset = l.state_offset(0);
    part.grad_sq.values = 2.0 * e;
    return part;
}

EqualityAggregate aggregate_equality(const std::vector<EqualityPart>& parts, Index dim)
{
    EqualityAggregate agg;
    agg.gradient = Vec::Zero(dim);
    for (const EqualityPart& p : parts) {
        agg.value += p.residual * p.residual;
        p.grad_sq.add_to(agg.gradient);
    }
    return agg;
}

double state_barrier_value(const Vec& s, const ObstacleSet& obs, const WorkspaceMap& ws)
{
    if (obs.empty())
        return -std::numeric_limits<double>::infinity();
    return -obs.clearance(ws.position(s)).value;
}

Barrier state_barrier(const Layout& l, const Vec& x, const ObstacleSet& obs, const WorkspaceMap& ws, int k)
{
    if (k < 0 || k > l.H)
        throw Error(ErrorCode::InvalidArgument, "state barrier index out of range");
    if (obs.empty())
        throw Error(ErrorCode::InvalidArgument, "state barrier needs a nonempty obstacle set");
    const Vec s = state_block(l, x, k);
    const Clearance c = obs.clearance(ws.position(s));
    Barrier b;
    b.value = -c.value;
    b.kind = BarrierKind::State;
    b.k = k;
    b.grad.offset = l.state_offset(k);
    b.grad.values = -(ws.jacobian(s).transpose() * c.grad);
    return b;
}

Barrier action_barrier(const Layout& l, const Vec& x, const Vec& bounds, int k, int i)
{
    if (k < 0 || k >= l.H || i < 0 || i >= l.da)
        throw Error(ErrorCode::InvalidArgument, "action barrier index out of range");
    if (bounds.size() != l.da)
        throw Error(ErrorCode::ShapeError, "action bounds dimension mismatch");
    const double a = x(l.action_offset(k) + i);
    Barrier b;
    b.value = a * a - bounds(i) * bounds(i);
    b.kind = BarrierKind::Action;
    b.k = k;
    b.component = i;
    b.grad.offset = l.action_offset(k) + i;
    b.grad.values = Vec::Constant(1, 2.0 * a);
    return b;
}

std::vector<Barrier> action_barriers(const Layout& l, const Vec& x, const Vec& bounds, int k)
{
    std::vector<Barrier> out;
    for (int i = 0; i < l.da; ++i)
        out.push_back(action_barrier(l, x, bounds, k, i));
    return out;
}

} // namespace cflow
