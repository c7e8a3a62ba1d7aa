#pragma once

#include "cflow/types.hpp"

#include <vector>

namespace cflow {

/// Index map of the interleaved layout [s0, a0, s1, a1, ..., a^{H-1}, s^H].
struct Layout {
    int H = 1;
    int ds = 1;
    int da = 1;

    Index dim() const { return Index(H + 1) * ds + Index(H) * da; }
    Index stride() const { return ds + da; }
    Index state_offset(int k) const { return Index(k) * stride(); }
    Index action_offset(int k) const { return Index(k) * stride() + ds; }
    Index states_dim() const { return Index(H + 1) * ds; }
    Index actions_dim() const { return Index(H) * da; }

    bool operator==(const Layout&) const = default;
};

template <typename Derived>
auto state_block(const Layout& l, Eigen::MatrixBase<Derived>& x, int k)
{
    return x.segment(l.state_offset(k), l.ds);
}
template <typename Derived>
auto state_block(const Layout& l, const Eigen::MatrixBase<Derived>& x, int k)
{
    return x.segment(l.state_offset(k), l.ds);
}
template <typename Derived>
auto action_block(const Layout& l, Eigen::MatrixBase<Derived>& x, int k)
{
    return x.segment(l.action_offset(k), l.da);
}
template <typename Derived>
auto action_block(const Layout& l, const Eigen::MatrixBase<Derived>& x, int k)
{
    return x.segment(l.action_offset(k), l.da);
}

struct Trajectory {
    Layout layout;
    Vec data;

    Trajectory() = default;
    explicit Trajectory(const Layout& l) : layout(l), data(Vec::Zero(l.dim())) {}
    Trajectory(const Layout& l, Vec x);

    int H() const { return layout.H; }
    auto state(int k) { return state_block(layout, data, k); }
    auto state(int k) const { return state_block(layout, data, k); }
    auto action(int k) { return action_block(layout, data, k); }
    auto action(int k) const { return action_block(layout, data, k); }

    /// Row k holds s^k (H+1 rows).
    Mat states() const;
    /// Row k holds a^k (H rows).
    Mat actions() const;
    static Trajectory from_parts(const Mat& states, const Mat& actions);
};

/// Split into (T^s, T^a) and back; used by the path-planning mode.
Vec pack_states(const Layout& l, const Vec& x);
Vec pack_actions(const Layout& l, const Vec& x);
Vec interleave(const Layout& l, const Vec& states, const Vec& actions);

} // namespace cflow
