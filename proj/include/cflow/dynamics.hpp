#pragma once

#include "cflow/trajectory.hpp"
#include "cflow/types.hpp"

#include <unsupported/Eigen/AutoDiff>

#include <cmath>
#include <functional>
#include <string>

namespace cflow {

/// Largest d_s + d_a supported by the dual-number path. Fixed capacity keeps
/// the derivative vectors off the heap.
inline constexpr int kMaxDualDim = 16;
using DualDer = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDualDim, 1>;
using Dual = Eigen::AutoDiffScalar<DualDer>;

struct PendulumParams {
    double m1 = 1.0;
    double m2 = 1.0;
    double l1 = 1.0;
    double l2 = 1.0;
    double g = 9.8;
    /// Add the 2*w1*w2 cross term to the joint-1 Coriolis force. Off by default:
    /// that variant does not conserve energy.
    bool coriolis_cross_term = false;
};

struct CarParams {
    double wheelbase = 2.7;
    double steer_max = 1.0;
    double accel_max = 35.0;
};

struct LinearParams {
    Mat A;
    Mat B;
};

/// Double pendulum with absolute link angles q = [q1, q2], s = [q1, q2, w1, w2].
template <typename S>
VecX<S> pendulum_f(const PendulumParams& p, const VecX<S>& s, const VecX<S>& a)
{
    using std::cos;
    using std::sin;
    const S q1 = s(0), q2 = s(1), w1 = s(2), w2 = s(3);
    const S dq = q2 - q1;
    const S c = cos(dq), sn = sin(dq);
    const double m12 = p.m1 + p.m2;
    // Constant entries stay double: mixing constant duals into lazy dual
    // expressions breaks derivative sizes.
    const double M11 = m12 * p.l1 * p.l1;
    const S M12 = p.m2 * p.l1 * p.l2 * c;
    const double M22 = p.m2 * p.l2 * p.l2;
    const S C1 = p.coriolis_cross_term ? S(-p.m2 * p.l1 * p.l2 * (2.0 * w1 * w2 + w2 * w2) * sn)
                                    : S(-p.m2 * p.l1 * p.l2 * w2 * w2 * sn);
    const S C2 = p.m2 * p.l1 * p.l2 * w1 * w1 * sn;
    const S G1 = m12 * p.g * p.l1 * sin(q1);
    const S G2 = p.m2 * p.g * p.l2 * sin(q2);
    const S r1 = a(0) - C1 - G1;
    const S r2 = a(1) - C2 - G2;
    const S det = M11 * M22 - M12 * M12;
    VecX<S> out(4);
    out << w1, w2, (M22 * r1 - M12 * r2) / det, (M11 * r2 - M12 * r1) / det;
    return out;
}

/// Kinematic bicycle, s = [x, y, theta, v], a = [steer, accel].
template <typename S>
VecX<S> car_f(const CarParams& p, const VecX<S>& s, const VecX<S>& a)
{
    using std::cos;
    using std::sin;
    using std::tan;
    VecX<S> out(4);
    out << s(3) * cos(s(2)), s(3) * sin(s(2)), s(3) / p.wheelbase * tan(a(0)), a(1);
    return out;
}

template <typename S>
VecX<S> linear_f(const LinearParams& p, const VecX<S>& s, const VecX<S>& a)
{
    VecX<S> out(p.A.rows());
    for (Index i = 0; i < p.A.rows(); ++i) {
        S acc = p.A(i, 0) * s(0);
        for (Index j = 1; j < p.A.cols(); ++j)
            acc += p.A(i, j) * s(j);
        for (Index j = 0; j < p.B.cols(); ++j)
            acc += p.B(i, j) * a(j);
        out(i) = acc;
    }
    return out;
}

/// Continuous model with zero-order-hold discretization. The vector field is
/// stored twice, once over doubles and once over duals, from the same functor.
class DynamicsModel {
public:
    using FieldD = std::function<Vec(const Vec&, const Vec&)>;
    using FieldAD = std::function<VecX<Dual>(const VecX<Dual>&, const VecX<Dual>&)>;

    DynamicsModel() = default;
    DynamicsModel(std::string name, int ds, int da, double dt, int substeps, FieldD f, FieldAD f_ad);

    const std::string& name() const { return name_; }
    int ds() const { return ds_; }
    int da() const { return da_; }
    double dt() const { return dt_; }
    int substeps() const { return substeps_; }
    void set_substeps(int n);

    Vec f(const Vec& s, const Vec& a) const { return f_(s, a); }
    VecX<Dual> f(const VecX<Dual>& s, const VecX<Dual>& a) const { return f_ad_(s, a); }

private:
    std::string name_;
    int ds_ = 0;
    int da_ = 0;
    double dt_ = 0.1;
    int substeps_ = 10;
    FieldD f_;
    FieldAD f_ad_;
};

/// Default substep is 1e-2 s (10 RK4 substeps per 0.1 s interval).
DynamicsModel make_pendulum(const PendulumParams& p = {}, double dt = 0.1, int substeps = 10);
DynamicsModel make_car(const CarParams& p = {}, double dt = 0.1, int substeps = 10);
DynamicsModel make_linear(const LinearParams& p, double dt = 0.1, int substeps = 10);
/// Constant-derivative model, used by tests.
DynamicsModel make_constant(const Vec& c, int da, double dt = 0.1);
DynamicsModel make_model(const std::string& name, double dt = 0.1, int substeps = 10);

/// RK4 zero-order-hold step over one interval, generic over the scalar.
template <typename S>
VecX<S> rk4_step(const DynamicsModel& m, const VecX<S>& s, const VecX<S>& a)
{
    const int n = m.substeps();
    const double h = m.dt() / n;
    VecX<S> x = s;
    for (int i = 0; i < n; ++i) {
        const VecX<S> k1 = m.f(x, a);
        const VecX<S> k2 = m.f(VecX<S>(x + (0.5 * h) * k1), a);
        const VecX<S> k3 = m.f(VecX<S>(x + (0.5 * h) * k2), a);
        const VecX<S> k4 = m.f(VecX<S>(x + h * k3), a);
        x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return x;
}

/// f^k(s, a).
Vec discretize(const DynamicsModel& m, const Vec& s, const Vec& a);

struct StepJacobians {
    Vec next;
    Mat Js; // d_s x d_s
    Mat Ja; // d_s x d_a
};

StepJacobians jacobians(const DynamicsModel& m, const Vec& s, const Vec& a);

/// States s^0..s^H from s0 and the action rows.
Mat rollout(const DynamicsModel& m, const Vec& s0, const Mat& actions);
/// Replace the states of `traj` by a rollout of its actions from `s0`.
Trajectory rollout_trajectory(const DynamicsModel& m, const Vec& s0, const Mat& actions);

/// Total mechanical energy of the double pendulum.
double pendulum_energy(const PendulumParams& p, const Vec& s);

} // namespace cflow
