#include "cflow/dynamics.hpp"

#include <utility>

namespace cflow {

DynamicsModel::DynamicsModel(std::string name, int ds, int da, double dt, int substeps, FieldD f, FieldAD f_ad)
    : name_(std::move(name)), ds_(ds), da_(da), dt_(dt), substeps_(substeps), f_(std::move(f)), f_ad_(std::move(f_ad))
{
    if (ds <= 0 || da <= 0)
        throw Error(ErrorCode::InvalidArgument, "model dimensions must be positive");
    if (!(dt > 0.0))
        throw Error(ErrorCode::InvalidArgument, "dt must be positive");
    set_substeps(substeps);
}

void DynamicsModel::set_substeps(int n)
{
    if (n < 1)
        throw Error(ErrorCode::InvalidArgument, "substeps must be >= 1");
    substeps_ = n;
}

namespace {

template <typename F>
DynamicsModel wrap(std::string name, int ds, int da, double dt, int substeps, F fn)
{
    return DynamicsModel(
        std::move(name), ds, da, dt, substeps,
        [fn](const Vec& s, const Vec& a) { return fn(s, a); },
        [fn](const VecX<Dual>& s, const VecX<Dual>& a) {
            VecX<Dual> out = fn(s, a);
            // Outputs that do not depend on the inputs come back with empty derivatives.
            const Index n = s.size() ? s(0).derivatives().size() : 0;
            for (Index i = 0; i < out.size(); ++i)
                if (out(i).derivatives().size() != n)
                    out(i).derivatives() = DualDer::Zero(n);
            return out;
        });
}

} // namespace

DynamicsModel make_pendulum(const PendulumParams& p, double dt, int substeps)
{
    return wrap("pendulum2", 4, 2, dt, substeps, [p](const auto& s, const auto& a) { return pendulum_f(p, s, a); });
}

DynamicsModel make_car(const CarParams& p, double dt, int substeps)
{
    return wrap("car_kin", 4, 2, dt, substeps, [p](const auto& s, const auto& a) { return car_f(p, s, a); });
}

DynamicsModel make_linear(const LinearParams& p, double dt, int substeps)
{
    if (p.A.rows() != p.A.cols() || p.B.rows() != p.A.rows())
        throw Error(ErrorCode::ShapeError, "linear model A/B shape mismatch");
    return wrap("linear", int(p.A.rows()), int(p.B.cols()), dt, substeps,
                [p](const auto& s, const auto& a) { return linear_f(p, s, a); });
}

DynamicsModel make_constant(const Vec& c, int da, double dt)
{
    return wrap("constant", int(c.size()), da, dt, 1, [c](const auto& s, const auto&) {
        using S = typename std::decay_t<decltype(s)>::Scalar;
        return VecX<S>(c.template cast<S>());
    });
}

DynamicsModel make_model(const std::string& name, double dt, int substeps)
{
    if (name == "pendulum2")
        return make_pendulum({}, dt, substeps);
    if (name == "car_kin")
        return make_car({}, dt, substeps);
    throw Error(ErrorCode::InvalidArgument, "unknown model '" + name + "'");
}

Vec discretize(const DynamicsModel& m, const Vec& s, const Vec& a)
{
    return rk4_step<double>(m, s, a);
}

StepJacobians jacobians(const DynamicsModel& m, const Vec& s, const Vec& a)
{
    const int ds = m.ds(), da = m.da(), n = ds + da;
    if (n > kMaxDualDim)
        throw Error(ErrorCode::ShapeError, "d_s + d_a exceeds dual-number capacity");
    VecX<Dual> sd(ds), ad(da);
    for (int i = 0; i < ds; ++i)
        sd(i) = Dual(s(i), n, i);
    for (int i = 0; i < da; ++i)
        ad(i) = Dual(a(i), n, ds + i);
    const VecX<Dual> out = rk4_step<Dual>(m, sd, ad);
    StepJacobians J;
    J.next.resize(ds);
    J.Js.resize(ds, ds);
    J.Ja.resize(ds, da);
    for (int r = 0; r < ds; ++r) {
        J.next(r) = out(r).value();
        const auto& der = out(r).derivatives();
        for (int c = 0; c < n; ++c) {
            const double v = der.size() == n ? der(c) : 0.0;
            if (c < ds)
                J.Js(r, c) = v;
            else
                J.Ja(r, c - ds) = v;
        }
    }
    return J;
}

Mat rollout(const DynamicsModel& m, const Vec& s0, const Mat& actions)
{
    const Index H = actions.rows();
    Mat states(H + 1, m.ds());
    states.row(0) = s0.transpose();
    Vec s = s0;
    for (Index k = 0; k < H; ++k) {
        s = discretize(m, s, actions.row(k).transpose());
        states.row(k + 1) = s.transpose();
    }
    return states;
}

Trajectory rollout_trajectory(const DynamicsModel& m, const Vec& s0, const Mat& actions)
{
    return Trajectory::from_parts(rollout(m, s0, actions), actions);
}

double pendulum_energy(const PendulumParams& p, const Vec& s)
{
    const double q1 = s(0), q2 = s(1), w1 = s(2), w2 = s(3);
    const double kin = 0.5 * (p.m1 + p.m2) * p.l1 * p.l1 * w1 * w1 + 0.5 * p.m2 * p.l2 * p.l2 * w2 * w2
                       + p.m2 * p.l1 * p.l2 * std::cos(q2 - q1) * w1 * w2;
    // Potential consistent with the gravity term (m1+m2) g l1 sin q1 of the model.
    const double pot = -(p.m1 + p.m2) * p.g * p.l1 * std::cos(q1) - p.m2 * p.g * p.l2 * std::cos(q2);
    return kin + pot;
}

} // namespace cflow
