#include "cflow/ptzf.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace cflow {

namespace {

// Substep bound in the stretched time tau = t / (T - t). In tau the rate map
// reads dr/dtau = -gamma_r, which is smooth even as t -> T.
constexpr double kMaxTauStep = 0.02;
// Below this magnitude r is treated as zero, the fixed point of every class-K rate.
constexpr double kUnderflow = 1e-250;

double to_tau(double t, double T) { return t / (T - t); }
double from_tau(double tau, double T) { return T * tau / (1.0 + tau); }

} // namespace

ZeroingSchedule ZeroingSchedule::linear(double r0, double c_gamma, double t_pre, double c_r)
{
    if (!(t_pre > 0.0) || !(c_gamma > 0.0) || c_r < 0.0 || c_r >= 1.0)
        throw Error(ErrorCode::InvalidArgument, "linear schedule needs t_pre > 0, c_gamma > 0, c_r in [0,1)");
    ZeroingSchedule s;
    s.mode_ = Mode::ClosedFormLinear;
    s.r0_ = r0;
    s.t_pre_ = t_pre;
    s.c_r_ = c_r;
    s.c_gamma_ = c_gamma;
    return s;
}

ZeroingSchedule ZeroingSchedule::numeric(double r0, Rate rate, const std::vector<double>& grid, double t_pre,
                                         double c_r)
{
    if (!rate)
        throw Error(ErrorCode::InvalidArgument, "numeric schedule needs a rate map");
    if (grid.empty() || grid.front() != 0.0 || grid.back() >= t_pre)
        throw Error(ErrorCode::InvalidArgument, "numeric schedule grid must start at 0 and end before t_pre");
    ZeroingSchedule s;
    s.mode_ = Mode::Numeric;
    s.r0_ = r0;
    s.t_pre_ = t_pre;
    s.c_r_ = c_r;
    s.rate_ = std::move(rate);
    s.grid_ = grid;
    s.values_.resize(grid.size());
    s.values_[0] = r0;
    for (size_t l = 1; l < grid.size(); ++l)
        s.values_[l] = s.advance(grid[l - 1], s.values_[l - 1], grid[l]);
    return s;
}

// RK4 in tau between two flow times. Steps are also limited so one step
// changes r by at most a quarter of |r|, which keeps fast rates stable.
double ZeroingSchedule::advance(double t0, double r, double t1) const
{
    const double T = t_pre_;
    const double b = to_tau(t1, T);
    auto f = [&](double tau, double x) { return -rate_(from_tau(tau, T), x); };
    double tau = to_tau(t0, T);
    while (tau < b) {
        if (std::abs(r) < kUnderflow)
            return 0.0;
        const double k1 = f(tau, r);
        double h = std::min(kMaxTauStep, b - tau);
        if (k1 != 0.0)
            h = std::min(h, 0.25 * std::abs(r) / std::abs(k1));
        const double k2 = f(tau + 0.5 * h, r + 0.5 * h * k1);
        const double k3 = f(tau + 0.5 * h, r + 0.5 * h * k2);
        const double k4 = f(tau + h, r + h * k3);
        r += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        tau = h >= b - tau ? b : tau + h;
    }
    return r;
}

ScheduleValue ZeroingSchedule::eval(double t) const
{
    if (t < 0.0)
        throw Error(ErrorCode::InvalidArgument, "schedule time must be nonnegative");
    const double T = t_pre_;
    if (t >= T)
        return {0.0, 0.0};
    const double scale = T / ((T - t) * (T - t));
    if (mode_ == Mode::ClosedFormLinear) {
        const double r = r0_ * std::exp(-c_gamma_ * t / (T - t));
        return {r, -c_gamma_ * scale * r};
    }
    // Start from the last stored grid point at or before t.
    const auto it = std::upper_bound(grid_.begin(), grid_.end(), t);
    const size_t l = size_t(std::distance(grid_.begin(), it)) - 1;
    const double r = grid_[l] == t ? values_[l] : advance(grid_[l], values_[l], t);
    return {r, -scale * rate_(t, r)};
}

ScheduleValue eval(const ZeroingSchedule& schedule, double t) { return schedule.eval(t); }

ZeroingSchedule make_equality_schedule(double g0, double margin, double c_gamma)
{
    if (g0 < 0.0)
        throw Error(ErrorCode::InvalidResidual, "equality residual must be nonnegative");
    if (margin < 0.0)
        throw Error(ErrorCode::InvalidArgument, "margin must be nonnegative");
    return ZeroingSchedule::linear(margin * g0, c_gamma);
}

ZeroingSchedule make_inequality_schedule(double h0, double c_gamma)
{
    return ZeroingSchedule::linear(h0, c_gamma);
}

double FreeGenerationBudget::xi0() const
{
    const double e = std::exp(c_g * c_r / (1.0 - c_r));
    return c_pt / (c_pt - c_g) * e / ((1.0 - c_r) * (1.0 - c_r));
}

double FreeGenerationBudget::xi_partial() const
{
    const double e = std::exp(c_g * c_r / (1.0 - c_r));
    return e / (c_pt - c_g) * (1.0 + c_pt * c_r / ((1.0 - c_r) * (1.0 - c_r)));
}

double free_generation_floor(const FreeGenerationBudget& b, double residual, double lipschitz, ResidualKind kind)
{
    if (!(b.c_pt > b.c_g) || !(b.c_g > 0.0))
        throw Error(ErrorCode::InvalidGainOrdering, "need c_pt > c_g > 0");
    if (b.c_r < 0.0 || b.c_r >= 1.0)
        throw Error(ErrorCode::InvalidArgument, "c_r must lie in [0,1)");
    if (kind == ResidualKind::Equality && residual < 0.0)
        throw Error(ErrorCode::InvalidResidual, "equality residual must be nonnegative");
    const double r = kind == ResidualKind::Inequality ? std::max(residual, 0.0) : residual;
    return b.xi0() * r + b.xi_partial() * lipschitz * b.v_bar;
}

} // namespace cflow
