#pragma once

#include "cflow/types.hpp"

#include <functional>
#include <vector>

namespace cflow {

struct ScheduleValue {
    double value = 0.0;
    double derivative = 0.0;
};

/// Prescribed-time zeroing function r(t) driven by
///   dr/dt = -T/(T - t)^2 * gamma_r(t, r),  t < T,   r = 0 for t >= T.
class ZeroingSchedule {
public:
    enum class Mode { ClosedFormLinear, Numeric };
    using Rate = std::function<double(double t, double r)>;

    /// r(t) = r0 exp(-c_gamma t / (T - t)).
    static ZeroingSchedule linear(double r0, double c_gamma = 1.0, double t_pre = 1.0, double c_r = 0.0);
    /// Integrates the rate map on `grid` (increasing, starting at 0, ending before t_pre).
    static ZeroingSchedule numeric(double r0, Rate rate, const std::vector<double>& grid, double t_pre = 1.0,
                                   double c_r = 0.0);
    static ZeroingSchedule zero() { return linear(0.0); }

    ScheduleValue eval(double t) const;

    Mode mode() const { return mode_; }
    double r0() const { return r0_; }
    double t_pre() const { return t_pre_; }
    double c_r() const { return c_r_; }
    double c_gamma() const { return c_gamma_; }

private:
    Mode mode_ = Mode::ClosedFormLinear;
    double r0_ = 0.0;
    double t_pre_ = 1.0;
    double c_r_ = 0.0;
    double c_gamma_ = 1.0;
    Rate rate_;
    std::vector<double> grid_;
    std::vector<double> values_;

    double advance(double t0, double r, double t1) const;
};

ScheduleValue eval(const ZeroingSchedule& schedule, double t);

/// Equality schedule with r0 = margin * g0.
ZeroingSchedule make_equality_schedule(double g0, double margin = 2.0, double c_gamma = 1.0);
/// Inequality schedule with r0 = h0 (may be negative).
ZeroingSchedule make_inequality_schedule(double h0, double c_gamma = 1.0);

/// Gains and bounds entering the free-generation floor.
struct FreeGenerationBudget {
    double c_pt = 2.0;
    double c_g = 1.0;
    double c_r = 0.0;
    double v_bar = 0.0;

    double xi0() const;
    double xi_partial() const;
};

enum class ResidualKind { Equality, Inequality };

/// Smallest r0 that keeps the guidance inactive on [0, c_r]:
///   xi0 * residual + xi_partial * L * v_bar.
/// Inequality residuals enter as max(h0, 0).
double free_generation_floor(const FreeGenerationBudget& budget, double residual, double lipschitz,
                             ResidualKind kind);

} // namespace cflow
