#pragma once

#include "cflow/ptzf.hpp"
#include "cflow/types.hpp"

#include <vector>

namespace cflow {

/// gamma(a) = c_gain * phi(t) * a with phi(t) = 1/(1-t)^2, clamped at the
/// flow clamp time. `step_cap` > 0 additionally caps h * c_gain * phi at
/// step_cap for an Euler step of length h.
struct ClassKGain {
    double c_gain = 2.0;
    double clamp_eps = 1e-3;
    double step_cap = 0.0;

    double phi(double t) const;
    double phi_effective(double t, double h) const;
    double operator()(double t, double a, double h = 0.0) const { return c_gain * phi_effective(t, h) * a; }
};

/// One constraint row before assembly: residual r(x), gradient dr/dx and the
/// zeroing reference it must track.
struct ConstraintRow {
    double residual = 0.0;
    Vec gradient;
    ScheduleValue reference;
};

/// min u' P_u u + delta' P_delta delta  s.t.  rho + eta u <= delta  (or == delta).
/// Row 0 is the equality row. Both weights are diagonal.
struct GuidanceProblem {
    Vec rho;
    Mat eta;
    Vec p_u;
    Vec p_delta;

    Index rows() const { return rho.size(); }
    Index dim() const { return eta.cols(); }
};

struct GuidanceSolution {
    Vec u;
    Vec delta;
    bool active = false;
    bool conditioning_warning = false;
};

/// rho_j = eta_j . v - gamma(ref_j - residual_j) - dref_j/dt.
GuidanceProblem assemble(const std::vector<ConstraintRow>& rows, const ClassKGain& gain, double t, const Vec& v,
                         const Vec& p_u, const Vec& p_delta, double h = 0.0);

inline constexpr double kRowPositiveTol = 1e-12;

/// Closed form of the slack-equality QP when every row is violated, zero otherwise.
GuidanceSolution solve_closed_form(const GuidanceProblem& p);
/// Exact minimizer of the inequality form. Enumerates active sets up to
/// kEnumerationRows rows and uses a semismooth Newton iteration above that.
GuidanceSolution solve_active_set(const GuidanceProblem& p);
/// Zero if nothing is violated, closed form if everything is, active set otherwise.
GuidanceSolution solve(const GuidanceProblem& p);

inline constexpr Index kEnumerationRows = 12;

enum class QpForm { SlackEquality, Inequality };

/// Max of stationarity, primal feasibility and complementarity residuals.
double kkt_residual(const GuidanceProblem& p, const GuidanceSolution& sol, QpForm form);

} // namespace cflow
