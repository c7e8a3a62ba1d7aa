#include "cflow/guidance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cflow {

double ClassKGain::phi(double t) const
{
    const double tc = std::min(t, 1.0 - clamp_eps);
    return 1.0 / ((1.0 - tc) * (1.0 - tc));
}

double ClassKGain::phi_effective(double t, double h) const
{
    double p = phi(t);
    if (step_cap > 0.0 && h > 0.0)
        p = std::min(p, step_cap / (c_gain * h));
    return p;
}

GuidanceProblem assemble(const std::vector<ConstraintRow>& rows, const ClassKGain& gain, double t, const Vec& v,
                         const Vec& p_u, const Vec& p_delta, double h)
{
    const Index n = Index(rows.size()), d = v.size();
    if (p_u.size() != d || p_delta.size() != n)
        throw Error(ErrorCode::ShapeError, "assemble: weight sizes do not match rows/dimension");
    GuidanceProblem p;
    p.rho.resize(n);
    p.eta.resize(n, d);
    p.p_u = p_u;
    p.p_delta = p_delta;
    for (Index j = 0; j < n; ++j) {
        const ConstraintRow& r = rows[size_t(j)];
        if (r.gradient.size() != d)
            throw Error(ErrorCode::ShapeError, "assemble: gradient row " + std::to_string(j) + " has wrong length");
        p.eta.row(j) = r.gradient.transpose();
        p.rho(j) = r.gradient.dot(v) - gain(t, r.reference.value - r.residual, h) - r.reference.derivative;
    }
    return p;
}

namespace {

double objective(const GuidanceProblem& p, const Vec& u, const Vec& delta)
{
    return u.dot(p.p_u.cwiseProduct(u)) + delta.dot(p.p_delta.cwiseProduct(delta));
}

// Minimizer with the rows in `act` held as equalities rho + eta u = delta and
// the others dropped. Returns u and the multiplier-like y (delta = y / w).
struct RestrictedSolve {
    Vec u;
    Vec y;
    bool ok = true;
};

RestrictedSolve solve_restricted(const GuidanceProblem& p, const std::vector<Index>& act)
{
    const Index d = p.dim(), m = Index(act.size());
    RestrictedSolve out;
    out.u = Vec::Zero(d);
    out.y = Vec::Zero(m);
    if (m == 0)
        return out;
    Mat eta_a(m, d);
    Vec rho_a(m), w_a(m);
    for (Index i = 0; i < m; ++i) {
        eta_a.row(i) = p.eta.row(act[size_t(i)]);
        rho_a(i) = p.rho(act[size_t(i)]);
        w_a(i) = p.p_delta(act[size_t(i)]);
    }
    const Vec pinv = p.p_u.cwiseInverse();
    if (m <= d) {
        const Mat scaled = eta_a * pinv.asDiagonal();
        Mat lambda = scaled * eta_a.transpose();
        lambda.diagonal() += w_a.cwiseInverse();
        Eigen::LDLT<Mat> ldlt(lambda);
        if (ldlt.info() != Eigen::Success) {
            out.ok = false;
            return out;
        }
        out.y = ldlt.solve(rho_a);
        out.u = -scaled.transpose() * out.y;
    } else {
        Mat K = eta_a.transpose() * w_a.asDiagonal() * eta_a;
        K.diagonal() += p.p_u;
        Eigen::LDLT<Mat> ldlt(K);
        if (ldlt.info() != Eigen::Success) {
            out.ok = false;
            return out;
        }
        out.u = -ldlt.solve(eta_a.transpose() * w_a.cwiseProduct(rho_a));
        out.y = w_a.cwiseProduct(rho_a + eta_a * out.u);
    }
    return out;
}

GuidanceSolution zero_solution(const GuidanceProblem& p)
{
    GuidanceSolution s;
    s.u = Vec::Zero(p.dim());
    s.delta = Vec::Zero(p.rows());
    s.active = false;
    return s;
}

// delta_j = max(0, rho_j + eta_j u): optimal slack for a fixed u.
GuidanceSolution finish(const GuidanceProblem& p, Vec u)
{
    GuidanceSolution s;
    s.delta = (p.rho + p.eta * u).cwiseMax(0.0);
    s.u = std::move(u);
    s.active = (s.delta.array() > 0.0).any();
    return s;
}

std::vector<Index> active_rows(const GuidanceProblem& p, const Vec& u)
{
    std::vector<Index> act;
    const Vec r = p.rho + p.eta * u;
    for (Index j = 0; j < r.size(); ++j)
        if (r(j) > 0.0)
            act.push_back(j);
    return act;
}

bool enumerate(const GuidanceProblem& p, GuidanceSolution& best)
{
    const Index n = p.rows();
    const double scale = 1.0 + p.rho.cwiseAbs().maxCoeff();
    const double tol = 1e-10 * scale;
    double best_obj = std::numeric_limits<double>::infinity();
    bool found = false;
    std::vector<Index> act;
    for (std::uint64_t mask = 0; mask < (std::uint64_t(1) << n); ++mask) {
        act.clear();
        for (Index j = 0; j < n; ++j)
            if (mask & (std::uint64_t(1) << j))
                act.push_back(j);
        const RestrictedSolve rs = solve_restricted(p, act);
        if (!rs.ok)
            continue;
        if ((rs.y.array() < -tol).any())
            continue;
        const Vec r = p.rho + p.eta * rs.u;
        bool feasible = true;
        for (Index j = 0; j < n && feasible; ++j)
            if (!(mask & (std::uint64_t(1) << j)) && r(j) > tol)
                feasible = false;
        if (!feasible)
            continue;
        GuidanceSolution cand = finish(p, rs.u);
        const double obj = objective(p, cand.u, cand.delta);
        if (obj < best_obj) {
            best_obj = obj;
            best = std::move(cand);
            found = true;
        }
    }
    return found;
}

Vec penalty_gradient(const GuidanceProblem& p, const Vec& u)
{
    const Vec r = (p.rho + p.eta * u).cwiseMax(0.0);
    return 2.0 * (p.p_u.cwiseProduct(u) + p.eta.transpose() * p.p_delta.cwiseProduct(r));
}

// Exact minimizer over alpha in [0, 1] of F(u + alpha d). F is convex and
// piecewise quadratic along the line, so its slope is monotone.
double line_search(const GuidanceProblem& p, const Vec& u, const Vec& d)
{
    const Vec r = p.rho + p.eta * u;
    const Vec e = p.eta * d;
    const double a0 = d.dot(p.p_u.cwiseProduct(u)), a1 = d.dot(p.p_u.cwiseProduct(d));
    auto slope = [&](double alpha) {
        double g = a0 + alpha * a1;
        for (Index j = 0; j < r.size(); ++j)
            g += p.p_delta(j) * std::max(0.0, r(j) + alpha * e(j)) * e(j);
        return g;
    };
    if (slope(1.0) <= 0.0)
        return 1.0;
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        (slope(mid) > 0.0 ? hi : lo) = mid;
    }
    return 0.5 * (lo + hi);
}

// Solves (P + E'WE) d = -g/2 for the rows in `act`. Re-solving from the
// current gradient refines the step when the reduced system is ill-conditioned.
bool newton_step(const GuidanceProblem& p, const std::vector<Index>& act, const Vec& g, Vec& d)
{
    const Index n = p.dim(), m = Index(act.size());
    const Vec pinv = p.p_u.cwiseInverse();
    const Vec rhs = -0.5 * g;
    Mat e(m, n);
    Vec w(m);
    for (Index i = 0; i < m; ++i) {
        e.row(i) = p.eta.row(act[size_t(i)]);
        w(i) = p.p_delta(act[size_t(i)]);
    }
    if (m <= n) {
        const Vec pr = pinv.cwiseProduct(rhs);
        if (m == 0) {
            d = pr;
            return true;
        }
        Mat lambda = e * pinv.asDiagonal() * e.transpose();
        lambda.diagonal() += w.cwiseInverse();
        Eigen::LDLT<Mat> ldlt(lambda);
        if (ldlt.info() != Eigen::Success)
            return false;
        d = pr - pinv.cwiseProduct(e.transpose() * ldlt.solve(e * pr));
    } else {
        Mat k = e.transpose() * w.asDiagonal() * e;
        k.diagonal() += p.p_u;
        Eigen::LDLT<Mat> ldlt(k);
        if (ldlt.info() != Eigen::Success)
            return false;
        d = ldlt.solve(rhs);
    }
    return d.allFinite();
}

// Semismooth Newton on F(u) = u'P u + sum_j w_j max(0, rho_j + eta_j u)^2.
// A new active set takes the direct restricted minimizer; a repeated one takes
// a step from the current gradient, which refines away round-off.
// Stationarity is measured against the gradient at u = 0, which carries the
// scale of eta and the slack weights.
bool newton(const GuidanceProblem& p, GuidanceSolution& out)
{
    Vec u = Vec::Zero(p.dim()), dir;
    const double g0 = penalty_gradient(p, u).cwiseAbs().maxCoeff();
    const double scale = 1.0 + std::max(p.rho.cwiseAbs().maxCoeff(), g0);
    std::vector<Index> prev;
    for (int it = 0; it < 200; ++it) {
        const Vec g = penalty_gradient(p, u);
        if (g.cwiseAbs().maxCoeff() <= 1e-14 * scale)
            break;
        std::vector<Index> act = active_rows(p, u);
        if (it == 0 || act != prev) {
            const RestrictedSolve rs = solve_restricted(p, act);
            if (!rs.ok)
                return false;
            dir = rs.u - u;
        } else if (!newton_step(p, act, g, dir)) {
            return false;
        }
        prev = std::move(act);
        const double alpha = line_search(p, u, dir);
        if (alpha * dir.norm() <= 1e-14 * (1.0 + u.norm()))
            break;
        u += alpha * dir;
    }
    out = finish(p, u);
    // Near-parallel rows with large gradients stall around 1e-10 relative.
    return kkt_residual(p, out, QpForm::Inequality) <= 1e-9 * scale;
}

} // namespace

GuidanceSolution solve_closed_form(const GuidanceProblem& p)
{
    if ((p.rho.array() <= kRowPositiveTol).any())
        return zero_solution(p);
    const Vec pinv = p.p_u.cwiseInverse();
    const Mat scaled = p.eta * pinv.asDiagonal();
    Mat lambda = scaled * p.eta.transpose();
    lambda.diagonal() += p.p_delta.cwiseInverse();
    Eigen::LLT<Mat> llt(lambda);
    const Vec diag = lambda.diagonal();
    bool ill = llt.info() != Eigen::Success;
    if (!ill) {
        const Vec ld = llt.matrixLLT().diagonal();
        ill = (ld.minCoeff() * ld.minCoeff()) < 1e-14 * diag.maxCoeff();
    }
    if (ill) {
        GuidanceSolution s = solve_active_set(p);
        s.conditioning_warning = true;
        return s;
    }
    const Vec y = llt.solve(p.rho);
    GuidanceSolution s;
    s.u = -scaled.transpose() * y;
    s.delta = p.p_delta.cwiseInverse().cwiseProduct(y);
    s.active = true;
    return s;
}

GuidanceSolution solve_active_set(const GuidanceProblem& p)
{
    if ((p.rho.array() <= kRowPositiveTol).all())
        return zero_solution(p);
    GuidanceSolution s;
    if (p.rows() <= kEnumerationRows && enumerate(p, s))
        return s;
    if (newton(p, s))
        return s;
    throw Error(ErrorCode::QPFailure, "active-set iteration did not converge");
}

GuidanceSolution solve(const GuidanceProblem& p)
{
    const bool any = (p.rho.array() > kRowPositiveTol).any();
    if (!any)
        return zero_solution(p);
    if ((p.rho.array() > kRowPositiveTol).all())
        return solve_closed_form(p);
    return solve_active_set(p);
}

double kkt_residual(const GuidanceProblem& p, const GuidanceSolution& sol, QpForm form)
{
    if (p.rows() == 0)
        return 0.0;
    const Vec lam = 2.0 * p.p_delta.cwiseProduct(sol.delta);
    const Vec stat = 2.0 * p.p_u.cwiseProduct(sol.u) + p.eta.transpose() * lam;
    const Vec gap = p.rho + p.eta * sol.u - sol.delta;
    double res = stat.size() ? stat.cwiseAbs().maxCoeff() : 0.0;
    if (form == QpForm::SlackEquality && sol.active)
        return std::max(res, gap.cwiseAbs().maxCoeff());
    res = std::max(res, gap.cwiseMax(0.0).maxCoeff());
    res = std::max(res, (-sol.delta).cwiseMax(0.0).maxCoeff());
    res = std::max(res, lam.cwiseProduct(gap).cwiseAbs().maxCoeff());
    return res;
}

} // namespace cflow
