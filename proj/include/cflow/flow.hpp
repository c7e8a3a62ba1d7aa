#pragma once

#include "cflow/types.hpp"

#include <functional>
#include <random>
#include <string>
#include <vector>

namespace cflow {

/// Linear interpolation x_t = alpha(t) x1 + beta(t) x0 with alpha = t, beta = 1 - t.
struct InterpolationSchedule {
    static double alpha(double t) { return t; }
    static double beta(double t) { return 1.0 - t; }
    static double dalpha(double) { return 1.0; }
    static double dbeta(double) { return -1.0; }
};

enum class FieldKind { Empirical, GaussianMixture, Constant };

/// Closed-form marginal velocity of the linear probability path for an
/// empirical or Gaussian-mixture target. Data points are rows.
class VelocityField {
public:
    static VelocityField empirical(Mat data, double clamp_eps = 1e-3);
    static VelocityField gaussian_mixture(Vec weights, Mat means, Vec sigmas, double clamp_eps = 1e-3);
    static VelocityField constant(Vec c, double clamp_eps = 1e-3);

    FieldKind kind() const { return kind_; }
    Index dim() const { return dim_; }
    double clamp_eps() const { return eps_; }
    const Mat& points() const { return points_; }
    const Vec& weights() const { return weights_; }
    const Vec& sigmas() const { return sigmas_; }

    Vec operator()(double t, const Vec& x) const;
    /// Posterior component weights at (t, x); sums to one.
    Vec posterior(double t, const Vec& x) const;

private:
    FieldKind kind_ = FieldKind::Constant;
    Index dim_ = 0;
    double eps_ = 1e-3;
    Mat points_;  // data points or component means, one per row
    Vec weights_; // mixture weights (GMM only)
    Vec sigmas_;  // component scales (GMM only)
    Vec constant_;
};

Vec empirical_velocity(const VelocityField& field, double t, const Vec& x);
Vec gmm_velocity(const VelocityField& field, double t, const Vec& x);

/// Guidance callback u(t, x). `v` is the prior velocity already evaluated at
/// (t, x), passed so hooks do not have to recompute it.
using GuidanceHook = std::function<Vec(double t, const Vec& x, const Vec& v)>;

struct FlowTrace {
    std::vector<double> t;
    std::vector<Vec> x;

    const Vec& final() const { return x.back(); }
};

/// Time grid t_l = l (1 - eps) / steps, l = 0..steps.
std::vector<double> flow_grid(int steps, double clamp_eps);

/// Explicit Euler on dx/dt = v(t, x) + u(t, x) over flow_grid, then one
/// extrapolation step of length eps from the clamp time to t = 1.
FlowTrace integrate(const VelocityField& field, const GuidanceHook& hook, const Vec& x0, int steps = 200);

/// Same integrator for an arbitrary right-hand side.
FlowTrace integrate_rhs(const std::function<Vec(double, const Vec&)>& rhs, const GuidanceHook& hook, const Vec& x0,
                        int steps, double clamp_eps);

/// Standard normal draw with the outlier filter ||x0|| <= 6 sqrt(d).
Vec sample_prior(std::mt19937_64& rng, Index d);

/// Monte-Carlo conditional flow-matching loss of `field` against the dataset rows.
double cfm_loss(const VelocityField& field, const Mat& dataset, int sample_count, std::uint64_t seed = 0);

void write_trace_csv(const std::string& path, const FlowTrace& trace);

} // namespace cflow
