#include "cflow/flow.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <utility>

namespace cflow {

namespace {

void check_time(const VelocityField& f, double t)
{
    if (t < 0.0 || t > 1.0 - f.clamp_eps() + 1e-12)
        throw Error(ErrorCode::SingularTime, "t = " + std::to_string(t) + " beyond clamp 1 - " + std::to_string(f.clamp_eps()));
}

// Normalize log-weights in place; returns the weights.
Vec softmax(Vec logw)
{
    const double mx = logw.maxCoeff();
    Vec w = (logw.array() - mx).exp().matrix();
    return w / w.sum();
}

} // namespace

VelocityField VelocityField::empirical(Mat data, double clamp_eps)
{
    if (data.rows() == 0)
        throw Error(ErrorCode::EmptyPrior, "empirical field needs at least one data point");
    VelocityField f;
    f.kind_ = FieldKind::Empirical;
    f.dim_ = data.cols();
    f.eps_ = clamp_eps;
    f.points_ = std::move(data);
    return f;
}

VelocityField VelocityField::gaussian_mixture(Vec weights, Mat means, Vec sigmas, double clamp_eps)
{
    if (means.rows() == 0)
        throw Error(ErrorCode::EmptyPrior, "mixture needs at least one component");
    if (weights.size() != means.rows() || sigmas.size() != means.rows())
        throw Error(ErrorCode::ShapeError, "mixture weights/means/sigmas disagree in count");
    if ((sigmas.array() <= 0.0).any())
        throw Error(ErrorCode::InvalidPrior, "mixture scales must be positive");
    if ((weights.array() <= 0.0).any())
        throw Error(ErrorCode::InvalidPrior, "mixture weights must be positive");
    VelocityField f;
    f.kind_ = FieldKind::GaussianMixture;
    f.dim_ = means.cols();
    f.eps_ = clamp_eps;
    f.points_ = std::move(means);
    f.weights_ = weights / weights.sum();
    f.sigmas_ = std::move(sigmas);
    return f;
}

VelocityField VelocityField::constant(Vec c, double clamp_eps)
{
    VelocityField f;
    f.kind_ = FieldKind::Constant;
    f.dim_ = c.size();
    f.eps_ = clamp_eps;
    f.constant_ = std::move(c);
    return f;
}

Vec VelocityField::posterior(double t, const Vec& x) const
{
    const Index n = points_.rows();
    Vec logw(n);
    switch (kind_) {
    case FieldKind::Empirical: {
        const double s = 1.0 - t;
        for (Index i = 0; i < n; ++i)
            logw(i) = -(x - t * points_.row(i).transpose()).squaredNorm() / (2.0 * s * s);
        break;
    }
    case FieldKind::GaussianMixture: {
        const double d = double(dim_);
        for (Index i = 0; i < n; ++i) {
            const double s2 = t * t * sigmas_(i) * sigmas_(i) + (1.0 - t) * (1.0 - t);
            logw(i) = std::log(weights_(i)) - 0.5 * d * std::log(s2)
                      - (x - t * points_.row(i).transpose()).squaredNorm() / (2.0 * s2);
        }
        break;
    }
    case FieldKind::Constant:
        return Vec();
    }
    return softmax(std::move(logw));
}

Vec VelocityField::operator()(double t, const Vec& x) const
{
    if (x.size() != dim_)
        throw Error(ErrorCode::ShapeError, "field dimension mismatch");
    switch (kind_) {
    case FieldKind::Empirical: return empirical_velocity(*this, t, x);
    case FieldKind::GaussianMixture: return gmm_velocity(*this, t, x);
    case FieldKind::Constant: check_time(*this, t); return constant_;
    }
    return Vec();
}

Vec empirical_velocity(const VelocityField& field, double t, const Vec& x)
{
    if (field.kind() != FieldKind::Empirical)
        throw Error(ErrorCode::InvalidArgument, "empirical_velocity on a non-empirical field");
    check_time(field, t);
    const Vec w = field.posterior(t, x);
    const Vec mean = field.points().transpose() * w;
    return (mean - x) / (1.0 - t);
}

Vec gmm_velocity(const VelocityField& field, double t, const Vec& x)
{
    if (field.kind() != FieldKind::GaussianMixture)
        throw Error(ErrorCode::InvalidArgument, "gmm_velocity on a non-mixture field");
    check_time(field, t);
    const Vec w = field.posterior(t, x);
    Vec v = Vec::Zero(x.size());
    for (Index i = 0; i < w.size(); ++i) {
        if (w(i) == 0.0)
            continue;
        const double sig2 = field.sigmas()(i) * field.sigmas()(i);
        const double s2 = t * t * sig2 + (1.0 - t) * (1.0 - t);
        const double rate = (t * sig2 - (1.0 - t)) / s2; // d/dt log s_t
        const auto mu = field.points().row(i).transpose();
        v += w(i) * (mu + rate * (x - t * mu));
    }
    return v;
}

std::vector<double> flow_grid(int steps, double clamp_eps)
{
    std::vector<double> t(steps + 1);
    const double end = 1.0 - clamp_eps;
    for (int l = 0; l <= steps; ++l)
        t[l] = end * double(l) / double(steps);
    t[steps] = end;
    return t;
}

FlowTrace integrate_rhs(const std::function<Vec(double, const Vec&)>& rhs, const GuidanceHook& hook, const Vec& x0,
                        int steps, double clamp_eps)
{
    if (steps < 1)
        throw Error(ErrorCode::InvalidArgument, "integrate needs at least one step");
    if (!x0.allFinite())
        throw Error(ErrorCode::DivergedIntegration, "non-finite initial state");
    const std::vector<double> grid = flow_grid(steps, clamp_eps);
    FlowTrace trace;
    trace.t.reserve(steps + 2);
    trace.x.reserve(steps + 2);
    trace.t.push_back(0.0);
    trace.x.push_back(x0);
    Vec x = x0;
    for (int l = 0; l <= steps; ++l) {
        const double t = grid[l];
        const double h = l < steps ? grid[l + 1] - t : clamp_eps;
        const Vec v = rhs(t, x);
        Vec dx = v;
        if (hook)
            dx += hook(t, x, v);
        x += h * dx;
        if (!x.allFinite())
            throw Error(ErrorCode::DivergedIntegration, "non-finite state at step " + std::to_string(l + 1));
        trace.t.push_back(l < steps ? grid[l + 1] : 1.0);
        trace.x.push_back(x);
    }
    return trace;
}

FlowTrace integrate(const VelocityField& field, const GuidanceHook& hook, const Vec& x0, int steps)
{
    if (x0.size() != field.dim())
        throw Error(ErrorCode::ShapeError, "x0 dimension does not match the field");
    return integrate_rhs([&field](double t, const Vec& x) { return field(t, x); }, hook, x0, steps,
                         field.clamp_eps());
}

Vec sample_prior(std::mt19937_64& rng, Index d)
{
    std::normal_distribution<double> n01(0.0, 1.0);
    const double limit = 6.0 * std::sqrt(double(d));
    Vec x(d);
    do {
        for (Index i = 0; i < d; ++i)
            x(i) = n01(rng);
    } while (x.norm() > limit);
    return x;
}

double cfm_loss(const VelocityField& field, const Mat& dataset, int sample_count, std::uint64_t seed)
{
    if (dataset.rows() == 0)
        throw Error(ErrorCode::EmptyPrior, "cfm_loss needs data");
    if (sample_count < 1)
        throw Error(ErrorCode::InvalidArgument, "sample_count must be positive");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ut(0.0, 1.0 - field.clamp_eps());
    std::uniform_int_distribution<Index> pick(0, dataset.rows() - 1);
    double acc = 0.0;
    for (int n = 0; n < sample_count; ++n) {
        const double t = ut(rng);
        const Vec x1 = dataset.row(pick(rng)).transpose();
        const Vec x0 = sample_prior(rng, dataset.cols());
        const Vec xt = t * x1 + (1.0 - t) * x0;
        const Vec target = (x1 - xt) / (1.0 - t);
        acc += (field(t, xt) - target).squaredNorm();
    }
    return acc / sample_count;
}

void write_trace_csv(const std::string& path, const FlowTrace& trace)
{
    std::ofstream out(path);
    if (!out)
        throw Error(ErrorCode::IoError, "cannot open " + path);
    out << std::setprecision(17);
    out << "step,t";
    if (!trace.x.empty())
        for (Index i = 0; i < trace.x.front().size(); ++i)
            out << ",x" << i;
    out << '\n';
    for (size_t l = 0; l < trace.x.size(); ++l) {
        out << l << ',' << trace.t[l];
        for (Index i = 0; i < trace.x[l].size(); ++i)
            out << ',' << trace.x[l](i);
        out << '\n';
    }
}

} // namespace cflow
