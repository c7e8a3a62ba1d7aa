#include "cflow/refine.hpp"

namespace cflow {

double bspline_basis(const Vec& knots, int i, int p, double u)
{
    if (p == 0) {
        const double a = knots(i), b = knots(i + 1);
        if (a <= u && u < b)
            return 1.0;
        // Right end of the parameter range belongs to the last nonempty span.
        const Index last = knots.size() - 1;
        return (u == knots(last) && b == knots(last) && a < b) ? 1.0 : 0.0;
    }
    double out = 0.0;
    const double d1 = knots(i + p) - knots(i);
    const double d2 = knots(i + p + 1) - knots(i + 1);
    if (d1 > 0.0)
        out += (u - knots(i)) / d1 * bspline_basis(knots, i, p - 1, u);
    if (d2 > 0.0)
        out += (knots(i + p + 1) - u) / d2 * bspline_basis(knots, i + 1, p - 1, u);
    return out;
}

SplineCodec::SplineCodec(int control_points, int samples) : n_(control_points), samples_(samples)
{
    constexpr int p = 3;
    if (control_points < p + 1)
        throw Error(ErrorCode::InvalidArgument, "cubic spline needs at least 4 control points");
    if (samples < control_points)
        throw Error(ErrorCode::InvalidArgument, "need at least as many samples as control points");
    knots_.resize(n_ + p + 1);
    const int spans = n_ - p;
    for (int i = 0; i < knots_.size(); ++i) {
        if (i <= p)
            knots_(i) = 0.0;
        else if (i >= n_)
            knots_(i) = 1.0;
        else
            knots_(i) = double(i - p) / spans;
    }
    basis_.resize(samples_, n_);
    for (int s = 0; s < samples_; ++s) {
        const double u = samples_ == 1 ? 0.0 : double(s) / (samples_ - 1);
        for (int i = 0; i < n_; ++i)
            basis_(s, i) = bspline_basis(knots_, i, p, u);
    }
    qr_.compute(basis_);
}

Vec SplineCodec::encode(const Vec& channel) const
{
    if (channel.size() != samples_)
        throw Error(ErrorCode::ShapeError, "channel length does not match codec samples");
    return qr_.solve(channel);
}

Vec SplineCodec::decode(const Vec& coeffs) const
{
    if (coeffs.size() != n_)
        throw Error(ErrorCode::ShapeError, "coefficient count does not match codec");
    return basis_ * coeffs;
}

Mat SplineCodec::encode(const Mat& channels) const
{
    if (channels.rows() != samples_)
        throw Error(ErrorCode::ShapeError, "channel length does not match codec samples");
    return qr_.solve(channels);
}

Mat SplineCodec::decode_all(const Mat& coeffs) const
{
    if (coeffs.rows() != n_)
        throw Error(ErrorCode::ShapeError, "coefficient count does not match codec");
    return basis_ * coeffs;
}

Vec spline_encode(const Vec& channel, int control_points)
{
    return SplineCodec(control_points, int(channel.size())).encode(channel);
}

Vec spline_decode(const Vec& coeffs, int samples) { return SplineCodec(int(coeffs.size()), samples).decode(coeffs); }

} // namespace cflow
