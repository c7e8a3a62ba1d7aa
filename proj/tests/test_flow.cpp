#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cflow/flow.hpp"

#include <cmath>

using namespace cflow;

namespace {

Mat rows(std::initializer_list<std::initializer_list<double>> r)
{
    Mat m(Index(r.size()), Index(r.begin()->size()));
    Index i = 0;
    for (const auto& row : r) {
        Index j = 0;
        for (double v : row)
            m(i, j++) = v;
        ++i;
    }
    return m;
}

Vec vec(std::initializer_list<double> v)
{
    Vec out(Index(v.size()));
    Index i = 0;
    for (double x : v)
        out(i++) = x;
    return out;
}

} // namespace

TEST_CASE("interpolation schedule endpoints")
{
    CHECK(InterpolationSchedule::alpha(0.0) == 0.0);
    CHECK(InterpolationSchedule::alpha(1.0) == 1.0);
    CHECK(InterpolationSchedule::beta(0.0) == 1.0);
    CHECK(InterpolationSchedule::beta(1.0) == 0.0);
}

TEST_CASE("empirical velocity with one point")
{
    const Vec t1 = vec({1.0, -2.0, 0.5});
    const VelocityField f = VelocityField::empirical(t1.transpose());
    const Vec x = vec({0.3, 0.1, -0.7});
    CHECK((f(0.5, x) - (t1 - x) / 0.5).norm() < 1e-12);
    // t = 0 gives the straight-line velocity.
    CHECK((f(0.0, x) - (t1 - x)).norm() < 1e-12);
}

TEST_CASE("empirical velocity with symmetric points")
{
    const Mat pts = rows({{1.0, 0.0}, {-1.0, 0.0}});
    const VelocityField f = VelocityField::empirical(pts);
    const Vec x = vec({0.0, 0.3});
    const Vec mid = 0.5 * (pts.row(0) + pts.row(1)).transpose();
    CHECK((f(0.5, x) - (mid - x) / 0.5).norm() < 1e-12);
    const Vec w = f.posterior(0.5, x);
    CHECK(w(0) == doctest::Approx(0.5));
}

TEST_CASE("empirical velocity errors")
{
    const VelocityField f = VelocityField::empirical(rows({{1.0}}));
    CHECK_THROWS_AS(f(1.0, vec({0.0})), Error);
    CHECK_THROWS_AS(VelocityField::empirical(Mat(0, 2)), Error);
}

TEST_CASE("gmm velocity single component")
{
    const VelocityField f = VelocityField::gaussian_mixture(vec({1.0}), rows({{0.0, 0.0}}), vec({1.0}));
    const double t = 0.3;
    const Vec x = vec({0.7, -1.2});
    // m_t = 0, s_t^2 = t^2 + (1-t)^2, v = (s_t'/s_t) x.
    const double s2 = t * t + (1 - t) * (1 - t);
    const double rate = (t - (1 - t)) / s2;
    CHECK((f(t, x) - rate * x).norm() < 1e-12);

    const Vec mu = vec({2.0, -1.0});
    const VelocityField g = VelocityField::gaussian_mixture(vec({1.0}), mu.transpose(), vec({0.4}));
    CHECK((g(0.6, 0.6 * mu) - mu).norm() < 1e-12);
}

TEST_CASE("gmm posterior of separated components")
{
    const VelocityField f =
        VelocityField::gaussian_mixture(vec({0.5, 0.5}), rows({{5.0, 0.0}, {-5.0, 0.0}}), vec({0.3, 0.3}));
    const Vec w = f.posterior(0.8, vec({4.0, 0.1}));
    CHECK(w(0) >= 0.99);
    CHECK_THROWS_AS(VelocityField::gaussian_mixture(vec({1.0}), rows({{0.0}}), vec({0.0})), Error);
}

TEST_CASE("posterior weights sum to one")
{
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n;
    const Mat pts = Mat::NullaryExpr(6, 3, [&] { return 2.0 * n(rng); });
    const VelocityField e = VelocityField::empirical(pts);
    const VelocityField g = VelocityField::gaussian_mixture(Vec::Constant(6, 1.0 / 6), pts, Vec::Constant(6, 0.2));
    for (int i = 0; i < 200; ++i) {
        const double t = std::uniform_real_distribution<double>(0.0, 0.999)(rng);
        const Vec x = Vec::NullaryExpr(3, [&] { return 3.0 * n(rng); });
        CHECK(std::abs(e.posterior(t, x).sum() - 1.0) < 1e-12);
        CHECK(std::abs(g.posterior(t, x).sum() - 1.0) < 1e-12);
    }
}

TEST_CASE("integrate constant field")
{
    const Vec c = vec({1.0, -0.5});
    const Vec x0 = vec({0.2, 0.3});
    const FlowTrace tr = integrate(VelocityField::constant(c), nullptr, x0, 37);
    CHECK((tr.final() - (x0 + c)).norm() < 1e-12);
    CHECK(tr.x.size() == tr.t.size());
}

TEST_CASE("integrate single point lands on it")
{
    const Vec t1 = vec({1.5, -0.5, 2.0});
    const VelocityField f = VelocityField::empirical(t1.transpose());
    const FlowTrace tr = integrate(f, nullptr, vec({-1.0, 0.4, 0.0}));
    CHECK((tr.final() - t1).norm() < 1e-6);
}

TEST_CASE("cancelling hook keeps the start")
{
    const VelocityField f = VelocityField::empirical(rows({{1.0, 1.0}, {-1.0, 2.0}}));
    const Vec x0 = vec({0.1, -0.2});
    const FlowTrace tr = integrate(f, [](double, const Vec&, const Vec& v) { return Vec(-v); }, x0);
    CHECK((tr.final() - x0).norm() < 1e-12);
}

TEST_CASE("zero hook matches unguided trace")
{
    const VelocityField f = VelocityField::empirical(rows({{1.0, 1.0}, {-1.0, 2.0}}));
    const Vec x0 = vec({0.1, -0.2});
    const FlowTrace a = integrate(f, nullptr, x0);
    const FlowTrace b = integrate(f, [](double, const Vec& x, const Vec&) { return Vec(Vec::Zero(x.size())); }, x0);
    REQUIRE(a.x.size() == b.x.size());
    for (size_t i = 0; i < a.x.size(); ++i)
        CHECK(a.x[i] == b.x[i]);
}

TEST_CASE("constant hook equals shifted field")
{
    const Vec c = vec({0.3, -0.1});
    const VelocityField f = VelocityField::empirical(rows({{1.0, 1.0}, {-1.0, 2.0}}));
    const Vec x0 = vec({0.1, -0.2});
    const FlowTrace a = integrate(f, [&](double, const Vec&, const Vec&) { return c; }, x0);
    const FlowTrace b =
        integrate_rhs([&](double t, const Vec& x) { return Vec(f(t, x) + c); }, nullptr, x0, 200, f.clamp_eps());
    CHECK((a.final() - b.final()).norm() < 1e-12);
}

TEST_CASE("divergence is reported")
{
    auto rhs = [](double, const Vec& x) { return Vec(1e200 * x.cwiseAbs2()); };
    CHECK_THROWS_AS(integrate_rhs(rhs, nullptr, vec({1.0}), 50, 1e-3), Error);
}

TEST_CASE("empirical sampling lands on a data point")
{
    const Mat pts = rows({{1.0, 0.0}, {-1.0, 1.0}, {0.5, -2.0}});
    const VelocityField f = VelocityField::empirical(pts);
    std::mt19937_64 rng(11);
    for (int i = 0; i < 50; ++i) {
        const Vec x = integrate(f, nullptr, sample_prior(rng, 2)).final();
        CHECK((pts.rowwise() - x.transpose()).rowwise().norm().minCoeff() < 1e-6);
    }
}

TEST_CASE("prior samples respect the outlier filter")
{
    std::mt19937_64 rng(5);
    for (int i = 0; i < 1000; ++i)
        CHECK(sample_prior(rng, 4).norm() <= 6.0 * 2.0);
}

TEST_CASE("cfm loss")
{
    const Mat one = rows({{1.0, -1.0}});
    CHECK(cfm_loss(VelocityField::empirical(one), one, 2000, 1) < 1e-12);
    // Zero field: E||T1 - x0||^2 = ||T1||^2 + d.
    const double zero = cfm_loss(VelocityField::constant(Vec::Zero(2)), one, 10000, 1);
    CHECK(zero == doctest::Approx(4.0).epsilon(0.05));

    const Mat two = rows({{1.0, -1.0}, {-2.0, 0.5}});
    const double base = cfm_loss(VelocityField::empirical(two), two, 10000, 2);
    const Mat moved = two.rowwise() + vec({0.2, 0.2}).transpose();
    CHECK(cfm_loss(VelocityField::empirical(moved), two, 10000, 2) >= base);
    CHECK_THROWS_AS(cfm_loss(VelocityField::empirical(two), Mat(0, 2), 10), Error);
}
