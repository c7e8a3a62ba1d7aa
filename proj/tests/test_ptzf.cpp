#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cflow/ptzf.hpp"

#include <cmath>
#include <random>

using namespace cflow;

namespace {

std::vector<double> grid(int n, double end)
{
    std::vector<double> g(size_t(n) + 1);
    for (int i = 0; i <= n; ++i)
        g[size_t(i)] = end * i / n;
    return g;
}

} // namespace

TEST_CASE("linear schedule values")
{
    const ZeroingSchedule s = ZeroingSchedule::linear(1.0, 1.0, 1.0);
    CHECK(s.eval(0.5).value == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
    const ScheduleValue v0 = s.eval(0.0);
    CHECK(v0.value == 1.0);
    CHECK(v0.derivative == doctest::Approx(-1.0));

    const ZeroingSchedule s3 = ZeroingSchedule::linear(2.0, 3.0, 0.8);
    CHECK(s3.eval(0.0).derivative == doctest::Approx(-2.0 * 3.0 / 0.8));
}

TEST_CASE("schedules vanish at and after the prescribed time")
{
    for (double r0 : {-3.0, 0.0, 0.5, 40.0}) {
        const ZeroingSchedule lin = ZeroingSchedule::linear(r0, 1.0, 0.7);
        const ZeroingSchedule num =
            ZeroingSchedule::numeric(r0, [](double, double r) { return r; }, grid(200, 0.699), 0.7);
        for (double t : {0.7, 0.9, 5.0}) {
            CHECK(lin.eval(t).value == 0.0);
            CHECK(lin.eval(t).derivative == 0.0);
            CHECK(num.eval(t).value == 0.0);
            CHECK(num.eval(t).derivative == 0.0);
        }
    }
}

TEST_CASE("derivative matches finite differences")
{
    const ZeroingSchedule s = ZeroingSchedule::linear(1.7, 2.0, 1.0);
    for (double t : {0.1, 0.4, 0.8}) {
        const double h = 1e-6;
        const double fd = (s.eval(t + h).value - s.eval(t - h).value) / (2 * h);
        CHECK(s.eval(t).derivative == doctest::Approx(fd).epsilon(1e-6));
    }
}

TEST_CASE("closed form and numeric modes agree")
{
    for (double cg : {0.5, 1.0, 2.0, 3.0}) {
        const std::vector<double> g = grid(2000, 1.0 - 1e-6);
        const ZeroingSchedule lin = ZeroingSchedule::linear(1.0, cg);
        const ZeroingSchedule num = ZeroingSchedule::numeric(1.0, [cg](double, double r) { return cg * r; }, g);
        double worst = 0.0;
        for (double t : g)
            worst = std::max(worst, std::abs(lin.eval(t).value - num.eval(t).value));
        CHECK(worst <= 1e-5);
    }
}

TEST_CASE("numeric zeroing for class-K rates and any start")
{
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-50.0, 50.0);
    const std::vector<ZeroingSchedule::Rate> rates = {
        [](double, double r) { return r; },
        [](double, double r) { return r * r * r + 0.1 * r; },
        [](double, double r) { return std::tanh(r); },
        [](double t, double r) { return (1.0 + t) * r; },
    };
    for (const auto& rate : rates)
        for (int i = 0; i < 20; ++i) {
            const ZeroingSchedule s = ZeroingSchedule::numeric(u(rng), rate, grid(200, 0.999));
            CHECK(std::abs(s.eval(1.0 - 1e-9).value) <= 1e-6);
        }
}

TEST_CASE("positive schedules decay monotonically")
{
    const ZeroingSchedule s =
        ZeroingSchedule::numeric(5.0, [](double, double r) { return std::sqrt(std::abs(r)); }, grid(400, 0.999));
    double prev = s.eval(0.0).value;
    for (int i = 1; i <= 1000; ++i) {
        const double v = s.eval(i / 1000.0).value;
        CHECK(v <= prev);
        prev = v;
    }
}

TEST_CASE("negative start stays nonpositive")
{
    const ZeroingSchedule s = make_inequality_schedule(-0.8);
    for (int i = 0; i <= 100; ++i)
        CHECK(s.eval(i / 100.0).value <= 0.0);
}

TEST_CASE("equality schedule")
{
    CHECK(make_equality_schedule(4.0).r0() == 8.0);
    const ZeroingSchedule z = make_equality_schedule(0.0);
    CHECK(z.r0() == 0.0);
    CHECK(z.eval(0.3).value == 0.0);
    CHECK_THROWS_AS(make_equality_schedule(-1.0), Error);
}

TEST_CASE("free-generation coefficients")
{
    FreeGenerationBudget b;
    b.c_pt = 2.0;
    b.c_g = 1.0;
    b.c_r = 0.0;
    CHECK(b.xi0() == doctest::Approx(2.0));
    CHECK(b.xi_partial() == doctest::Approx(1.0));
    CHECK(free_generation_floor(b, 0.0, 0.0, ResidualKind::Equality) == 0.0);

    b.c_r = 0.5;
    CHECK(b.xi0() == doctest::Approx(8.0 * std::exp(1.0)));
    CHECK(free_generation_floor(b, 1.0, 0.0, ResidualKind::Equality) >= b.xi0());

    // Negative inequality residuals are already safe.
    CHECK(free_generation_floor(b, -2.0, 0.0, ResidualKind::Inequality) == 0.0);

    b.c_pt = 1.0;
    CHECK_THROWS_AS(free_generation_floor(b, 1.0, 1.0, ResidualKind::Equality), Error);
}
