#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include "gsp/kernels.hpp"

using namespace gsp;
using namespace gsp::kernels;
using gsp::numerics::RngStream;

namespace {
constexpr double kPi = std::numbers::pi;

std::vector<double> vec(std::initializer_list<double> v) { return std::vector<double>(v); }
}

TEST_CASE("gauss_eval: plug-in value and zero past the diagonal") {
    GaussianKernel k{1.0, 1};
    REQUIRE(std::abs(gauss_eval(k, 0.0, vec({0.0}), 1.0, vec({0.0})) -
                     std::pow(4.0 * kPi, -0.5)) < 1e-12);
    REQUIRE(gauss_eval(k, 1.0, vec({0.0}), 0.0, vec({0.0})) == 0.0);
    REQUIRE(gauss_eval(k, 1.0, vec({0.3}), 1.0, vec({0.7})) == 0.0);
}

TEST_CASE("gauss_eval: time change identity g_b(s,x,t,y) = g_a(as/b,x,at/b,y)") {
    const double a = 1.0, b = 2.0;
    GaussianKernel ka{a, 3}, kb{b, 3};
    RngStream rng(42, 1);
    for (int i = 0; i < 200; ++i) {
        double s = rng.uniform(-3, 3);
        double t = s + rng.log_uniform(1e-2, 10);
        std::vector<double> x(3), y(3);
        for (int j = 0; j < 3; ++j) {
            x[j] = rng.uniform(-2, 2);
            y[j] = rng.uniform(-2, 2);
        }
        double lhs = gauss_eval(kb, s, x, t, y);
        double rhs = gauss_eval(ka, a * s / b, x, a * t / b, y);
        REQUIRE(std::abs(lhs - rhs) <= 1e-14 * std::max(1.0, std::abs(lhs)));
    }
}

TEST_CASE("gauss_eval: symmetry and time homogeneity are exact") {
    GaussianKernel k{2.5, 2};
    RngStream rng(7, 0);
    for (int i = 0; i < 100; ++i) {
        double s = rng.uniform(-5, 5), dt = rng.log_uniform(1e-3, 1e2);
        auto x = vec({rng.normal(), rng.normal()});
        auto y = vec({rng.normal(), rng.normal()});
        REQUIRE(gauss_eval(k, s, x, s + dt, y) == gauss_eval(k, s, y, s + dt, x));
        // dyadic shifts keep the time sums exact, so equality is bitwise
        for (double r : {0.125, -2.5, 64.0})
            REQUIRE(gauss_eval(k, 0.25 + r, x, 0.75 + r, y) ==
                    gauss_eval(k, 0.25, x, 0.75, y));
        // arbitrary shifts agree up to rounding of the time difference
        double r = rng.uniform(-7, 7);
        double la = log_gauss_eval(k, s + r, x, s + dt + r, y);
        double lb = log_gauss_eval(k, s, x, s + dt, y);
        REQUIRE(std::abs(la - lb) <= 1e-10 * (1.0 + std::abs(lb)));
    }
}

TEST_CASE("ck_residual: d=1 at the origin") {
    GaussianKernel k{1.0, 1};
    double res = ck_residual(k, 0.0, 0.5, 1.0, vec({0.0}), vec({0.0}));
    REQUIRE(res <= 1e-10);
}

TEST_CASE("ck_residual: d=2 random points") {
    GaussianKernel k{3.0, 2};
    RngStream rng(11, 3);
    for (int i = 0; i < 5; ++i) {
        auto x = vec({rng.uniform(-2, 2), rng.uniform(-2, 2)});
        auto y = vec({rng.uniform(-2, 2), rng.uniform(-2, 2)});
        double res = ck_residual(k, 0.0, 0.3, 1.1, x, y);
        REQUIRE(res <= 1e-8);
    }
}

TEST_CASE("ck_residual: degenerate intermediate time") {
    GaussianKernel k{1.0, 1};
    double res = ck_residual(k, 0.0, 1e-7, 1.0, vec({0.2}), vec({-0.4}));
    REQUIRE(res <= 1e-8);
}

TEST_CASE("ck_residual: 100-case random suite") {
    RngStream rng(2024, 5);
    for (int i = 0; i < 100; ++i) {
        int d = 1 + (rng.next_u64() % 2);
        GaussianKernel k{rng.log_uniform(0.3, 3.0), d};
        double s = rng.uniform(-1, 1);
        double t = s + rng.log_uniform(0.05, 5.0);
        double u = s + (t - s) * rng.uniform(0.05, 0.95);
        std::vector<double> x(d), y(d);
        for (int j = 0; j < d; ++j) {
            x[j] = rng.uniform(-2, 2);
            y[j] = rng.uniform(-2, 2);
        }
        REQUIRE(ck_residual(k, s, u, t, x, y) <= 1e-8);
    }
}

TEST_CASE("normalization: quadrature (d<=2) and Gauss-Hermite identity (any d)") {
    RngStream rng(88, 2);
    for (int i = 0; i < 40; ++i) {
        int d = 1 + (rng.next_u64() % 2);
        GaussianKernel k{rng.log_uniform(0.2, 5.0), d};
        double s = rng.uniform(-2, 2), t = s + rng.log_uniform(1e-2, 10);
        std::vector<double> x(d);
        for (int j = 0; j < d; ++j) x[j] = rng.uniform(-3, 3);
        REQUIRE(normalization_residual(k, s, t, x) <= 1e-8);
    }
    for (int d : {1, 2, 3, 7}) {
        GaussianKernel k{1.7, d};
        REQUIRE(gh_normalization_residual(k) <= 1e-12);
    }
}

TEST_CASE("scaling bound g_b <= (b/a)^{d/2} g_a") {
    RngStream rng(31337, 9);
    double worst = scaling_bound_check(1.0, 2.0, 3, 10000, rng);
    REQUIRE(worst <= 0.0);

    // boundary a = b: both sides equal, violation exactly 0
    RngStream rng2(31337, 10);
    double eq = scaling_bound_check(2.0, 2.0, 2, 1000, rng2);
    REQUIRE(eq == 0.0);

    // x = y: bound is tight (prefactor comparison only)
    GaussianKernel ka{1.0, 3}, kb{2.0, 3};
    auto x = vec({0.4, -0.2, 1.0});
    double gb = gauss_eval(kb, 0.0, x, 0.7, x);
    double ga = gauss_eval(ka, 0.0, x, 0.7, x);
    REQUIRE(std::abs(gb - std::pow(2.0, 1.5) * ga) < 1e-14 * gb);
}

TEST_CASE("three_g_failure: closed form and unboundedness") {
    // y = 0: ratio is exactly 2^{d/2}
    for (int d : {1, 2, 3}) {
        std::vector<double> y0(d, 0.0);
        REQUIRE(std::abs(three_g_failure(1.0, d, 0.5, y0) - std::pow(2.0, 0.5 * d)) < 1e-13);
    }
    // a=1, d=1, t=1, |y|=10: ratio = sqrt(2) e^{25}
    auto y = vec({10.0});
    double ratio = three_g_failure(1.0, 1, 1.0, y);
    REQUIRE(std::abs(ratio - std::sqrt(2.0) * std::exp(25.0)) < 1e-10 * ratio);
    // log-form matches the closed form to 1e-12
    double lg = three_g_failure_log(1.0, 1, 1.0, y);
    double lc = three_g_closed_form_log(1.0, 1, 1.0, y);
    REQUIRE(std::abs(lg - lc) < 1e-12 * std::abs(lc));
    // monotone growth in |y| witnesses unboundedness
    REQUIRE(three_g_failure_log(1.0, 1, 1.0, vec({20.0})) >
            three_g_failure_log(1.0, 1, 1.0, vec({10.0})));
}
