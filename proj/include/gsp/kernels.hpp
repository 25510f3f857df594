#pragma once

// The Gaussian kernel family
//   g_a(s,x,t,y) = [4 pi (t-s)/a]^{-d/2} exp(-a|y-x|^2 / (4(t-s))),  s < t,
// with g_a = 0 for s >= t, together with its semigroup checks, the scaling
// comparison between two members, and the 3G failure ratio.

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "gsp/common.hpp"
#include "gsp/numerics.hpp"

namespace gsp::kernels {

using numerics::QuadConfig;
using numerics::RngStream;

struct GaussianKernel {
    double a = 1.0; // inverse-diffusivity scale: exponent is -a|y-x|^2/(4(t-s))
    int d = 1;

    void validate() const {
        if (!(a > 0)) throw DomainError("GaussianKernel: a > 0 required");
        if (d < 1) throw DomainError("GaussianKernel: d >= 1 required");
    }
};

struct SpaceTimePoint {
    double t = 0.0;
    std::vector<double> x;
};

inline double sq_dist(std::span<const double> x, std::span<const double> y) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dxi = y[i] - x[i];
        s += dxi * dxi;
    }
    return s;
}

// log g_a; -inf for s >= t.  All ratio comparisons happen in this domain.
inline double log_gauss_eval(const GaussianKernel& k, double s, std::span<const double> x,
                             double t, std::span<const double> y) {
    if (!(s < t)) return -std::numeric_limits<double>::infinity();
    const double dt = t - s;
    const double half_d = 0.5 * k.d;
    return -half_d * std::log(4.0 * std::numbers::pi * dt / k.a) -
           k.a * sq_dist(x, y) / (4.0 * dt);
}

inline double gauss_eval(const GaussianKernel& k, double s, std::span<const double> x,
                         double t, std::span<const double> y) {
    if (!(s < t)) return 0.0;
    return std::exp(log_gauss_eval(k, s, x, t, y)); // underflows to 0 silently
}

// 1-D convenience overloads (the series engines live in d = 1).
inline double log_gauss_eval1(const GaussianKernel& k, double s, double x, double t, double y) {
    if (!(s < t)) return -std::numeric_limits<double>::infinity();
    const double dt = t - s;
    const double dx = y - x;
    return -0.5 * k.d * std::log(4.0 * std::numbers::pi * dt / k.a) - k.a * dx * dx / (4.0 * dt);
}

inline double gauss_eval1(const GaussianKernel& k, double s, double x, double t, double y) {
    if (!(s < t)) return 0.0;
    return std::exp(log_gauss_eval1(k, s, x, t, y));
}

namespace detail {

// One coordinate of the Chapman-Kolmogorov integral: the d-dim integrand
// factorizes, so the full residual needs d of these.
inline double ck_coordinate_integral(const GaussianKernel& k, double s, double u, double t,
                                     double xi, double yi, const QuadConfig& cfg) {
    GaussianKernel k1{k.a, 1};
    const double sd1 = std::sqrt(2.0 * (u - s) / k.a);
    const double sd2 = std::sqrt(2.0 * (t - u) / k.a);
    // Panel boundaries around both factors' centers keep the adaptive rule
    // from overlooking a narrow spike when u is close to s or t.
    std::vector<double> cuts;
    const double lo = std::min(xi - 10.0 * sd1, yi - 10.0 * sd2);
    const double hi = std::max(xi + 10.0 * sd1, yi + 10.0 * sd2);
    cuts.push_back(lo);
    for (double c : {xi - 10.0 * sd1, xi, xi + 10.0 * sd1, yi - 10.0 * sd2, yi, yi + 10.0 * sd2})
        if (c > lo && c < hi) cuts.push_back(c);
    cuts.push_back(hi);
    std::sort(cuts.begin(), cuts.end());
    auto f = [&](double z) {
        return gauss_eval1(k1, s, xi, u, z) * gauss_eval1(k1, u, z, t, yi);
    };
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        if (cuts[i + 1] - cuts[i] < 1e-300) continue;
        total += numerics::integrate_1d(f, cuts[i], cuts[i + 1], cfg).value;
    }
    return total;
}

} // namespace detail

// |int g(s,x,u,z) g(u,z,t,y) dz - g(s,x,t,y)| by deterministic quadrature.
inline double ck_residual(const GaussianKernel& k, double s, double u, double t,
                          std::span<const double> x, std::span<const double> y,
                          const QuadConfig& cfg = {}) {
    k.validate();
    if (!(s < u && u < t)) throw DomainError("ck_residual: requires s < u < t");
    if (k.d > 2) throw DomainError("ck_residual: deterministic quadrature supports d <= 2");
    double prod = 1.0;
    for (int i = 0; i < k.d; ++i)
        prod *= detail::ck_coordinate_integral(k, s, u, t, x[i], y[i], cfg);
    return std::abs(prod - gauss_eval(k, s, x, t, y));
}

// |int g(s,x,t,y) dy - 1| per coordinate (d <= 2 deterministic path).
inline double normalization_residual(const GaussianKernel& k, double s, double t,
                                     std::span<const double> x, const QuadConfig& cfg = {}) {
    k.validate();
    if (!(s < t)) throw DomainError("normalization_residual: requires s < t");
    if (k.d > 2) throw DomainError("normalization_residual: quadrature supports d <= 2");
    GaussianKernel k1{k.a, 1};
    const double sd = std::sqrt(2.0 * (t - s) / k.a);
    double prod = 1.0;
    for (int i = 0; i < k.d; ++i) {
        auto f = [&](double y) { return gauss_eval1(k1, s, x[i], t, y); };
        prod *= numerics::integrate_1d(f, x[i] - 12.0 * sd, x[i] + 12.0 * sd, cfg).value;
    }
    return std::abs(prod - 1.0);
}

// Same check through the Gauss-Hermite identity: substituting
// y = x + sqrt(4(t-s)/a) zeta turns the mass integral into
// pi^{-d/2} (sum of weights)^d.  Valid in any dimension.
inline double gh_normalization_residual(const GaussianKernel& k, int order = 40) {
    const auto& gh = numerics::gauss_hermite(order);
    double wsum = 0.0;
    for (double w : gh.weights) wsum += w;
    const double per_coord = wsum / std::sqrt(std::numbers::pi);
    return std::abs(std::pow(per_coord, k.d) - 1.0);
}

// max over sampled (s,x,t,y) of g_b - (b/a)^{d/2} g_a; <= 0 iff the scaling
// bound holds on the sample.
inline double scaling_bound_check(double a, double b, int d, int samples, RngStream& rng) {
    if (!(a > 0) || !(b > 0) || a > b) throw DomainError("scaling_bound_check: requires 0 < a <= b");
    if (d < 1) throw DomainError("scaling_bound_check: d >= 1");
    GaussianKernel ka{a, d}, kb{b, d};
    const double ratio = std::pow(b / a, 0.5 * d);
    double worst = -std::numeric_limits<double>::infinity();
    std::vector<double> x(d), y(d);
    for (int i = 0; i < samples; ++i) {
        const double s = rng.uniform(-5.0, 5.0);
        const double dt = rng.log_uniform(1e-3, 1e2);
        const double scale = rng.log_uniform(1e-2, 1e1);
        for (int j = 0; j < d; ++j) {
            x[j] = scale * rng.normal();
            y[j] = scale * rng.normal();
        }
        const double gb = gauss_eval(kb, s, x, s + dt, y);
        const double ga = gauss_eval(ka, s, x, s + dt, y);
        worst = std::max(worst, gb - ratio * ga);
    }
    return worst;
}

// Exact closed form of the 3G ratio
//   [g_a(0,0,t,y) ^ g_a(t,y,2t,2y)] / g_a(0,0,2t,2y) = 2^{d/2} e^{a|y|^2/(4t)},
// whose growth in |y| is what defeats any 3G inequality here.
inline double three_g_failure_log(double a, int d, double t, std::span<const double> y) {
    if (!(t > 0)) throw DomainError("three_g_failure: t > 0 required");
    GaussianKernel k{a, d};
    std::vector<double> zero(d, 0.0), y2(y.begin(), y.end());
    for (auto& v : y2) v *= 2.0;
    const double l1 = log_gauss_eval(k, 0.0, zero, t, y);
    const double l2 = log_gauss_eval(k, t, y, 2.0 * t, y2);
    const double l3 = log_gauss_eval(k, 0.0, zero, 2.0 * t, y2);
    return std::min(l1, l2) - l3;
}

inline double three_g_failure(double a, int d, double t, std::span<const double> y) {
    return std::exp(three_g_failure_log(a, d, t, y));
}

inline double three_g_closed_form_log(double a, int d, double t, std::span<const double> y) {
    double yy = 0.0;
    for (double v : y) yy += v * v;
    return 0.5 * d * std::log(2.0) + a * yy / (4.0 * t);
}

} // namespace gsp::kernels
