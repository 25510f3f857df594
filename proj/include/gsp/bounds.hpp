#pragma once

// Class-N membership (p <= C p* plus the majorant integral inequality), the
// bound factor (C/(1-eta-eps))^{1+Q(s,t)/eps}, its eps optimization, the
// explicit Kato coefficient eta + slope (t-s), and the end-to-end pipeline
// emitting tilde-p upper bounds of the form factor e^{lambda(t-s)} g_a.

#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <sstream>
#include <vector>

#include "gsp/common.hpp"
#include "gsp/fourg.hpp"
#include "gsp/kato.hpp"
#include "gsp/kernels.hpp"
#include "gsp/numerics.hpp"
#include "gsp/potential.hpp"
#include "gsp/series.hpp"
#include "gsp/superadd.hpp"

namespace gsp::bounds {

using kato::Potential;
using kernels::GaussianKernel;
using numerics::QuadConfig;
using numerics::RngStream;
using superadd::SuperadditiveQ;

struct MembershipSample {
    double s = 0.0, t = 0.0;
    std::vector<double> x, y;
    double lhs = 0.0, rhs = 0.0;
    double std_err = 0.0; // Monte Carlo route only
};

struct NMembership {
    GaussianKernel p_kernel;     // g_b
    GaussianKernel pstar_kernel; // g_a
    double C = 1.0;
    double eta = 0.0;
    SuperadditiveQ Q;
    std::vector<MembershipSample> verified_at;
    bool ok = false;
    int witness_index = -1; // first violating sample, if any
};

namespace detail {

// int_s^t int g_b(s,x,u,z) q(u,z) g_a(u,z,t,y) dz du.  The two Gaussians
// combine into an envelope N(y-x; (s1^2+s2^2) I) times a z-Gaussian centered
// at mu*(u); the z-expectation is a recentred Gauss-Hermite sum (d <= 2) or
// an exact conditional draw (Monte Carlo route, any d).
struct LhsIntegrand {
    const GaussianKernel& kb;
    const GaussianKernel& ka;
    double s, t;
    std::span<const double> x, y;

    struct Slice {
        double envelope; // N_d(y-x; (s1^2+s2^2) I)
        double mu_w;     // weight of y in the conditional mean
        double sigma;    // conditional sd per coordinate
    };

    Slice at(double u) const {
        const int d = kb.d;
        const double v1 = 2.0 * (u - s) / kb.a;
        const double v2 = 2.0 * (t - u) / ka.a;
        const double vsum = v1 + v2;
        double r2 = 0.0;
        for (int i = 0; i < d; ++i) {
            const double di = y[i] - x[i];
            r2 += di * di;
        }
        Slice sl;
        sl.envelope = std::exp(-0.5 * d * std::log(2.0 * std::numbers::pi * vsum) -
                               0.5 * r2 / vsum);
        sl.mu_w = v1 / vsum;
        sl.sigma = std::sqrt(v1 * v2 / vsum);
        return sl;
    }
};

inline double lhs_deterministic(const GaussianKernel& kb, const GaussianKernel& ka,
                                const Potential& q, double s, double t,
                                std::span<const double> x, std::span<const double> y,
                                const QuadConfig& cfg) {
    const int d = kb.d;
    LhsIntegrand in{kb, ka, s, t, x, y};
    const auto& gh = numerics::gauss_hermite(std::max(16, cfg.hermite_order / 2));
    const double wn = std::pow(std::numbers::pi, -0.5 * d);
    std::vector<double> z(d);
    auto slice = [&](double u) {
        if (u <= s || u >= t) {
            // kernel degenerates to a point mass; the limit is finite
            const auto& pt = (u <= s) ? x : y;
            for (int i = 0; i < d; ++i) z[i] = pt[i];
            return in.at(std::clamp(u, s + 1e-300, t - 1e-300)).envelope * q(u, z);
        }
        const auto sl = in.at(u);
        double acc = 0.0;
        if (d == 1) {
            for (std::size_t k = 0; k < gh.nodes.size(); ++k) {
                z[0] = x[0] + sl.mu_w * (y[0] - x[0]) +
                       std::numbers::sqrt2 * sl.sigma * gh.nodes[k];
                acc += gh.weights[k] * q(u, z);
            }
        } else {
            for (std::size_t k0 = 0; k0 < gh.nodes.size(); ++k0)
                for (std::size_t k1 = 0; k1 < gh.nodes.size(); ++k1) {
                    z[0] = x[0] + sl.mu_w * (y[0] - x[0]) +
                           std::numbers::sqrt2 * sl.sigma * gh.nodes[k0];
                    z[1] = x[1] + sl.mu_w * (y[1] - x[1]) +
                           std::numbers::sqrt2 * sl.sigma * gh.nodes[k1];
                    acc += gh.weights[k0] * gh.weights[k1] * q(u, z);
                }
        }
        return sl.envelope * wn * acc;
    };
    return numerics::integrate_dyadic(slice, s, t, cfg).value;
}

inline std::pair<double, double> lhs_monte_carlo(const GaussianKernel& kb,
                                                 const GaussianKernel& ka,
                                                 const Potential& q, double s, double t,
                                                 std::span<const double> x,
                                                 std::span<const double> y, int samples,
                                                 RngStream& rng) {
    const int d = kb.d;
    LhsIntegrand in{kb, ka, s, t, x, y};
    std::vector<double> z(d);
    double s1 = 0.0, s2 = 0.0;
    for (int i = 0; i < samples; ++i) {
        const double u = rng.uniform(s, t);
        const auto sl = in.at(u);
        for (int j = 0; j < d; ++j)
            z[j] = x[j] + sl.mu_w * (y[j] - x[j]) + sl.sigma * rng.normal();
        const double v = (t - s) * sl.envelope * q(u, z);
        s1 += v;
        s2 += v * v;
    }
    const double mean = s1 / samples;
    const double var = std::max(0.0, s2 / samples - mean * mean);
    return {mean, std::sqrt(var / samples)};
}

} // namespace detail

// Sampled verification of the majorant integral inequality
//   lhs(s,x,t,y) <= [eta + Q(s,t)] g_a(s,x,t,y).
// Sample design: (t-s) log-uniform in [1e-3, 10]; endpoints Gaussian with
// scale sqrt(t-s) around a common center, plus far-tail probes at
// |y-x| in {5,10} sqrt(t-s).  Every checked sample is recorded.
inline NMembership verify_membership(const GaussianKernel& kb, const GaussianKernel& ka,
                                     const Potential& q, double eta,
                                     const SuperadditiveQ& Q, int samples,
                                     const QuadConfig& cfg, RngStream& rng,
                                     int mc_samples = 40000) {
    kb.validate();
    ka.validate();
    if (ka.d != kb.d) throw DomainError("verify_membership: dimension mismatch");
    if (!(ka.a <= kb.a)) throw DomainError("verify_membership: requires a <= b");
    if (!(eta >= 0)) throw DomainError("verify_membership: eta >= 0");
    const int d = kb.d;
    NMembership out;
    out.p_kernel = kb;
    out.pstar_kernel = ka;
    out.C = std::pow(kb.a / ka.a, 0.5 * d);
    out.eta = eta;
    out.Q = Q;
    out.ok = true;

    const bool deterministic = d <= 2;
    for (int i = 0; i < samples; ++i) {
        MembershipSample smp;
        const double dt = rng.log_uniform(1e-3, 10.0);
        smp.s = rng.uniform(-2.0, 2.0);
        smp.t = smp.s + dt;
        smp.x.resize(d);
        smp.y.resize(d);
        const double scale = std::sqrt(dt);
        const int probe = i % 8;
        for (int j = 0; j < d; ++j) {
            const double center = rng.uniform(-2.0, 2.0);
            smp.x[j] = center + scale * rng.normal();
            smp.y[j] = center + scale * rng.normal();
        }
        if (probe == 6) // far-tail probes along e1
            smp.y[0] = smp.x[0] + 5.0 * scale;
        else if (probe == 7)
            smp.y[0] = smp.x[0] + 10.0 * scale;

        if (deterministic) {
            smp.lhs = detail::lhs_deterministic(kb, ka, q, smp.s, smp.t, smp.x, smp.y, cfg);
        } else {
            auto [mean, se] = detail::lhs_monte_carlo(kb, ka, q, smp.s, smp.t, smp.x,
                                                      smp.y, mc_samples, rng);
            smp.lhs = mean;
            smp.std_err = se;
        }
        smp.rhs = (eta + Q.eval(smp.s, smp.t)) *
                  kernels::gauss_eval(ka, smp.s, smp.x, smp.t, smp.y);
        out.verified_at.push_back(smp);
        if (smp.lhs > smp.rhs * (1.0 + 1e-8) + 3.0 * smp.std_err + 1e-300) {
            out.ok = false;
            if (out.witness_index < 0) out.witness_index = i;
        }
    }
    return out;
}

// binom(n+k-1, k-1) theta^n C^k, evaluated in log space
inline double lemma2_bound(int n, int k, double theta, double C) {
    if (n < 0 || k < 1 || !(theta >= 0) || !(C >= 1))
        throw DomainError("lemma2_bound: need n >= 0, k >= 1, theta >= 0, C >= 1");
    if (n == 0) return std::pow(C, k);
    const double lb = numerics::ln_gamma(double(n + k)) - numerics::ln_gamma(double(n + 1)) -
                      numerics::ln_gamma(double(k));
    const double lv = lb + n * std::log(theta) + k * std::log(C);
    if (lv > 700.0) throw DomainError("lemma2_bound: value overflows double range");
    return std::exp(lv);
}

inline double log_theorem1_factor(double C, double eta, double eps, double Q_value) {
    if (!(C >= 1)) throw DomainError("theorem1_factor: C >= 1 required");
    if (!(eta >= 0 && eta < 1)) throw DomainError("theorem1_factor: 0 <= eta < 1 required");
    if (!(eps > 0 && eps < 1.0 - eta))
        throw DomainError("theorem1_factor: 0 < eps < 1 - eta required");
    if (!(Q_value >= 0)) throw DomainError("theorem1_factor: Q >= 0 required");
    return (1.0 + Q_value / eps) * (std::log(C) - std::log1p(-eta - eps));
}

// (C / (1 - eta - eps))^{1 + Q/eps}
inline double theorem1_factor(double C, double eta, double eps, double Q_value) {
    return std::exp(log_theorem1_factor(C, eta, eps, Q_value));
}

struct EpsChoice {
    double eps = 0.0;
    double factor = 0.0;
};

// golden-section minimum over eps in (0, 1-eta); never worse than the two
// canonical choices eps = eta (when 0 < eta < 1/2) and eps = (1-eta)/2
inline EpsChoice optimize_eps(double C, double eta, double Q_value) {
    const double hi = 1.0 - eta;
    auto obj = [&](double e) { return log_theorem1_factor(C, eta, e, Q_value); };
    auto r = numerics::minimize_scalar(obj, 1e-9 * hi, hi * (1.0 - 1e-9), 512, 1e-12);
    double best_eps = r.argmax, best = r.value;
    if (eta > 0.0 && eta < 0.5 && obj(eta) < best) {
        best = obj(eta);
        best_eps = eta;
    }
    if (obj(0.5 * hi) < best) {
        best = obj(0.5 * hi);
        best_eps = 0.5 * hi;
    }
    return {best_eps, std::exp(best)};
}

struct ExplKato {
    double eta = 0.0;   // b c0(d) M I
    double slope = 0.0; // 2 M I / (h |B(0,1/2)|)
    double M = 0.0;
};

inline ExplKato explkato_decompose(double b, double a, int d, double I_sqrt_h, double h) {
    if (!(0 < a && a < b)) throw DomainError("explkato: requires 0 < a < b");
    if (d < 3) throw DomainError("explkato: d >= 3 required");
    if (!(h > 0) || I_sqrt_h < 0) throw DomainError("explkato: h > 0, I >= 0 required");
    auto consts = fourg::compute_M(a, b, d);
    ExplKato e;
    e.M = consts.M;
    e.eta = b * kato::c0(d) * consts.M * I_sqrt_h;
    e.slope = 2.0 * consts.M * I_sqrt_h / (h * kato::ball_volume(d, 0.5));
    return e;
}

// the full coefficient I_{sqrt h}(q) M [b c0(d) + 2 (t-s)/(h |B(0,1/2)|)]
inline double explkato_bound(double b, double a, int d, double I_sqrt_h, double h,
                             double t_minus_s) {
    auto e = explkato_decompose(b, a, d, I_sqrt_h, h);
    return e.eta + e.slope * t_minus_s;
}

struct BoundCertificate {
    double C = 1.0;
    double eta = 0.0;
    double eps = 0.0;
    double Q_value = 0.0;      // Q at the reference horizon
    double bound_factor = 1.0; // (C/(1-eta-eps))^{1+Q_value/eps}
    double lambda = 0.0;
    double Lambda = 1.0;
};

struct ThmNewBound {
    BoundCertificate cert;
    double q_slope = 0.0; // Q(s,t) = q_slope (t-s)
    GaussianKernel majorant;
    double h = 0.0;
    double I = 0.0;

    double log_factor(double dt) const {
        auto choice = optimize_eps(cert.C, cert.eta, q_slope * dt);
        return log_theorem1_factor(cert.C, cert.eta, choice.eps, q_slope * dt);
    }
    // (s,x,t,y) -> factor e^{lambda (t-s)} g_a(s,x,t,y)
    double operator()(double s, std::span<const double> x, double t,
                      std::span<const double> y) const {
        if (!(s < t)) return 0.0;
        return std::exp(log_factor(t - s) + cert.lambda * (t - s) +
                        kernels::log_gauss_eval(majorant, s, x, t, y));
    }
};

// Pipeline: C = Lambda (b/a)^{d/2}; (eta, Q) from the explicit Kato
// coefficient; eps optimized at the reference horizon.  eta >= 1 is a hard
// error carrying the largest admissible I for these parameters.
inline ThmNewBound thm_new_pipeline(double Lambda, double lambda, double b, double a,
                                    double h, int d, double I_sqrt_h,
                                    double reference_dt = 1.0) {
    if (!(Lambda >= 1.0)) throw DomainError("thm_new_pipeline: Lambda >= 1 required");
    auto e = explkato_decompose(b, a, d, I_sqrt_h, h);
    if (e.eta >= 1.0) {
        std::ostringstream msg;
        msg << "thm_new_pipeline: eta = " << e.eta
            << " >= 1; the bound needs b c0(d) M I < 1. Largest admissible I for these "
               "parameters is "
            << 1.0 / (b * kato::c0(d) * e.M) << "; reduce I (smaller h) or shrink b.";
        throw DomainError(msg.str());
    }
    ThmNewBound out;
    out.majorant = GaussianKernel{a, d};
    out.h = h;
    out.I = I_sqrt_h;
    out.q_slope = e.slope;
    out.cert.C = Lambda * std::pow(b / a, 0.5 * d);
    out.cert.eta = e.eta;
    out.cert.lambda = lambda;
    out.cert.Lambda = Lambda;
    out.cert.Q_value = e.slope * reference_dt;
    auto choice = optimize_eps(out.cert.C, out.cert.eta, out.cert.Q_value);
    out.cert.eps = choice.eps;
    out.cert.bound_factor = choice.factor;
    return out;
}

// M' N with M' = ((b-a)/a v a/(b-a))^{d/2} M
inline double step1_parabolic_bound(double b, double a, int d, double N_value) {
    if (!(0 < a && a < b)) throw DomainError("step1_parabolic_bound: requires 0 < a < b");
    if (N_value < 0) throw DomainError("step1_parabolic_bound: N >= 0 required");
    auto consts = fourg::compute_M(a, b, d);
    const double ratio = std::max((b - a) / a, a / (b - a));
    return std::pow(ratio, 0.5 * d) * consts.M * N_value;
}

// C [eta + Q^-(s,t)] from the regularization lemma; with a time-changed
// majorant (g_a vs g_b) the factor C can be dropped.
inline double lemma52_bound(double C, double eta, double Qminus_value,
                            bool time_changed_majorant = false) {
    if (!(C >= 1) || !(eta >= 0) || !(Qminus_value >= 0))
        throw DomainError("lemma52_bound: invalid parameters");
    return (time_changed_majorant ? 1.0 : C) * (eta + Qminus_value);
}

// Tail certificate for the series from a verified membership: k chosen so
// (k-1) eps <= Q(s,t) < k eps, theta = eta + Q(s,t)/k < 1.
inline series::TailCertificate make_tail_certificate(const NMembership& m, double s,
                                                     double t, double eps) {
    if (!(eps > 0 && eps < 1.0 - m.eta))
        throw DomainError("make_tail_certificate: 0 < eps < 1 - eta required");
    const double Qst = m.Q.eval(s, t);
    const int k = int(std::floor(Qst / eps)) + 1;
    series::TailCertificate cert;
    cert.C = m.C;
    cert.eta = m.eta;
    cert.k = k;
    cert.theta = m.eta + Qst / k;
    cert.pstar = m.pstar_kernel;
    return cert;
}

// transition density of the unit-drift Brownian motion (Example-style check)
inline double drift_kernel(double s, double x, double t, double y) {
    GaussianKernel g1{1.0, 1};
    return kernels::gauss_eval1(g1, s, x - s, t, y - t);
}

} // namespace gsp::bounds
