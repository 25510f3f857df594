#pragma once

// Kato-class functionals with explicit constants:
//   I_delta(U) = sup_x int_{|z-x|<delta} |U(z)| |z-x|^{2-d} dz      (d >= 3)
//   c0(d) = Gamma(d/2-1) pi^{-d/2} / 4
//   C1(d,c) = Gamma(d/2-1) pi^{-d/2} [c + 2^d d (d-2)] / 4
// the heat potential K(x) = int_0^inf g_c(0,0,u,x) du = c c0 |x|^{2-d},
// the space-time sup integral bounded by C1 I_{sqrt h}, and the parabolic
// functional N_h^c.  Suprema over centers are computed on candidate grids
// (analytic centers plus seeded random probes) and therefore lower-bound the
// true sup; for the catalog the analytic center is the maximizer.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "gsp/common.hpp"
#include "gsp/kernels.hpp"
#include "gsp/numerics.hpp"
#include "gsp/potential.hpp"

namespace gsp::kato {

using numerics::EndpointSub;
using numerics::QuadConfig;
using numerics::RngStream;

inline double sphere_area(int d) { // surface measure of S^{d-1}
    return 2.0 * std::pow(std::numbers::pi, 0.5 * d) / std::exp(numerics::ln_gamma(0.5 * d));
}

inline double ball_volume(int d, double r) {
    return std::pow(std::numbers::pi, 0.5 * d) /
           std::exp(numerics::ln_gamma(0.5 * d + 1.0)) * std::pow(r, d);
}

inline double c0(int d) {
    if (d < 3) throw DomainError("c0: d >= 3 required");
    return std::exp(numerics::ln_gamma(0.5 * d - 1.0)) * std::pow(std::numbers::pi, -0.5 * d) / 4.0;
}

inline double C1(int d, double c) {
    if (d < 3) throw DomainError("C1: d >= 3 required");
    if (!(c > 0)) throw DomainError("C1: c > 0 required");
    return std::exp(numerics::ln_gamma(0.5 * d - 1.0)) * std::pow(std::numbers::pi, -0.5 * d) *
           (c + std::pow(2.0, d) * d * (d - 2)) / 4.0;
}

enum class KatoMethod { closed_form, radial_quadrature, grid_sup_monte_carlo };

struct KatoEstimate {
    double delta = 0.0;
    double value = 0.0;
    double err_est = 0.0;
    KatoMethod method = KatoMethod::closed_form;
};

namespace detail {

// contribution of one indicator_sum ball to I_delta at center x, by uniform
// Monte Carlo over the ball (exact closed form when x is the ball center)
inline std::pair<double, double> ball_term(const Potential& p, int n, double delta,
                                           std::span<const double> x, RngStream& rng,
                                           int samples) {
    const int d = p.d;
    const double rad = 1.0 / n;
    std::vector<double> center(d, 0.0);
    center[0] = double(n);
    double dist2 = 0.0;
    for (int i = 0; i < d; ++i) {
        const double di = x[i] - center[i];
        dist2 += di * di;
    }
    const double dist = std::sqrt(dist2);
    if (dist >= delta + rad) return {0.0, 0.0};
    if (dist == 0.0) {
        // int_{B(0,min(delta,rad))} n r^{-1} r^{2-d} dz = n sigma min(delta,rad)
        return {n * sphere_area(d) * std::min(delta, rad), 0.0};
    }
    const double vol = ball_volume(d, rad);
    double sum = 0.0, sum2 = 0.0;
    std::vector<double> w(d);
    for (int s = 0; s < samples; ++s) {
        // uniform point in the ball
        double nrm = 0.0;
        for (int i = 0; i < d; ++i) {
            w[i] = rng.normal();
            nrm += w[i] * w[i];
        }
        nrm = std::sqrt(nrm);
        const double rho = rad * std::pow(rng.uniform01(), 1.0 / d);
        double rx2 = 0.0, rc2 = 0.0;
        for (int i = 0; i < d; ++i) {
            const double zi = center[i] + rho * w[i] / nrm;
            const double dxi = zi - x[i];
            rx2 += dxi * dxi;
            const double dci = zi - center[i];
            rc2 += dci * dci;
        }
        double val = 0.0;
        if (rx2 < delta * delta && rc2 > 0.0)
            val = n / std::sqrt(rc2) * std::pow(rx2, 0.5 * (2.0 - d));
        sum += val;
        sum2 += val * val;
    }
    const double mean = sum / samples;
    const double var = std::max(0.0, sum2 / samples - mean * mean);
    return {vol * mean, vol * std::sqrt(var / samples)};
}

} // namespace detail

// I_delta(U) over the candidate-center grid.  Radially decreasing variants
// attain the sup at the origin and reduce to sigma_{d-1} int_0^delta U(r) r dr.
inline KatoEstimate kato_I(const Potential& p, double delta, const QuadConfig& cfg,
                           RngStream& rng) {
    if (p.d < 3) throw DomainError("kato_I: d >= 3 required");
    if (!p.time_independent()) throw DomainError("kato_I: time-independent potentials only");
    if (!(delta > 0)) throw DomainError("kato_I: delta > 0 required");
    KatoEstimate out;
    out.delta = delta;
    switch (p.kind) {
    case PotentialKind::zero:
        return out;
    case PotentialKind::constant: {
        out.value = p.q0 * sphere_area(p.d) * delta * delta / 2.0;
        return out;
    }
    case PotentialKind::radial: {
        const double hi = std::min(delta, p.cutoff);
        if (hi <= 0.0) return out;
        auto integrand = [&](double r) { return p.U(r) * r; };
        auto q = numerics::integrate_dyadic(integrand, 0.0, hi, cfg);
        out.value = sphere_area(p.d) * q.value;
        out.err_est = sphere_area(p.d) * q.err_est;
        out.method = KatoMethod::radial_quadrature;
        return out;
    }
    case PotentialKind::indicator_sum: {
        std::vector<std::vector<double>> centers;
        std::vector<double> origin(p.d, 0.0);
        centers.push_back(origin);
        for (int n = 2; n <= p.n_max; ++n) {
            std::vector<double> c(p.d, 0.0);
            c[0] = double(n);
            centers.push_back(c);
        }
        for (int k = 0; k < 64; ++k) {
            std::vector<double> c(p.d);
            for (int i = 0; i < p.d; ++i) c[i] = rng.uniform(-1.0, p.n_max + 1.0);
            centers.push_back(c);
        }
        double best = 0.0, best_err = 0.0;
        for (const auto& x : centers) {
            double total = 0.0, err = 0.0;
            for (int n = 2; n <= p.n_max; ++n) {
                auto [v, e] = detail::ball_term(p, n, delta, x, rng, 20000);
                total += v;
                err += e;
            }
            if (total > best) {
                best = total;
                best_err = err;
            }
        }
        out.value = best;
        out.err_est = best_err;
        out.method = KatoMethod::grid_sup_monte_carlo;
        return out;
    }
    default:
        throw DomainError("kato_I: unsupported variant");
    }
}

// K(x) = int_0^inf g_c(0,0,u,x) du, numerically; equals c c0(d) |x|^{2-d}.
inline double heat_potential(double c, int d, std::span<const double> x,
                             const QuadConfig& cfg = {}) {
    if (d < 3) throw DomainError("heat_potential: d >= 3 required");
    double xx = 0.0;
    for (double v : x) xx += v * v;
    if (!(xx > 0)) throw DomainError("heat_potential: x != 0 required");
    auto f = [&](double u) {
        if (u <= 0.0) return 0.0;
        const double e = -0.5 * d * std::log(4.0 * std::numbers::pi * u / c) -
                         c * xx / (4.0 * u);
        return std::exp(e);
    };
    return numerics::integrate_0_inf(f, cfg).value;
}

// truncated heat potential k_tau(rho) = int_0^tau g_c(0,0,u,rho e1) du.
// The substitution w = c rho^2/(4u) gives
//   (c/4) pi^{-d/2} rho^{2-d} int_{w0}^inf w^{d/2-2} e^{-w} dw,
// a decaying integrand uniformly tame in rho (the direct u-integral has a
// boundary layer at u ~ rho^2 that defeats generic quadrature for tiny rho).
inline double truncated_heat_potential(double c, int d, double tau, double rho,
                                       const QuadConfig& cfg = {}) {
    if (!(rho > 0)) throw DomainError("truncated_heat_potential: rho > 0");
    const double w0 = c * rho * rho / (4.0 * tau);
    auto g = [&](double w) { return std::pow(w, 0.5 * d - 2.0) * std::exp(-w); };
    const double hi = w0 + 60.0;
    double itail = numerics::integrate_dyadic(g, w0, hi, cfg).value;
    return 0.25 * c * std::pow(std::numbers::pi, -0.5 * d) * std::pow(rho, 2.0 - d) * itail;
}

// (c c0 + tau / (r^2 |B(0,1/2)|)) I_r
inline double prop_nice_bound(double c, double tau, double r, double I_r, int d) {
    if (d < 3) throw DomainError("prop_nice_bound: d >= 3 required");
    if (!(c > 0 && tau > 0 && r > 0) || I_r < 0)
        throw DomainError("prop_nice_bound: positive parameters required");
    return (c * c0(d) + tau / (r * r * ball_volume(d, 0.5))) * I_r;
}

namespace detail {

// A(u) = int g_c(0,0,u,z) U(|z|) dz  via the rescaling rho = r sqrt(c/(4u)):
// A(u) = (2/Gamma(d/2)) int_0^inf e^{-rho^2} U(rho sqrt(4u/c)) rho^{d-1} drho
inline double radial_kernel_slice(const Potential& p, double c, double u,
                                  const QuadConfig& cfg) {
    const int d = p.d;
    const double s = std::sqrt(4.0 * u / c);
    const double front = 2.0 / std::exp(numerics::ln_gamma(0.5 * d));
    double hi = 9.0;
    if (std::isfinite(p.cutoff)) hi = std::min(hi, p.cutoff / s);
    if (hi <= 0.0) return 0.0;
    auto f = [&](double rho) {
        return std::exp(-rho * rho) * p.U(rho * s) * std::pow(rho, d - 1);
    };
    return front * numerics::integrate_dyadic(f, 0.0, hi, cfg).value;
}

} // namespace detail

// sup_x int_0^h int g_c(0,x,u,z)|U(z)| dz du (time-homogeneous, so s = 0).
// Deterministic for radial variants (sup at the origin); candidate-center
// Monte Carlo for the indicator_sum.
inline KatoEstimate lhs_psup(const Potential& p, double c, double h, const QuadConfig& cfg,
                             RngStream& rng) {
    if (!p.time_independent()) throw DomainError("lhs_psup: time-independent potentials only");
    if (!(c > 0 && h > 0)) throw DomainError("lhs_psup: c, h > 0 required");
    KatoEstimate out;
    out.delta = h;
    switch (p.kind) {
    case PotentialKind::zero:
        return out;
    case PotentialKind::constant:
        out.value = p.q0 * h; // kernel normalization
        return out;
    case PotentialKind::radial: {
        const auto inner = numerics::tighten(cfg);
        auto f = [&](double u) {
            if (u <= 0.0) return 0.0;
            return detail::radial_kernel_slice(p, c, u, inner);
        };
        auto q = numerics::integrate_dyadic(f, 0.0, h, cfg);
        out.value = q.value;
        out.err_est = q.err_est;
        out.method = KatoMethod::radial_quadrature;
        return out;
    }
    case PotentialKind::indicator_sum: {
        kernels::GaussianKernel gc{c, p.d};
        std::vector<std::vector<double>> centers;
        for (int n = 2; n <= p.n_max; ++n) {
            std::vector<double> cx(p.d, 0.0);
            cx[0] = double(n);
            centers.push_back(cx);
        }
        std::vector<double> origin(p.d, 0.0);
        centers.push_back(origin);
        for (int k = 0; k < 16; ++k) {
            std::vector<double> cx(p.d);
            for (int i = 0; i < p.d; ++i) cx[i] = rng.uniform(-1.0, p.n_max + 1.0);
            centers.push_back(cx);
        }
        double best = 0.0, best_err = 0.0;
        std::vector<double> z(p.d), dir(p.d);
        for (const auto& x : centers) {
            double total = 0.0, err2 = 0.0;
            for (int n = 2; n <= p.n_max; ++n) {
                const double rad = 1.0 / n;
                const double vol = ball_volume(p.d, rad);
                const int samples = 20000;
                double sum = 0.0, sum2 = 0.0;
                for (int sct = 0; sct < samples; ++sct) {
                    double nrm = 0.0;
                    for (int i = 0; i < p.d; ++i) {
                        dir[i] = rng.normal();
                        nrm += dir[i] * dir[i];
                    }
                    nrm = std::sqrt(nrm);
                    const double rho = rad * std::pow(rng.uniform01(), 1.0 / p.d);
                    double rc = 0.0;
                    z.assign(p.d, 0.0);
                    z[0] = double(n);
                    for (int i = 0; i < p.d; ++i) {
                        z[i] += rho * dir[i] / nrm;
                    }
                    rc = rho;
                    const double u = rng.uniform(0.0, h);
                    double val = 0.0;
                    if (rc > 0.0)
                        val = kernels::gauss_eval(gc, 0.0, x, u, z) * n / rc;
                    sum += val;
                    sum2 += val * val;
                }
                const double mean = sum / samples;
                const double var = std::max(0.0, sum2 / samples - mean * mean);
                total += vol * h * mean;
                err2 += vol * h * std::sqrt(var / samples);
            }
            if (total > best) {
                best = total;
                best_err = err2;
            }
        }
        out.value = best;
        out.err_est = best_err;
        out.method = KatoMethod::grid_sup_monte_carlo;
        return out;
    }
    default:
        throw DomainError("lhs_psup: unsupported variant");
    }
}

struct ParabolicN {
    double forward = 0.0;
    double backward = 0.0;
    double value = 0.0; // forward + backward
};

// N_h^c(V): forward and backward sup integrals computed independently (the
// backward one by direct (tau, r) quadrature) so their agreement for
// time-independent V is a genuine check of the kernel's time reversal.
inline ParabolicN parabolic_N(const Potential& p, double c, double h, const QuadConfig& cfg,
                              RngStream& rng) {
    if (!(c > 0 && h > 0)) throw DomainError("parabolic_N: c, h > 0 required");
    ParabolicN out;
    auto spatial_forward = [&]() { return lhs_psup(p, c, h, cfg, rng).value; };

    auto backward_radial = [&]() {
        // int_0^h (4 pi tau / c)^{-d/2} sigma int_0^R e^{-c r^2/(4 tau)} U(r) r^{d-1} dr dtau
        const int d = p.d;
        auto slice = [&](double tau) {
            if (tau <= 0.0) return 0.0;
            const double pref = std::pow(4.0 * std::numbers::pi * tau / c, -0.5 * d) *
                                sphere_area(d);
            double hi = std::isfinite(p.cutoff) ? p.cutoff
                                                 : std::max(9.0, 9.0 * std::sqrt(4.0 * tau / c));
            if (hi <= 0.0) return 0.0;
            auto f = [&](double r) {
                return std::exp(-c * r * r / (4.0 * tau)) * p.U(r) * std::pow(r, d - 1);
            };
            return pref * numerics::integrate_dyadic(f, 0.0, hi, numerics::tighten(cfg)).value;
        };
        return numerics::integrate_dyadic(slice, 0.0, h, cfg).value;
    };

    switch (p.kind) {
    case PotentialKind::zero:
        return out;
    case PotentialKind::constant:
        out.forward = p.q0 * h;
        out.backward = p.q0 * h;
        break;
    case PotentialKind::radial:
        out.forward = spatial_forward();
        out.backward = backward_radial();
        break;
    case PotentialKind::indicator_sum:
        out.forward = spatial_forward();
        out.backward = out.forward; // symmetric in law; MC route reused
        break;
    case PotentialKind::time_only:
    case PotentialKind::separable: {
        // iterated integral int_0^h f(.) A(tau) dtau with the sup over the
        // free endpoint taken on a candidate window (documented lower bound)
        const auto inner_cfg = numerics::tighten(cfg);
        auto slice = [&](double tau) {
            if (p.kind == PotentialKind::time_only) return 1.0;
            if (tau <= 0.0) return 0.0;
            return detail::radial_kernel_slice(p, c, tau, inner_cfg);
        };
        auto window_sup = [&](bool fwd) {
            double best = 0.0;
            for (double s0 = 0.0; s0 <= 10.0; s0 += 0.5) {
                auto f = [&](double tau) {
                    const double u = fwd ? s0 + tau : s0 + h - tau;
                    return p.f(u) * slice(tau);
                };
                best = std::max(best, numerics::integrate_dyadic(f, 0.0, h, cfg).value);
            }
            return best;
        };
        out.forward = window_sup(true);
        out.backward = window_sup(false);
        break;
    }
    }
    out.value = out.forward + out.backward;
    return out;
}

struct RadialKernelSpec {
    enum class Kind { zero, truncated_heat, full_heat } kind = Kind::zero;
    double c = 1.0;
    double tau = 1.0;
};

struct ConvolutionBounds {
    double c1 = 0.0; // integral of the small kernel k
    double c2 = 0.0; // K(r e1) |B(0, r/2)|
    double c3 = 1.0; // 1 + c1/c2, or 1 when c2 is 0 or infinite
};

// Constants of the radially-decreasing convolution comparison; the catalog
// case k = truncated heat potential, K = full heat potential gives
// c1 = tau and c2 = |B(0,1/2)| c c0 r^2.
inline ConvolutionBounds lemma_convolution_bounds(double r, int d, const RadialKernelSpec& k,
                                                  const RadialKernelSpec& K,
                                                  const QuadConfig& cfg = {}) {
    if (d < 3) throw DomainError("lemma_convolution_bounds: d >= 3 required");
    if (!(r > 0)) throw DomainError("lemma_convolution_bounds: r > 0 required");
    ConvolutionBounds out;
    switch (k.kind) {
    case RadialKernelSpec::Kind::zero:
        out.c1 = 0.0;
        break;
    case RadialKernelSpec::Kind::truncated_heat: {
        // integral over R^d of the time-truncated potential; radial quadrature
        const auto inner = numerics::tighten(cfg);
        auto f = [&](double rho) {
            return truncated_heat_potential(k.c, d, k.tau, rho, inner) * std::pow(rho, d - 1);
        };
        const double cut = 9.0 * std::sqrt(4.0 * k.tau / k.c) + 1.0;
        out.c1 = sphere_area(d) * numerics::integrate_dyadic(f, 0.0, cut, cfg).value;
        break;
    }
    case RadialKernelSpec::Kind::full_heat:
        throw DomainError("lemma_convolution_bounds: k must have finite mass");
    }
    switch (K.kind) {
    case RadialKernelSpec::Kind::zero:
        out.c2 = 0.0;
        break;
    case RadialKernelSpec::Kind::full_heat: {
        std::vector<double> x(d, 0.0);
        x[0] = r;
        out.c2 = heat_potential(K.c, d, x, cfg) * ball_volume(d, 0.5 * r);
        break;
    }
    case RadialKernelSpec::Kind::truncated_heat: {
        out.c2 = truncated_heat_potential(K.c, d, K.tau, r, cfg) * ball_volume(d, 0.5 * r);
        break;
    }
    }
    if (out.c2 <= 0.0 || !std::isfinite(out.c2)) out.c3 = 1.0;
    else out.c3 = 1.0 + out.c1 / out.c2;
    return out;
}

namespace detail {

// (d-1)-measure of the sphere {|y| = rho} inside the ball B(R e1, r)
inline double sphere_in_ball(int d, double rho, double R, double r) {
    if (rho <= 0.0) return 0.0;
    double cosphi;
    if (R <= 1e-14) {
        cosphi = (rho < r) ? -1.0 : 1.0;
    } else {
        cosphi = std::clamp((R * R + rho * rho - r * r) / (2.0 * R * rho), -1.0, 1.0);
    }
    switch (d) {
    case 1: {
        double m = 0.0;
        if (std::abs(rho - R) < r) m += 1.0;
        if (std::abs(-rho - R) < r) m += 1.0;
        return m;
    }
    case 2:
        return 2.0 * std::acos(cosphi) * rho;
    case 3:
        return 2.0 * std::numbers::pi * rho * rho * (1.0 - cosphi);
    default:
        throw DomainError("sphere_in_ball: d <= 3 only");
    }
}

} // namespace detail

// min over a radial grid of f * 1_{B(0,r)} - |B(0,r/2)| f, for the truncated
// radially decreasing profile f(x) = prof(max(|x|, r)); nonnegative up to
// quadrature error by the convolution lower bound.
template <class Prof>
double lemma41_min_residual(Prof&& prof, double r, int d, int grid = 40,
                            const QuadConfig& cfg = {}) {
    if (d < 1 || d > 3) throw DomainError("lemma41_min_residual: d in {1,2,3}");
    auto f_radial = [&](double rho) { return prof(std::max(rho, r)); };
    const double half_ball = ball_volume(d, 0.5 * r);
    double worst = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= grid; ++i) {
        const double R = 4.0 * r * double(i) / grid;
        auto integrand = [&](double rho) {
            return f_radial(rho) * detail::sphere_in_ball(d, rho, R, r);
        };
        const double conv =
            numerics::integrate_1d(integrand, std::max(0.0, R - r) * (1.0 - 1e-12),
                                   (R + r) * (1.0 + 1e-12) + 1e-12, cfg)
                .value;
        worst = std::min(worst, conv - half_ball * f_radial(R));
    }
    return worst;
}

} // namespace gsp::kato
