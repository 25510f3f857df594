#pragma once

// Shared numerical primitives: adaptive 1-D quadrature, Gauss-Hermite rules,
// scalar maximization, seeded random streams, gamma function.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <random>
#include <thread>
#include <utility>
#include <vector>

#include "gsp/common.hpp"

namespace gsp::numerics {

struct QuadConfig {
    double abs_tol = 1e-11;
    double rel_tol = 1e-11;
    int max_subdivisions = 4000;
    int hermite_order = 40;

    void validate() const {
        if (!(abs_tol > 0) || !(rel_tol > 0))
            throw DomainError("QuadConfig: tolerances must be positive");
        if (max_subdivisions < 1)
            throw DomainError("QuadConfig: max_subdivisions >= 1 required");
        if (hermite_order < 2)
            throw DomainError("QuadConfig: hermite_order >= 2 required");
    }
};

struct QuadResult {
    double value = 0.0;
    double err_est = 0.0;
};

// Tightened tolerances for the inner integral of a nested pair, so outer
// adaptivity never chases inner quadrature noise.
inline QuadConfig tighten(QuadConfig cfg, double factor = 1e-3) {
    cfg.abs_tol = std::max(cfg.abs_tol * factor, 1e-14);
    cfg.rel_tol = std::max(cfg.rel_tol * factor, 1e-14);
    return cfg;
}

// Which endpoints get the singularity-taming substitution u = lo + v^2
// (resp. u = hi - v^2).  Chosen per call by the caller.
enum class EndpointSub { none, lo, hi, both };

namespace detail {

struct AdaptState {
    int splits_left;
    double err_sum = 0.0;
};

template <class F>
double eval_checked(F& f, double x) {
    double v = f(x);
    if (std::isnan(v)) throw DomainError("integrate_1d: integrand returned NaN");
    return v;
}

// Adaptive Simpson on [a,b] by interval bisection; the two-half Simpson value
// serves as the embedded higher-order rule for the error estimate.
template <class F>
double adapt_simpson(F& f, double a, double b, double fa, double fm, double fb,
                     double whole, double tol, AdaptState& st, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = eval_checked(f, lm), frm = eval_checked(f, rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double diff = (left + right) - whole;
    if (std::abs(diff) <= 15.0 * tol || depth >= 52) {
        st.err_sum += std::abs(diff) / 15.0;
        return left + right + diff / 15.0;
    }
    if (st.splits_left <= 0)
        throw NonConvergence("integrate_1d: subdivision budget exhausted");
    st.splits_left -= 1;
    return adapt_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, st, depth + 1) +
           adapt_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, st, depth + 1);
}

template <class F>
QuadResult integrate_plain(F&& f, double lo, double hi, const QuadConfig& cfg) {
    const double fa = eval_checked(f, lo);
    const double fb = eval_checked(f, hi);
    const double fm = eval_checked(f, 0.5 * (lo + hi));
    const double whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
    // Coarse scale probe so rel_tol has something to bite on for the first split.
    const double scale = std::max(std::abs(whole), 1e-300);
    const double tol = std::max(cfg.abs_tol, cfg.rel_tol * scale);
    AdaptState st{cfg.max_subdivisions};
    double v = adapt_simpson(f, lo, hi, fa, fm, fb, whole, tol, st, 0);
    return {v, st.err_sum};
}

} // namespace detail

// Adaptive quadrature of f on (lo,hi).  Integrable endpoint singularities are
// handled by the u = lo + v^2 substitution when requested via `sub`.
template <class F>
QuadResult integrate_1d(F&& f, double lo, double hi, const QuadConfig& cfg = {},
                        EndpointSub sub = EndpointSub::none) {
    cfg.validate();
    if (!(lo < hi)) throw DomainError("integrate_1d: requires lo < hi");
    switch (sub) {
    case EndpointSub::none:
        return detail::integrate_plain(f, lo, hi, cfg);
    case EndpointSub::lo: {
        // The clamp keeps v = 0 off the singular endpoint while preserving
        // the limit of 2 v f(lo + v^2) for 1/sqrt-type singularities.
        const double vmin = 1e-14 * std::sqrt(hi - lo);
        auto g = [&, vmin](double v) {
            v = std::max(v, vmin);
            return 2.0 * v * f(lo + v * v);
        };
        return detail::integrate_plain(g, 0.0, std::sqrt(hi - lo), cfg);
    }
    case EndpointSub::hi: {
        const double vmin = 1e-14 * std::sqrt(hi - lo);
        auto g = [&, vmin](double v) {
            v = std::max(v, vmin);
            return 2.0 * v * f(hi - v * v);
        };
        return detail::integrate_plain(g, 0.0, std::sqrt(hi - lo), cfg);
    }
    case EndpointSub::both: {
        const double mid = 0.5 * (lo + hi);
        auto a = integrate_1d(f, lo, mid, cfg, EndpointSub::lo);
        auto b = integrate_1d(f, mid, hi, cfg, EndpointSub::hi);
        return {a.value + b.value, a.err_est + b.err_est};
    }
    }
    return {};
}

// Adaptive quadrature over octave panels [span/2^{k+1}, span/2^k] anchored at
// `lo`.  Robust when the integrand's bulk sits at an unknown scale (kernel
// widths spanning decades), where a single adaptive pass can miss a spike
// between its initial sample points.
template <class F>
QuadResult integrate_dyadic(F&& f, double lo, double hi, const QuadConfig& cfg = {}) {
    cfg.validate();
    if (!(lo < hi)) throw DomainError("integrate_dyadic: requires lo < hi");
    const double span = hi - lo;
    QuadResult total;
    double frac = 1.0;
    for (int k = 0; k < 48; ++k) {
        const double next = frac * 0.5;
        auto piece = detail::integrate_plain(f, lo + next * span, lo + frac * span, cfg);
        total.value += piece.value;
        total.err_est += piece.err_est;
        frac = next;
        if (frac * span < 1e-14 * span) break;
    }
    // the remaining sliver, with the sqrt substitution in case f is singular
    if (lo + frac * span > lo) {
        auto tail = integrate_1d(f, lo, lo + frac * span, cfg, EndpointSub::lo);
        total.value += tail.value;
        total.err_est += tail.err_est;
    }
    return total;
}

// Improper time integral over (0,inf): split at u = 1 and map each piece to
// (0,1] by u = v^2 resp. u = 1/w^2.  The substitutions tame power behavior up
// to u^{-3/4} at zero and down to u^{-3/2} decay at infinity (the heat
// potential case) without forming 1 - v differences.
template <class F>
QuadResult integrate_0_inf(F&& f, const QuadConfig& cfg = {}) {
    auto near = [&](double v) {
        v = std::max(v, 1e-14);
        return 2.0 * v * f(v * v);
    };
    auto far = [&](double w) {
        w = std::max(w, 1e-14);
        return 2.0 / (w * w * w) * f(1.0 / (w * w));
    };
    auto a = detail::integrate_plain(near, 0.0, 1.0, cfg);
    auto b = detail::integrate_plain(far, 0.0, 1.0, cfg);
    return {a.value + b.value, a.err_est + b.err_est};
}

struct GaussHermiteRule {
    std::vector<double> nodes;   // symmetric about 0, ascending
    std::vector<double> weights; // sum = sqrt(pi)
};

namespace detail {

// Orthonormal Hermite recurrence value and derivative at z (weight e^{-x^2}).
// Values overflow near the extreme roots for large n, so a power-of-two
// exponent rides along; sign and the Newton ratio p/p' are scale-free.
struct HermEval {
    double p;    // scaled value of the degree-n orthonormal polynomial
    double dp;   // scaled derivative (same scale as p)
    long scale;  // value = p * 2^scale
};

inline HermEval hermite_eval(int n, double z) {
    constexpr double kPim4 = 0.7511255444649425; // pi^{-1/4}
    double p1 = kPim4, p2 = 0.0;
    long e = 0;
    for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = z * std::sqrt(2.0 / (j + 1)) * p2 - std::sqrt(double(j) / (j + 1)) * p3;
        if (std::abs(p1) > 1e150) {
            p1 = std::ldexp(p1, -500);
            p2 = std::ldexp(p2, -500);
            e += 500;
        }
    }
    return {p1, std::sqrt(2.0 * n) * p2, e};
}

// Nodes by bracketed Newton on the Hermite recurrence: computed in descending
// order, each root bisected between the previous root and a downward walk to
// a sign change, then polished.  Plain Newton from the classic initial
// guesses jumps back to the previous root once n gets close to 200.
inline GaussHermiteRule build_gauss_hermite(int n) {
    constexpr double kEps = 1e-14;
    GaussHermiteRule r;
    r.nodes.assign(n, 0.0);
    r.weights.assign(n, 0.0);
    const int m = (n + 1) / 2;
    const double edge = std::sqrt(2.0 * n + 1.0);
    const double spacing = 1.85575 * std::pow(2.0 * n + 1.0, -0.16667); // first-gap scale
    for (int i = 0; i < m; ++i) {
        // Sign of H_n on (root_i, root_{i-1}) is (-1)^i, counting from the top.
        const double sign_hi = (i % 2 == 0) ? 1.0 : -1.0;
        double hi, step;
        if (i == 0) {
            hi = edge;
            step = 0.5 * spacing;
        } else if (i == 1) {
            hi = r.nodes[n - 1] - 1e-9 * (1.0 + r.nodes[n - 1]);
            step = 0.5 * (edge - r.nodes[n - 1]);
        } else {
            hi = r.nodes[n - i] - 1e-9 * (1.0 + std::abs(r.nodes[n - i]));
            step = 0.45 * (r.nodes[n - i + 1] - r.nodes[n - i]);
        }
        // Walk down in sub-gap steps; the first sign change brackets root i.
        double lo = hi;
        bool bracketed = false;
        for (int tries = 0; tries < 2000; ++tries) {
            lo = hi - step;
            if (hermite_eval(n, lo).p * sign_hi < 0.0) { bracketed = true; break; }
            hi = lo;
        }
        if (!bracketed) throw NonConvergence("gauss_hermite: root bracketing failed");
        // Safeguarded Newton: keep the bracket, fall back to bisection.
        double z = 0.5 * (lo + hi);
        HermEval ev{};
        for (int it = 0; it < 200; ++it) {
            ev = hermite_eval(n, z);
            if (ev.p * sign_hi > 0.0) hi = z;
            else lo = z;
            double znew = z - ev.p / ev.dp;
            if (!(znew > lo && znew < hi)) znew = 0.5 * (lo + hi);
            const double dz = std::abs(znew - z);
            z = znew;
            if (dz <= kEps * (1.0 + std::abs(z))) break;
        }
        ev = hermite_eval(n, z);
        r.nodes[n - 1 - i] = z;
        r.nodes[i] = -z;
        const double log_w = std::log(2.0) - 2.0 * (std::log(std::abs(ev.dp)) +
                                                    ev.scale * 0.6931471805599453);
        r.weights[i] = std::exp(log_w);
        r.weights[n - 1 - i] = r.weights[i];
    }
    if (n % 2 == 1) r.nodes[n / 2] = 0.0;
    return r;
}

} // namespace detail

inline const GaussHermiteRule& gauss_hermite(int n) {
    if (n < 2 || n > 200) throw DomainError("gauss_hermite: order must be in [2,200]");
    static std::map<int, GaussHermiteRule> cache;
    static std::mutex mtx;
    std::lock_guard<std::mutex> lock(mtx);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, detail::build_gauss_hermite(n)).first;
    return it->second;
}

struct OptResult {
    double argmax = 0.0;
    double value = 0.0;
    double bracket_lo = 0.0;
    double bracket_hi = 0.0;
    double tolerance_achieved = 0.0;
};

// Dense grid scan followed by golden-section refinement on the best bracket.
// Never returns a value below the best grid sample.
template <class F>
OptResult maximize_scalar(F&& f, double lo, double hi, int grid = 512, double tol = 1e-10) {
    if (!(lo < hi)) throw DomainError("maximize_scalar: requires lo < hi");
    if (grid < 8) throw DomainError("maximize_scalar: grid >= 8 required");
    auto eval = [&](double x) {
        double v = f(x);
        if (std::isnan(v)) throw DomainError("maximize_scalar: objective returned NaN");
        return v;
    };
    int best = 0;
    double best_x = lo, best_v = eval(lo);
    for (int i = 1; i <= grid; ++i) {
        const double x = lo + (hi - lo) * double(i) / grid;
        const double v = eval(x);
        if (v > best_v) { best_v = v; best_x = x; best = i; }
    }
    double a = lo + (hi - lo) * double(std::max(0, best - 1)) / grid;
    double b = lo + (hi - lo) * double(std::min(grid, best + 1)) / grid;
    const double bracket_lo = a, bracket_hi = b;
    constexpr double kInvPhi = 0.6180339887498949;
    double c = b - kInvPhi * (b - a), d = a + kInvPhi * (b - a);
    double fc = eval(c), fd = eval(d);
    while (b - a > tol) {
        if (fc > fd) {
            b = d; d = c; fd = fc;
            c = b - kInvPhi * (b - a);
            fc = eval(c);
        } else {
            a = c; c = d; fc = fd;
            d = a + kInvPhi * (b - a);
            fd = eval(d);
        }
        if (fc > best_v) { best_v = fc; best_x = c; }
        if (fd > best_v) { best_v = fd; best_x = d; }
    }
    return {best_x, best_v, bracket_lo, bracket_hi, b - a};
}

template <class F>
OptResult minimize_scalar(F&& f, double lo, double hi, int grid = 512, double tol = 1e-10) {
    auto r = maximize_scalar([&](double x) { return -f(x); }, lo, hi, grid, tol);
    r.value = -r.value;
    return r;
}

inline double ln_gamma(double x) {
    if (!(x > 0)) throw DomainError("ln_gamma: requires x > 0");
    return std::lgamma(x);
}

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t& s) {
    std::uint64_t z = (s += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}
} // namespace detail

// Seeded pseudo-random stream.  Identical (seed, stream_id) reproduce
// identical draw sequences; normals are generated by Box-Muller on the
// stream's uniforms so sequences do not depend on library internals.
class RngStream {
  public:
    RngStream(std::uint64_t seed, std::uint64_t stream_id)
        : seed_(seed), stream_id_(stream_id) {
        std::uint64_t s = seed ^ (0x632be59bd9b4e019ULL * (stream_id + 1));
        const std::uint64_t a = detail::splitmix64(s);
        const std::uint64_t b = detail::splitmix64(s);
        std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                          static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
        eng_.seed(seq);
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_id_; }

    std::uint64_t next_u64() { return eng_(); }

    // uniform in (0,1]
    double uniform01() {
        return (static_cast<double>(eng_() >> 11) + 1.0) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    double log_uniform(double lo, double hi) {
        return std::exp(uniform(std::log(lo), std::log(hi)));
    }

    // standard normal; consumes exactly two uniforms per call
    double normal() {
        const double u1 = uniform01();
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

  private:
    std::uint64_t seed_, stream_id_;
    std::mt19937_64 eng_;
};

// Chunked thread helper: fn(begin, end) over [0, n).  With threads <= 1 the
// call runs inline; work partitioning is independent of the thread count so
// block-seeded algorithms stay deterministic.
template <class Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
    if (n == 0) return;
    if (threads <= 1) {
        fn(std::size_t{0}, n);
        return;
    }
    const std::size_t nt = std::min<std::size_t>(threads, n);
    std::vector<std::thread> pool;
    pool.reserve(nt);
    const std::size_t chunk = (n + nt - 1) / nt;
    for (std::size_t t = 0; t < nt; ++t) {
        const std::size_t b = t * chunk;
        const std::size_t e = std::min(n, b + chunk);
        if (b >= e) break;
        pool.emplace_back([&fn, b, e] { fn(b, e); });
    }
    for (auto& th : pool) th.join();
}

} // namespace gsp::numerics
