#pragma once

// The perturbation series  tp = sum_n p_n  of a Gaussian base kernel g_b by a
// catalog potential q:
//   p_0 = g_b,   p_n(s,x,t,y) = int_s^t int p(s,x,u,z) q(u,z) p_{n-1}(u,z,t,y) dz du.
//
// Everything is computed through the normalized backward ratio
//   G_n(u,z) = p_n(u,z,t,y) / g_b(u,z,t,y),
// which satisfies the bridge-expectation recursion
//   G_n(u,z) = int_u^t E_{w ~ bridge(u,z -> t,y at v)} [ q(v,w) G_{n-1}(v,w) ] dv,
// with G_0 = 1.  Three routes implement it:
//   - a spectral Volterra solve for spatially uniform q (zero/constant/time_only),
//   - the slice engine (geometric time grid, bridge-recentred nodes) for
//     bounded spatial q in d <= 2, with a Richardson m vs 2m error estimate,
//   - a Feynman-Kac Monte Carlo over sampled bridges.
// A separate bridge-moment quadrature (ordered time simplex, nested
// Gauss-Hermite conditionals) provides the n <= 3 terms for the residual
// checks, independent of the slice machinery.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <vector>

#include "gsp/common.hpp"
#include "gsp/kernels.hpp"
#include "gsp/numerics.hpp"
#include "gsp/potential.hpp"

namespace gsp::series {

using kato::Potential;
using kato::PotentialKind;
using kernels::GaussianKernel;
using numerics::QuadConfig;
using numerics::RngStream;

enum class Engine { grid_recursion, monte_carlo };

struct SeriesRequest {
    GaussianKernel kernel; // the base p = g_b
    Potential q = Potential::zero(1);
    double s = 0.0, t = 1.0;
    std::vector<double> x, y;
    int n_terms = 6;
    Engine engine = Engine::grid_recursion;
    QuadConfig cfg;
    int mc_paths = 100000;
    int mc_steps = 128;
    int time_slices = 64;
    std::uint64_t seed = 1;
    std::uint64_t stream = 0;
    int threads = 1;

    void validate() const {
        kernel.validate();
        if (!(s < t)) throw DomainError("SeriesRequest: s < t required");
        if (n_terms < 0) throw DomainError("SeriesRequest: n_terms >= 0");
        if (int(x.size()) != kernel.d || int(y.size()) != kernel.d)
            throw DomainError("SeriesRequest: x, y must have length d");
        if (q.d != kernel.d) throw DomainError("SeriesRequest: potential dimension mismatch");
    }
};

struct SeriesResult {
    std::vector<double> terms; // p_0 .. p_N
    double partial_sum = 0.0;
    double tail_bound = -1.0; // analytic tail beyond the last term; < 0 if none
    bool rigorous_tail = false;
    double err_est = 0.0;
    double mc_std_error = 0.0;
    double clip_fraction = 0.0;
    bool variance_flag = false;
};

// Domination data for the analytic tail: p_n <= binom(n+k-1,k-1) theta^n C^k p*.
struct TailCertificate {
    double C = 1.0;
    double eta = 0.0;
    double theta = 0.0; // eta + Q(s,t)/k, must be < 1
    int k = 1;
    GaussianKernel pstar;
};

namespace detail {

// ---------- spectral Volterra solve (spatially uniform q) ----------

// values at Chebyshev-Lobatto nodes x_j = cos(pi j / K) -> series coefficients
inline std::vector<double> cheb_coeffs(const std::vector<double>& vals) {
    const int K = int(vals.size()) - 1;
    std::vector<double> c(K + 1, 0.0);
    for (int k = 0; k <= K; ++k) {
        double sum = 0.5 * (vals[0] + (k % 2 == 0 ? vals[K] : -vals[K]));
        for (int j = 1; j < K; ++j)
            sum += vals[j] * std::cos(std::numbers::pi * j * k / K);
        c[k] = 2.0 * sum / K;
    }
    c[0] *= 0.5;
    c[K] *= 0.5;
    return c;
}

inline double cheb_eval(const std::vector<double>& c, double xarg) {
    // Clenshaw
    double b1 = 0.0, b2 = 0.0;
    for (int k = int(c.size()) - 1; k >= 1; --k) {
        const double b0 = 2.0 * xarg * b1 - b2 + c[k];
        b2 = b1;
        b1 = b0;
    }
    return xarg * b1 - b2 + c[0];
}

// antiderivative coefficients: A' = phi on [-1,1], normalized so A(1) = 0
inline std::vector<double> cheb_antideriv(const std::vector<double>& c) {
    const int K = int(c.size()) - 1;
    std::vector<double> a(K + 2, 0.0);
    auto get = [&](int k) { return (k <= K) ? c[k] : 0.0; };
    a[1] = get(0) - 0.5 * get(2);
    for (int k = 2; k <= K + 1; ++k)
        a[k] = (get(k - 1) - get(k + 1)) / (2.0 * k);
    // normalize A(1) = 0
    double a1 = 0.0;
    for (int k = 1; k <= K + 1; ++k) a1 += a[k];
    a[0] = -a1;
    return a;
}

// G_n(node) for n = 0..N of the scalar recursion G_n(u) = int_u^t f G_{n-1},
// on K+1 Lobatto nodes over [s,t]; returns the node-value table.
inline std::vector<std::vector<double>> volterra_uniform(const Potential& q, double s,
                                                         double t, int N, int K) {
    std::vector<double> xs(K + 1), vs(K + 1);
    for (int j = 0; j <= K; ++j) {
        xs[j] = std::cos(std::numbers::pi * j / K);
        vs[j] = s + 0.5 * (t - s) * (xs[j] + 1.0);
    }
    std::vector<std::vector<double>> G(N + 1, std::vector<double>(K + 1, 1.0));
    std::vector<double> phi(K + 1);
    for (int n = 1; n <= N; ++n) {
        for (int j = 0; j <= K; ++j) phi[j] = q.time_factor(vs[j]) * G[n - 1][j];
        auto a = cheb_antideriv(cheb_coeffs(phi));
        for (int j = 0; j <= K; ++j) {
            // int_{v_j}^t phi dv = (t-s)/2 * (A(1) - A(x_j)) = -(t-s)/2 A(x_j)
            G[n][j] = -0.5 * (t - s) * cheb_eval(a, xs[j]);
        }
    }
    return G;
}

// ---------- slice engine (bounded spatial q, d <= 2) ----------

inline std::vector<double> geometric_slices(double s, double t, int m) {
    if (m < 8) m = 8;
    if (m % 2) ++m;
    const int half = m / 2;
    const double minfrac = 1e-5;
    const double rho = std::pow(minfrac, 1.0 / (half - 1));
    std::vector<double> fr(half + 1, 0.0);
    for (int j = 1; j <= half; ++j) fr[j] = minfrac * std::pow(rho, -(j - 1.0));
    for (int j = 1; j <= half; ++j) fr[j] = 0.5 * fr[j] / fr[half];
    std::vector<double> v;
    v.reserve(m + 1);
    for (int j = 0; j <= half; ++j) v.push_back(s + (t - s) * fr[j]);
    for (int j = half - 1; j >= 0; --j) v.push_back(t - (t - s) * fr[j]);
    return v;
}

// natural cubic spline on a uniform grid; clamped evaluation beyond the ends
class UniformSpline {
  public:
    UniformSpline() = default;
    UniformSpline(double lo, double h, std::vector<double> vals)
        : lo_(lo), h_(h), y_(std::move(vals)) {
        const int n = int(y_.size());
        m_.assign(n, 0.0);
        if (n < 3) return;
        std::vector<double> diag(n - 2, 4.0), rhs(n - 2);
        for (int i = 0; i < n - 2; ++i)
            rhs[i] = 6.0 * (y_[i] - 2.0 * y_[i + 1] + y_[i + 2]) / (h_ * h_);
        for (int i = 1; i < n - 2; ++i) { // tridiagonal sweep, off-diagonals 1
            const double w = 1.0 / diag[i - 1];
            diag[i] -= w;
            rhs[i] -= w * rhs[i - 1];
        }
        for (int i = n - 3; i >= 0; --i)
            m_[i + 1] = (rhs[i] - (i + 1 < n - 2 ? m_[i + 2] : 0.0)) / diag[i];
    }

    double operator()(double w) const {
        const int n = int(y_.size());
        double u = (w - lo_) / h_;
        if (u <= 0.0) return y_.front();
        if (u >= n - 1.0) return y_.back();
        const int i = std::min(int(u), n - 2);
        const double a = u - i;
        const double b = 1.0 - a;
        return b * y_[i] + a * y_[i + 1] +
               h_ * h_ / 6.0 *
                   ((b * b * b - b) * m_[i] + (a * a * a - a) * m_[i + 1]);
    }

  private:
    double lo_ = 0.0, h_ = 1.0;
    std::vector<double> y_, m_;
};

struct SliceGrid {
    std::vector<double> times;              // v_0 = s .. v_m = t
    std::vector<std::vector<double>> mu;    // bridge center per slice (d comps)
    std::vector<double> scale;              // node scale per slice
};

inline SliceGrid make_slice_grid(const SeriesRequest& req, int m) {
    SliceGrid g;
    g.times = geometric_slices(req.s, req.t, m);
    const double span = req.t - req.s;
    const double pad2 = 0.08 * span / req.kernel.a;
    const int d = req.kernel.d;
    for (double v : g.times) {
        const double lam = (v - req.s) / span;
        std::vector<double> c(d);
        for (int i = 0; i < d; ++i) c[i] = req.x[i] + lam * (req.y[i] - req.x[i]);
        g.mu.push_back(std::move(c));
        g.scale.push_back(std::sqrt(2.0 * (v - req.s) * (req.t - v) /
                                        (req.kernel.a * span) +
                                    pad2));
    }
    return g;
}

// d = 1 slice engine: returns G_n(s, x) for n = 0..N
inline std::vector<double> slice_engine_d1(const SeriesRequest& req, int m) {
    const double b = req.kernel.a, t = req.t;
    const double y = req.y[0];
    auto grid = make_slice_grid(req, m);
    const int M = int(grid.times.size()) - 1;
    const int NZ = 65;
    const double zlo = -8.0, zhi = 8.0;
    const double dz = (zhi - zlo) / (NZ - 1);
    const auto& gh = numerics::gauss_hermite(std::max(16, req.cfg.hermite_order / 2));
    const double wnorm = 1.0 / std::sqrt(std::numbers::pi);

    // node positions per slice
    std::vector<std::vector<double>> W(M + 1, std::vector<double>(NZ));
    for (int j = 0; j <= M; ++j)
        for (int i = 0; i < NZ; ++i)
            W[j][i] = grid.mu[j][0] + grid.scale[j] * (zlo + dz * i);

    std::vector<std::vector<double>> prev(M + 1, std::vector<double>(NZ, 1.0));
    std::vector<double> out{1.0};
    std::vector<double> zvec(1);

    for (int n = 1; n <= req.n_terms; ++n) {
        // spline representation of G_{n-1} per slice
        std::vector<UniformSpline> spl(M + 1);
        for (int j = 0; j <= M; ++j)
            spl[j] = UniformSpline(zlo, dz, prev[j]); // in local zeta coordinates
        auto prev_eval = [&](int j, double w) {
            const double zeta = (w - grid.mu[j][0]) / grid.scale[j];
            return spl[j](zeta);
        };
        auto phi = [&](int jp, double uj, double zi, double prev_here) {
            const double vp = grid.times[jp];
            if (jp == M) { // v = t endpoint
                zvec[0] = y;
                return (n == 1) ? req.q(t, zvec) : 0.0;
            }
            if (vp <= uj) {
                zvec[0] = zi;
                return req.q(uj, zvec) * prev_here;
            }
            const double lam = (vp - uj) / (t - uj);
            const double mu = zi + lam * (y - zi);
            const double sd = std::sqrt(2.0 * (vp - uj) * (t - vp) / (b * (t - uj)));
            double acc = 0.0;
            for (std::size_t k = 0; k < gh.nodes.size(); ++k) {
                const double w = mu + std::numbers::sqrt2 * sd * gh.nodes[k];
                zvec[0] = w;
                acc += gh.weights[k] * req.q(vp, zvec) * prev_eval(jp, w);
            }
            return wnorm * acc;
        };

        std::vector<std::vector<double>> cur(M + 1, std::vector<double>(NZ, 0.0));
        numerics::parallel_for(std::size_t(M), req.threads, [&](std::size_t b0, std::size_t e0) {
            std::vector<double> zloc(1);
            for (std::size_t j = b0; j < e0; ++j) {
                const double uj = grid.times[j];
                for (int i = 0; i < NZ; ++i) {
                    const double zi = W[j][i];
                    // trapezoid over the sub-grid {v_j, ..., v_M}
                    double total = 0.0;
                    double prev_phi = phi(int(j), uj, zi, prev[j][i]);
                    for (int jp = int(j) + 1; jp <= M; ++jp) {
                        const double cur_phi = phi(jp, uj, zi, 0.0);
                        total += 0.5 * (grid.times[jp] - grid.times[jp - 1]) *
                                 (prev_phi + cur_phi);
                        prev_phi = cur_phi;
                    }
                    cur[j][i] = total;
                }
            }
        });
        prev = std::move(cur);
        out.push_back(prev[0][(NZ - 1) / 2]); // node at (s, x)
    }
    return out;
}

// d = 2 slice engine (tensor nodes, bilinear interpolation)
inline std::vector<double> slice_engine_d2(const SeriesRequest& req, int m) {
    const double b = req.kernel.a, t = req.t;
    auto grid = make_slice_grid(req, m);
    const int M = int(grid.times.size()) - 1;
    const int NZ = 33;
    const double zlo = -6.0, zhi = 6.0;
    const double dz = (zhi - zlo) / (NZ - 1);
    const auto& gh = numerics::gauss_hermite(12);
    const double wnorm = 1.0 / std::numbers::pi; // pi^{-d/2}, d = 2

    auto node = [&](int j, int i0, int i1) {
        return std::array<double, 2>{grid.mu[j][0] + grid.scale[j] * (zlo + dz * i0),
                                     grid.mu[j][1] + grid.scale[j] * (zlo + dz * i1)};
    };
    auto bilinear = [&](const std::vector<double>& vals, int j, double w0, double w1) {
        double u0 = (w0 - grid.mu[j][0]) / grid.scale[j];
        double u1 = (w1 - grid.mu[j][1]) / grid.scale[j];
        double a0 = std::clamp((u0 - zlo) / dz, 0.0, NZ - 1.000001);
        double a1 = std::clamp((u1 - zlo) / dz, 0.0, NZ - 1.000001);
        const int i0 = int(a0), i1 = int(a1);
        const double f0 = a0 - i0, f1 = a1 - i1;
        auto at = [&](int p, int r) { return vals[p * NZ + r]; };
        return (1 - f0) * ((1 - f1) * at(i0, i1) + f1 * at(i0, i1 + 1)) +
               f0 * ((1 - f1) * at(i0 + 1, i1) + f1 * at(i0 + 1, i1 + 1));
    };

    std::vector<std::vector<double>> prev(M + 1, std::vector<double>(NZ * NZ, 1.0));
    std::vector<double> out{1.0};
    for (int n = 1; n <= req.n_terms; ++n) {
        std::vector<std::vector<double>> cur(M + 1, std::vector<double>(NZ * NZ, 0.0));
        numerics::parallel_for(std::size_t(M), req.threads, [&](std::size_t b0, std::size_t e0) {
            std::vector<double> zv(2);
            for (std::size_t j = b0; j < e0; ++j) {
                const double uj = grid.times[j];
                for (int i0 = 0; i0 < NZ; ++i0)
                    for (int i1 = 0; i1 < NZ; ++i1) {
                        auto zi = node(int(j), i0, i1);
                        auto phi = [&](int jp) {
                            const double vp = grid.times[jp];
                            if (jp == M) {
                                zv[0] = req.y[0];
                                zv[1] = req.y[1];
                                return (n == 1) ? req.q(t, zv) : 0.0;
                            }
                            if (vp <= uj) {
                                zv[0] = zi[0];
                                zv[1] = zi[1];
                                return req.q(uj, zv) * prev[j][i0 * NZ + i1];
                            }
                            const double lam = (vp - uj) / (t - uj);
                            const double mu0 = zi[0] + lam * (req.y[0] - zi[0]);
                            const double mu1 = zi[1] + lam * (req.y[1] - zi[1]);
                            const double sd =
                                std::sqrt(2.0 * (vp - uj) * (t - vp) / (b * (t - uj)));
                            double acc = 0.0;
                            for (std::size_t k0 = 0; k0 < gh.nodes.size(); ++k0)
                                for (std::size_t k1 = 0; k1 < gh.nodes.size(); ++k1) {
                                    const double w0 =
                                        mu0 + std::numbers::sqrt2 * sd * gh.nodes[k0];
                                    const double w1 =
                                        mu1 + std::numbers::sqrt2 * sd * gh.nodes[k1];
                                    zv[0] = w0;
                                    zv[1] = w1;
                                    acc += gh.weights[k0] * gh.weights[k1] *
                                           req.q(vp, zv) * bilinear(prev[jp], jp, w0, w1);
                                }
                            return wnorm * acc;
                        };
                        double total = 0.0;
                        double prev_phi = phi(int(j));
                        for (int jp = int(j) + 1; jp <= M; ++jp) {
                            const double cur_phi = phi(jp);
                            total += 0.5 * (grid.times[jp] - grid.times[jp - 1]) *
                                     (prev_phi + cur_phi);
                            prev_phi = cur_phi;
                        }
                        cur[j][i0 * NZ + i1] = total;
                    }
            }
        });
        prev = std::move(cur);
        out.push_back(prev[0][((NZ - 1) / 2) * NZ + (NZ - 1) / 2]);
    }
    return out;
}

// ---------- bridge-moment quadrature (n <= 3), d = 1 ----------

struct Bridge1 {
    double b, t, y; // target of the bridge and kernel scale
    double mean(double u, double z, double v) const {
        return z + (y - z) * (v - u) / (t - u);
    }
    double sd(double u, double v) const {
        return std::sqrt(2.0 * (v - u) * (t - v) / (b * (t - u)));
    }
};

// E over the bridge point at time v of q(v, .) * inner(v, w)
template <class Inner>
double bridge_expect(const Bridge1& br, const Potential& q, double u, double z, double v,
                     int gh_order, Inner&& inner) {
    const auto& gh = numerics::gauss_hermite(gh_order);
    const double mu = br.mean(u, z, v);
    const double sd = br.sd(u, v);
    double acc = 0.0;
    std::vector<double> zv(1);
    for (std::size_t k = 0; k < gh.nodes.size(); ++k) {
        const double w = mu + std::numbers::sqrt2 * sd * gh.nodes[k];
        zv[0] = w;
        acc += gh.weights[k] * q(v, zv) * inner(v, w);
    }
    return acc / std::sqrt(std::numbers::pi);
}

// Gauss-Legendre nodes/weights on [-1,1] via Newton on the recurrence
inline const std::pair<std::vector<double>, std::vector<double>>& gauss_legendre(int n) {
    static std::map<int, std::pair<std::vector<double>, std::vector<double>>> cache;
    static std::mutex mtx;
    std::lock_guard<std::mutex> lock(mtx);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    std::vector<double> xs(n), ws(n);
    for (int i = 0; i < n; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        for (int it2 = 0; it2 < 100; ++it2) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            const double dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double x1 = x;
            x -= p1 / dp;
            if (std::abs(x - x1) < 1e-15) break;
        }
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
            const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        const double dp = n * (x * p1 - p0) / (x * x - 1.0);
        xs[i] = x;
        ws[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    return cache.emplace(n, std::make_pair(std::move(xs), std::move(ws))).first->second;
}

// integral over [a, c] with the sin^2 map killing sqrt endpoints on both sides
template <class F>
double integrate_cosmap(F&& f, double a, double c, int n) {
    const auto& [xs, ws] = gauss_legendre(n);
    const double half = 0.5 * (c - a);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        const double theta = 0.5 * (xs[i] + 1.0); // in (0,1)
        const double v = a + (c - a) * 0.5 * (1.0 - std::cos(std::numbers::pi * theta));
        const double jac = (c - a) * 0.25 * std::numbers::pi *
                           std::sin(std::numbers::pi * theta);
        acc += ws[i] * jac * f(v);
    }
    (void)half;
    return acc;
}

// I_n(u, z -> t, y) = p_n(u,z,t,y)/g_b(u,z,t,y) for n <= 3 (d = 1 only)
inline double moment_ratio(const GaussianKernel& kb, const Potential& q, double u, double z,
                           double t, double y, int n, int tq = 20, int sq = 20) {
    if (n == 0) return 1.0;
    Bridge1 br{kb.a, t, y};
    if (n == 1) {
        return integrate_cosmap(
            [&](double v) {
                return bridge_expect(br, q, u, z, v, sq,
                                     [](double, double) { return 1.0; });
            },
            u, t, 2 * tq);
    }
    if (n == 2) {
        return integrate_cosmap(
            [&](double v1) {
                return bridge_expect(br, q, u, z, v1, sq, [&](double vv1, double w1) {
                    return integrate_cosmap(
                        [&](double v2) {
                            return bridge_expect(br, q, vv1, w1, v2, sq,
                                                 [](double, double) { return 1.0; });
                        },
                        vv1, t, tq);
                });
            },
            u, t, tq);
    }
    if (n == 3) {
        const int tq3 = std::max(10, tq * 2 / 3), sq3 = std::max(10, sq * 2 / 3);
        return integrate_cosmap(
            [&](double v1) {
                return bridge_expect(br, q, u, z, v1, sq3, [&](double vv1, double w1) {
                    return integrate_cosmap(
                        [&](double v2) {
                            return bridge_expect(
                                br, q, vv1, w1, v2, sq3, [&](double vv2, double w2) {
                                    return integrate_cosmap(
                                        [&](double v3) {
                                            return bridge_expect(
                                                br, q, vv2, w2, v3, sq3,
                                                [](double, double) { return 1.0; });
                                        },
                                        vv2, t, tq3);
                                });
                        },
                        vv1, t, tq3);
                });
            },
            u, t, tq3);
    }
    throw DomainError("moment_ratio: n <= 3 required");
}

} // namespace detail

// ---------- engine front ends ----------

inline SeriesResult term_grid(const SeriesRequest& req) {
    req.validate();
    if (req.engine != Engine::grid_recursion)
        throw DomainError("term_grid: engine must be grid_recursion");
    SeriesResult res;
    const double g0 = kernels::gauss_eval(req.kernel, req.s, req.x, req.t, req.y);
    if (req.q.spatially_uniform()) {
        const int K = 48;
        auto G = detail::volterra_uniform(req.q, req.s, req.t, req.n_terms, K);
        auto G2 = detail::volterra_uniform(req.q, req.s, req.t, req.n_terms, 2 * K);
        res.err_est = 0.0;
        for (int n = 0; n <= req.n_terms; ++n) {
            const double vn = G2[n].back() * g0; // node K is x = -1, i.e. v = s
            res.terms.push_back(std::max(0.0, vn));
            res.err_est += std::abs(G2[n].back() - G[n].back()) * g0;
        }
    } else {
        if (!req.q.bounded())
            throw DomainError("term_grid: unbounded potential; use the Monte Carlo engine");
        if (req.kernel.d > 2)
            throw DomainError("term_grid: grid recursion supports d in {1,2}");
        const int m = std::max(16, req.time_slices);
        std::vector<double> lo, hi;
        if (req.kernel.d == 1) {
            lo = detail::slice_engine_d1(req, m);
            hi = detail::slice_engine_d1(req, 2 * m);
        } else {
            lo = detail::slice_engine_d2(req, m);
            hi = detail::slice_engine_d2(req, 2 * m);
        }
        for (int n = 0; n <= req.n_terms; ++n) {
            // Richardson extrapolation of the m/2 vs m pair
            const double extrap = hi[n] + (hi[n] - lo[n]) / 3.0;
            res.terms.push_back(std::max(0.0, extrap * g0));
            res.err_est += std::abs(hi[n] - lo[n]) / 3.0 * g0;
        }
    }
    for (double v : res.terms) res.partial_sum += v;
    return res;
}

inline double lemma2_tail(const TailCertificate& cert, int last_n, double pstar_val) {
    // sum_{n > last_n} binom(n+k-1, k-1) theta^n C^k * pstar
    if (!(cert.theta >= 0 && cert.theta < 1))
        throw DomainError("lemma2_tail: requires theta in [0,1)");
    double log_binom = 0.0;
    const int k = cert.k;
    double tail = 0.0;
    for (int n = last_n + 1; n < last_n + 100000; ++n) {
        log_binom = numerics::ln_gamma(n + k) - numerics::ln_gamma(n + 1.0) -
                    numerics::ln_gamma(double(k));
        const double inc = std::exp(log_binom + n * std::log(cert.theta) +
                                    k * std::log(cert.C));
        tail += inc;
        if (inc < 1e-16 * (tail + 1e-300)) break;
    }
    return tail * pstar_val;
}

inline SeriesResult feynman_kac_mc(const SeriesRequest& req);

// Partial sums with a stopping rule: with a certificate the analytic tail of
// the domination lemma is driven below tolerance (rigorous); without one the
// loop stops on relative term decay and says so.
inline SeriesResult tilde_p(const SeriesRequest& req,
                            const std::optional<TailCertificate>& cert = std::nullopt) {
    req.validate();
    if (req.engine == Engine::monte_carlo) return feynman_kac_mc(req);
    const double g0 = kernels::gauss_eval(req.kernel, req.s, req.x, req.t, req.y);
    SeriesRequest r = req;
    SeriesResult res;
    const double tol = std::max(req.cfg.abs_tol, req.cfg.rel_tol * g0);
    double pstar_val = 0.0;
    if (cert) {
        if (!(cert->theta < 1.0))
            throw DomainError("tilde_p: tail certificate has theta >= 1");
        pstar_val = kernels::gauss_eval(cert->pstar, req.s, req.x, req.t, req.y);
    }
    const int cap = 40;
    int N = std::max(req.n_terms, 2);
    for (;;) {
        r.n_terms = N;
        res = term_grid(r);
        if (cert) {
            res.tail_bound = lemma2_tail(*cert, N, pstar_val);
            res.rigorous_tail = true;
            if (res.tail_bound < tol || N >= cap) break;
        } else {
            const double last = res.terms.back();
            if (last < 1e-12 * std::max(res.partial_sum, 1e-300)) {
                res.rigorous_tail = false;
                break;
            }
            if (N >= cap) {
                if (res.terms.size() >= 2 &&
                    res.terms.back() > res.terms[res.terms.size() - 2])
                    throw NonConvergence("tilde_p: term growth detected at the cap");
                res.rigorous_tail = false;
                break;
            }
        }
        N += 4;
    }
    return res;
}

// tilde_p estimate by Feynman-Kac over bridges of the g_b process:
//   tilde_p = g_b(s,x,t,y) E[ exp( int_s^t q(u, B_u) du ) ],
// bridge sampled at mc_steps equispaced times (conditional Gaussians with
// variance 2 dt (T-t_{k+1})/(b (T-t_k))), trapezoid along the path, antithetic
// increment pairing, block-seeded streams.
inline SeriesResult feynman_kac_mc(const SeriesRequest& req) {
    req.validate();
    if (req.engine != Engine::monte_carlo)
        throw DomainError("feynman_kac_mc: engine must be monte_carlo");
    const int d = req.kernel.d;
    const double b = req.kernel.a;
    const int m = req.mc_steps;
    const double span = req.t - req.s, dt = span / m;
    const double qclip = 1e6;
    const int block = 4096;
    const int pairs = (req.mc_paths + 1) / 2;
    const int nblocks = (pairs + block - 1) / block;

    std::vector<double> block_sum(nblocks, 0.0), block_sum2(nblocks, 0.0);
    std::vector<std::int64_t> block_clip(nblocks, 0), block_evals(nblocks, 0);

    numerics::parallel_for(std::size_t(nblocks), req.threads, [&](std::size_t b0, std::size_t e0) {
        std::vector<double> pos(d), anti(d), zv(d);
        std::vector<double> xi(d);
        for (std::size_t bi = b0; bi < e0; ++bi) {
            RngStream rng(req.seed, req.stream + bi);
            const int lo = int(bi) * block;
            const int hi = std::min(pairs, lo + block);
            double s1 = 0.0, s2 = 0.0;
            std::int64_t clipped = 0, evals = 0;
            std::vector<std::vector<double>> noise(m, std::vector<double>(d));
            for (int p = lo; p < hi; ++p) {
                for (int k = 0; k < m; ++k)
                    for (int i = 0; i < d; ++i) noise[k][i] = rng.normal();
                double pairval = 0.0;
                for (int sgn = 0; sgn < 2; ++sgn) {
                    const double sg = sgn ? -1.0 : 1.0;
                    for (int i = 0; i < d; ++i) pos[i] = req.x[i];
                    double tk = req.s;
                    double q0v = req.q(req.s, req.x);
                    ++evals;
                    if (q0v > qclip) { q0v = qclip; ++clipped; }
                    double integral = 0.5 * dt * q0v;
                    for (int k = 0; k < m; ++k) {
                        const double tk1 = req.s + (k + 1) * dt;
                        const double remain = req.t - tk;
                        const double drift = dt / remain;
                        const double var = 2.0 / b * dt * (req.t - tk1) / remain;
                        const double sd = var > 0 ? std::sqrt(var) : 0.0;
                        for (int i = 0; i < d; ++i)
                            pos[i] += (req.y[i] - pos[i]) * drift + sg * sd * noise[k][i];
                        double qv = req.q(tk1, pos);
                        ++evals;
                        if (qv > qclip) { qv = qclip; ++clipped; }
                        integral += (k + 1 == m ? 0.5 : 1.0) * dt * qv;
                        tk = tk1;
                    }
                    pairval += 0.5 * std::exp(integral);
                }
                s1 += pairval;
                s2 += pairval * pairval;
            }
            block_sum[bi] = s1;
            block_sum2[bi] = s2;
            block_clip[bi] = clipped;
            block_evals[bi] = evals;
        }
    });

    double s1 = 0.0, s2 = 0.0;
    std::int64_t clipped = 0, evals = 0;
    for (int i = 0; i < nblocks; ++i) {
        s1 += block_sum[i];
        s2 += block_sum2[i];
        clipped += block_clip[i];
        evals += block_evals[i];
    }
    const double mean = s1 / pairs;
    const double var = std::max(0.0, s2 / pairs - mean * mean);
    const double g0 = kernels::gauss_eval(req.kernel, req.s, req.x, req.t, req.y);

    SeriesResult res;
    res.terms = {g0};
    res.partial_sum = g0 * mean;
    res.mc_std_error = g0 * std::sqrt(var / pairs);
    res.clip_fraction = evals ? double(clipped) / double(evals) : 0.0;
    res.variance_flag = res.mc_std_error > res.partial_sum;
    return res;
}

// residual of sum_{m<=n} int p_m(s,x,u,z) p_{n-m}(u,z,t,y) dz = p_n(s,x,t,y),
// all pieces from the bridge-moment route (d = 1, n <= 3)
inline double term_ck_residual(const GaussianKernel& kb, const Potential& q, int n,
                               double s, double u, double t, double x, double y,
                               const QuadConfig& cfg = {}) {
    kb.validate();
    if (kb.d != 1) throw DomainError("term_ck_residual: d = 1 only");
    if (n < 0 || n > 3) throw DomainError("term_ck_residual: n <= 3 required");
    if (!(s < u && u < t)) throw DomainError("term_ck_residual: s < u < t");
    (void)cfg;
    const double rhs = detail::moment_ratio(kb, q, s, x, t, y, n);
    // z-average against the bridge marginal at time u
    detail::Bridge1 br{kb.a, t, y};
    const double mu = br.mean(s, x, u);
    const double sd = br.sd(s, u);
    const auto& gh = numerics::gauss_hermite(20);
    double lhs = 0.0;
    for (int mterm = 0; mterm <= n; ++mterm) {
        double acc = 0.0;
        for (std::size_t k = 0; k < gh.nodes.size(); ++k) {
            const double z = mu + std::numbers::sqrt2 * sd * gh.nodes[k];
            const double hm = detail::moment_ratio(kb, q, s, x, u, z, mterm);
            const double gm = detail::moment_ratio(kb, q, u, z, t, y, n - mterm);
            acc += gh.weights[k] * hm * gm;
        }
        lhs += acc / std::sqrt(std::numbers::pi);
    }
    return std::abs(lhs - rhs) * kernels::gauss_eval1(kb, s, x, t, y);
}

// residual of S_N = p + int int p q S_{N-1} with S_N the partial sum; the
// right-hand integral is evaluated by an independent quadrature route
inline double duhamel_residual(const GaussianKernel& kb, const Potential& q, int N,
                               double s, double t, double x, double y,
                               const QuadConfig& cfg = {}) {
    kb.validate();
    if (kb.d != 1) throw DomainError("duhamel_residual: d = 1 only");
    if (N < 1 || N > 6) throw DomainError("duhamel_residual: 1 <= N <= 6 required");
    const double g0 = kernels::gauss_eval1(kb, s, x, t, y);
    if (q.spatially_uniform()) {
        const int K = 64;
        auto G = detail::volterra_uniform(q, s, t, N, K);
        double SN = 0.0;
        for (int nn = 0; nn <= N; ++nn) SN += G[nn].back();
        // independent route: adaptive quadrature of f(v) * S_{N-1}-ratio(v)
        std::vector<double> xs(K + 1), vs(K + 1);
        for (int j = 0; j <= K; ++j) {
            xs[j] = std::cos(std::numbers::pi * j / K);
            vs[j] = s + 0.5 * (t - s) * (xs[j] + 1.0);
        }
        std::vector<double> ssum(K + 1, 0.0);
        for (int nn = 0; nn + 1 <= N; ++nn)
            for (int j = 0; j <= K; ++j) ssum[j] += G[nn][j];
        auto coef = detail::cheb_coeffs(ssum);
        auto Sm1 = [&](double v) {
            const double xarg = 2.0 * (v - s) / (t - s) - 1.0;
            return detail::cheb_eval(coef, xarg);
        };
        auto f = [&](double v) { return q.time_factor(v) * Sm1(v); };
        const double D = numerics::integrate_1d(f, s, t, cfg).value;
        return std::abs(SN - 1.0 - D) * g0;
    }
    if (N > 3) throw DomainError("duhamel_residual: spatial potentials need N <= 3");
    double SN = 0.0;
    for (int nn = 0; nn <= N; ++nn) SN += detail::moment_ratio(kb, q, s, x, t, y, nn);
    detail::Bridge1 br{kb.a, t, y};
    auto integrand = [&](double v) {
        return detail::bridge_expect(br, q, s, x, v, 20, [&](double vv, double w) {
            double acc = 0.0;
            for (int nn = 0; nn + 1 <= N; ++nn)
                acc += detail::moment_ratio(kb, q, vv, w, t, y, nn);
            return acc;
        });
    };
    const double D = detail::integrate_cosmap(integrand, s, t, 40);
    return std::abs(SN - 1.0 - D) * g0;
}

// smooth space-time test functions phi(u,z) = amp * A(u) * B(z):
// A a C^infty bump on (t0,t1), B a Gaussian bump, derivatives analytic
struct TestFunction {
    double amp = 1.0;
    double t0 = 1.0, t1 = 2.0; // time support (kept right of the source time)
    double z0 = 0.0, sigma = 1.0;

    double A(double u) const {
        if (u <= t0 || u >= t1) return 0.0;
        return std::exp(-1.0 / ((u - t0) * (t1 - u)));
    }
    double dA(double u) const {
        if (u <= t0 || u >= t1) return 0.0;
        const double P = (u - t0) * (t1 - u);
        return A(u) * (t0 + t1 - 2.0 * u) / (P * P);
    }
    double B(double z) const {
        const double w = (z - z0) / sigma;
        return std::exp(-0.5 * w * w);
    }
    double d2B(double z) const {
        const double w = (z - z0) / sigma;
        return (w * w - 1.0) / (sigma * sigma) * B(z);
    }
    double operator()(double u, double z) const { return amp * A(u) * B(z); }
};

// | int_s^inf int g_b(s,x,u,z) [d_u phi + (1/b) d_zz phi] dz du + phi(s,x) |
inline double left_inverse_residual(double b, double s, double x, const TestFunction& phi,
                                    const QuadConfig& cfg = {}) {
    if (!(b > 0)) throw DomainError("left_inverse_residual: b > 0 required");
    const auto& gh = numerics::gauss_hermite(80);
    auto slice = [&](double u) {
        if (u <= s) return 0.0;
        const double sd = std::sqrt(2.0 * (u - s) / b);
        double acc = 0.0;
        for (std::size_t k = 0; k < gh.nodes.size(); ++k) {
            const double z = x + std::numbers::sqrt2 * sd * gh.nodes[k];
            acc += gh.weights[k] *
                   (phi.amp * (phi.dA(u) * phi.B(z) + phi.A(u) * phi.d2B(z) / b));
        }
        return acc / std::sqrt(std::numbers::pi);
    };
    const double lo = std::max(s, phi.t0), hi = phi.t1;
    double integral = 0.0;
    if (lo < hi) integral = numerics::integrate_1d(slice, lo, hi, cfg).value;
    return std::abs(integral + phi(s, x));
}

// Same identity for the non-unique alternative kernel g_b + 2du + b z^2
// (d = 1): the polynomial part integrates over the whole time support.
inline double left_inverse_residual_alt(double b, double s, double x,
                                        const TestFunction& phi,
                                        const QuadConfig& cfg = {}) {
    if (!(b > 0)) throw DomainError("left_inverse_residual_alt: b > 0 required");
    GaussianKernel kb{b, 1};
    auto slice = [&](double u) {
        const double op_u = u;
        auto zint = [&](double z) {
            return (kernels::gauss_eval1(kb, s, x, u, z) + 2.0 * op_u + b * z * z) *
                   phi.amp * (phi.dA(u) * phi.B(z) + phi.A(u) * phi.d2B(z) / b);
        };
        const double zr = phi.z0 + 14.0 * phi.sigma, zl = phi.z0 - 14.0 * phi.sigma;
        return numerics::integrate_1d(zint, zl, zr, numerics::tighten(cfg, 1e-2)).value;
    };
    double integral = 0.0;
    if (phi.t0 < phi.t1)
        integral = numerics::integrate_1d(slice, phi.t0, phi.t1, cfg).value;
    return std::abs(integral + phi(s, x));
}

} // namespace gsp::series
