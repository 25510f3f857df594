// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure.  Each criterion pins its tolerances and runtime budget in code.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "gsp/bounds.hpp"
#include "gsp/fourg.hpp"
#include "gsp/kato.hpp"
#include "gsp/kernels.hpp"
#include "gsp/numerics.hpp"
#include "gsp/series.hpp"
#include "gsp/superadd.hpp"

using namespace gsp;
using gsp::kato::Potential;
using gsp::kernels::GaussianKernel;
using gsp::numerics::RngStream;
using gsp::superadd::SuperadditiveQ;

namespace {

int g_failures = 0;

struct Criterion {
    int id;
    std::string name;
    double budget_seconds;

    void run(const std::function<std::string()>& body) const {
        const auto start = std::chrono::steady_clock::now();
        std::string failure;
        try {
            failure = body();
        } catch (const std::exception& e) {
            failure = std::string("exception: ") + e.what();
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (failure.empty() && secs > budget_seconds)
            failure = "runtime " + std::to_string(secs) + " s exceeds budget " +
                      std::to_string(budget_seconds) + " s";
        if (failure.empty()) {
            std::printf("[PASS] criterion %2d: %s (%.2f s)\n", id, name.c_str(), secs);
        } else {
            std::printf("[FAIL] criterion %2d: %s (%.2f s): %s\n", id, name.c_str(), secs,
                        failure.c_str());
            ++g_failures;
        }
        std::fflush(stdout);
    }
};

} // namespace

int main() {
    std::printf("acceptance suite, version %s\n", kVersion);
    const double kExpHalf = std::exp(0.5);

    Criterion{1, "L(alpha) iff-statement", 1.0}.run([&]() -> std::string {
        for (double alpha : {kExpHalf, 2.0, 3.0, 10.0}) {
            const double L = fourg::compute_L(alpha).L;
            if (!(std::abs(L - std::log1p(alpha)) <= 1e-8))
                return "equality fails at alpha = " + std::to_string(alpha);
        }
        for (double alpha : {0.5, 1.0}) {
            const double L = fourg::compute_L(alpha).L;
            if (!(L - std::log1p(alpha) >= 1e-6))
                return "strictness fails at alpha = " + std::to_string(alpha);
        }
        return "";
    });

    Criterion{2, "M simple formula on random (a,b,d)", 1.0}.run([&]() -> std::string {
        RngStream rng(20260809, 2);
        for (int i = 0; i < 20; ++i) {
            const double ratio = rng.uniform(1.0 / (1.0 + std::exp(-0.5)), 0.999);
            const double b = rng.log_uniform(0.1, 10.0);
            const int d = 1 + int(rng.next_u64() % 6);
            const auto c = fourg::compute_M(ratio * b, b, d);
            const double simple = std::pow(1.0 - ratio, -double(d));
            if (!(std::abs(c.M - simple) / c.M <= 1e-10))
                return "mismatch at a/b = " + std::to_string(ratio) +
                       ", d = " + std::to_string(d);
        }
        return "";
    });

    Criterion{3, "4G validity and optimality", 60.0}.run([&]() -> std::string {
        const std::vector<std::tuple<int, double, double>> triples = {
            {1, 1.0, 2.0}, {2, 3.0, 4.0}, {3, 0.9, 1.0}};
        for (auto [d, a, b] : triples) {
            const auto c = fourg::compute_M(a, b, d);
            RngStream rng(424242, std::uint64_t(d));
            std::vector<double> x(d), z(d), y(d);
            for (int i = 0; i < 100000; ++i) {
                const double d1 = rng.log_uniform(1e-3, 1e3);
                const double d2 = rng.log_uniform(1e-3, 1e3);
                const double scale = rng.log_uniform(0.05, 20.0);
                for (int j = 0; j < d; ++j) {
                    x[j] = scale * rng.normal();
                    z[j] = scale * rng.normal();
                    y[j] = scale * rng.normal();
                }
                const auto chk =
                    fourg::verify_4g_pointwise(a, b, d, 0.0, d1, d1 + d2, x, z, y, c.M);
                if (!chk.holds)
                    return "violation at sample " + std::to_string(i) +
                           " of triple d=" + std::to_string(d);
            }
            RngStream rng2(271828, std::uint64_t(d));
            const auto sup = fourg::reduced_gap_supremum(c.alpha, c.L, 64, rng2);
            if (!(sup.sup >= -1e-6 && sup.sup <= 1e-6))
                return "optimality sup = " + std::to_string(sup.sup) +
                       " at d = " + std::to_string(d);
            const auto w = fourg::tightness_witness(c.alpha);
            const auto cfg = fourg::map_reduced_to_config(a, d, w.point);
            const auto viol = fourg::verify_4g_pointwise(a, b, d, cfg.s, cfg.u, cfg.t,
                                                         cfg.x, cfg.z, cfg.y, 0.99 * c.M);
            if (viol.holds)
                return "0.99 M withstood the witness at d = " + std::to_string(d);
        }
        return "";
    });

    Criterion{4, "Chapman-Kolmogorov and normalization", 30.0}.run([&]() -> std::string {
        RngStream rng(515151, 4);
        for (int i = 0; i < 100; ++i) {
            const int d = 1 + int(rng.next_u64() % 2);
            GaussianKernel k{rng.log_uniform(0.3, 3.0), d};
            const double s = rng.uniform(-1.0, 1.0);
            const double t = s + rng.log_uniform(0.05, 5.0);
            const double u = s + (t - s) * rng.uniform(0.05, 0.95);
            std::vector<double> x(d), y(d);
            for (int j = 0; j < d; ++j) {
                x[j] = rng.uniform(-2.0, 2.0);
                y[j] = rng.uniform(-2.0, 2.0);
            }
            if (!(kernels::ck_residual(k, s, u, t, x, y) <= 1e-8))
                return "CK residual above 1e-8 at case " + std::to_string(i);
            if (!(kernels::normalization_residual(k, s, t, x) <= 1e-8))
                return "normalization residual above 1e-8 at case " + std::to_string(i);
        }
        return "";
    });

    Criterion{5, "closed-form series terms and sums", 60.0}.run([&]() -> std::string {
        auto factorial = [](int n) {
            double f = 1.0;
            for (int i = 2; i <= n; ++i) f *= i;
            return f;
        };
        series::SeriesRequest r;
        r.kernel = GaussianKernel{1.0, 1};
        r.s = 0.0;
        r.t = 1.0;
        r.x = {0.0};
        r.y = {0.4};
        r.n_terms = 6;
        const double p = kernels::gauss_eval1(r.kernel, 0.0, 0.0, 1.0, 0.4);
        struct Case {
            Potential q;
            double Q;
        };
        const std::vector<Case> cases = {{Potential::constant(1.3, 1), 1.3},
                                         {Potential::time_linear(1.0, 1), 0.5}};
        for (const auto& c : cases) {
            r.q = c.q;
            const auto res = series::term_grid(r);
            for (int n = 0; n <= 6; ++n) {
                const double expect = std::pow(c.Q, n) / factorial(n) * p;
                if (!(std::abs(res.terms[n] - expect) <= 1e-8 * expect))
                    return "term " + std::to_string(n) + " off for Q = " +
                           std::to_string(c.Q);
            }
            const auto sum = series::tilde_p(r);
            const double expect_sum = std::exp(c.Q) * p;
            if (!(std::abs(sum.partial_sum - expect_sum) <= 1e-8 * expect_sum))
                return "tilde p off for Q = " + std::to_string(c.Q);
        }
        return "";
    });

    Criterion{6, "cross-engine oracle (grid vs Feynman-Kac)", 300.0}.run(
        [&]() -> std::string {
            RngStream rng(606060, 6);
            for (int i = 0; i < 20; ++i) {
                series::SeriesRequest r;
                r.kernel = GaussianKernel{1.0, 1};
                r.s = 0.0;
                r.t = rng.uniform(0.5, 1.5);
                r.x = {rng.uniform(-1.0, 1.0)};
                r.y = {rng.uniform(-1.0, 1.0)};
                const double amp = rng.uniform(0.3, 1.2);
                r.q = (i % 2 == 0)
                          ? Potential::radial_gauss(amp, 1)
                          : Potential::separable(
                                Potential::time_const(rng.uniform(0.5, 1.5), 1),
                                Potential::radial_gauss(amp, 1));
                r.n_terms = 8;
                r.time_slices = 32;
                const auto grid = series::term_grid(r);

                auto rm = r;
                rm.engine = series::Engine::monte_carlo;
                rm.mc_paths = 100000;
                rm.mc_steps = 128;
                rm.seed = 1000 + i;
                const auto mc = series::feynman_kac_mc(rm);
                if (!(mc.mc_std_error <= 0.01 * mc.partial_sum))
                    return "MC std error above 1% at case " + std::to_string(i);
                if (!(std::abs(grid.partial_sum - mc.partial_sum) <=
                      3.0 * mc.mc_std_error))
                    return "engines disagree beyond 3 sigma at case " + std::to_string(i);
            }
            return "";
        });

    Criterion{7, "Kato constants and the non-Kato example", 120.0}.run(
        [&]() -> std::string {
            numerics::QuadConfig cfg;
            for (int d : {3, 4, 5}) {
                for (double rad : {0.5, 1.0, 2.0}) {
                    std::vector<double> x(d, 0.0);
                    x[0] = rad;
                    const double expect = kato::c0(d) * std::pow(rad, 2.0 - d);
                    if (!(std::abs(kato::heat_potential(1.0, d, x, cfg) - expect) <=
                          1e-6 * expect))
                        return "heat potential off at d = " + std::to_string(d);
                }
            }
            RngStream rng(707070, 7);
            const std::vector<Potential> cat = {
                Potential::constant(1.0, 3), Potential::radial_indicator(1.0, 1.0, 3),
                Potential::radial_gauss(2.0, 3), Potential::radial_power(0.5, 1.0, 3)};
            for (double h : {0.1, 1.0, 10.0}) {
                for (const auto& q : cat) {
                    const double lhs = kato::lhs_psup(q, 1.0, h, cfg, rng).value;
                    const double I = kato::kato_I(q, std::sqrt(h), cfg, rng).value;
                    if (!(lhs <= kato::C1(3, 1.0) * I * (1.0 + 1e-8)))
                        return "psup bound fails at h = " + std::to_string(h);
                }
            }
            auto u = Potential::indicator_sum(10, 3);
            const double sigma = kato::sphere_area(3);
            double I1 = 0.0;
            for (double delta : {1.0, 0.5, 0.2}) {
                const double v = kato::kato_I(u, delta, cfg, rng).value;
                if (!(v >= sigma * (1.0 - 0.05)))
                    return "indicator-sum I too small at delta = " + std::to_string(delta);
                if (delta == 1.0) I1 = v;
            }
            if (!std::isfinite(I1) || I1 > 100.0 * sigma) return "I_1 not finite";
            return "";
        });

    Criterion{8, "Theorem 1.1 domination for the constant potential", 120.0}.run(
        [&]() -> std::string {
            RngStream rng(808080, 8);
            const double q0 = 1.0, b = 1.0, a = 0.9;
            GaussianKernel kb{b, 1}, ka{a, 1};
            const double Cp = std::sqrt(b / a);
            const double eta = 0.3;
            auto m = bounds::verify_membership(kb, ka, Potential::constant(q0, 1), eta,
                                               SuperadditiveQ::linear(q0 * Cp), 30, {},
                                               rng);
            if (!m.ok) return "membership verification failed";
            series::SeriesRequest r;
            r.kernel = kb;
            r.q = Potential::constant(q0, 1);
            r.n_terms = 12;
            RngStream rng2(808080, 9);
            for (int i = 0; i < 100; ++i) {
                r.s = rng2.uniform(-1.0, 1.0);
                r.t = r.s + rng2.log_uniform(0.05, 3.0);
                r.x = {rng2.uniform(-1.0, 1.0)};
                r.y = {rng2.uniform(-1.0, 1.0)};
                const auto res = series::term_grid(r);
                const double Qst = m.Q.eval(r.s, r.t);
                const double ga = kernels::gauss_eval(ka, r.s, r.x, r.t, r.y);
                const double p = kernels::gauss_eval(kb, r.s, r.x, r.t, r.y);
                for (double eps :
                     {eta, 0.5 * (1.0 - eta), bounds::optimize_eps(m.C, eta, Qst).eps}) {
                    const double factor = bounds::theorem1_factor(m.C, eta, eps, Qst);
                    if (!(res.partial_sum <= factor * ga * (1.0 + 1e-6)))
                        return "domination fails at sample " + std::to_string(i);
                }
                // C = 1, p* = p: the e^Q bound also dominates
                if (!(res.partial_sum <= std::exp(q0 * (r.t - r.s)) * p * (1.0 + 1e-6)))
                    return "e^Q bound fails at sample " + std::to_string(i);
            }
            return "";
        });

    Criterion{9, "Lemma 2.2 splitting and regularization", 5.0}.run([&]() -> std::string {
        RngStream rng(909090, 10);
        for (int rep = 0; rep < 100; ++rep) {
            SuperadditiveQ q = SuperadditiveQ::linear(rng.uniform(0.0, 2.0));
            const int na = int(rng.next_u64() % 4);
            std::vector<superadd::Atom> atoms;
            for (int i = 0; i < na; ++i)
                atoms.push_back({rng.uniform(-4.0, 4.0), rng.log_uniform(0.05, 2.0)});
            if (!atoms.empty()) q = q + SuperadditiveQ::atoms(atoms);
            if (rng.next_u64() % 2)
                q = q + SuperadditiveQ::step_density({{rng.uniform(-4.0, 0.0),
                                                       rng.uniform(0.0, 4.0),
                                                       rng.uniform(0.0, 1.5)}});
            const double s = rng.uniform(-5.0, 0.0), t = rng.uniform(1e-3, 5.0);
            const double theta = rng.log_uniform(0.1, 3.0);
            const auto sp = superadd::split(q, s, t, theta);
            for (std::size_t i = 1; i < sp.breakpoints.size(); ++i)
                if (!(q.eval(sp.breakpoints[i - 1], sp.breakpoints[i]) <=
                      theta * (1.0 + 1e-12)))
                    return "piece exceeds theta at case " + std::to_string(rep);
            const auto qm = superadd::regularize(q);
            const auto qmm = superadd::regularize(qm);
            for (int k = 0; k < 20; ++k) {
                const double a2 = rng.uniform(-5.0, 5.0), b2 = rng.uniform(-5.0, 5.0);
                if (!(qm.eval(a2, b2) <= q.eval(a2, b2)))
                    return "Q^- above Q at case " + std::to_string(rep);
                if (qmm.eval(a2, b2) != qm.eval(a2, b2))
                    return "Q^- not idempotent at case " + std::to_string(rep);
            }
        }
        return "";
    });

    Criterion{10, "3G failure and the left-inverse identity", 60.0}.run(
        [&]() -> std::string {
            RngStream rng(101010, 11);
            for (int i = 0; i < 50; ++i) {
                const double a = rng.log_uniform(0.3, 3.0);
                const int d = 1 + int(rng.next_u64() % 3);
                const double t = rng.log_uniform(0.1, 10.0);
                std::vector<double> y(d);
                for (int j = 0; j < d; ++j) y[j] = rng.uniform(-6.0, 6.0);
                const double lg = kernels::three_g_failure_log(a, d, t, y);
                const double lc = kernels::three_g_closed_form_log(a, d, t, y);
                if (!(std::abs(lg - lc) <= 1e-12 * std::max(1.0, std::abs(lc))))
                    return "3G ratio mismatch at case " + std::to_string(i);
            }
            {
                // |y| chosen so the ratio clears 1e6
                const double a = 1.0, t = 1.0;
                const int d = 1;
                const double target = std::log(1e6);
                const double yy =
                    std::sqrt((target - 0.5 * d * std::log(2.0)) * 4.0 * t / a) * 1.001;
                std::vector<double> y{yy};
                if (!(kernels::three_g_failure(a, d, t, y) > 1e6))
                    return "ratio does not clear 1e6";
            }
            const std::vector<series::TestFunction> cat = {{1.0, 1.0, 2.0, 0.0, 0.7},
                                                           {2.5, 1.5, 2.5, -0.5, 1.2},
                                                           {0.8, 1.2, 1.8, 0.9, 0.5}};
            for (const auto& phi : cat) {
                if (!(series::left_inverse_residual(1.0, 0.0, 0.3, phi) <= 1e-6))
                    return "left inverse residual above 1e-6";
                if (!(series::left_inverse_residual_alt(1.0, 0.0, 0.3, phi) <= 1e-6))
                    return "alternative-kernel residual above 1e-6";
            }
            return "";
        });

    if (g_failures == 0) {
        std::printf("all criteria passed\n");
        return 0;
    }
    std::printf("%d criterion(s) failed\n", g_failures);
    return 1;
}
