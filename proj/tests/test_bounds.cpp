#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "gsp/bounds.hpp"

using namespace gsp;
using namespace gsp::bounds;
using gsp::kato::Potential;
using gsp::kernels::GaussianKernel;
using gsp::numerics::QuadConfig;
using gsp::numerics::RngStream;
using gsp::superadd::SuperadditiveQ;

namespace {
constexpr double kPi = std::numbers::pi;
}

TEST_CASE("verify_membership: zero potential always belongs") {
    RngStream rng(1, 0);
    GaussianKernel kb{1.0, 1}, ka{0.9, 1};
    auto m = verify_membership(kb, ka, Potential::zero(1), 0.0,
                               SuperadditiveQ::linear(0.0), 20, {}, rng);
    REQUIRE(m.ok);
    for (const auto& s : m.verified_at) REQUIRE(s.lhs == 0.0);
}

TEST_CASE("verify_membership: constant potential with the scaling-chain Q") {
    // int g_b q0 g_a <= q0 (b/a)^{d/2} (t-s) g_a via the scaling bound plus
    // Chapman-Kolmogorov, so eta = 0 and a linear Q with that slope works.
    RngStream rng(2, 0);
    GaussianKernel kb{1.0, 1}, ka{0.9, 1};
    const double slope = 1.0 * std::sqrt(1.0 / 0.9);
    auto m = verify_membership(kb, ka, Potential::constant(1.0, 1), 0.0,
                               SuperadditiveQ::linear(slope), 50, {}, rng);
    REQUIRE(m.ok);
    REQUIRE(m.witness_index == -1);
    for (const auto& s : m.verified_at) {
        REQUIRE(s.lhs > 0.0);
        REQUIRE(s.lhs <= s.rhs * (1.0 + 1e-8));
    }
    // shrinking the slope below q0 must produce a witness
    RngStream rng2(2, 1);
    auto bad = verify_membership(kb, ka, Potential::constant(1.0, 1), 0.0,
                                 SuperadditiveQ::linear(0.5), 50, {}, rng2);
    REQUIRE_FALSE(bad.ok);
    REQUIRE(bad.witness_index >= 0);
}

TEST_CASE("verify_membership: d = 3 Monte Carlo route with pipeline constants") {
    RngStream rng(3, 0);
    QuadConfig cfg;
    auto q = Potential::radial_indicator(1.0, 1e-3, 3); // small-amplitude bump
    const double b = 1.0, a = 0.9, h = 1.0;
    auto Iest = kato::kato_I(q, std::sqrt(h), cfg, rng);
    auto pipe = thm_new_pipeline(1.0, 0.0, b, a, h, 3, Iest.value);
    GaussianKernel kb{b, 3}, ka{a, 3};
    auto m = verify_membership(kb, ka, q, pipe.cert.eta,
                               SuperadditiveQ::linear(pipe.q_slope), 50, cfg, rng, 20000);
    REQUIRE(m.ok);
}

TEST_CASE("lemma2_bound: closed forms") {
    REQUIRE(lemma2_bound(0, 3, 0.7, 2.0) == std::pow(2.0, 3));
    REQUIRE(std::abs(lemma2_bound(5, 1, 0.5, 2.0) - std::pow(0.5, 5) * 2.0) < 1e-15);
    REQUIRE(std::abs(lemma2_bound(3, 2, 0.5, 2.0) - 2.0) < 1e-14); // 4 * (1/8) * 4
    REQUIRE_THROWS_AS(lemma2_bound(100000, 50, 0.999, 1e6), DomainError);
}

TEST_CASE("theorem1_factor: plug-ins and the remark choice") {
    REQUIRE(std::abs(theorem1_factor(1.0, 0.0, 0.5, 0.0) - 2.0) < 1e-14);
    REQUIRE(std::abs(theorem1_factor(1.0, 0.0, 0.5, 1.0) - 8.0) < 1e-13);
    const double C = 1.7, Q = 2.0, eta = 0.3;
    REQUIRE(std::abs(theorem1_factor(C, eta, eta, Q) -
                     std::pow(C / 0.4, 1.0 + Q / 0.3)) < 1e-9);
    REQUIRE_THROWS_AS(theorem1_factor(1.0, 0.0, 1.1, 0.0), DomainError);
    REQUIRE_THROWS_AS(theorem1_factor(0.5, 0.0, 0.5, 0.0), DomainError);
}

TEST_CASE("optimize_eps: limits and dominance over the canonical choices") {
    // Q = 0: factor tends to C/(1-eta) as eps -> 0+
    auto r0 = optimize_eps(2.0, 0.25, 0.0);
    REQUIRE(r0.factor <= 2.0 / 0.75 * (1.0 + 1e-6));
    // C=1, eta=0, Q=1: beats eps = 1/2 (factor 8) and stays above e^Q
    auto r1 = optimize_eps(1.0, 0.0, 1.0);
    REQUIRE(r1.factor <= 8.0);
    REQUIRE(r1.factor >= std::exp(1.0));
    // never worse than either canonical choice
    for (auto [C, eta, Q] : {std::tuple{2.0, 0.25, 3.0}, std::tuple{1.5, 0.45, 0.2},
                             std::tuple{3.0, 0.0, 5.0}}) {
        auto r = optimize_eps(C, eta, Q);
        if (eta > 0 && eta < 0.5)
            REQUIRE(r.factor <= theorem1_factor(C, eta, eta, Q) * (1.0 + 1e-12));
        REQUIRE(r.factor <=
                theorem1_factor(C, eta, 0.5 * (1.0 - eta), Q) * (1.0 + 1e-12));
    }
}

TEST_CASE("explkato: decomposition and the d=3 plug-in") {
    // d=3, a=0.9, b=1: M = 1000, c0 = 1/(4 pi), |B(0,1/2)| = pi/6
    const double I = 1e-4;
    auto e = explkato_decompose(1.0, 0.9, 3, I, 1.0);
    REQUIRE(std::abs(e.M - 1000.0) < 1e-6 * 1000.0);
    REQUIRE(std::abs(e.eta - 1000.0 * I / (4.0 * kPi)) < 1e-9);
    REQUIRE(std::abs(e.slope - 12000.0 * I / kPi) < 1e-7);
    REQUIRE(explkato_bound(1.0, 0.9, 3, 0.0, 1.0, 5.0) == 0.0);
    // splits as eta + slope (t-s)
    const double dt = 2.5;
    REQUIRE(std::abs(explkato_bound(1.0, 0.9, 3, I, 1.0, dt) -
                     (e.eta + e.slope * dt)) < 1e-15);
}

TEST_CASE("thm_new_pipeline: certificate, I = 0 degeneracy, and eta >= 1 error") {
    auto pipe = thm_new_pipeline(1.0, 0.0, 1.0, 0.9, 1.0, 3, 1e-3);
    REQUIRE(pipe.cert.C == std::pow(1.0 / 0.9, 1.5));
    REQUIRE(pipe.cert.eta < 1.0);
    REQUIRE(pipe.cert.bound_factor >= 1.0);

    // I = 0: the bound collapses to C e^{lambda dt} g_a (eps -> 0 limit)
    auto p0 = thm_new_pipeline(1.0, 0.0, 1.0, 0.9, 1.0, 3, 0.0);
    std::vector<double> x{0.0, 0.0, 0.0}, y{0.5, -0.2, 0.1};
    GaussianKernel ka{0.9, 3};
    const double want = p0.cert.C * kernels::gauss_eval(ka, 0.0, x, 1.0, y);
    REQUIRE(std::abs(p0(0.0, x, 1.0, y) - want) <= 1e-6 * want);

    try {
        thm_new_pipeline(1.0, 0.0, 1.0, 0.9, 1.0, 3, 1.0); // eta = 1000/(4pi) >> 1
        FAIL("expected DomainError");
    } catch (const DomainError& e) {
        REQUIRE(std::string(e.what()).find("admissible I") != std::string::npos);
    }
}

TEST_CASE("step1_parabolic_bound: ratio cases") {
    // a = b/2: the max-ratio is 1, so M' = M = compute_M(1,2,d)
    auto c = fourg::compute_M(1.0, 2.0, 2);
    REQUIRE(std::abs(step1_parabolic_bound(2.0, 1.0, 2, 1.0) - c.M) < 1e-12 * c.M);
    // d=1, a=0.9, b=1: M' = 3 * 10 = 30
    REQUIRE(std::abs(step1_parabolic_bound(1.0, 0.9, 1, 1.0) - 30.0) < 1e-8);
    REQUIRE(step1_parabolic_bound(1.0, 0.9, 1, 0.0) == 0.0);
}

TEST_CASE("Theorem 1.1 domination for the constant potential (d = 1)") {
    // membership with eta in (0, 1/2) by shifting mass from Q: for q == q0,
    // lhs <= q0 C' (t-s) g_a <= [q0 C' h' + q0 C' (t-s)] g_a for any h' > 0
    RngStream rng(4, 0);
    const double q0 = 1.0, b = 1.0, a = 0.9;
    GaussianKernel kb{b, 1}, ka{a, 1};
    const double Cp = std::sqrt(b / a);
    const double hprime = 0.3 / (q0 * Cp);
    const double eta = q0 * Cp * hprime; // = 0.3
    auto m = verify_membership(kb, ka, Potential::constant(q0, 1), eta,
                               SuperadditiveQ::linear(q0 * Cp), 30, {}, rng);
    REQUIRE(m.ok);

    series::SeriesRequest r;
    r.kernel = kb;
    r.q = Potential::constant(q0, 1);
    r.n_terms = 12;
    RngStream rng2(4, 1);
    for (int i = 0; i < 100; ++i) {
        r.s = rng2.uniform(-1.0, 1.0);
        r.t = r.s + rng2.log_uniform(0.05, 3.0);
        r.x = {rng2.uniform(-1.0, 1.0)};
        r.y = {rng2.uniform(-1.0, 1.0)};
        auto res = series::term_grid(r);
        const double Qst = m.Q.eval(r.s, r.t);
        const double ga = kernels::gauss_eval(ka, r.s, r.x, r.t, r.y);
        for (double eps : {eta, 0.5 * (1.0 - eta), optimize_eps(m.C, eta, Qst).eps}) {
            const double factor = theorem1_factor(m.C, eta, eps, Qst);
            REQUIRE(res.partial_sum <= factor * ga * (1.0 + 1e-6));
        }
    }
}

TEST_CASE("specializations: p* = p with C = 1 admits the sharper factors") {
    // q == q0, p* = p: membership is exact with eta = 0, Q = q0 (t-s)
    const double q0 = 0.8;
    GaussianKernel kb{1.0, 1};
    series::SeriesRequest r;
    r.kernel = kb;
    r.q = Potential::constant(q0, 1);
    r.n_terms = 12;
    RngStream rng(5, 0);
    for (int i = 0; i < 40; ++i) {
        r.s = 0.0;
        r.t = rng.log_uniform(0.1, 3.0);
        r.x = {rng.uniform(-1.0, 1.0)};
        r.y = {rng.uniform(-1.0, 1.0)};
        auto res = series::term_grid(r);
        const double p = kernels::gauss_eval(kb, r.s, r.x, r.t, r.y);
        const double Q = q0 * (r.t - r.s);
        // Eq. (1.5): e^Q p dominates
        REQUIRE(res.partial_sum <= std::exp(Q) * p * (1.0 + 1e-10));
        // Eq. (1.4) with the redistributed eta = q0 h'
        const double eta = 0.25;
        const double Qr = Q; // slope q0, plus eta as the instantaneous part
        REQUIRE(res.partial_sum <=
                std::pow(1.0 / (1.0 - eta), 1.0 + Qr / eta) * p * (1.0 + 1e-10));
    }
}

TEST_CASE("regularization bound: half-open Q verified, then C (eta + Q^-)") {
    RngStream rng(6, 0);
    const double q0 = 0.7, b = 1.0, a = 0.8;
    GaussianKernel kb{b, 1}, ka{a, 1};
    const double slope = q0 * std::sqrt(b / a);
    auto Qhalf = SuperadditiveQ::linear(slope) +
                 SuperadditiveQ::atoms({{0.0, 0.4}, {1.0, 0.2}},
                                       superadd::IntervalConvention::half_open_left_closed);
    auto m = verify_membership(kb, ka, Potential::constant(q0, 1), 0.0, Qhalf, 30, {}, rng);
    REQUIRE(m.ok);
    auto Qreg = superadd::regularize(Qhalf);
    // at samples starting exactly on an atom, Q^- < Q yet the lemma bound holds
    for (double s : {0.0, 1.0}) {
        const double t = s + 1.5;
        REQUIRE(Qreg.eval(s, t) < Qhalf.eval(s, t));
        std::vector<double> x{0.2}, y{-0.1};
        const double lhs =
            bounds::detail::lhs_deterministic(kb, ka, Potential::constant(q0, 1), s, t, x,
                                              y, {});
        const double bound = lemma52_bound(m.C, 0.0, Qreg.eval(s, t)) *
                             kernels::gauss_eval(ka, s, x, t, y);
        REQUIRE(lhs <= bound * (1.0 + 1e-8));
    }
}

TEST_CASE("drift example: exponential-in-time Gaussian domination, no plain one") {
    RngStream rng(7, 0);
    for (double b : {0.5, 0.9}) {
        GaussianKernel gb{b, 1};
        for (int i = 0; i < 10000; ++i) {
            const double s = rng.uniform(-2.0, 2.0);
            const double dt = rng.log_uniform(1e-2, 10.0);
            const double x = rng.uniform(-5.0, 5.0);
            const double y = x + std::sqrt(dt) * 3.0 * rng.normal();
            const double p = drift_kernel(s, x, s + dt, y);
            const double bound = std::pow(b, -0.5) *
                                 std::exp(b * dt / (4.0 * (1.0 - b))) *
                                 kernels::gauss_eval1(gb, s, x, s + dt, y);
            REQUIRE(p <= bound * (1.0 + 1e-10));
        }
    }
    // no constants (c1, c2) give p <= c1 g_{c2}: adversarial samples along the
    // drift defeat every grid cell
    for (double c2 : {0.1, 0.5, 1.0, 2.0, 10.0}) {
        GaussianKernel g{c2, 1};
        for (double c1 : {1.0, 1e2, 1e4, 1e8}) {
            bool violated = false;
            for (double w : {1.0, 10.0, 100.0, 1000.0}) {
                // x = 0, y - x = dt = w: the drift keeps p at its central value
                const double p = drift_kernel(0.0, 0.0, w, w);
                if (p > c1 * kernels::gauss_eval1(g, 0.0, 0.0, w, w)) violated = true;
            }
            REQUIRE(violated);
        }
    }
}

TEST_CASE("pipeline domination: series under the emitted bound (d = 3)") {
    // constant potential with an I-surrogate certificate: eta, Q from the
    // pipeline at the constant's actual I value
    RngStream rng(8, 0);
    const double q0 = 1e-4, b = 1.0, a = 0.9, h = 1.0;
    const double I = q0 * kato::sphere_area(3) * h / 2.0; // I_{sqrt h}(q0)
    auto pipe = thm_new_pipeline(1.0, 0.0, b, a, h, 3, I);
    series::SeriesRequest r;
    r.kernel = GaussianKernel{b, 3};
    r.q = Potential::constant(q0, 3);
    r.n_terms = 8;
    for (int i = 0; i < 100; ++i) {
        r.s = rng.uniform(-1.0, 1.0);
        r.t = r.s + rng.log_uniform(0.05, 5.0);
        r.x = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        r.y = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        auto res = series::term_grid(r);
        REQUIRE(res.partial_sum <= pipe(r.s, r.x, r.t, r.y) * (1.0 + 1e-6));
    }
}

TEST_CASE("make_tail_certificate ties membership to the series tail") {
    RngStream rng(9, 0);
    GaussianKernel kb{1.0, 1}, ka{0.9, 1};
    const double slope = 1.0 * std::sqrt(1.0 / 0.9);
    auto m = verify_membership(kb, ka, Potential::constant(1.0, 1), 0.0,
                               SuperadditiveQ::linear(slope), 10, {}, rng);
    REQUIRE(m.ok);
    auto cert = make_tail_certificate(m, 0.0, 1.0, 0.5);
    REQUIRE(cert.theta < 1.0);
    series::SeriesRequest r;
    r.kernel = kb;
    r.q = Potential::constant(1.0, 1);
    r.s = 0.0;
    r.t = 1.0;
    r.x = {0.0};
    r.y = {0.4};
    auto res = series::tilde_p(r, cert);
    REQUIRE(res.rigorous_tail);
    // Lemma domination per computed term
    auto terms = series::term_grid(r);
    const double pstar = kernels::gauss_eval(ka, r.s, r.x, r.t, r.y);
    for (std::size_t n = 0; n < terms.terms.size(); ++n) {
        const double cap = lemma2_bound(int(n), cert.k, cert.theta, cert.C) * pstar;
        REQUIRE(terms.terms[n] <= cap * (1.0 + 1e-8));
    }
}
