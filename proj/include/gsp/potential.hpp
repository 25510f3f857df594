#pragma once

// Catalog of nonnegative potentials q(u,z).  Kept structural (tagged variants
// with named profiles) so the Kato functionals can pick exact centers and the
// series engines can reject what they cannot integrate.

#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "gsp/common.hpp"

namespace gsp::kato {

enum class PotentialKind { zero, constant, time_only, radial, separable, indicator_sum };

struct Potential {
    PotentialKind kind = PotentialKind::zero;
    int d = 1;

    double q0 = 0.0; // constant variant

    // time factor f(u) >= 0 (time_only, separable)
    std::function<double(double)> f;
    std::string f_name;
    double f_param = 0.0;

    // radial factor U(r) >= 0 (radial, separable)
    std::function<double(double)> U;
    std::string u_name;
    double u_amp = 0.0, u_radius = 0.0, u_eps = 0.0;
    double cutoff = std::numeric_limits<double>::infinity(); // U support bound
    bool radially_decreasing = false;

    int n_max = 50; // indicator_sum truncation
    std::vector<double> z1; // unit direction of the ball centers

    static Potential zero(int d) {
        Potential p;
        p.kind = PotentialKind::zero;
        p.d = d;
        return p;
    }

    static Potential constant(double q0, int d) {
        if (!(q0 >= 0)) throw DomainError("Potential: q0 >= 0 required");
        Potential p;
        p.kind = PotentialKind::constant;
        p.d = d;
        p.q0 = q0;
        return p;
    }

    // f(u) = c on the whole line
    static Potential time_const(double c, int d) {
        Potential p;
        p.kind = PotentialKind::time_only;
        p.d = d;
        p.f_name = "const";
        p.f_param = c;
        p.f = [c](double) { return c; };
        return p;
    }

    // f(u) = c u_+ (clamped at zero to stay nonnegative)
    static Potential time_linear(double c, int d) {
        Potential p;
        p.kind = PotentialKind::time_only;
        p.d = d;
        p.f_name = "linear";
        p.f_param = c;
        p.f = [c](double u) { return c * std::max(u, 0.0); };
        return p;
    }

    static Potential radial_gauss(double amp, int d) {
        Potential p;
        p.kind = PotentialKind::radial;
        p.d = d;
        p.u_name = "gauss";
        p.u_amp = amp;
        p.U = [amp](double r) { return amp * std::exp(-r * r); };
        p.radially_decreasing = true;
        return p;
    }

    static Potential radial_indicator(double radius, double amp, int d) {
        Potential p;
        p.kind = PotentialKind::radial;
        p.d = d;
        p.u_name = "indicator";
        p.u_amp = amp;
        p.u_radius = radius;
        p.cutoff = radius;
        p.U = [radius, amp](double r) { return r < radius ? amp : 0.0; };
        p.radially_decreasing = true;
        return p;
    }

    // U(r) = r^{-2+eps} on r < radius; the classic Kato-class member
    static Potential radial_power(double eps, double radius, int d) {
        if (!(eps > 0 && eps <= 2)) throw DomainError("Potential: power eps in (0,2]");
        Potential p;
        p.kind = PotentialKind::radial;
        p.d = d;
        p.u_name = "power";
        p.u_eps = eps;
        p.u_radius = radius;
        p.cutoff = radius;
        p.U = [eps, radius](double r) {
            return (r < radius && r > 0) ? std::pow(r, eps - 2.0) : 0.0;
        };
        p.radially_decreasing = true;
        return p;
    }

    static Potential separable(const Potential& time_part, const Potential& radial_part) {
        if (time_part.kind != PotentialKind::time_only ||
            radial_part.kind != PotentialKind::radial)
            throw DomainError("Potential::separable: needs (time_only, radial) parts");
        Potential p = radial_part;
        p.kind = PotentialKind::separable;
        p.f = time_part.f;
        p.f_name = time_part.f_name;
        p.f_param = time_part.f_param;
        return p;
    }

    // U(z) = sum_{n=2}^{n_max} n |z - n z1|^{-1} 1_{B(n z1, 1/n)}(z)
    static Potential indicator_sum(int n_max, int d) {
        if (d < 3) throw DomainError("Potential::indicator_sum: d >= 3 required");
        if (n_max < 2) throw DomainError("Potential::indicator_sum: n_max >= 2");
        Potential p;
        p.kind = PotentialKind::indicator_sum;
        p.d = d;
        p.n_max = n_max;
        p.z1.assign(d, 0.0);
        p.z1[0] = 1.0;
        return p;
    }

    bool spatially_uniform() const {
        return kind == PotentialKind::zero || kind == PotentialKind::constant ||
               kind == PotentialKind::time_only;
    }

    bool time_independent() const {
        return kind != PotentialKind::time_only && kind != PotentialKind::separable;
    }

    bool bounded() const { return kind != PotentialKind::indicator_sum && u_name != "power"; }

    double time_factor(double u) const {
        switch (kind) {
        case PotentialKind::zero: return 0.0;
        case PotentialKind::constant: return q0;
        case PotentialKind::time_only: return f(u);
        case PotentialKind::separable: return f(u);
        default: return 1.0;
        }
    }

    double radial_factor(double r) const {
        switch (kind) {
        case PotentialKind::radial:
        case PotentialKind::separable: return U(r);
        default: throw DomainError("Potential: no radial factor for this variant");
        }
    }

    double operator()(double u, std::span<const double> z) const {
        switch (kind) {
        case PotentialKind::zero: return 0.0;
        case PotentialKind::constant: return q0;
        case PotentialKind::time_only: return f(u);
        case PotentialKind::radial: {
            double rr = 0.0;
            for (double v : z) rr += v * v;
            return U(std::sqrt(rr));
        }
        case PotentialKind::separable: {
            double rr = 0.0;
            for (double v : z) rr += v * v;
            return f(u) * U(std::sqrt(rr));
        }
        case PotentialKind::indicator_sum: {
            // balls are pairwise disjoint, so at most one term contributes;
            // membership is decided from the projection onto z1
            const double proj = z[0]; // z1 = e1 by construction
            const int n = int(std::lround(proj));
            if (n < 2 || n > n_max) return 0.0;
            double rr = 0.0;
            rr += (z[0] - n) * (z[0] - n);
            for (std::size_t i = 1; i < z.size(); ++i) rr += z[i] * z[i];
            const double r = std::sqrt(rr);
            if (r >= 1.0 / n || r == 0.0) return 0.0;
            return n / r;
        }
        }
        return 0.0;
    }
};

} // namespace gsp::kato
