#pragma once

// Superadditive functions Q(s,t):  Q(s,u) + Q(u,t) <= Q(s,t) for s < u < t,
// Q = 0 on {s >= t}.  Represented structurally as
//     Q(s,t) = beta (t-s) + sum of atom masses in the interval
//            + integral of a step density over (s,t),
// so the regularization Q^-(s,t) = lim_{h->0+} Q(s+h,t-h) and the splitting
// of Lemma-type decompositions are exact.  The interval convention decides
// whether an atom at s counts (half-open) or not (open); the open convention
// is the regular one.

#include <algorithm>
#include <cmath>
#include <vector>

#include "gsp/common.hpp"
#include "gsp/numerics.hpp"

namespace gsp::superadd {

using numerics::RngStream;

enum class IntervalConvention { open, half_open_left_closed };

struct Atom {
    double loc = 0.0;
    double mass = 0.0;
};

struct StepPiece {
    double lo = 0.0;
    double hi = 0.0;
    double height = 0.0; // nonnegative density value on [lo, hi)
};

class SuperadditiveQ {
  public:
    SuperadditiveQ() = default;

    static SuperadditiveQ linear(double beta) {
        if (!(beta >= 0)) throw DomainError("SuperadditiveQ: beta >= 0 required");
        SuperadditiveQ q;
        q.beta_ = beta;
        return q;
    }

    static SuperadditiveQ atoms(std::vector<Atom> atoms,
                                IntervalConvention conv = IntervalConvention::open) {
        SuperadditiveQ q;
        for (const auto& a : atoms)
            if (!(a.mass > 0)) throw DomainError("SuperadditiveQ: atom masses must be positive");
        std::sort(atoms.begin(), atoms.end(),
                  [](const Atom& a, const Atom& b) { return a.loc < b.loc; });
        q.atoms_ = std::move(atoms);
        q.conv_ = conv;
        return q;
    }

    static SuperadditiveQ step_density(std::vector<StepPiece> steps) {
        SuperadditiveQ q;
        for (const auto& s : steps)
            if (!(s.height >= 0) || !(s.lo < s.hi))
                throw DomainError("SuperadditiveQ: step pieces need lo < hi, height >= 0");
        q.steps_ = std::move(steps);
        return q;
    }

    // additive combination of representations
    SuperadditiveQ operator+(const SuperadditiveQ& o) const {
        if (conv_ != o.conv_ && !atoms_.empty() && !o.atoms_.empty())
            throw DomainError("SuperadditiveQ: mixed interval conventions");
        SuperadditiveQ q = *this;
        q.beta_ += o.beta_;
        q.atoms_.insert(q.atoms_.end(), o.atoms_.begin(), o.atoms_.end());
        std::sort(q.atoms_.begin(), q.atoms_.end(),
                  [](const Atom& a, const Atom& b) { return a.loc < b.loc; });
        q.steps_.insert(q.steps_.end(), o.steps_.begin(), o.steps_.end());
        if (atoms_.empty()) q.conv_ = o.conv_;
        return q;
    }

    double operator()(double s, double t) const { return eval(s, t); }

    double eval(double s, double t) const {
        if (!(s < t)) return 0.0;
        double v = beta_ * (t - s);
        for (const auto& a : atoms_) {
            const bool in = (conv_ == IntervalConvention::open)
                                ? (a.loc > s && a.loc < t)
                                : (a.loc >= s && a.loc < t);
            if (in) v += a.mass;
        }
        for (const auto& p : steps_) {
            const double lo = std::max(s, p.lo), hi = std::min(t, p.hi);
            if (lo < hi) v += p.height * (hi - lo);
        }
        return v;
    }

    double beta() const { return beta_; }
    const std::vector<Atom>& atom_list() const { return atoms_; }
    const std::vector<StepPiece>& steps() const { return steps_; }
    IntervalConvention convention() const { return conv_; }

  private:
    double beta_ = 0.0;
    std::vector<Atom> atoms_;
    std::vector<StepPiece> steps_;
    IntervalConvention conv_ = IntervalConvention::open;
};

inline double eval_Q(const SuperadditiveQ& q, double s, double t) { return q.eval(s, t); }

// Q^-(s,t) = lim_{h->0+} Q(s+h, t-h).  On the structural form this converts
// the atom convention to open; linear and density parts are fixed points.
inline SuperadditiveQ regularize(const SuperadditiveQ& q) {
    SuperadditiveQ r = SuperadditiveQ::linear(q.beta());
    if (!q.atom_list().empty())
        r = r + SuperadditiveQ::atoms(q.atom_list(), IntervalConvention::open);
    if (!q.steps().empty()) r = r + SuperadditiveQ::step_density(q.steps());
    return r;
}

struct Splitting {
    std::vector<double> breakpoints; // s = s_0 <= s_1 <= ... <= s_k = t
    double theta = 0.0;
};

// Breakpoints s_i = inf{u : Q(s,u) >= i theta} by bisection on the monotone
// map u -> Q(s,u), with a snap to atom locations.  The postcondition
// Q(s_{i-1}, s_i) <= theta (1 + 1e-12) is checked before returning; a failure
// means a non-regular Q was passed without regularization.
inline Splitting split(const SuperadditiveQ& q, double s, double t, double theta) {
    if (!(s < t)) throw DomainError("split: requires s < t");
    if (!(theta > 0)) throw DomainError("split: theta > 0 required");
    const double total = q.eval(s, t);
    const int k = (total <= 0.0) ? 1 : int(std::ceil(total / theta - 1e-15));
    Splitting out;
    out.theta = theta;
    out.breakpoints.push_back(s);
    const double snap_tol = 1e-12 * (t - s);
    for (int i = 1; i < k; ++i) {
        const double target = i * theta;
        double lo = out.breakpoints.back(), hi = t;
        // invariant: Q(s,lo) < target <= Q(s,hi); bisect to full resolution
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (mid <= lo || mid >= hi) break;
            if (q.eval(s, mid) >= target) hi = mid;
            else lo = mid;
        }
        double si = hi;
        for (const auto& a : q.atom_list())
            if (std::abs(a.loc - si) <= snap_tol) si = a.loc;
        si = std::min(std::max(si, s), t);
        out.breakpoints.push_back(si);
    }
    out.breakpoints.push_back(t);
    for (std::size_t i = 1; i < out.breakpoints.size(); ++i) {
        const double piece = q.eval(out.breakpoints[i - 1], out.breakpoints[i]);
        if (piece > theta * (1.0 + 1e-12))
            throw InvariantViolation("split: piece exceeds theta; regularize Q first");
    }
    return out;
}

// max over sampled triples s < u < t of Q(s,u) + Q(u,t) - Q(s,t); <= 0 for a
// genuinely superadditive Q.  Takes any callable so adversarial opaque
// functions can be probed too.
template <class Q>
double check_superadditive(Q&& q, int samples, RngStream& rng, double lo = -10.0,
                           double hi = 10.0) {
    double worst = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < samples; ++i) {
        double a = rng.uniform(lo, hi), b = rng.uniform(lo, hi), c = rng.uniform(lo, hi);
        double s = std::min({a, b, c}), t = std::max({a, b, c});
        double u = a + b + c - s - t;
        if (!(s < u && u < t)) continue;
        worst = std::max(worst, q(s, u) + q(u, t) - q(s, t));
    }
    return worst;
}

inline double check_superadditive(const SuperadditiveQ& q, int samples, RngStream& rng,
                                  double lo = -10.0, double hi = 10.0) {
    return check_superadditive([&](double s, double t) { return q.eval(s, t); }, samples,
                               rng, lo, hi);
}

} // namespace gsp::superadd
