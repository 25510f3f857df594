#pragma once

// JSON round-trips for the structured records the CLI reads and writes.
// The potential catalog also accepts a compact "name:args" spelling.

#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gsp/bounds.hpp"
#include "gsp/fourg.hpp"
#include "gsp/kato.hpp"
#include "gsp/potential.hpp"
#include "gsp/series.hpp"
#include "gsp/superadd.hpp"

namespace gsp::serialize {

using json = nlohmann::ordered_json;

inline json to_json(const superadd::SuperadditiveQ& q) {
    json j;
    j["beta"] = q.beta();
    j["atoms"] = json::array();
    for (const auto& a : q.atom_list()) j["atoms"].push_back({{"loc", a.loc}, {"mass", a.mass}});
    j["steps"] = json::array();
    for (const auto& s : q.steps())
        j["steps"].push_back({{"lo", s.lo}, {"hi", s.hi}, {"height", s.height}});
    j["convention"] = q.convention() == superadd::IntervalConvention::open ? "open" : "half_open";
    return j;
}

inline superadd::SuperadditiveQ superadditive_from_json(const json& j) {
    for (auto& [key, _] : j.items())
        if (key != "beta" && key != "atoms" && key != "steps" && key != "convention")
            throw DomainError("SuperadditiveQ: unknown key '" + key + "'");
    auto q = superadd::SuperadditiveQ::linear(j.value("beta", 0.0));
    auto conv = superadd::IntervalConvention::open;
    if (j.value("convention", "open") == "half_open")
        conv = superadd::IntervalConvention::half_open_left_closed;
    if (j.contains("atoms") && !j["atoms"].empty()) {
        std::vector<superadd::Atom> atoms;
        for (const auto& a : j["atoms"]) atoms.push_back({a.at("loc"), a.at("mass")});
        q = q + superadd::SuperadditiveQ::atoms(atoms, conv);
    }
    if (j.contains("steps") && !j["steps"].empty()) {
        std::vector<superadd::StepPiece> steps;
        for (const auto& s : j["steps"])
            steps.push_back({s.at("lo"), s.at("hi"), s.at("height")});
        q = q + superadd::SuperadditiveQ::step_density(steps);
    }
    return q;
}

inline json to_json(const kato::Potential& p) {
    json j;
    switch (p.kind) {
    case kato::PotentialKind::zero: j["variant"] = "zero"; break;
    case kato::PotentialKind::constant:
        j["variant"] = "constant";
        j["q0"] = p.q0;
        break;
    case kato::PotentialKind::time_only:
        j["variant"] = "time_only";
        j["profile"] = p.f_name;
        j["c"] = p.f_param;
        break;
    case kato::PotentialKind::radial:
        j["variant"] = "radial";
        j["profile"] = p.u_name;
        if (p.u_name == "gauss") j["amp"] = p.u_amp;
        if (p.u_name == "indicator") {
            j["radius"] = p.u_radius;
            j["amp"] = p.u_amp;
        }
        if (p.u_name == "power") {
            j["eps"] = p.u_eps;
            j["radius"] = p.u_radius;
        }
        break;
    case kato::PotentialKind::separable:
        j["variant"] = "separable";
        j["time_profile"] = p.f_name;
        j["c"] = p.f_param;
        j["radial_profile"] = p.u_name;
        if (p.u_name == "gauss") j["amp"] = p.u_amp;
        if (p.u_name == "indicator") {
            j["radius"] = p.u_radius;
            j["amp"] = p.u_amp;
        }
        break;
    case kato::PotentialKind::indicator_sum:
        j["variant"] = "indicator_sum";
        j["n_max"] = p.n_max;
        break;
    }
    j["d"] = p.d;
    return j;
}

namespace detail {

inline kato::Potential time_part_from(const std::string& profile, double c, int d) {
    if (profile == "const") return kato::Potential::time_const(c, d);
    if (profile == "linear") return kato::Potential::time_linear(c, d);
    throw DomainError("Potential: unknown time profile '" + profile + "'");
}

inline kato::Potential radial_part_from(const json& j, int d) {
    const std::string profile = j.at("profile");
    if (profile == "gauss") return kato::Potential::radial_gauss(j.value("amp", 1.0), d);
    if (profile == "indicator")
        return kato::Potential::radial_indicator(j.value("radius", 1.0), j.value("amp", 1.0), d);
    if (profile == "power")
        return kato::Potential::radial_power(j.value("eps", 1.0), j.value("radius", 1.0), d);
    throw DomainError("Potential: unknown radial profile '" + profile + "'");
}

} // namespace detail

inline kato::Potential potential_from_json(const json& j, int default_d = 1) {
    const int d = j.value("d", default_d);
    const std::string variant = j.at("variant");
    if (variant == "zero") return kato::Potential::zero(d);
    if (variant == "constant") return kato::Potential::constant(j.at("q0"), d);
    if (variant == "time_only")
        return detail::time_part_from(j.at("profile"), j.value("c", 1.0), d);
    if (variant == "radial") return detail::radial_part_from(j, d);
    if (variant == "separable") {
        auto tp = detail::time_part_from(j.at("time_profile"), j.value("c", 1.0), d);
        json rj = j;
        rj["profile"] = j.at("radial_profile");
        return kato::Potential::separable(tp, detail::radial_part_from(rj, d));
    }
    if (variant == "indicator_sum")
        return kato::Potential::indicator_sum(j.value("n_max", 50), d);
    throw DomainError("Potential: unknown variant '" + variant + "'");
}

// compact form: "zero", "constant:1.0", "time-linear:2", "radial-gauss:1.0",
// "radial-indicator:1.0,2.0", "radial-power:0.5,1.0", "indicator-sum:50",
// "separable:const:1.0:gauss:1.0" -- or a full JSON object
inline kato::Potential parse_potential(const std::string& spec, int d) {
    if (!spec.empty() && spec.front() == '{')
        return potential_from_json(json::parse(spec), d);
    std::vector<std::string> parts;
    std::stringstream ss(spec);
    std::string tok;
    while (std::getline(ss, tok, ':')) parts.push_back(tok);
    auto nums = [&](const std::string& csv) {
        std::vector<double> out;
        std::stringstream s2(csv);
        std::string t2;
        while (std::getline(s2, t2, ',')) out.push_back(std::stod(t2));
        return out;
    };
    const std::string& name = parts[0];
    if (name == "zero") return kato::Potential::zero(d);
    if (name == "constant") return kato::Potential::constant(nums(parts.at(1)).at(0), d);
    if (name == "time-const") return kato::Potential::time_const(nums(parts.at(1)).at(0), d);
    if (name == "time-linear") return kato::Potential::time_linear(nums(parts.at(1)).at(0), d);
    if (name == "radial-gauss") return kato::Potential::radial_gauss(nums(parts.at(1)).at(0), d);
    if (name == "radial-indicator") {
        auto v = nums(parts.at(1));
        return kato::Potential::radial_indicator(v.at(0), v.size() > 1 ? v[1] : 1.0, d);
    }
    if (name == "radial-power") {
        auto v = nums(parts.at(1));
        return kato::Potential::radial_power(v.at(0), v.size() > 1 ? v[1] : 1.0, d);
    }
    if (name == "indicator-sum")
        return kato::Potential::indicator_sum(int(nums(parts.at(1)).at(0)), d);
    if (name == "separable") {
        auto tp = detail::time_part_from(parts.at(1), std::stod(parts.at(2)), d);
        kato::Potential rp = kato::Potential::zero(d);
        const std::string& rname = parts.at(3);
        const double arg = std::stod(parts.at(4));
        if (rname == "gauss") rp = kato::Potential::radial_gauss(arg, d);
        else if (rname == "indicator") rp = kato::Potential::radial_indicator(arg, 1.0, d);
        else throw DomainError("Potential: unknown separable radial '" + rname + "'");
        return kato::Potential::separable(tp, rp);
    }
    throw DomainError("Potential: cannot parse spec '" + spec + "'");
}

inline json to_json(const series::SeriesResult& r) {
    json j;
    j["terms"] = r.terms;
    j["partial_sum"] = r.partial_sum;
    if (r.tail_bound >= 0.0) j["tail_bound"] = r.tail_bound;
    j["rigorous_tail"] = r.rigorous_tail;
    j["err_est"] = r.err_est;
    if (r.mc_std_error > 0.0) j["mc_std_error"] = r.mc_std_error;
    if (r.clip_fraction > 0.0) j["clip_fraction"] = r.clip_fraction;
    if (r.variance_flag) j["variance_flag"] = true;
    return j;
}

inline json to_json(const fourg::FourGConstants& c) {
    return json{{"alpha", c.alpha}, {"L", c.L},         {"tau_star", c.tau_star},
                {"a", c.a},         {"b", c.b},         {"d", c.d},
                {"M", c.M},         {"log_M", c.log_M}};
}

inline json to_json(const bounds::BoundCertificate& c) {
    return json{{"C", c.C},
                {"eta", c.eta},
                {"eps", c.eps},
                {"Q_value", c.Q_value},
                {"bound_factor", c.bound_factor},
                {"lambda", c.lambda},
                {"Lambda", c.Lambda}};
}

inline json to_json(const bounds::MembershipSample& s) {
    json j;
    j["s"] = s.s;
    j["t"] = s.t;
    j["x"] = s.x;
    j["y"] = s.y;
    j["lhs"] = s.lhs;
    j["rhs"] = s.rhs;
    if (s.std_err > 0.0) j["std_err"] = s.std_err;
    return j;
}

inline json to_json(const bounds::NMembership& m) {
    json j;
    j["C"] = m.C;
    j["eta"] = m.eta;
    j["Q"] = to_json(m.Q);
    j["ok"] = m.ok;
    if (m.witness_index >= 0) j["witness_index"] = m.witness_index;
    j["samples"] = json::array();
    for (const auto& s : m.verified_at) j["samples"].push_back(to_json(s));
    return j;
}

inline json to_json(const kato::KatoEstimate& e) {
    const char* method = e.method == kato::KatoMethod::closed_form ? "closed_form"
                         : e.method == kato::KatoMethod::radial_quadrature
                             ? "radial_quadrature"
                             : "grid_sup_monte_carlo";
    return json{
        {"delta", e.delta}, {"value", e.value}, {"err_est", e.err_est}, {"method", method}};
}

} // namespace gsp::serialize
