#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "zsource/analysis.hpp"
#include "zsource/certificates.hpp"
#include "zsource/error.hpp"
#include "zsource/model.hpp"
#include "zsource/signals.hpp"
#include "zsource/sim.hpp"

namespace zsource::io {

using json = nlohmann::ordered_json;

/// 17 significant digits, enough to round-trip any double.
inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// Basic values
// ---------------------------------------------------------------------------

inline json to_json(const Vec4& v) { return json::array({v[0], v[1], v[2], v[3]}); }

template <std::size_t N>
json to_json(const Mat<N>& m) {
    json rows = json::array();
    for (std::size_t i = 0; i < N; ++i) {
        json row = json::array();
        for (std::size_t j = 0; j < N; ++j) row.push_back(m(i, j));
        rows.push_back(row);
    }
    return rows;
}

inline json to_json(const StateVector& s) { return {{"frame", to_string(s.frame)}, {"values", to_json(s.values)}}; }

inline json to_json(const CircuitParams& p) {
    return {{"L1", p.L1}, {"L2", p.L2}, {"C1", p.C1}, {"C2", p.C2}, {"R", p.R}, {"Vin", p.Vin}};
}

inline json to_json(const SymVerdict& v) {
    return {{"definiteness", to_string(v.definite)},
            {"lambda_min", v.lambda_min},
            {"lambda_max", v.lambda_max},
            {"tolerance_used", v.tolerance_used}};
}

inline json check(const char* name, bool passed, double margin) {
    return {{"name", name}, {"passed", passed}, {"margin", margin}};
}

// ---------------------------------------------------------------------------
// PWM signals
// ---------------------------------------------------------------------------

inline json to_json(const PwmSignal& s) {
    return {{"T", s.T}, {"eps", s.eps}, {"horizon", s.horizon()}, {"switch_times", s.switch_times}};
}

inline PwmSignal pwm_from_json(const json& j, const std::string& where = "pwm") {
    auto number = [&](const char* key) {
        const std::string field = where + "." + key;
        if (!j.contains(key) || !j.at(key).is_number()) throw ConfigError(field, field + ": missing or non-numeric");
        return j.at(key).get<double>();
    };
    if (!j.is_object()) throw ConfigError(where, where + ": expected an object");
    PwmSignal s;
    s.T = number("T");
    s.eps = number("eps");
    if (!j.contains("switch_times") || !j.at("switch_times").is_array())
        throw ConfigError(where + ".switch_times", where + ".switch_times: expected an array of numbers");
    for (const auto& t : j.at("switch_times")) {
        if (!t.is_number())
            throw ConfigError(where + ".switch_times", where + ".switch_times: expected an array of numbers");
        s.switch_times.push_back(t.get<double>());
    }
    if (j.contains("horizon")) {
        if (!j.at("horizon").is_number_unsigned() || j.at("horizon").get<std::size_t>() != s.switch_times.size())
            throw ConfigError(where + ".horizon", where + ".horizon: must equal the number of switch times");
    }
    return s;
}

// ---------------------------------------------------------------------------
// Trajectories
// ---------------------------------------------------------------------------

inline constexpr const char* trajectory_header = "t,i_L1,i_L2,v_C1,v_C2,v_o,input,V_energy,event";

/// CSV in the z-frame; V_energy is x'Px of the x-frame state.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& tr, const CircuitParams& p) {
    os << trajectory_header << '\n';
    for (const auto& s : tr.samples) {
        const auto z = to_z(s.state, p);
        os << format_double(s.t);
        for (double v : z.values) os << ',' << format_double(v);
        os << ',' << format_double(z.v_C2()) << ',' << format_double(s.input) << ',' << format_double(s.energy) << ','
           << to_string(s.event) << '\n';
    }
}

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
    os << "param,value\n";
    for (const auto& r : rows) os << format_double(r.T) << ',' << format_double(r.gap) << '\n';
}

// ---------------------------------------------------------------------------
// Certificates
// ---------------------------------------------------------------------------

inline json to_json(const ChainCheck& c) {
    json pts = json::array();
    for (const auto& p : c.points)
        pts.push_back({{"mu", p.mu},
                       {"X1", p.chain.X1},
                       {"X2", p.chain.X2},
                       {"X3", p.chain.X3},
                       {"projection_lambda_max", p.projection_lambda_max},
                       {"pattern", p.pattern},
                       {"projection_negative", p.projection_negative},
                       {"agree", p.minors_agree}});
    return {{"all_patterns", c.all_patterns},
            {"all_projections", c.all_projections},
            {"all_agree", c.all_agree},
            {"points", pts}};
}

inline json to_json(const AveragedCertificate& c) {
    const auto& f = c.h_check;
    json checks = json::array();
    checks.push_back(check("h13_negative", f.h13_negative, -c.H.h13));
    checks.push_back(check("h14_equality", f.h14_equality,
                           1e-12 * std::max(1.0, std::abs(f.h14_required)) - f.h14_residual));
    checks.push_back(check("h23_bound", f.h23_bound, f.h23_upper - c.H.h23));
    checks.push_back(check("h24_bound", f.h24_bound, c.H.h24 - f.h24_lower));
    checks.push_back(check("determinant_chain", c.chain.passed(), c.chain.passed() ? 1.0 : -1.0));
    checks.push_back(check("ptilde_positive", c.ptilde_positive(), c.ptilde_lambda_min));
    checks.push_back(check("lyapunov_decrease", c.decrease_holds(), -c.grid_lambda_max));
    return {{"kind", "averaged"},
            {"passed", c.passed()},
            {"eps", c.eps_duty},
            {"mu_bar", c.mu_bar},
            {"H", {{"h13", c.H.h13}, {"h14", c.H.h14}, {"h23", c.H.h23}, {"h24", c.H.h24}}},
            {"H_bounds", {{"h14_required", f.h14_required}, {"h23_upper", f.h23_upper}, {"h24_lower", f.h24_lower}}},
            {"xi", c.xi},
            {"xi_steps", c.xi_steps},
            {"Ptilde", to_json(c.Ptilde)},
            {"ptilde_lambda_min", c.ptilde_lambda_min},
            {"ptilde_lambda_max", c.ptilde_lambda_max},
            {"alpha", c.alpha},
            {"endpoint_lambda_max", c.endpoint_lambda_max},
            {"grid", {{"points", c.grid_points}, {"lambda_max", c.grid_lambda_max}}},
            {"iss",
             {{"theta", c.theta},
              {"norm_PtB", c.norm_PtB},
              {"K", c.K},
              {"lambda", c.lambda},
              {"G", c.G},
              {"ultimate_bound", c.ultimate_bound()}}},
            {"checks", checks},
            {"chain", to_json(c.chain)}};
}

inline json to_json(const SwitchedCertificate& c) {
    json checks = json::array();
    checks.push_back(check("kappa3_positive", c.kappa3 > 0.0, c.kappa3));
    checks.push_back(check("decay_rate_positive", c.r > 0.0, c.r));
    checks.push_back(check("G_finite", std::isfinite(c.G), std::isfinite(c.G) ? c.G - c.G_emp : -1.0));
    return {{"kind", "switched"},
            {"passed", c.passed()},
            {"T", c.T},
            {"eps", c.eps},
            {"kappa1", c.kappa1},
            {"kappa2", c.kappa2},
            {"kappa3", c.kappa3},
            {"t_ii_worst", c.t_ii_worst},
            {"grid", {{"kappa3_points", c.grid_resolution}, {"kappa3_previous", c.kappa3_previous},
                      {"phi_points", c.phi_grid}}},
            {"r", c.r},
            {"K", c.K},
            {"lambda", c.lambda},
            {"iss",
             {{"phi_bar", c.phi_bar},
              {"norm_B", c.norm_B},
              {"theta", c.theta},
              {"c1", c.c1},
              {"c2", c.c2},
              {"L1", c.L1},
              {"a", c.a},
              {"beta", c.beta},
              {"gamma", c.gamma},
              {"c3", c.c3},
              {"alpha", c.alpha},
              {"L2", c.L2},
              {"c5", c.c5},
              {"c6", c.c6},
              {"lambda_iss", c.lambda_iss},
              {"K_iss", c.K_iss},
              {"G", c.G},
              {"G_emp", c.G_emp},
              {"ultimate_bound", c.ultimate_bound()}}},
            {"checks", checks}};
}

inline json to_json(const MonodromyReport& r) {
    json out = {{"kind", "monodromy"},
                {"passed", r.passed()},
                {"t_I", r.t_I},
                {"t_II", r.t_II},
                {"eps", r.eps},
                {"resonance_half_period", r.resonance_half_period},
                {"below_resonance", r.below_resonance},
                {"rho_M0", r.rho_M0},
                {"rho_M_eps", r.rho_M_eps},
                {"energy_change_0", to_json(r.energy_change_0)},
                {"energy_change_eps", to_json(r.energy_change_eps)},
                {"M0", to_json(r.M0)},
                {"M_eps", to_json(r.M_eps)}};
    json checks = json::array();
    if (r.contraction_applies) {
        checks.push_back(check("rho_M0_below_one", r.rho_M0 < 1.0, 1.0 - r.rho_M0));
        checks.push_back(check("energy_decrease", r.energy_change_eps.definite == Definiteness::negative_definite,
                               -r.energy_change_eps.lambda_max));
    }
    if (r.unit_radius_applies) {
        out["resonance_multiple"] = *r.resonance_multiple;
        out["e1_residual"] = r.e1_residual;
        checks.push_back(check("unit_radius", r.unit_radius_holds, 1e-8 - std::abs(r.rho_M_eps - 1.0)));
    }
    out["checks"] = checks;
    return out;
}

inline json to_json(const BoundVerdict& v) {
    json out = {{"passed", v.passed},
                {"K", v.K},
                {"lambda", v.lambda},
                {"G", v.G},
                {"u_sup", v.u_sup},
                {"worst_ratio", v.worst_ratio},
                {"samples_checked", v.samples_checked}};
    if (v.first_violation) out["first_violation"] = *v.first_violation;
    return out;
}

// ---------------------------------------------------------------------------
// Analysis reports
// ---------------------------------------------------------------------------

inline json to_json(const DecayFit& f) {
    return {{"lambda_fit", f.lambda_fit},
            {"K_fit", f.K_fit},
            {"residual", f.residual},
            {"window", {f.t_start, f.t_end}},
            {"points", f.points},
            {"exact_convergence", f.exact_convergence},
            {"initial_norm", f.initial_norm}};
}

inline json to_json(const PeriodicOrbit& o) {
    return {{"x_star", to_json(o.x_star)},
            {"Phi", to_json(o.Phi)},
            {"psi", to_json(o.psi)},
            {"rho", o.rho},
            {"residual", o.residual},
            {"return_error", o.return_error},
            {"period", o.period}};
}

inline json to_json(const WaveformReport& r) {
    return {{"M", r.M},
            {"omega", r.omega},
            {"V_o", r.V_o},
            {"rms_error_rel", r.rms_error_rel},
            {"rms_error", r.rms_error},
            {"fundamental_amplitude", r.fundamental_amplitude},
            {"fundamental_phase", r.fundamental_phase},
            {"settle_time", r.settle_time},
            {"settled", r.settled},
            {"window", {r.window_start, r.window_end}},
            {"window_samples", r.window_samples},
            {"ccm_violations", r.ccm_violations},
            {"pwm_periods", r.pwm_periods},
            {"orbit_reference", r.orbit_reference},
            {"orbit_residual", r.orbit_residual}};
}

inline json to_json(const std::vector<SweepRow>& rows) {
    json out = json::array();
    for (const auto& r : rows) out.push_back({{"T", r.T}, {"eps", r.eps}, {"gap", r.gap}, {"samples", r.samples}});
    return out;
}

}  // namespace zsource::io
