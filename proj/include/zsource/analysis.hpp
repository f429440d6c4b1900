#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

#include "zsource/error.hpp"
#include "zsource/model.hpp"
#include "zsource/numerics.hpp"
#include "zsource/signals.hpp"
#include "zsource/sim.hpp"

namespace zsource {

// ---------------------------------------------------------------------------
// Trajectory differences and decay fits
// ---------------------------------------------------------------------------

struct DecayFit {
    double lambda_fit = 0.0;  // 1/s
    double K_fit = 0.0;
    double residual = 0.0;    // RMS of the log-norm fit
    double t_start = 0.0;
    double t_end = 0.0;
    std::size_t points = 0;
    bool exact_convergence = false;
    double initial_norm = 0.0;
    std::vector<double> times;
    std::vector<double> norms;

    bool decaying() const { return exact_convergence || lambda_fit > 0.0; }
};

/**
 * Affine least-squares fit of log||delta(t)|| = log(K ||delta_0||) - lambda t.
 * The window opens once ||delta|| has dropped by a factor e and closes before
 * it reaches 1e3 machine epsilons of the initial norm.
 */
inline DecayFit fit_decay(const std::vector<double>& times, const std::vector<double>& norms) {
    if (times.size() != norms.size() || times.empty())
        throw Error(ErrorKind::invalid_input, "fit_decay: times and norms must be non-empty and of equal length");
    DecayFit fit;
    fit.times = times;
    fit.norms = norms;
    fit.initial_norm = norms.front();
    const double n0 = norms.front();
    if (n0 == 0.0 || std::all_of(norms.begin(), norms.end(), [](double v) { return v == 0.0; })) {
        fit.exact_convergence = true;
        return fit;
    }
    const double floor = 1e3 * std::numeric_limits<double>::epsilon() * n0;
    std::size_t first = norms.size();
    for (std::size_t i = 0; i < norms.size(); ++i) {
        if (norms[i] <= n0 / std::numbers::e) {
            first = i;
            break;
        }
    }
    std::size_t last = first;
    while (last < norms.size() && norms[last] >= floor) ++last;
    // Fall back to the whole record when the decay never reaches the window.
    if (last < first + 3) {
        first = 0;
        last = norms.size();
        while (last > 0 && !(norms[last - 1] > 0.0)) --last;
    }
    double st = 0, sy = 0, stt = 0, sty = 0;
    std::size_t n = 0;
    for (std::size_t i = first; i < last; ++i) {
        if (!(norms[i] > 0.0)) continue;
        const double y = std::log(norms[i]);
        st += times[i];
        sy += y;
        stt += times[i] * times[i];
        sty += times[i] * y;
        ++n;
    }
    fit.points = n;
    if (n < 2) {
        fit.exact_convergence = norms.back() == 0.0;
        return fit;
    }
    fit.t_start = times[first];
    fit.t_end = times[last - 1];
    const double dn = static_cast<double>(n);
    const double denom = dn * stt - st * st;
    const double slope = denom != 0.0 ? (dn * sty - st * sy) / denom : 0.0;
    const double intercept = (sy - slope * st) / dn;
    fit.lambda_fit = -slope;
    fit.K_fit = std::exp(intercept) / n0;
    double ss = 0.0;
    for (std::size_t i = first; i < last; ++i) {
        if (!(norms[i] > 0.0)) continue;
        const double r = std::log(norms[i]) - (intercept + slope * times[i]);
        ss += r * r;
    }
    fit.residual = std::sqrt(ss / dn);
    return fit;
}

/// Sup over matched samples of ||a(t) - b(t)|| in the x-frame.
inline double trajectory_gap(const Trajectory& a, const Trajectory& b, const CircuitParams& p) {
    if (a.samples.size() != b.samples.size())
        throw Error(ErrorKind::invalid_input, "trajectory_gap: trajectories have different sample counts");
    double gap = 0.0;
    for (std::size_t i = 0; i < a.samples.size(); ++i) {
        if (a.samples[i].t != b.samples[i].t)
            throw Error(ErrorKind::invalid_input, "trajectory_gap: sample times differ");
        gap = std::max(gap, norm(to_x(a.samples[i].state, p).values - to_x(b.samples[i].state, p).values));
    }
    return gap;
}

namespace detail {

inline DecayFit difference_fit(const Trajectory& a, const Trajectory& b, const CircuitParams& p) {
    std::vector<double> times, norms;
    times.reserve(a.samples.size());
    norms.reserve(a.samples.size());
    for (std::size_t i = 0; i < a.samples.size(); ++i) {
        times.push_back(a.samples[i].t);
        norms.push_back(norm(to_x(a.samples[i].state, p).values - to_x(b.samples[i].state, p).values));
    }
    return fit_decay(times, norms);
}

}  // namespace detail

/// Two averaged-model runs under the same duty profile.
inline DecayFit trajectory_difference(const ModelMatrices& m, const DutyProfile& profile, const StateVector& x0,
                                      const StateVector& y0, double horizon, std::size_t stride = 10) {
    SimConfig cfg;
    cfg.horizon = horizon;
    cfg.sample_stride = stride;
    cfg.ccm_check = false;
    const auto a = simulate_averaged(m, profile, x0, cfg);
    const auto b = simulate_averaged(m, profile, y0, cfg);
    return detail::difference_fit(a, b, m.params);
}

/// Two switched-model runs under the same PWM signal, sampled at period ends.
inline DecayFit trajectory_difference(const ModelMatrices& m, const PwmSignal& sig, const StateVector& x0,
                                      const StateVector& y0, double horizon) {
    SimConfig cfg;
    cfg.horizon = std::min(horizon, sig.end_time());
    cfg.ccm_check = false;
    const auto a = simulate_switched(m, sig, x0, cfg);
    const auto b = simulate_switched(m, sig, y0, cfg);
    // Keep period boundaries only so the fit sees the monodromy progression.
    Trajectory pa, pb;
    for (std::size_t i = 0; i < a.samples.size(); ++i) {
        const double k = a.samples[i].t / sig.T;
        if (std::abs(k - std::round(k)) > 1e-9 * std::max(1.0, k)) continue;
        pa.samples.push_back(a.samples[i]);
        pb.samples.push_back(b.samples[i]);
    }
    return detail::difference_fit(pa, pb, m.params);
}

// ---------------------------------------------------------------------------
// Periodic steady state
// ---------------------------------------------------------------------------

struct PeriodicOrbit {
    StateVector x_star;  // x-frame state at the start of the period
    Mat4 Phi;
    Vec4 psi{};
    double rho = 0.0;        // spectral radius of Phi
    double residual = 0.0;   // ||Phi x* + psi - x*||
    double return_error = 0.0;  // ||x(T_mod) - x*|| from re-simulation
    double period = 0.0;
    Trajectory orbit;
};

inline void check_contraction(const Mat4& phi, double& rho) {
    rho = spectral_radius(phi);
    if (!(rho <= 1.0 - 1e-6))
        throw Error(ErrorKind::no_contraction, "periodic_orbit: period map is not a contraction (rho = " +
                                                   std::to_string(rho) + ")");
}

/// Fixed point of the composed switched-model map over the whole signal.
inline PeriodicOrbit periodic_orbit(const ModelMatrices& m, const PwmSignal& sig, double sample_dt = 0.0) {
    const auto verdict = validate_pwm(sig);
    if (!verdict.passed) throw Error(ErrorKind::invalid_pwm, "periodic_orbit: " + verdict.message);
    AffineMap total;
    for (std::size_t k = 0; k < sig.horizon(); ++k) total = period_map(m, sig, k, Forcing::inverter()).after(total);
    PeriodicOrbit out;
    out.Phi = total.E;
    out.psi = total.f;
    out.period = sig.end_time();
    check_contraction(out.Phi, out.rho);
    const Vec4 xs = solve(Mat4::identity() - out.Phi, out.psi);
    out.x_star = {xs, Frame::x};
    out.residual = norm(total.apply(xs) - xs);
    SimConfig cfg;
    cfg.horizon = sig.end_time();
    cfg.sample_dt = sample_dt;
    out.orbit = simulate_switched(m, sig, out.x_star, cfg);
    out.return_error = norm(out.orbit.samples.back().state.values - xs);
    return out;
}

/**
 * Averaged-model counterpart over one modulation period. Fixed-step RK4 on an
 * affine system is itself an affine map, which is assembled column by column.
 */
inline PeriodicOrbit periodic_orbit(const ModelMatrices& m, const DutyProfile& profile, double period,
                                    double max_step = 0.0) {
    if (!(period > 0.0 && std::isfinite(period)))
        throw Error(ErrorKind::invalid_input, "periodic_orbit: period must be positive");
    const double h = max_step > 0.0 ? max_step : averaged_step(m, 1e-2);
    const std::vector<double> times{period};
    PeriodicOrbit out;
    out.period = period;
    out.psi = averaged_at(m, profile, StateVector{}, times, h, Forcing::inverter())[0].values;
    for (std::size_t j = 0; j < 4; ++j) {
        const Vec4 col = averaged_at(m, profile, StateVector{unit_vector<4>(j), Frame::x}, times, h,
                                     Forcing::unforced())[0].values;
        for (std::size_t i = 0; i < 4; ++i) out.Phi(i, j) = col[i];
    }
    check_contraction(out.Phi, out.rho);
    const Vec4 xs = solve(Mat4::identity() - out.Phi, out.psi);
    out.x_star = {xs, Frame::x};
    out.residual = norm(out.Phi * xs + out.psi - xs);
    const Vec4 back = averaged_at(m, profile, out.x_star, times, h)[0].values;
    out.return_error = norm(back - xs);
    SimConfig cfg;
    cfg.horizon = period;
    cfg.avg_step = h;
    out.orbit = simulate_averaged(m, profile, out.x_star, cfg);
    return out;
}

// ---------------------------------------------------------------------------
// Open-loop inverter demonstration
// ---------------------------------------------------------------------------

struct DemoConfig {
    double M = 0.5;
    double omega = 0.0;       // rad/s; 0 selects 2 pi / (200 pi sqrt(L1 C1))
    double T_pwm = 0.0;       // s; 0 selects pi sqrt(L1 C1) / 20
    double eps = 0.0;         // s; 0 selects T_pwm / 10
    double horizon_periods = 3.0;  // modulation periods simulated at most
    std::size_t samples_per_pwm = 4;
    double settle_rel_tol = 1e-3;
    double eps_d = 0.05;

    /// Fills the zero-valued defaults from the circuit resonance.
    DemoConfig resolved(const CircuitParams& p) const {
        DemoConfig c = *this;
        const double w = p.resonance_half_period();
        if (c.omega == 0.0) c.omega = 2.0 * std::numbers::pi / (200.0 * w);
        if (c.T_pwm == 0.0) c.T_pwm = w / 20.0;
        if (c.eps == 0.0) c.eps = c.T_pwm / 10.0;
        return c;
    }
};

struct WaveformReport {
    double M = 0.0;
    double omega = 0.0;
    double V_o = 0.0;  // reference amplitude M * V_in
    double rms_error_rel = 0.0;
    double rms_error = 0.0;
    double fundamental_amplitude = 0.0;
    double fundamental_phase = 0.0;  // rad, relative to sin(omega t)
    double settle_time = 0.0;
    bool settled = false;
    double window_start = 0.0;
    double window_end = 0.0;
    std::size_t window_samples = 0;
    std::size_t ccm_violations = 0;
    std::size_t pwm_periods = 0;
    bool orbit_reference = false;  // settle measured against the periodic orbit
    double orbit_residual = 0.0;
};

struct DemoResult {
    WaveformReport report;
    Trajectory trajectory;  // z-frame
    PwmSignal signal;
};

/**
 * Duty reference -> PWM -> exact switched simulation from z = z_0.5. The
 * transient is discarded once the state is within settle_rel_tol of the
 * periodic orbit at a PWM boundary; v_C2 is then compared with V_o sin(omega t)
 * over one modulation period.
 */
inline DemoResult inverter_demo(const CircuitParams& p, const DemoConfig& cfg_in) {
    p.validate();
    const DemoConfig cfg = cfg_in.resolved(p);
    if (!(cfg.M >= 0.0 && cfg.M < 1.0))
        throw Error(ErrorKind::invalid_modulation, "inverter_demo: modulation index M must satisfy 0 <= M < 1");
    if (!(cfg.omega > 0.0 && std::isfinite(cfg.omega)))
        throw Error(ErrorKind::invalid_input, "inverter_demo: omega must be positive");
    if (!(cfg.horizon_periods >= 2.0))
        throw Error(ErrorKind::invalid_input, "inverter_demo: horizon must cover at least two modulation periods");
    if (cfg.samples_per_pwm == 0) throw Error(ErrorKind::invalid_input, "inverter_demo: samples_per_pwm must be >= 1");
    const auto m = build(p);
    const double T_mod = 2.0 * std::numbers::pi / cfg.omega;
    const auto profile = DutyProfile::sinusoidal(cfg.M, cfg.omega, 0.0, cfg.eps_d);
    const auto periods = static_cast<std::size_t>(std::ceil(cfg.horizon_periods * T_mod / cfg.T_pwm - 1e-9));
    const auto sig = pwm_from_duty(profile, cfg.T_pwm, cfg.eps, periods);

    DemoResult out;
    out.signal = sig;
    auto& rep = out.report;
    rep.M = cfg.M;
    rep.omega = cfg.omega;
    rep.V_o = cfg.M * p.Vin;
    rep.pwm_periods = periods;

    SimConfig sim;
    sim.horizon = sig.end_time();
    sim.sample_dt = cfg.T_pwm / static_cast<double>(cfg.samples_per_pwm);
    out.trajectory = simulate_switched(m, sig, to_z(StateVector{}, p), sim);
    rep.ccm_violations = out.trajectory.count(EventKind::ccm_violation);

    // Period-boundary states of the run.
    std::vector<Vec4> boundary;
    boundary.reserve(periods + 1);
    for (const auto& s : out.trajectory.samples) {
        const double k = s.t / cfg.T_pwm;
        if (std::abs(k - std::round(k)) <= 1e-9 * std::max(1.0, k) &&
            static_cast<std::size_t>(std::llround(k)) == boundary.size())
            boundary.push_back(to_x(s.state, p).values);
    }

    const double ratio = T_mod / cfg.T_pwm;
    const auto per_mod = static_cast<std::size_t>(std::llround(ratio));
    std::optional<std::size_t> settle_k;
    if (per_mod > 0 && std::abs(ratio - static_cast<double>(per_mod)) <= 1e-9 * ratio && per_mod <= periods) {
        // Fixed point of one modulation period; the signal repeats exactly.
        rep.orbit_reference = true;
        PwmSignal first{sig.T, sig.eps, {sig.switch_times.begin(), sig.switch_times.begin() + per_mod}};
        AffineMap total;
        std::vector<AffineMap> maps;
        maps.reserve(per_mod);
        for (std::size_t k = 0; k < per_mod; ++k) maps.push_back(period_map(m, first, k, Forcing::inverter()));
        for (const auto& mp : maps) total = mp.after(total);
        double rho = 0.0;
        check_contraction(total.E, rho);
        std::vector<Vec4> orbit(per_mod + 1);
        orbit[0] = solve(Mat4::identity() - total.E, total.f);
        rep.orbit_residual = norm(total.apply(orbit[0]) - orbit[0]);
        double scale = p.Vin;
        for (std::size_t k = 0; k < per_mod; ++k) {
            orbit[k + 1] = maps[k].apply(orbit[k]);
            scale = std::max(scale, norm(orbit[k + 1]));
        }
        for (std::size_t k = 0; k < boundary.size(); ++k) {
            if (norm(boundary[k] - orbit[k % per_mod]) <= cfg.settle_rel_tol * scale) {
                settle_k = k;
                break;
            }
        }
    } else {
        // Without exact periodicity, contract against a second run from the D(0) equilibrium.
        const auto y0 = steady_state(p, profile.duty(0.0));
        SimConfig sim2 = sim;
        sim2.sample_dt = 0.0;
        sim2.ccm_check = false;
        const auto other = simulate_switched(m, sig, y0, sim2);
        std::size_t k = 0;
        for (const auto& s : other.samples) {
            const double kk = s.t / cfg.T_pwm;
            if (std::abs(kk - std::round(kk)) > 1e-9 * std::max(1.0, kk)) continue;
            if (k < boundary.size() &&
                norm(boundary[k] - to_x(s.state, p).values) <= cfg.settle_rel_tol * std::max(p.Vin, norm(boundary[k]))) {
                settle_k = k;
                break;
            }
            ++k;
        }
    }

    const double t_end = sig.end_time();
    rep.settled = settle_k.has_value() && static_cast<double>(*settle_k) * cfg.T_pwm + T_mod <= t_end * (1 + 1e-12);
    rep.settle_time = settle_k ? static_cast<double>(*settle_k) * cfg.T_pwm : t_end;
    // Evaluate over one modulation period; fall back to the final one if unsettled.
    rep.window_start = rep.settled ? rep.settle_time : std::max(0.0, t_end - T_mod);
    rep.window_end = rep.window_start + T_mod;

    double se = 0.0, sr = 0.0, ps = 0.0, pc = 0.0;
    std::size_t n = 0;
    const double tol = 1e-9 * cfg.T_pwm;
    for (const auto& s : out.trajectory.samples) {
        if (s.t < rep.window_start - tol || s.t >= rep.window_end - tol) continue;
        // Uniform grid points only, so the averages are unbiased.
        const double g = s.t / sim.sample_dt;
        if (std::abs(g - std::round(g)) > 1e-6) continue;
        const double ref = rep.V_o * std::sin(cfg.omega * s.t);
        const double v = s.state.v_C2();
        se += (v - ref) * (v - ref);
        sr += ref * ref;
        ps += v * std::sin(cfg.omega * s.t);
        pc += v * std::cos(cfg.omega * s.t);
        ++n;
    }
    rep.window_samples = n;
    if (n > 0) {
        const double dn = static_cast<double>(n);
        rep.rms_error = std::sqrt(se / dn);
        const double denom = cfg.M > 0.0 ? std::sqrt(sr / dn) : p.Vin;
        rep.rms_error_rel = rep.rms_error / denom;
        const double a = 2.0 * ps / dn, b = 2.0 * pc / dn;
        rep.fundamental_amplitude = std::hypot(a, b);
        rep.fundamental_phase = std::atan2(b, a);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Averaging consistency
// ---------------------------------------------------------------------------

struct SweepRow {
    double T = 0.0;
    double eps = 0.0;
    double gap = 0.0;
    std::size_t samples = 0;
};

struct SweepConfig {
    double horizon = 20.0;
    double eps_ratio = 0.1;        // eps = eps_ratio * T
    std::size_t samples_per_period = 8;
};

/// Sup-norm gap between the switched and averaged models for each PWM period.
inline std::vector<SweepRow> averaging_sweep(const ModelMatrices& m, const DutyProfile& profile,
                                             const StateVector& x0, const std::vector<double>& T_list,
                                             const SweepConfig& cfg = {}) {
    if (T_list.empty()) throw Error(ErrorKind::invalid_input, "averaging_sweep: empty period list");
    for (std::size_t i = 1; i < T_list.size(); ++i)
        if (!(T_list[i] < T_list[i - 1]))
            throw Error(ErrorKind::invalid_input, "averaging_sweep: periods must be strictly decreasing");
    if (!(cfg.eps_ratio > 0.0 && cfg.eps_ratio <= 0.5))
        throw Error(ErrorKind::invalid_input, "averaging_sweep: eps_ratio must lie in (0, 0.5]");
    const double h = averaged_step(m, 1e-2);
    std::vector<SweepRow> rows;
    for (double T : T_list) {
        if (!(T > 0.0)) throw Error(ErrorKind::invalid_input, "averaging_sweep: periods must be positive");
        const auto periods = static_cast<std::size_t>(std::ceil(cfg.horizon / T - 1e-9));
        const auto sig = pwm_from_duty(profile, T, cfg.eps_ratio * T, periods);
        SimConfig sim;
        sim.horizon = cfg.horizon;
        sim.sample_dt = T / static_cast<double>(std::max<std::size_t>(cfg.samples_per_period, 1));
        sim.ccm_check = false;
        const auto sw = simulate_switched(m, sig, x0, sim);
        std::vector<double> times;
        times.reserve(sw.samples.size());
        for (const auto& s : sw.samples) times.push_back(s.t);
        const auto avg = averaged_at(m, profile, x0, times, h);
        SweepRow row;
        row.T = T;
        row.eps = cfg.eps_ratio * T;
        row.samples = times.size();
        for (std::size_t i = 0; i < times.size(); ++i)
            row.gap = std::max(row.gap, norm(to_x(sw.samples[i].state, m.params).values -
                                             to_x(avg[i], m.params).values));
        rows.push_back(row);
    }
    return rows;
}

}  // namespace zsource
