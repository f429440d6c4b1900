#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "zsource/error.hpp"

namespace zsource {

/// Duty cycle that makes the steady-state gain equal M sin(omega t).
inline double duty_reference(double t, double M, double omega, double phase = 0.0) {
    if (!(M >= 0.0 && M < 1.0))
        throw Error(ErrorKind::invalid_modulation, "duty_reference: modulation index M must satisfy 0 <= M < 1");
    const double s = M * std::sin(omega * t + phase);
    return (1.0 - s) / (2.0 - s);
}

/// Continuous duty trajectory d(t), clamped to [eps_d, 1 - eps_d].
struct DutyProfile {
    enum class Kind { constant, sinusoidal };

    Kind kind = Kind::constant;
    double D = 0.5;
    double M = 0.0;
    double omega = 0.0;
    double phase = 0.0;
    double eps_d = 0.05;

    static DutyProfile constant_duty(double D, double eps_d = 0.05) {
        DutyProfile p;
        p.kind = Kind::constant;
        p.D = D;
        p.eps_d = eps_d;
        p.validate();
        return p;
    }

    static DutyProfile sinusoidal(double M, double omega, double phase = 0.0, double eps_d = 0.05) {
        DutyProfile p;
        p.kind = Kind::sinusoidal;
        p.M = M;
        p.omega = omega;
        p.phase = phase;
        p.eps_d = eps_d;
        p.validate();
        return p;
    }

    void validate() const {
        if (!(eps_d > 0.0 && eps_d <= 0.5))
            throw Error(ErrorKind::out_of_range, "duty profile: eps_d must lie in (0, 0.5]");
        if (kind == Kind::constant) {
            if (!(D > 0.0 && D < 1.0)) throw Error(ErrorKind::out_of_range, "duty profile: D must lie in (0, 1)");
        } else {
            if (!(M >= 0.0 && M < 1.0))
                throw Error(ErrorKind::invalid_modulation, "duty profile: modulation index M must satisfy 0 <= M < 1");
            if (!std::isfinite(omega) || !std::isfinite(phase))
                throw Error(ErrorKind::invalid_input, "duty profile: omega and phase must be finite");
        }
    }

    double duty(double t) const {
        const double raw = kind == Kind::constant ? D : duty_reference(t, M, omega, phase);
        return std::clamp(raw, eps_d, 1.0 - eps_d);
    }

    /// Offset duty mu(t) = d(t) - 0.5.
    double mu(double t) const { return duty(t) - 0.5; }

    /// Modulation period 2 pi / omega, or nullopt for a constant profile.
    std::optional<double> period() const {
        if (kind == Kind::constant || omega == 0.0) return std::nullopt;
        return 2.0 * std::numbers::pi / std::abs(omega);
    }
};

struct SignalSample {
    double t = 0.0;
    double value = 0.0;
};

/**
 * Two-valued switching signal of class PWM(T, eps): in period k the converter
 * is in Mode I (mu = +0.5) on [kT, t_k) and Mode II (mu = -0.5) on [t_k, (k+1)T).
 */
struct PwmSignal {
    double T = 1.0;
    double eps = 0.1;
    std::vector<double> switch_times;  // t_k, absolute seconds

    std::size_t horizon() const { return switch_times.size(); }
    double end_time() const { return T * static_cast<double>(horizon()); }
    double period_start(std::size_t k) const { return T * static_cast<double>(k); }
    double mode_i_duration(std::size_t k) const { return switch_times[k] - period_start(k); }
    double mode_ii_duration(std::size_t k) const { return period_start(k + 1) - switch_times[k]; }

    friend bool operator==(const PwmSignal&, const PwmSignal&) = default;
};

struct PwmVerdict {
    enum class Violation { none, class_constraint, dwell_time, empty };

    bool passed = true;
    Violation violation = Violation::none;
    std::size_t period = 0;  // first offending period for dwell-time violations
    std::string message;
};

inline PwmVerdict validate_pwm(const PwmSignal& sig) {
    PwmVerdict v;
    if (!(std::isfinite(sig.T) && std::isfinite(sig.eps) && sig.eps > 0.0 && 2.0 * sig.eps <= sig.T)) {
        v.passed = false;
        v.violation = PwmVerdict::Violation::class_constraint;
        v.message = "class constraint 0 < 2*eps <= T violated";
        return v;
    }
    if (sig.switch_times.empty()) {
        v.passed = false;
        v.violation = PwmVerdict::Violation::empty;
        v.message = "signal has no periods";
        return v;
    }
    for (std::size_t k = 0; k < sig.horizon(); ++k) {
        const double lo = sig.period_start(k) + sig.eps;
        const double hi = sig.period_start(k + 1) - sig.eps;
        const double tk = sig.switch_times[k];
        // Absolute switch times carry rounding proportional to their magnitude.
        const double slack = 4.0 * std::numeric_limits<double>::epsilon() * sig.period_start(k + 1);
        if (!(tk >= lo - slack && tk <= hi + slack)) {
            v.passed = false;
            v.violation = PwmVerdict::Violation::dwell_time;
            v.period = k;
            v.message = "dwell-time violation at period " + std::to_string(k) + ": t_k=" + std::to_string(tk) +
                        " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]";
            return v;
        }
    }
    return v;
}

/// Samples d at each period start and clamps the Mode I duration to [eps, T - eps].
inline PwmSignal pwm_from_duty(const DutyProfile& profile, double T, double eps, std::size_t horizon) {
    profile.validate();
    if (!(std::isfinite(T) && std::isfinite(eps) && eps > 0.0 && 2.0 * eps <= T))
        throw Error(ErrorKind::invalid_pwm, "pwm_from_duty: requires 0 < 2*eps <= T");
    if (horizon == 0) throw Error(ErrorKind::invalid_pwm, "pwm_from_duty: horizon must be at least one period");
    PwmSignal sig{T, eps, {}};
    sig.switch_times.reserve(horizon);
    for (std::size_t k = 0; k < horizon; ++k) {
        const double start = T * static_cast<double>(k);
        const double lo = start + eps;
        const double hi = T * static_cast<double>(k + 1) - eps;
        sig.switch_times.push_back(std::max(lo, std::min(start + profile.duty(start) * T, hi)));
    }
    return sig;
}

/// Right-continuous evaluation of mu(t) in {-0.5, +0.5}.
inline double mu_at(const PwmSignal& sig, double t) {
    if (!(t >= 0.0 && t < sig.end_time()))
        throw Error(ErrorKind::out_of_range, "mu_at: time outside the signal horizon");
    auto k = static_cast<std::size_t>(std::floor(t / sig.T));
    // floor can land one period off when t sits on a boundary in floating point.
    if (k >= sig.horizon()) k = sig.horizon() - 1;
    if (t < sig.period_start(k)) --k;
    else if (k + 1 < sig.horizon() && t >= sig.period_start(k + 1)) ++k;
    return t < sig.switch_times[k] ? 0.5 : -0.5;
}

}  // namespace zsource
