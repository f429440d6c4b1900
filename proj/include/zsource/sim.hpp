#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "zsource/error.hpp"
#include "zsource/model.hpp"
#include "zsource/numerics.hpp"
#include "zsource/signals.hpp"

namespace zsource {

/**
 * Right-hand-side input of x' = A(mu) x + B u.
 *
 * `inverter` is the physical converter (u = mu), `unforced` drops the source
 * (u = 0, the V_in = 0 system), and `external` applies an arbitrary u(t).
 * For the switched simulator an external input is sampled at the start of each
 * constant-mode segment, which is exact for inputs that only change at
 * switching instants.
 */
struct Forcing {
    enum class Kind { inverter, unforced, external };

    Kind kind = Kind::inverter;
    std::function<double(double)> u;

    static Forcing inverter() { return {}; }
    static Forcing unforced() { return {Kind::unforced, {}}; }
    static Forcing external(std::function<double(double)> fn) { return {Kind::external, std::move(fn)}; }
    static Forcing constant(double value) {
        return {Kind::external, [value](double) { return value; }};
    }

    double value(double t, double mu) const {
        switch (kind) {
            case Kind::inverter: return mu;
            case Kind::unforced: return 0.0;
            case Kind::external: return u(t);
        }
        return 0.0;
    }
};

struct SimConfig {
    double horizon = 10.0;        // s
    double avg_step = 1e-2;       // s, upper bound on the averaged integrator step
    std::size_t sample_stride = 1;  // emit every n-th step (averaged) or period (switched)
    bool ccm_check = true;
    double sample_dt = 0.0;       // switched only: extra uniform output grid when > 0
    std::size_t ccm_substeps = 4;  // switched only: interior CCM probes per segment

    void validate() const {
        if (!(horizon > 0.0 && std::isfinite(horizon)))
            throw Error(ErrorKind::invalid_input, "SimConfig: horizon must be positive");
        if (!(avg_step > 0.0 && std::isfinite(avg_step)))
            throw Error(ErrorKind::invalid_input, "SimConfig: avg_step must be positive");
        if (sample_stride == 0) throw Error(ErrorKind::invalid_input, "SimConfig: sample_stride must be >= 1");
        if (!(sample_dt >= 0.0 && std::isfinite(sample_dt)))
            throw Error(ErrorKind::invalid_input, "SimConfig: sample_dt must be non-negative");
    }
};

enum class EventKind { sample, switching, ccm_violation };

constexpr const char* to_string(EventKind k) {
    switch (k) {
        case EventKind::sample: return "sample";
        case EventKind::switching: return "switch";
        case EventKind::ccm_violation: return "ccm-violation";
    }
    return "unknown";
}

struct TrajectorySample {
    double t = 0.0;
    StateVector state;
    double input = 0.0;   // mu at t (right-continuous)
    double energy = 0.0;  // x' P x
    EventKind event = EventKind::sample;
};

struct TrajectoryEvent {
    double t = 0.0;
    EventKind kind = EventKind::sample;
};

struct Trajectory {
    std::vector<TrajectorySample> samples;
    std::vector<TrajectoryEvent> events;

    std::size_t count(EventKind k) const {
        return static_cast<std::size_t>(
            std::count_if(events.begin(), events.end(), [k](const TrajectoryEvent& e) { return e.kind == k; }));
    }
    bool ccm_violated() const { return count(EventKind::ccm_violation) > 0; }
};

/// Physical CCM requirement: the C1 voltage may not fall below -V_in.
inline bool ccm_violation(const StateVector& s, const CircuitParams& p) {
    return to_z(s, p).v_C1() < -p.Vin;
}

/// Exact solution map of x' = A x + c over a duration: x(tau) = E x(0) + f.
struct AffineMap {
    Mat4 E = Mat4::identity();
    Vec4 f{};

    Vec4 apply(const Vec4& x) const { return E * x + f; }

    /// Composition "this after other".
    AffineMap after(const AffineMap& other) const { return {E * other.E, E * other.f + f}; }
};

/// Augmented-exponential propagation of the constant-drive system x' = A x + c.
inline AffineMap affine_step(const Mat4& a, const Vec4& c, double tau) {
    Mat5 aug;
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < 4; ++j) aug(i, j) = a(i, j);
        aug(i, 4) = c[i];
    }
    const Mat5 e = expm(aug, tau);
    AffineMap out;
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < 4; ++j) out.E(i, j) = e(i, j);
        out.f[i] = e(i, 4);
    }
    return out;
}

namespace detail {

inline void check_finite_state(const Vec4& v, double t_last) {
    if (!all_finite(v) || norm(v) > 1e150)
        throw DivergenceError("simulation diverged after t=" + std::to_string(t_last), t_last);
}

}  // namespace detail

/**
 * Per-run propagator for the two switched modes. Segment maps are cached by
 * (mode, duration, input value) so periodic signals reuse two exponentials.
 */
class SegmentPropagator {
public:
    SegmentPropagator(const ModelMatrices& m, Frame frame, Forcing forcing)
        : m_(m), frame_(frame), forcing_(std::move(forcing)) {}

    /// Drive vector c for the given mode (mu = +-0.5) and input value.
    Vec4 drive(double mu, double u) const {
        const Mat4& a = mu > 0 ? m_.A_I : m_.A_II;
        if (frame_ == Frame::z && forcing_.kind == Forcing::Kind::inverter) return mu > 0 ? m_.b_I : m_.b_II;
        Vec4 c = u * m_.B;
        if (frame_ == Frame::z) c = c - a * m_.z_half;
        return c;
    }

    const AffineMap& segment(double mu, double t_start, double tau) {
        const double u = forcing_.value(t_start, mu);
        const auto key = std::make_tuple(mu > 0 ? 1 : 2, tau, u);
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
        const Mat4& a = mu > 0 ? m_.A_I : m_.A_II;
        return cache_.emplace(key, affine_step(a, drive(mu, u), tau)).first->second;
    }

    /// Uncached partial advance inside a segment.
    AffineMap partial(double mu, double t_start, double tau) const {
        const Mat4& a = mu > 0 ? m_.A_I : m_.A_II;
        return affine_step(a, drive(mu, forcing_.value(t_start, mu)), tau);
    }

    std::size_t cache_size() const { return cache_.size(); }

private:
    const ModelMatrices& m_;
    Frame frame_;
    Forcing forcing_;
    std::map<std::tuple<int, double, double>, AffineMap> cache_;
};

/**
 * Exact simulation of the switched model under a PWM signal. Within every
 * constant-mode interval the affine dynamics are advanced by the augmented
 * matrix exponential; the frame of x0 selects x- or z-coordinates.
 */
inline Trajectory simulate_switched(const ModelMatrices& m, const PwmSignal& sig, const StateVector& x0,
                                    const SimConfig& cfg, const Forcing& forcing = Forcing::inverter()) {
    cfg.validate();
    if (sig.switch_times.empty()) throw Error(ErrorKind::invalid_pwm, "simulate_switched: empty signal");
    if (!all_finite(x0.values)) throw Error(ErrorKind::invalid_input, "simulate_switched: non-finite initial state");
    const double t_end = std::min(cfg.horizon, sig.end_time());
    const auto& p = m.params;
    SegmentPropagator prop(m, x0.frame, forcing);

    Trajectory traj;
    auto make_sample = [&](double t, const Vec4& v, double mu, EventKind ev) {
        TrajectorySample s;
        s.t = t;
        s.state = {v, x0.frame};
        s.input = mu;
        s.energy = energy(m, s.state);
        s.event = ev;
        if (cfg.ccm_check && ccm_violation(s.state, p)) {
            s.event = EventKind::ccm_violation;
            traj.events.push_back({t, EventKind::ccm_violation});
        } else if (ev != EventKind::sample) {
            traj.events.push_back({t, ev});
        }
        return s;
    };

    Vec4 x = x0.values;
    traj.samples.push_back(make_sample(0.0, x, sig.switch_times[0] > 0.0 ? 0.5 : -0.5, EventKind::sample));
    double t_last = 0.0;
    std::size_t next_grid = 1;

    for (std::size_t k = 0; k < sig.horizon(); ++k) {
        const double starts[2] = {sig.period_start(k), sig.switch_times[k]};
        const double ends[2] = {sig.switch_times[k], sig.period_start(k + 1)};
        const bool emit_period = (k % cfg.sample_stride) == 0;
        for (int seg = 0; seg < 2; ++seg) {
            const double mu = seg == 0 ? 0.5 : -0.5;
            const double a = starts[seg];
            if (a >= t_end) break;
            const double b = std::min(ends[seg], t_end);
            const double tau = b - a;
            if (tau <= 0.0) continue;

            // Interior points: uniform output grid and CCM probes, in time order.
            std::vector<std::pair<double, bool>> interior;  // (t, emit)
            if (cfg.sample_dt > 0.0) {
                // Grid points within rounding of a segment edge coincide with the edge sample.
                const double edge = 1e-12 * std::max(1.0, b);
                while (true) {
                    const double tg = static_cast<double>(next_grid) * cfg.sample_dt;
                    if (tg >= b - edge) break;
                    if (tg > a + edge) interior.emplace_back(tg, true);
                    ++next_grid;
                }
            }
            if (cfg.ccm_check) {
                for (std::size_t j = 1; j <= cfg.ccm_substeps; ++j)
                    interior.emplace_back(a + tau * static_cast<double>(j) / static_cast<double>(cfg.ccm_substeps + 1),
                                          false);
            }
            std::sort(interior.begin(), interior.end());
            for (const auto& [ti, emit] : interior) {
                const Vec4 xi = prop.partial(mu, a, ti - a).apply(x);
                detail::check_finite_state(xi, t_last);
                if (emit) {
                    traj.samples.push_back(make_sample(ti, xi, mu, EventKind::sample));
                } else if (ccm_violation({xi, x0.frame}, p)) {
                    traj.events.push_back({ti, EventKind::ccm_violation});
                }
            }

            x = prop.segment(mu, a, tau).apply(x);
            detail::check_finite_state(x, t_last);
            t_last = b;
            const bool at_end = b >= t_end;
            if (emit_period || at_end) {
                const double mu_next = at_end ? mu : -mu;
                traj.samples.push_back(make_sample(b, x, mu_next, at_end ? EventKind::sample : EventKind::switching));
            }
        }
        if (sig.period_start(k + 1) >= t_end) break;
    }
    return traj;
}

/**
 * Affine map x(kT + offset) -> x((k+1)T + offset) of period k. The offset must
 * not exceed the dwell time so the window ends inside the next Mode I interval.
 */
inline AffineMap period_map(const ModelMatrices& m, const PwmSignal& sig, std::size_t k,
                            const Forcing& forcing = Forcing::unforced(), double offset = 0.0) {
    if (k >= sig.horizon()) throw Error(ErrorKind::out_of_range, "period_map: period index beyond signal horizon");
    if (!(offset >= 0.0 && offset <= sig.eps))
        throw Error(ErrorKind::out_of_range, "period_map: offset must lie in [0, eps]");
    SegmentPropagator prop(m, Frame::x, forcing);
    const double t0 = sig.period_start(k) + offset;
    const double tk = sig.switch_times[k];
    const double t1 = sig.period_start(k + 1);
    AffineMap total;
    if (tk - t0 > 0.0) total = prop.segment(0.5, t0, tk - t0).after(total);
    if (t1 - tk > 0.0) total = prop.segment(-0.5, tk, t1 - tk).after(total);
    if (offset > 0.0) total = prop.segment(0.5, t1, offset).after(total);
    return total;
}

// ---------------------------------------------------------------------------
// Averaged model
// ---------------------------------------------------------------------------

/// Largest eigenvalue modulus of A(0), a proxy for the fastest natural frequency.
inline double max_natural_frequency(const ModelMatrices& m) {
    return spectral_radius(a_of_mu(m, 0.0));
}

/// Step actually used by the averaged integrator.
inline double averaged_step(const ModelMatrices& m, double avg_step) {
    return std::min(avg_step, 1.0 / (50.0 * max_natural_frequency(m)));
}

namespace detail {

struct AveragedRhs {
    const ModelMatrices& m;
    const DutyProfile& profile;
    const Forcing& forcing;
    Frame frame;

    Vec4 operator()(double t, const Vec4& s) const {
        const double d = profile.duty(t);
        const double mu = d - 0.5;
        if (frame == Frame::z && forcing.kind == Forcing::Kind::inverter) {
            // Duty-weighted combination of the two mode vector fields.
            return d * (m.A_I * s + m.b_I) + (1.0 - d) * (m.A_II * s + m.b_II);
        }
        const Vec4 x = frame == Frame::z ? s - m.z_half : s;
        return a_of_mu(m, mu) * x + forcing.value(t, mu) * m.B;
    }
};

inline Vec4 rk4_step(const AveragedRhs& f, double t, const Vec4& x, double h) {
    const Vec4 k1 = f(t, x);
    const Vec4 k2 = f(t + 0.5 * h, x + (0.5 * h) * k1);
    const Vec4 k3 = f(t + 0.5 * h, x + (0.5 * h) * k2);
    const Vec4 k4 = f(t + h, x + h * k3);
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace detail

/// Averaged-model states at the requested (increasing) times, each interval
/// split into equal RK4 steps no longer than max_step.
inline std::vector<StateVector> averaged_at(const ModelMatrices& m, const DutyProfile& profile,
                                            const StateVector& x0, const std::vector<double>& times,
                                            double max_step, const Forcing& forcing = Forcing::inverter()) {
    profile.validate();
    if (!(max_step > 0.0)) throw Error(ErrorKind::invalid_input, "averaged_at: step must be positive");
    const detail::AveragedRhs rhs{m, profile, forcing, x0.frame};
    std::vector<StateVector> out;
    out.reserve(times.size());
    double t = 0.0;
    Vec4 x = x0.values;
    for (double target : times) {
        if (target < t) throw Error(ErrorKind::invalid_input, "averaged_at: times must be non-decreasing and >= 0");
        const double span = target - t;
        const auto n = static_cast<std::size_t>(std::ceil(span / max_step - 1e-9));
        const double h = n > 0 ? span / static_cast<double>(n) : 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const Vec4 next = detail::rk4_step(rhs, t + h * static_cast<double>(i), x, h);
            detail::check_finite_state(next, t + h * static_cast<double>(i));
            x = next;
        }
        t = target;
        out.push_back({x, x0.frame});
    }
    return out;
}

/// Classical fixed-step RK4 integration of the averaged model.
inline Trajectory simulate_averaged(const ModelMatrices& m, const DutyProfile& profile, const StateVector& x0,
                                    const SimConfig& cfg, const Forcing& forcing = Forcing::inverter()) {
    cfg.validate();
    profile.validate();
    if (!all_finite(x0.values)) throw Error(ErrorKind::invalid_input, "simulate_averaged: non-finite initial state");
    const double h0 = averaged_step(m, cfg.avg_step);
    const auto n = static_cast<std::size_t>(std::ceil(cfg.horizon / h0 - 1e-9));
    const double h = cfg.horizon / static_cast<double>(n);
    const detail::AveragedRhs rhs{m, profile, forcing, x0.frame};

    Trajectory traj;
    traj.samples.reserve(n / cfg.sample_stride + 2);
    auto emit = [&](double t, const Vec4& v) {
        TrajectorySample s;
        s.t = t;
        s.state = {v, x0.frame};
        s.input = profile.mu(t);
        s.energy = energy(m, s.state);
        if (cfg.ccm_check && ccm_violation(s.state, m.params)) {
            s.event = EventKind::ccm_violation;
            traj.events.push_back({t, EventKind::ccm_violation});
        }
        traj.samples.push_back(s);
    };

    Vec4 x = x0.values;
    emit(0.0, x);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = h * static_cast<double>(i);
        const Vec4 next = detail::rk4_step(rhs, t, x, h);
        detail::check_finite_state(next, t);
        x = next;
        const std::size_t step = i + 1;
        const double t_next = h * static_cast<double>(step);
        if (step % cfg.sample_stride == 0 || step == n) {
            emit(t_next, x);
        } else if (cfg.ccm_check && ccm_violation({x, x0.frame}, m.params)) {
            traj.events.push_back({t_next, EventKind::ccm_violation});
        }
    }
    return traj;
}

}  // namespace zsource
