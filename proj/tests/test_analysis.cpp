#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "zsource/analysis.hpp"
#include "zsource/certificates.hpp"

using namespace zsource;
using Catch::Approx;

namespace {

constexpr double pi = std::numbers::pi;

StateVector random_state(std::mt19937_64& rng, Frame f = Frame::x) {
    std::normal_distribution<double> n(0.0, 1.0);
    return {{n(rng), n(rng), n(rng), n(rng)}, f};
}

// Trapezoidal mean of v_C2 over a trajectory.
double mean_output(const Trajectory& tr) {
    double area = 0.0;
    for (std::size_t i = 1; i < tr.samples.size(); ++i) {
        const auto& a = tr.samples[i - 1];
        const auto& b = tr.samples[i];
        area += 0.5 * (b.t - a.t) * (a.state.v_C2() + b.state.v_C2());
    }
    return area / (tr.samples.back().t - tr.samples.front().t);
}

}  // namespace

TEST_CASE("fit_decay on synthetic exponentials", "[analysis][fit]") {
    std::vector<double> t, n;
    for (int i = 0; i <= 400; ++i) {
        t.push_back(0.1 * i);
        n.push_back(3.0 * std::exp(-0.7 * t.back()));
    }
    const auto f = fit_decay(t, n);
    CHECK(f.lambda_fit == Approx(0.7).epsilon(1e-10));
    CHECK(f.residual < 1e-10);
    CHECK(f.t_start >= 1.0 / 0.7 - 0.1);
    CHECK(n[0] * 1e3 * std::numeric_limits<double>::epsilon() <= 3.0 * std::exp(-0.7 * f.t_end));
    CHECK(f.decaying());

    const auto z = fit_decay({0, 1, 2}, {0, 0, 0});
    CHECK(z.exact_convergence);
    CHECK(z.decaying());
    REQUIRE_THROWS_AS(fit_decay({0, 1}, {1}), Error);
}

TEST_CASE("identical initial conditions converge exactly", "[analysis][fit]") {
    const auto m = build(CircuitParams::unit());
    std::mt19937_64 rng(71);
    const auto x0 = random_state(rng);
    const auto f = trajectory_difference(m, DutyProfile::sinusoidal(0.5, 0.2), x0, x0, 20.0);
    CHECK(f.exact_convergence);
    const auto sig = pwm_from_duty(DutyProfile::sinusoidal(0.5, 0.2), 1.0, 0.1, 20);
    CHECK(trajectory_difference(m, sig, x0, x0, 20.0).exact_convergence);
}

TEST_CASE("trajectory differences decay", "[analysis][fit][property]") {
    const auto m = build(CircuitParams::unit());
    std::mt19937_64 rng(72);
    const auto profile = DutyProfile::sinusoidal(0.5, 0.2);
    const auto sig = pwm_from_duty(profile, 1.0, 0.1, 300);
    for (int trial = 0; trial < 4; ++trial) {
        const auto x0 = random_state(rng), y0 = random_state(rng);
        const auto fa = trajectory_difference(m, profile, x0, y0, 300.0);
        CHECK(fa.lambda_fit > 0.0);
        CHECK(fa.points > 100);
        const auto fs = trajectory_difference(m, sig, x0, y0, 300.0);
        CHECK(fs.lambda_fit > 0.0);
        CHECK(fs.points > 100);
        // The slowest mode of A(0) sets the asymptotic rate.
        CHECK(fa.lambda_fit == Approx(fs.lambda_fit).epsilon(0.05));
    }
}

TEST_CASE("trajectory_gap of identical runs is zero", "[analysis][fit]") {
    const auto m = build(CircuitParams::unit());
    std::mt19937_64 rng(73);
    SimConfig cfg;
    cfg.horizon = 5.0;
    const auto x0 = random_state(rng);
    const auto a = simulate_averaged(m, DutyProfile::constant_duty(0.4), x0, cfg);
    const auto b = simulate_averaged(m, DutyProfile::constant_duty(0.4), x0, cfg);
    CHECK(trajectory_gap(a, b, m.params) == 0.0);
    const auto c = simulate_averaged(m, DutyProfile::constant_duty(0.4), random_state(rng), cfg);
    CHECK(trajectory_gap(a, c, m.params) > 0.0);
}

TEST_CASE("averaged orbit under constant duty is the equilibrium", "[analysis][orbit]") {
    const auto p = CircuitParams::unit();
    const auto m = build(p);
    for (double D : {0.2, 0.4, 0.5, 0.6}) {
        const auto orbit = periodic_orbit(m, DutyProfile::constant_duty(D), 5.0);
        const auto eq = to_x(steady_state(p, D), p);
        CHECK(max_abs(orbit.x_star.values - eq.values) <= 1e-9);
        CHECK(orbit.residual <= 1e-9);
        CHECK(orbit.rho < 1.0);
    }
}

TEST_CASE("switched orbit at half duty has zero mean output", "[analysis][orbit]") {
    const auto m = build(CircuitParams::unit());
    const auto sig = pwm_from_duty(DutyProfile::constant_duty(0.5), 0.125, 0.0125, 1);
    const auto orbit = periodic_orbit(m, sig, 0.125 / 4000);
    CHECK(orbit.residual <= 1e-9);
    CHECK(orbit.return_error <= 1e-8);
    CHECK(std::abs(mean_output(orbit.orbit)) <= 1e-6);

    // The ripple correction to the mean is fourth order in T.
    std::vector<double> means;
    for (double T : {0.5, 0.25, 0.125}) {
        const auto o = periodic_orbit(m, pwm_from_duty(DutyProfile::constant_duty(0.5), T, 0.1 * T, 1), T / 4000);
        means.push_back(std::abs(mean_output(o.orbit)));
    }
    CHECK(means[0] / means[1] == Approx(16.0).epsilon(0.05));
    CHECK(means[1] / means[2] == Approx(16.0).epsilon(0.05));
}

TEST_CASE("modulated orbits return to their fixed point", "[analysis][orbit]") {
    const auto m = build(CircuitParams::unit());
    const double omega = 2 * pi / 20.0;
    const auto profile = DutyProfile::sinusoidal(0.5, omega);
    const auto sig = pwm_from_duty(profile, 0.2, 0.02, 100);
    const auto sw = periodic_orbit(m, sig);
    CHECK(sw.residual <= 1e-9);
    CHECK(sw.return_error <= 1e-8);
    CHECK(sw.period == Approx(20.0));

    const auto av = periodic_orbit(m, profile, 20.0);
    CHECK(av.residual <= 1e-9);
    CHECK(av.return_error <= 1e-8);
    CHECK(to_x(av.orbit.samples.back().state, m.params).values[3] ==
          Approx(av.x_star.values[3]).margin(1e-8));
}

TEST_CASE("periodic_orbit residual is small whenever the map contracts", "[analysis][orbit][property]") {
    std::mt19937_64 rng(74);
    std::uniform_real_distribution<double> u01(0, 1);
    for (int trial = 0; trial < 10; ++trial) {
        CircuitParams p;
        p.L1 = 0.5 + u01(rng);
        p.L2 = 0.5 + u01(rng);
        p.C1 = 0.5 + u01(rng);
        p.C2 = 0.5 + u01(rng);
        p.R = 0.5 + u01(rng);
        const auto m = build(p);
        const double T = 0.5 * p.resonance_half_period();
        const auto sig = pwm_from_duty(DutyProfile::sinusoidal(0.8 * u01(rng), 0.3), T, 0.1 * T, 10);
        const auto orbit = periodic_orbit(m, sig);
        CHECK(orbit.rho <= 1.0 - 1e-6);
        CHECK(orbit.residual <= 1e-9);
    }
}

TEST_CASE("periodic_orbit rejects non-contracting maps", "[analysis][orbit][error]") {
    CircuitParams p;
    const auto m = build(p);
    // Mode II for exactly the resonance leaves the e1 direction undamped.
    const double t = p.resonance_half_period();
    PwmSignal sig{t + 0.05, 0.05, {0.05}};
    try {
        periodic_orbit(m, sig);
        FAIL("expected no_contraction");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::no_contraction);
    }
}

TEST_CASE("inverter demo tracks the reference", "[analysis][demo]") {
    const auto p = CircuitParams::unit();
    const auto d = inverter_demo(p, DemoConfig{});
    const auto& r = d.report;
    CHECK(r.settled);
    CHECK(r.orbit_reference);
    CHECK(r.ccm_violations == 0);
    CHECK(r.rms_error_rel <= 0.05);
    CHECK(r.fundamental_amplitude == Approx(0.5).epsilon(0.01));
    CHECK(std::abs(r.fundamental_phase) < 0.1);
    CHECK(r.window_end - r.window_start == Approx(200 * pi));
    CHECK(r.window_samples == 16000);
}

TEST_CASE("inverter demo with zero modulation holds zero output", "[analysis][demo]") {
    DemoConfig cfg;
    cfg.M = 0.0;
    const auto r = inverter_demo(CircuitParams::unit(), cfg).report;
    CHECK(r.rms_error_rel <= 1e-2);
    CHECK(r.fundamental_amplitude < 1e-3);
}

TEST_CASE("faster modulation degrades tracking", "[analysis][demo][property]") {
    const auto p = CircuitParams::unit();
    const double w0 = 2 * pi / (200 * pi);
    std::vector<double> errors, amp_gap;
    for (double scale : {10.0, 3.0, 1.0}) {
        DemoConfig cfg;
        cfg.omega = scale * w0;
        const auto r = inverter_demo(p, cfg).report;
        errors.push_back(r.rms_error_rel);
        amp_gap.push_back(std::abs(r.fundamental_amplitude - p.Vin * cfg.M));
    }
    CHECK(errors[0] > errors[1]);
    CHECK(errors[1] > errors[2]);
    CHECK(amp_gap[0] > amp_gap[1]);
    CHECK(amp_gap[1] > amp_gap[2]);
}

TEST_CASE("inverter demo input validation", "[analysis][demo][error]") {
    const auto p = CircuitParams::unit();
    DemoConfig cfg;
    cfg.M = 1.0;
    REQUIRE_THROWS_AS(inverter_demo(p, cfg), Error);
    cfg.M = 0.5;
    cfg.horizon_periods = 1.0;
    REQUIRE_THROWS_AS(inverter_demo(p, cfg), Error);
}

TEST_CASE("averaging sweep gap shrinks linearly", "[analysis][sweep]") {
    const auto m = build(CircuitParams::unit());
    const double T0 = pi / 10;
    const auto rows = averaging_sweep(m, DutyProfile::constant_duty(0.5), StateVector{}, {T0, T0 / 2, T0 / 4, T0 / 8});
    REQUIRE(rows.size() == 4);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const double ratio = rows[i].gap / rows[i - 1].gap;
        CHECK(ratio >= 0.3);
        CHECK(ratio <= 0.7);
    }
    CHECK(rows.back().gap / rows.front().gap <= 0.25);
    REQUIRE_THROWS_AS(averaging_sweep(m, DutyProfile::constant_duty(0.5), StateVector{}, {T0, T0}), Error);
    REQUIRE_THROWS_AS(averaging_sweep(m, DutyProfile::constant_duty(0.5), StateVector{}, {}), Error);
}

TEST_CASE("differences respect the switched certificate bound", "[analysis][certificates][property]") {
    std::mt19937_64 rng(75);
    CircuitParams p;
    p.L1 = 0.5;
    p.C1 = 2.0;
    p.R = 0.7;
    const auto m = build(p);
    const double T = 0.7 * p.resonance_half_period(), eps = 0.15 * T;
    const auto c = certify_switched(p, T, eps);
    REQUIRE(c.passed());
    for (int trial = 0; trial < 5; ++trial) {
        const auto sig = detail::random_class_signal(rng, T, eps, 30);
        SimConfig cfg;
        cfg.horizon = sig.end_time();
        cfg.ccm_check = false;
        const auto a = simulate_switched(m, sig, random_state(rng, Frame::z), cfg);
        const auto b = simulate_switched(m, sig, random_state(rng, Frame::z), cfg);
        std::vector<double> t, d;
        for (std::size_t i = 0; i < a.samples.size(); ++i) {
            const double k = a.samples[i].t / T;
            if (std::abs(k - std::round(k)) > 1e-9 * std::max(1.0, k)) continue;
            t.push_back(a.samples[i].t);
            d.push_back(norm(a.samples[i].state.values - b.samples[i].state.values));
        }
        REQUIRE(t.size() == 31);
        for (std::size_t i = 0; i < t.size(); ++i)
            for (std::size_t j = i + 1; j < t.size(); ++j)
                CHECK(d[j] <= d[i] * c.K * std::exp(-c.lambda * (t[j] - t[i])) * (1 + 1e-9));
    }
}

TEST_CASE("differences respect the averaged certificate bound", "[analysis][certificates][property]") {
    std::mt19937_64 rng(76);
    const auto p = CircuitParams::unit();
    const auto m = build(p);
    const auto c = certify_averaged(p, 0.25);
    REQUIRE(c.passed());
    const auto profile = DutyProfile::sinusoidal(0.5, 0.2, 0.0, 0.25);
    for (int trial = 0; trial < 3; ++trial) {
        SimConfig cfg;
        cfg.horizon = 60.0;
        cfg.sample_stride = 50;
        cfg.ccm_check = false;
        const auto a = simulate_averaged(m, profile, random_state(rng), cfg);
        const auto b = simulate_averaged(m, profile, random_state(rng), cfg);
        for (std::size_t i = 0; i < a.samples.size(); ++i)
            for (std::size_t j = i + 1; j < a.samples.size(); ++j) {
                const double di = norm(a.samples[i].state.values - b.samples[i].state.values);
                const double dj = norm(a.samples[j].state.values - b.samples[j].state.values);
                CHECK(dj <= di * c.K * std::exp(-c.lambda * (a.samples[j].t - a.samples[i].t)) * (1 + 1e-6));
            }
    }
}
