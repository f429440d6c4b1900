#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "zsource/model.hpp"
#include "zsource/signals.hpp"

using namespace zsource;
using Catch::Approx;

constexpr double pi = std::numbers::pi;

TEST_CASE("duty_reference values", "[signals]") {
    CHECK(duty_reference(0.0, 0.5, 1.0) == 0.5);
    CHECK(duty_reference(pi / 2, 0.5, 1.0) == Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(duty_reference(3 * pi / 2, 0.5, 1.0) == Approx(0.6).epsilon(1e-15));
    REQUIRE_THROWS_AS(duty_reference(0.0, 1.0, 1.0), Error);
    REQUIRE_THROWS_AS(duty_reference(0.0, 1.2, 1.0), Error);
    REQUIRE_THROWS_AS(duty_reference(0.0, -0.1, 1.0), Error);
    try {
        duty_reference(0.0, 1.0, 1.0);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::invalid_modulation);
    }
}

TEST_CASE("duty_reference range and gain inversion", "[signals][property]") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> um(0.0, 0.999), ut(-100, 100), uw(0.01, 10);
    for (int trial = 0; trial < 1000; ++trial) {
        const double M = um(rng), t = ut(rng), w = uw(rng);
        const double d = duty_reference(t, M, w);
        CHECK(d >= (1 - M) / (2 - M) - 1e-15);
        CHECK(d <= (1 + M) / (2 + M) + 1e-15);
        CHECK(d > 0.0);
        CHECK(d < 1.0);
        CHECK(gain(d) == Approx(M * std::sin(w * t)).margin(1e-12));
    }
}

TEST_CASE("duty profile clamps and validates", "[signals]") {
    const auto c = DutyProfile::constant_duty(0.99, 0.05);
    CHECK(c.duty(3.0) == 0.95);
    CHECK(c.mu(3.0) == Approx(0.45));
    CHECK_FALSE(c.period().has_value());
    const auto s = DutyProfile::sinusoidal(0.5, 2.0);
    CHECK(*s.period() == Approx(pi));
    CHECK(s.duty(pi / 4) == Approx(1.0 / 3.0));
    REQUIRE_THROWS_AS(DutyProfile::constant_duty(1.0), Error);
    REQUIRE_THROWS_AS(DutyProfile::constant_duty(0.5, 0.0), Error);
    REQUIRE_THROWS_AS(DutyProfile::constant_duty(0.5, 0.6), Error);
    REQUIRE_THROWS_AS(DutyProfile::sinusoidal(1.0, 1.0), Error);
}

TEST_CASE("pwm_from_duty switch times", "[signals]") {
    const auto half = pwm_from_duty(DutyProfile::constant_duty(0.5), 1.0, 0.1, 20);
    REQUIRE(half.horizon() == 20);
    for (std::size_t k = 0; k < 20; ++k) CHECK(half.switch_times[k] == Approx(k + 0.5).epsilon(1e-15));

    const auto hi = pwm_from_duty(DutyProfile::constant_duty(0.95, 0.01), 1.0, 0.1, 10);
    for (std::size_t k = 0; k < 10; ++k) CHECK(hi.switch_times[k] == Approx(k + 0.9).epsilon(1e-15));

    const auto lo = pwm_from_duty(DutyProfile::constant_duty(0.02, 0.01), 1.0, 0.1, 10);
    for (std::size_t k = 0; k < 10; ++k) CHECK(lo.switch_times[k] == Approx(k + 0.1).epsilon(1e-15));

    REQUIRE_THROWS_AS(pwm_from_duty(DutyProfile::constant_duty(0.5), 1.0, 0.6, 10), Error);
    REQUIRE_THROWS_AS(pwm_from_duty(DutyProfile::constant_duty(0.5), 1.0, 0.1, 0), Error);
}

TEST_CASE("validate_pwm verdicts", "[signals]") {
    auto sig = pwm_from_duty(DutyProfile::sinusoidal(0.5, 0.3), 1.0, 0.1, 50);
    CHECK(validate_pwm(sig).passed);

    auto bad = sig;
    bad.switch_times[0] = bad.eps / 2;
    const auto v = validate_pwm(bad);
    CHECK_FALSE(v.passed);
    CHECK(v.violation == PwmVerdict::Violation::dwell_time);
    CHECK(v.period == 0);

    auto cls = sig;
    cls.T = 0.15;
    CHECK(validate_pwm(cls).violation == PwmVerdict::Violation::class_constraint);

    PwmSignal empty{1.0, 0.1, {}};
    CHECK(validate_pwm(empty).violation == PwmVerdict::Violation::empty);
}

TEST_CASE("generated signals are class members", "[signals][property]") {
    std::mt19937_64 rng(32);
    std::uniform_real_distribution<double> u01(0, 1);
    for (int trial = 0; trial < 200; ++trial) {
        const double T = 0.01 + 5 * u01(rng);
        const double eps = T * 0.5 * u01(rng) + 1e-9;
        const auto profile = u01(rng) < 0.5 ? DutyProfile::constant_duty(0.001 + 0.998 * u01(rng), 0.001)
                                            : DutyProfile::sinusoidal(0.999 * u01(rng), 10 * u01(rng), u01(rng));
        const auto sig = pwm_from_duty(profile, T, std::min(eps, T / 2), 30);
        const auto v = validate_pwm(sig);
        REQUIRE(v.passed);
        for (std::size_t k = 0; k < sig.horizon(); ++k) {
            CHECK(sig.mode_i_duration(k) >= sig.eps * (1 - 1e-12));
            CHECK(sig.mode_i_duration(k) <= (sig.T - sig.eps) * (1 + 1e-12));
            CHECK(sig.mode_ii_duration(k) >= sig.eps * (1 - 1e-12));
            CHECK(sig.mode_ii_duration(k) <= (sig.T - sig.eps) * (1 + 1e-12));
        }
    }
}

TEST_CASE("mu_at is right-continuous", "[signals]") {
    const auto sig = pwm_from_duty(DutyProfile::sinusoidal(0.5, 0.2), 1.0, 0.1, 10);
    for (std::size_t k = 0; k < sig.horizon(); ++k) {
        CHECK(mu_at(sig, sig.period_start(k)) == 0.5);
        CHECK(mu_at(sig, sig.switch_times[k]) == -0.5);
        CHECK(mu_at(sig, std::nextafter(sig.switch_times[k], 0.0)) == 0.5);
        CHECK(mu_at(sig, sig.period_start(k + 1) - sig.eps / 2) == -0.5);
    }
    REQUIRE_THROWS_AS(mu_at(sig, -1e-12), Error);
    REQUIRE_THROWS_AS(mu_at(sig, sig.end_time()), Error);
}
