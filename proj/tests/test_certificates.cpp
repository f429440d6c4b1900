#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "zsource/certificates.hpp"

using namespace zsource;
using Catch::Approx;

namespace {

constexpr double pi = std::numbers::pi;

CircuitParams random_params(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> lg(std::log(0.2), std::log(5.0));
    CircuitParams p;
    p.L1 = std::exp(lg(rng));
    p.L2 = std::exp(lg(rng));
    p.C1 = std::exp(lg(rng));
    p.C2 = std::exp(lg(rng));
    p.R = std::exp(lg(rng));
    p.Vin = std::exp(lg(rng));
    return p;
}

Vec4 random_vec(std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    return {n(rng), n(rng), n(rng), n(rng)};
}

}  // namespace

TEST_CASE("construct_H for unit parameters at eps = 0.1", "[certificates][H]") {
    const auto p = CircuitParams::unit();
    const auto h = construct_H(p, 0.1);
    CHECK(h.h13 == -1.0);
    CHECK(h.h23 == Approx(-9.9));
    CHECK(h.h14 == Approx(-4.45));
    CHECK(h24_lower_bound(p, 0.1, -1.0, -10.0) == Approx(57.4).epsilon(1e-14));
    const HMatrix with_h23_10{-1.0, -4.5, -10.0, 60.0};
    CHECK(check_H(p, 0.1, with_h23_10).passed());
    const auto f = check_H(p, 0.1, h);
    CHECK(f.passed());
    CHECK(f.h23_upper == Approx(-9.0));
    CHECK(h.h24 == Approx(1.1 * f.h24_lower));
}

TEST_CASE("construct_H at eps = 0.5", "[certificates][H]") {
    CircuitParams p;
    p.L2 = 2.0;
    p.C2 = 3.0;
    const auto h = construct_H(p, 0.5);
    const auto f = check_H(p, 0.5, h);
    CHECK(f.passed());
    CHECK(f.h23_upper == Approx(p.L2 / p.L1 * h.h13));
    // mu_bar = 0: the bound reduces to C2 h13 h23 / (-2 C1 h13).
    CHECK(f.h24_lower == Approx(p.C2 * h.h13 * h.h23 / (-h.h13 * 2.0 * p.C1)));
}

TEST_CASE("H has the block sparsity pattern", "[certificates][H][property]") {
    std::mt19937_64 rng(51);
    std::uniform_real_distribution<double> ue(0.001, 0.5);
    for (int trial = 0; trial < 200; ++trial) {
        const auto p = random_params(rng);
        const double eps = ue(rng);
        const auto h = construct_H(p, eps);
        CHECK(check_H(p, eps, h).passed());
        const Mat4 hm = h.matrix();
        CHECK(hm == hm.transpose());
        for (std::size_t i = 0; i < 2; ++i)
            for (std::size_t j = 0; j < 2; ++j) {
                CHECK(hm(i, j) == 0.0);
                CHECK(hm(i + 2, j + 2) == 0.0);
            }
    }
    REQUIRE_THROWS_AS(construct_H(CircuitParams::unit(), 0.0), Error);
    REQUIRE_THROWS_AS(construct_H(CircuitParams::unit(), 0.7), Error);
}

TEST_CASE("check_H reports each violated inequality", "[certificates][H]") {
    const auto p = CircuitParams::unit();
    auto h = construct_H(p, 0.1);
    h.h23 = -5.0;
    auto f = check_H(p, 0.1, h);
    CHECK_FALSE(f.h23_bound);
    CHECK_FALSE(f.h14_equality);
    h = construct_H(p, 0.1);
    h.h24 = 10.0;
    f = check_H(p, 0.1, h);
    CHECK(f.h23_bound);
    CHECK_FALSE(f.h24_bound);
}

TEST_CASE("determinant chain basic values", "[certificates][chain]") {
    const auto p = CircuitParams::unit();
    const auto h = construct_H(p, 0.1);
    CHECK(determinant_chain(p, h, 0.0).X1 == -1.0);
    CHECK(determinant_chain(p, h, -0.5).X1 == 0.0);
    CHECK_FALSE(determinant_chain(p, h, -0.5).negative_pattern());
    REQUIRE_THROWS_AS(determinant_chain(p, h, 0.6), Error);
}

TEST_CASE("determinant chain matches the projected Lyapunov matrix", "[certificates][chain][property]") {
    std::mt19937_64 rng(52);
    std::uniform_real_distribution<double> ue(0.01, 0.5);
    for (int trial = 0; trial < 30; ++trial) {
        const auto p = trial == 0 ? CircuitParams::unit() : random_params(rng);
        const double eps = trial == 0 ? 0.1 : ue(rng);
        const auto m = build(p);
        const auto h = construct_H(p, eps);
        const auto chk = determinant_chain_check(m, h, eps, 101);
        REQUIRE(chk.points.size() == 101);
        CHECK(chk.all_patterns);
        CHECK(chk.all_projections);
        CHECK(chk.all_agree);
        // Characteristic-polynomial oracle on the same projected matrices.
        for (std::size_t i = 0; i < chk.points.size(); i += 10) {
            const auto x = projected_lyapunov(a_of_mu(m, chk.points[i].mu), h.matrix());
            const auto ev = oracle::sym_eigenvalues_charpoly(x);
            CHECK(ev.back() < 0.0);
        }
    }
}

TEST_CASE("certify_averaged for unit parameters", "[certificates][averaged]") {
    const auto p = CircuitParams::unit();
    for (double eps : {0.05, 0.1, 0.25, 0.5}) {
        const auto c = certify_averaged(p, eps);
        CHECK(c.passed());
        CHECK(c.xi > 0.0);
        CHECK(c.ptilde_lambda_min > 0.0);
        CHECK(c.alpha > 0.0);
        CHECK(c.grid_lambda_max <= -c.alpha);
        CHECK(c.endpoint_lambda_max <= c.grid_lambda_max + 1e-15);
        // Independent check of the reported constants.
        const auto m = build(p);
        const auto pev = oracle::sym_eigenvalues_charpoly(c.Ptilde);
        CHECK(pev.front() == Approx(c.ptilde_lambda_min).epsilon(1e-8));
        for (int i = 0; i <= 100; ++i) {
            const double mu = -c.mu_bar + 2 * c.mu_bar * i / 100.0;
            const Mat4 a = a_of_mu(m, mu);
            const auto ev = oracle::sym_eigenvalues_charpoly(a.transpose() * c.Ptilde + c.Ptilde * a);
            CHECK(ev.back() <= -c.alpha * (1 - 1e-6));
        }
        CHECK(c.K >= 1.0);
        CHECK(c.lambda > 0.0);
        CHECK(c.G > 0.0);
    }
}

TEST_CASE("certify_averaged across random parameters", "[certificates][averaged][property]") {
    std::mt19937_64 rng(53);
    std::uniform_real_distribution<double> ue(0.05, 0.5);
    for (int trial = 0; trial < 25; ++trial) {
        const auto p = random_params(rng);
        const auto c = certify_averaged(p, ue(rng));
        CHECK(c.passed());
    }
}

TEST_CASE("averaged certificate bounds the Lyapunov derivative along trajectories", "[certificates][averaged]") {
    const auto p = CircuitParams::unit();
    const auto m = build(p);
    const auto c = certify_averaged(p, 0.1);
    const auto prof = DutyProfile::sinusoidal(0.7, 0.4, 0.0, 0.1);
    std::mt19937_64 rng(54);
    SimConfig cfg;
    cfg.horizon = 50;
    cfg.ccm_check = false;
    const auto traj = simulate_averaged(m, prof, StateVector{random_vec(rng), Frame::x}, cfg, Forcing::unforced());
    std::uniform_int_distribution<std::size_t> pick(0, traj.samples.size() - 1);
    for (int i = 0; i < 100; ++i) {
        const auto& s = traj.samples[pick(rng)];
        const Vec4& x = s.state.values;
        const Mat4 a = a_of_mu(m, prof.mu(s.t));
        const double vdot = quadratic_form(Mat4(a.transpose() * c.Ptilde + c.Ptilde * a), x);
        CHECK(vdot <= -c.alpha * dot(x, x) * (1 - 1e-9));
    }
}

TEST_CASE("averaged ISS bounds", "[certificates][averaged][iss]") {
    const auto p = CircuitParams::unit();
    const auto m = build(p);
    const auto c = certify_averaged(p, 0.1);
    std::mt19937_64 rng(55);
    const StateVector x0{random_vec(rng), Frame::x};
    const auto unforced =
        iss_bound_check(m, c, DutyProfile::sinusoidal(0.5, 0.3, 0.0, 0.1), Forcing::unforced(), x0, 60);
    CHECK(unforced.passed);
    CHECK(unforced.G == 0.0);
    const auto driven = iss_bound_check(m, c, DutyProfile::constant_duty(0.9, 0.1), Forcing::inverter(), x0, 60);
    CHECK(driven.passed);
    CHECK(driven.u_sup == Approx(0.4));
    CHECK(c.ultimate_bound() == Approx(c.G * 0.4));
    REQUIRE_THROWS_AS(
        iss_bound_check(m, c, DutyProfile::constant_duty(0.9, 0.05), Forcing::inverter(), x0, 10), Error);
}

TEST_CASE("monodromy_check below resonance", "[certificates][monodromy]") {
    const auto p = CircuitParams::unit();
    const auto r = monodromy_check(p, 1.0, 1.0, 0.1);
    CHECK(r.contraction_applies);
    CHECK(r.contraction_holds);
    CHECK(r.passed());
    CHECK(r.rho_M0 < 1.0);
    CHECK(r.rho_M0 == Approx(0.7236025683621624).epsilon(1e-10));
    CHECK(r.energy_change_eps.definite == Definiteness::negative_definite);
    CHECK_FALSE(r.unit_radius_applies);

    const auto r0 = monodromy_check(p, 1.0, 1.0, 0.0);
    CHECK_FALSE(r0.contraction_applies);
    CHECK(r0.rho_M0 < 1.0);
    CHECK(r0.energy_change_0.definite == Definiteness::semidefinite_boundary);
    CHECK(r0.energy_change_0.lambda_max <= 1e-12);
}

TEST_CASE("monodromy_check at resonance multiples", "[certificates][monodromy]") {
    std::mt19937_64 rng(56);
    for (int trial = 0; trial < 10; ++trial) {
        const auto p = trial == 0 ? CircuitParams::unit() : random_params(rng);
        const double w = p.resonance_half_period();
        for (long k : {1L, 2L}) {
            for (double eps : {0.0, 0.1, 1.0}) {
                const auto r = monodromy_check(p, 0.7 * w, static_cast<double>(k) * w, eps);
                REQUIRE(r.resonance_multiple.has_value());
                CHECK(*r.resonance_multiple == k);
                CHECK(r.unit_radius_holds);
                CHECK(r.e1_residual <= 1e-10);
                CHECK(r.passed());
            }
        }
    }
}

TEST_CASE("rho(M0) approaches one as t_II nears the resonance", "[certificates][monodromy][property]") {
    const auto p = CircuitParams::unit();
    double prev = 0.0;
    for (double f : {0.9, 0.95, 0.99, 0.999, 0.9999}) {
        const double rho = monodromy_check(p, 1.0, f * pi, 0.1).rho_M0;
        CHECK(rho < 1.0);
        CHECK(rho > prev);
        prev = rho;
    }
    CHECK(prev > 0.999);
}

TEST_CASE("monodromy_check rejects invalid durations", "[certificates][monodromy][error]") {
    const auto p = CircuitParams::unit();
    REQUIRE_THROWS_AS(monodromy_check(p, 0.0, 1.0, 0.1), Error);
    REQUIRE_THROWS_AS(monodromy_check(p, 1.0, -1.0, 0.1), Error);
    REQUIRE_THROWS_AS(monodromy_check(p, 1.0, 1.0, -0.1), Error);
}

TEST_CASE("certify_switched constants", "[certificates][switched]") {
    CircuitParams p;
    p.L1 = 0.8;
    p.L2 = 1.7;
    p.C1 = 1.2;
    p.C2 = 0.6;
    const double T = 0.8 * p.resonance_half_period();
    const auto c = certify_switched(p, T, 0.1 * T);
    CHECK(c.kappa1 == Approx(0.3));
    CHECK(c.kappa2 == Approx(0.85));
    CHECK(c.kappa3 > 0.0);
    CHECK(c.r > 0.0);
    CHECK(c.r == Approx(-std::log1p(-c.kappa3 / c.kappa2) / T).epsilon(1e-12));
    CHECK(c.K == Approx(std::sqrt(c.kappa2 / c.kappa1 * std::exp(c.r * (0.05 * T + T)))).epsilon(1e-14));
    CHECK(c.lambda == Approx(c.r / 2));
    CHECK(std::abs(c.kappa3 - c.kappa3_previous) <= 1e-6 * c.kappa3);
    CHECK(c.phi_bar >= 1.0);
    CHECK(c.G > 0.0);
    CHECK(c.G_emp > 0.0);
    CHECK(c.G >= c.G_emp);
    CHECK(c.passed());
}

TEST_CASE("kappa3 is a family-wide minimum", "[certificates][switched]") {
    const auto p = CircuitParams::unit();
    const double T = 3.0, eps = 0.3;
    const auto c = certify_switched(p, T, eps);
    CHECK(c.kappa3 == Approx(2.72979e-07).epsilon(1e-4));
    const auto m = build(p);
    std::mt19937_64 rng(57);
    std::uniform_real_distribution<double> u(eps, T - eps);
    for (int i = 0; i < 200; ++i) {
        const double t_ii = u(rng);
        const Mat4 mm = monodromy(m, T - t_ii - eps / 2, t_ii, eps / 2);
        CHECK(sym_eigenvalues(Mat4(m.P - mm.transpose() * m.P * mm)).front() >= c.kappa3 * (1 - 1e-6));
    }
}

TEST_CASE("certify_switched preconditions", "[certificates][switched][error]") {
    const auto p = CircuitParams::unit();
    try {
        certify_switched(p, 10.0, 1.0);
        FAIL("expected a precondition error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::precondition);
        CHECK(std::string(e.what()).find("pi*sqrt(L1*C1)") != std::string::npos);
    }
    REQUIRE_THROWS_AS(certify_switched(p, 1.0, 0.6), Error);
    REQUIRE_THROWS_AS(certify_switched(p, pi, 0.1), Error);
    CertifySwitchedOptions opt;
    opt.grid_n = 10;
    REQUIRE_THROWS_AS(certify_switched(p, 1.0, 0.1, opt), Error);
}

TEST_CASE("certify_switched is reproducible", "[certificates][switched]") {
    const auto p = CircuitParams::unit();
    const auto a = certify_switched(p, 2.0, 0.2);
    const auto b = certify_switched(p, 2.0, 0.2);
    CHECK(a.kappa3 == b.kappa3);
    CHECK(a.G == b.G);
    CHECK(a.G_emp == b.G_emp);
    CHECK(a.K_iss == b.K_iss);
}

TEST_CASE("switched decay and ISS bounds hold along simulations", "[certificates][switched][iss]") {
    std::mt19937_64 rng(58);
    CircuitParams p;
    p.L1 = 0.5;
    p.C1 = 2.0;
    p.R = 0.7;
    const auto m = build(p);
    const double T = 0.7 * p.resonance_half_period(), eps = 0.15 * T;
    const auto c = certify_switched(p, T, eps);
    REQUIRE(c.passed());
    for (int s = 0; s < 5; ++s) {
        const auto sig = detail::random_class_signal(rng, T, eps, 30);
        for (int i = 0; i < 5; ++i) {
            const StateVector x0{random_vec(rng), Frame::x};
            const auto v = iss_bound_check(m, c, sig, Forcing::unforced(), x0, {}, T / 5);
            CHECK(v.passed);
            CHECK(v.samples_checked > 60);
            const auto w = iss_bound_check(m, c, sig, Forcing::inverter(), to_z(x0, p));
            CHECK(w.passed);
            CHECK(w.u_sup == 0.5);
        }
    }
    CHECK(c.ultimate_bound() == Approx(c.G / 2));
    const auto bad = pwm_from_duty(DutyProfile::constant_duty(0.5), T * 0.9, eps, 5);
    REQUIRE_THROWS_AS(iss_bound_check(m, c, bad, Forcing::unforced(), StateVector{}), Error);
}
