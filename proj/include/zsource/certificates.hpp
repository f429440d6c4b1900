#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "zsource/error.hpp"
#include "zsource/model.hpp"
#include "zsource/numerics.hpp"
#include "zsource/signals.hpp"
#include "zsource/sim.hpp"

namespace zsource {

// ---------------------------------------------------------------------------
// Averaged model: P~ = P + xi H
// ---------------------------------------------------------------------------

/// Off-diagonal block entries of H; the inductor and capacitor blocks are zero.
struct HMatrix {
    double h13 = 0.0;
    double h14 = 0.0;
    double h23 = 0.0;
    double h24 = 0.0;

    Mat4 matrix() const {
        Mat4 h;
        h(0, 2) = h(2, 0) = h13;
        h(0, 3) = h(3, 0) = h14;
        h(1, 2) = h(2, 1) = h23;
        h(1, 3) = h(3, 1) = h24;
        return h;
    }
};

struct HFeasibility {
    bool h13_negative = false;
    bool h14_equality = false;
    bool h23_bound = false;
    bool h24_bound = false;
    double h14_required = 0.0;
    double h23_upper = 0.0;  // h23 must lie strictly below
    double h24_lower = 0.0;  // h24 must lie strictly above
    double h14_residual = 0.0;

    bool passed() const { return h13_negative && h14_equality && h23_bound && h24_bound; }
};

inline void check_eps_duty(double eps) {
    if (!(eps > 0.0 && eps <= 0.5))
        throw Error(ErrorKind::out_of_range, "duty margin eps must lie in (0, 0.5]");
}

/// Lower bound on h24 for given h13, h23.
inline double h24_lower_bound(const CircuitParams& p, double eps, double h13, double h23) {
    const double mu_bar = 0.5 - eps;
    const double d = h23 - h13;
    return p.C2 * (d * d * mu_bar * mu_bar + h13 * h23) / (-h13 * 4.0 * eps * p.C1);
}

inline HFeasibility check_H(const CircuitParams& p, double eps, const HMatrix& h) {
    check_eps_duty(eps);
    HFeasibility f;
    f.h13_negative = h.h13 < 0.0;
    f.h14_required = -p.C2 * (h.h13 - h.h23) / (2.0 * p.C1);
    f.h14_residual = std::abs(h.h14 - f.h14_required);
    f.h14_equality = f.h14_residual <= 1e-12 * std::max(1.0, std::abs(f.h14_required));
    f.h23_upper = (p.L2 / p.L1) * ((1.0 - eps) / eps) * h.h13;
    f.h23_bound = h.h23 < f.h23_upper;
    f.h24_lower = h24_lower_bound(p, eps, h.h13, h.h23);
    f.h24_bound = h.h24 > f.h24_lower;
    return f;
}

/// Concrete H with h13 = -1 and a 1.1 margin on both strict inequalities.
inline HMatrix construct_H(const CircuitParams& p, double eps) {
    p.validate();
    check_eps_duty(eps);
    HMatrix h;
    h.h13 = -1.0;
    h.h23 = 1.1 * (p.L2 / p.L1) * ((1.0 - eps) / eps) * h.h13;
    h.h14 = -p.C2 * (h.h13 - h.h23) / (2.0 * p.C1);
    h.h24 = 1.1 * h24_lower_bound(p, eps, h.h13, h.h23);
    return h;
}

struct ChainValues {
    double X1 = 0.0;
    double X2 = 0.0;
    double X3 = 0.0;

    /// Negative-definite pattern of a 3x3 matrix: X1 < 0, X2 > 0, X3 < 0.
    bool negative_pattern() const { return X1 < 0.0 && X2 > 0.0 && X3 < 0.0; }
};

/**
 * Closed-form leading principal minors of S_Q'(A'H + HA)S_Q. The closed forms
 * are the minors at A(-mu); on the symmetric set U the two families coincide.
 */
inline ChainValues determinant_chain(const CircuitParams& p, const HMatrix& h, double mu) {
    if (!(std::abs(mu) <= 0.5)) throw Error(ErrorKind::out_of_range, "determinant_chain: |mu| must not exceed 0.5");
    ChainValues out;
    out.X1 = h.h13 * (2.0 * mu + 1.0) / p.C1;
    const double d = h.h13 - h.h23;
    const double b = (d * d * mu * mu + h.h13 * h.h23) / p.C1;
    out.X2 = -b / p.C1 - 2.0 * out.X1 * h.h24 / p.C2;
    const double c = (p.L2 * h.h13 * (2.0 * mu + 1.0) + p.L1 * h.h23 * (2.0 * mu - 1.0)) / (p.L1 * p.L2);
    out.X3 = -c * out.X2;
    return out;
}

/// S_Q'(A'H + HA)S_Q with S_Q = [e1, e2, e3].
inline Mat<3> projected_lyapunov(const Mat4& a, const Mat4& h) {
    const Mat4 full = a.transpose() * h + h * a;
    Mat<3> x;
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) x(i, j) = full(i, j);
    return x;
}

inline ChainValues leading_minors(const Mat<3>& x) {
    ChainValues m;
    m.X1 = x(0, 0);
    m.X2 = x(0, 0) * x(1, 1) - x(0, 1) * x(1, 0);
    m.X3 = x(0, 0) * (x(1, 1) * x(2, 2) - x(1, 2) * x(2, 1)) - x(0, 1) * (x(1, 0) * x(2, 2) - x(1, 2) * x(2, 0)) +
           x(0, 2) * (x(1, 0) * x(2, 1) - x(1, 1) * x(2, 0));
    return m;
}

struct ChainPoint {
    double mu = 0.0;
    ChainValues chain;
    ChainValues minors_mirrored;  // numeric minors of X(A(-mu))
    double projection_lambda_max = 0.0;  // of X(A(mu))
    bool pattern = false;
    bool projection_negative = false;
    bool minors_agree = false;
};

struct ChainCheck {
    std::vector<ChainPoint> points;
    bool all_patterns = true;
    bool all_projections = true;
    bool all_agree = true;

    bool passed() const { return all_patterns && all_projections && all_agree; }
};

inline ChainCheck determinant_chain_check(const ModelMatrices& m, const HMatrix& h, double eps,
                                          std::size_t grid = 101) {
    check_eps_duty(eps);
    if (grid < 2) grid = 2;
    const double mu_bar = 0.5 - eps;
    const Mat4 hm = h.matrix();
    ChainCheck out;
    for (std::size_t i = 0; i < grid; ++i) {
        ChainPoint pt;
        pt.mu = grid == 1 ? 0.0 : -mu_bar + 2.0 * mu_bar * static_cast<double>(i) / static_cast<double>(grid - 1);
        pt.chain = determinant_chain(m.params, h, pt.mu);
        pt.pattern = pt.chain.negative_pattern();
        const Mat<3> x = projected_lyapunov(a_of_mu(m, pt.mu), hm);
        const auto verdict = sym_definiteness(x, 1e-12);
        pt.projection_lambda_max = verdict.lambda_max;
        pt.projection_negative = verdict.definite == Definiteness::negative_definite;
        pt.minors_mirrored = leading_minors(projected_lyapunov(a_of_mu(m, -pt.mu), hm));
        auto close = [](double a, double b) {
            return std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)});
        };
        pt.minors_agree = close(pt.chain.X1, pt.minors_mirrored.X1) && close(pt.chain.X2, pt.minors_mirrored.X2) &&
                          close(pt.chain.X3, pt.minors_mirrored.X3) && pt.pattern == pt.projection_negative;
        out.all_patterns = out.all_patterns && pt.pattern;
        out.all_projections = out.all_projections && pt.projection_negative;
        out.all_agree = out.all_agree && pt.minors_agree;
        out.points.push_back(pt);
    }
    return out;
}

struct AveragedCertificate {
    double eps_duty = 0.0;
    double mu_bar = 0.0;
    HMatrix H;
    HFeasibility h_check;
    ChainCheck chain;
    double xi = 0.0;
    int xi_steps = 0;
    Mat4 Ptilde;
    double ptilde_lambda_min = 0.0;
    double ptilde_lambda_max = 0.0;
    double endpoint_lambda_max = 0.0;  // max over mu = +-mu_bar
    double grid_lambda_max = 0.0;      // max over the mu grid
    std::size_t grid_points = 0;
    double alpha = 0.0;
    // ISS constants: ||x(t)|| <= K ||x0|| e^{-lambda t} + G sup|u|
    double theta = 0.5;
    double norm_PtB = 0.0;
    double K = 0.0;
    double lambda = 0.0;
    double G = 0.0;

    bool ptilde_positive() const { return ptilde_lambda_min > 0.0; }
    bool decrease_holds() const { return alpha > 0.0 && grid_lambda_max <= -alpha; }
    bool passed() const { return h_check.passed() && chain.passed() && ptilde_positive() && decrease_holds(); }
    /// Ultimate bound for the inverter input u = mu, |mu| <= mu_bar.
    double ultimate_bound() const { return G * mu_bar; }
};

namespace detail {

inline bool xi_passes(const ModelMatrices& m, const Mat4& h, double mu_bar, double xi) {
    const Mat4 pt = m.P + xi * h;
    if (sym_definiteness(pt, 1e-12).definite != Definiteness::positive_definite) return false;
    for (double mu : {-mu_bar, mu_bar}) {
        const Mat4 a = a_of_mu(m, mu);
        if (sym_eigenvalues(a.transpose() * pt + pt * a).back() >= 0.0) return false;
    }
    return true;
}

}  // namespace detail

/**
 * Searches xi = 1, 1/2, 1/4, ... for a P~ = P + xi H that is positive definite
 * with A(+-mu_bar)'P~ + P~A(+-mu_bar) < 0, refines once between the passing
 * value and its failing double, and re-checks on a mu grid.
 */
inline AveragedCertificate certify_averaged(const CircuitParams& p, double eps, std::size_t grid = 101,
                                            double theta = 0.5) {
    const auto m = build(p);
    check_eps_duty(eps);
    if (!(theta > 0.0 && theta < 1.0)) throw Error(ErrorKind::out_of_range, "certify_averaged: theta must lie in (0, 1)");
    AveragedCertificate c;
    c.eps_duty = eps;
    c.mu_bar = 0.5 - eps;
    c.H = construct_H(p, eps);
    c.h_check = check_H(p, eps, c.H);
    c.chain = determinant_chain_check(m, c.H, eps, grid);
    const Mat4 h = c.H.matrix();

    double xi = 1.0;
    bool found = false;
    for (int step = 0; step <= 60; ++step, xi *= 0.5) {
        c.xi_steps = step + 1;
        if (detail::xi_passes(m, h, c.mu_bar, xi)) {
            found = true;
            break;
        }
    }
    if (!found)
        throw Error(ErrorKind::certificate_not_found, "certify_averaged: no admissible xi found after 60 halvings");
    if (c.xi_steps > 1 && detail::xi_passes(m, h, c.mu_bar, 1.5 * xi)) xi *= 1.5;
    c.xi = xi;
    c.Ptilde = m.P + xi * h;
    const auto pev = sym_eigenvalues(c.Ptilde);
    c.ptilde_lambda_min = pev.front();
    c.ptilde_lambda_max = pev.back();

    auto lmax_at = [&](double mu) {
        const Mat4 a = a_of_mu(m, mu);
        return sym_eigenvalues(a.transpose() * c.Ptilde + c.Ptilde * a).back();
    };
    c.endpoint_lambda_max = std::max(lmax_at(-c.mu_bar), lmax_at(c.mu_bar));
    c.grid_points = std::max<std::size_t>(grid, 2);
    c.grid_lambda_max = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < c.grid_points; ++i) {
        const double mu = -c.mu_bar + 2.0 * c.mu_bar * static_cast<double>(i) / static_cast<double>(c.grid_points - 1);
        c.grid_lambda_max = std::max(c.grid_lambda_max, lmax_at(mu));
    }
    c.alpha = -c.grid_lambda_max;

    c.theta = theta;
    c.norm_PtB = norm(c.Ptilde * m.B);
    if (c.alpha > 0.0 && c.ptilde_lambda_min > 0.0) {
        c.K = std::sqrt(c.ptilde_lambda_max / c.ptilde_lambda_min);
        c.lambda = (1.0 - theta) * c.alpha / (2.0 * c.ptilde_lambda_max);
        c.G = c.K * 2.0 * c.norm_PtB / (theta * c.alpha);
    }
    return c;
}

// ---------------------------------------------------------------------------
// Switched model: monodromy tests and the dwell-time certificate
// ---------------------------------------------------------------------------

/// M = e^{A_I tail} e^{A_II t_II} e^{A_I t_I}.
inline Mat4 monodromy(const ModelMatrices& m, double t_i, double t_ii, double tail) {
    return expm(m.A_I, tail) * expm(m.A_II, t_ii) * expm(m.A_I, t_i);
}

struct MonodromyReport {
    double t_I = 0.0;
    double t_II = 0.0;
    double eps = 0.0;
    double resonance_half_period = 0.0;
    Mat4 M0;
    Mat4 M_eps;
    double rho_M0 = 0.0;
    double rho_M_eps = 0.0;
    SymVerdict energy_change_0;    // M0'PM0 - P
    SymVerdict energy_change_eps;  // M_eps'PM_eps - P
    bool below_resonance = false;  // t_II < pi sqrt(L1 C1)
    std::optional<long> resonance_multiple;  // k when t_II = k pi sqrt(L1 C1)
    bool contraction_applies = false;
    bool contraction_holds = false;  // rho(M0) < 1 and M_eps'PM_eps - P < 0
    bool unit_radius_applies = false;
    bool unit_radius_holds = false;  // |rho(M_eps) - 1| <= 1e-8
    double e1_residual = 0.0;        // ||M_eps e1 - (-1)^k e1||_inf

    bool passed() const {
        return (!contraction_applies || contraction_holds) && (!unit_radius_applies || unit_radius_holds);
    }
};

inline MonodromyReport monodromy_check(const CircuitParams& p, double t_i, double t_ii, double eps, double rel_tol = 1e-12) {
    if (!(t_i > 0.0 && t_ii > 0.0 && std::isfinite(t_i) && std::isfinite(t_ii)))
        throw Error(ErrorKind::out_of_range, "monodromy_check: t_I and t_II must be positive");
    if (!(eps >= 0.0 && std::isfinite(eps))) throw Error(ErrorKind::out_of_range, "monodromy_check: eps must be >= 0");
    const auto m = build(p);
    MonodromyReport r;
    r.t_I = t_i;
    r.t_II = t_ii;
    r.eps = eps;
    r.resonance_half_period = p.resonance_half_period();
    r.M0 = monodromy(m, t_i, t_ii, 0.0);
    r.M_eps = monodromy(m, t_i, t_ii, eps);
    r.rho_M0 = spectral_radius(r.M0);
    r.rho_M_eps = spectral_radius(r.M_eps);
    r.energy_change_0 = sym_definiteness(r.M0.transpose() * m.P * r.M0 - m.P, rel_tol);
    r.energy_change_eps = sym_definiteness(r.M_eps.transpose() * m.P * r.M_eps - m.P, rel_tol);
    r.below_resonance = t_ii < r.resonance_half_period;

    const double ratio = t_ii / r.resonance_half_period;
    const double k = std::round(ratio);
    if (k >= 1.0 && std::abs(ratio - k) <= 1e-9 * k) r.resonance_multiple = static_cast<long>(k);

    r.contraction_applies = r.below_resonance && eps > 0.0;
    r.contraction_holds = r.rho_M0 < 1.0 && r.energy_change_eps.definite == Definiteness::negative_definite;
    r.unit_radius_applies = r.resonance_multiple.has_value();
    r.unit_radius_holds = std::abs(r.rho_M_eps - 1.0) <= 1e-8;
    if (r.resonance_multiple) {
        const double sign = (*r.resonance_multiple % 2 == 0) ? 1.0 : -1.0;
        const Vec4 e1{1, 0, 0, 0};
        r.e1_residual = max_abs(r.M_eps * e1 - sign * e1);
    }
    return r;
}

struct CertifySwitchedOptions {
    std::size_t grid_n = 33;
    double kappa_rel_tol = 1e-6;
    std::size_t kappa_max_points = 65537;
    std::size_t phi_max_points = 257;
    double phi_rel_tol = 1e-6;
    double theta = 0.5;
    std::size_t gemp_signals = 8;
    std::size_t gemp_periods = 40;
    std::uint64_t seed = 1;
};

struct SwitchedCertificate {
    double T = 0.0;
    double eps = 0.0;
    double kappa1 = 0.0;
    double kappa2 = 0.0;
    double kappa3 = 0.0;
    double t_ii_worst = 0.0;
    std::size_t grid_resolution = 0;  // kappa3 grid points
    double kappa3_previous = 0.0;     // value on the previous, coarser grid
    double r = 0.0;
    double K = 0.0;
    double lambda = 0.0;
    // ISS chain, ||x(t)|| <= K_iss ||x0|| e^{-lambda_iss t} + G sup|u|
    double phi_bar = 0.0;
    std::size_t phi_grid = 0;
    double norm_B = 0.0;
    double theta = 0.5;
    double c1 = 0.0;
    double c2 = 0.0;
    double L1 = 0.0;
    double a = 0.0;
    double beta = 0.0;
    double gamma = 0.0;
    double c3 = 0.0;
    double alpha = 0.0;
    double L2 = 0.0;
    double c5 = 0.0;
    double c6 = 0.0;
    double lambda_iss = 0.0;
    double K_iss = 0.0;
    double G = 0.0;
    double G_emp = 0.0;

    bool passed() const { return kappa3 > 0.0 && r > 0.0 && std::isfinite(K) && std::isfinite(G); }
    /// Ultimate bound for the inverter input u = mu, |mu| <= 0.5.
    double ultimate_bound() const { return 0.5 * G; }
};

inline void check_switched_preconditions(const CircuitParams& p, double T, double eps) {
    const double limit = p.resonance_half_period();
    if (!(std::isfinite(T) && std::isfinite(eps) && eps > 0.0 && 2.0 * eps <= T && T < limit))
        throw Error(ErrorKind::precondition,
                    "certify_switched: requires 0 < 2*eps <= T < pi*sqrt(L1*C1) = " + std::to_string(limit) +
                        " (got T=" + std::to_string(T) + ", eps=" + std::to_string(eps) + ")");
}

namespace detail {

/// min over t_II of lambda_min(P - M'PM) with t_I = T - t_II - eps/2.
inline double kappa3_on_grid(const ModelMatrices& m, double T, double eps, std::size_t n, double& argmin) {
    const Mat4 tail = expm(m.A_I, 0.5 * eps);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        const double t_ii = eps + (T - 2.0 * eps) * static_cast<double>(i) / static_cast<double>(n - 1);
        const double t_i = T - t_ii - 0.5 * eps;
        const Mat4 mm = tail * expm(m.A_II, t_ii) * expm(m.A_I, t_i);
        const double v = sym_eigenvalues(m.P - mm.transpose() * m.P * mm).front();
        if (v < best) {
            best = v;
            argmin = t_ii;
        }
    }
    return best;
}

/// sup of ||Phi(t; t_I, t_II, eps/2)||_2 over an n x n grid of (t, t_II).
inline double phi_bar_on_grid(const ModelMatrices& m, double T, double eps, std::size_t n) {
    double best = 0.0;
    const double tail = 0.5 * eps;
    for (std::size_t j = 0; j < n; ++j) {
        const double t_ii = eps + (T - 2.0 * eps) * static_cast<double>(j) / static_cast<double>(n - 1);
        const double t_i = T - t_ii - tail;
        const Mat4 e_i = expm(m.A_I, t_i);
        const Mat4 e_ii = expm(m.A_II, t_ii) * e_i;
        for (std::size_t i = 0; i < n; ++i) {
            const double t = T * static_cast<double>(i) / static_cast<double>(n - 1);
            Mat4 phi;
            if (t < t_i) phi = expm(m.A_I, t);
            else if (t < t_i + t_ii) phi = expm(m.A_II, t - t_i) * e_i;
            else phi = expm(m.A_I, std::max(0.0, t - t_i - t_ii)) * e_ii;
            best = std::max(best, norm_2(phi));
        }
    }
    return best;
}

inline PwmSignal random_class_signal(std::mt19937_64& rng, double T, double eps, std::size_t periods) {
    std::uniform_real_distribution<double> u(eps, T - eps);
    PwmSignal sig{T, eps, {}};
    sig.switch_times.reserve(periods);
    for (std::size_t k = 0; k < periods; ++k) sig.switch_times.push_back(sig.period_start(k) + u(rng));
    return sig;
}

}  // namespace detail

/**
 * Dwell-time certificate for every signal in PWM(T, eps). kappa3 is the
 * family-wide minimum of lambda_min(P - M'PM); grids double (n -> 2n - 1,
 * nested) until the relative change drops below the tolerance or the cap is hit.
 */
inline SwitchedCertificate certify_switched(const CircuitParams& p, double T, double eps,
                                            const CertifySwitchedOptions& opt = {}) {
    p.validate();
    check_switched_preconditions(p, T, eps);
    if (opt.grid_n < 33) throw Error(ErrorKind::out_of_range, "certify_switched: grid_n must be at least 33");
    if (!(opt.theta > 0.0 && opt.theta < 1.0))
        throw Error(ErrorKind::out_of_range, "certify_switched: theta must lie in (0, 1)");
    const auto m = build(p);
    SwitchedCertificate c;
    c.T = T;
    c.eps = eps;
    const auto pev = sym_eigenvalues(m.P);
    c.kappa1 = pev.front();
    c.kappa2 = pev.back();

    std::size_t n = opt.grid_n;
    double arg = eps;
    double k3 = detail::kappa3_on_grid(m, T, eps, n, arg);
    double prev = k3;
    while (2 * n - 1 <= opt.kappa_max_points) {
        const std::size_t n2 = 2 * n - 1;
        double arg2 = arg;
        const double k3n = detail::kappa3_on_grid(m, T, eps, n2, arg2);
        prev = k3;
        n = n2;
        const bool settled = std::abs(k3n - k3) <= opt.kappa_rel_tol * std::abs(k3n);
        k3 = k3n;
        arg = arg2;
        if (settled) break;
    }
    c.kappa3 = k3;
    c.kappa3_previous = prev;
    c.t_ii_worst = arg;
    c.grid_resolution = n;
    if (!(c.kappa3 > 0.0)) return c;

    c.r = -std::log1p(-c.kappa3 / c.kappa2) / T;
    c.K = std::sqrt((c.kappa2 / c.kappa1) * std::exp(c.r * (0.5 * eps + T)));
    c.lambda = 0.5 * c.r;

    std::size_t pn = opt.grid_n;
    double phi = detail::phi_bar_on_grid(m, T, eps, pn);
    while (2 * pn - 1 <= opt.phi_max_points) {
        const std::size_t pn2 = 2 * pn - 1;
        const double phin = detail::phi_bar_on_grid(m, T, eps, pn2);
        pn = pn2;
        const bool settled = std::abs(phin - phi) <= opt.phi_rel_tol * phin;
        phi = phin;
        if (settled) break;
    }
    c.phi_bar = phi;
    c.phi_grid = pn;

    c.norm_B = norm(m.B);
    c.theta = opt.theta;
    c.c1 = 2.0 * c.kappa2 * c.phi_bar * c.phi_bar * c.norm_B;
    c.c2 = c.kappa2 * (c.phi_bar * c.norm_B) * (c.phi_bar * c.norm_B);
    const double kt = c.kappa3 * c.theta;
    c.L1 = (c.c1 + std::sqrt(c.c1 * c.c1 + 4.0 * kt * c.c2)) / (2.0 * kt);
    c.a = 1.0 - c.kappa3 * (1.0 - c.theta) / c.kappa2;
    c.beta = c.kappa2 * c.L1 * c.L1 + c.c1 * c.L1 + c.c2;
    c.gamma = std::max(c.kappa2 * c.L1 * c.L1, c.beta);
    c.c3 = std::sqrt(c.kappa2 / c.kappa1);
    c.alpha = std::sqrt(c.a);
    c.L2 = std::sqrt(c.gamma / c.kappa1);
    c.c5 = c.phi_bar * T * (c.L2 + c.norm_B);
    c.lambda_iss = -std::log(c.alpha) / T;
    c.c6 = c.phi_bar * c.c3 / c.alpha;
    const double shift = std::exp(c.lambda_iss * 0.5 * eps);
    c.K_iss = c.c6 * shift * c.phi_bar;
    c.G = c.c6 * shift * c.phi_bar * c.norm_B * 0.5 * eps + c.c5;

    // Empirical gain: sup ||x|| / sup|u| from rest under the inverter input u = mu.
    std::mt19937_64 rng(opt.seed);
    for (std::size_t s = 0; s < opt.gemp_signals; ++s) {
        const auto sig = detail::random_class_signal(rng, T, eps, opt.gemp_periods);
        SimConfig cfg;
        cfg.horizon = sig.end_time();
        cfg.ccm_check = false;
        cfg.sample_dt = T / 8.0;
        const auto traj = simulate_switched(m, sig, StateVector{}, cfg, Forcing::inverter());
        for (const auto& smp : traj.samples) c.G_emp = std::max(c.G_emp, norm(smp.state.values) / 0.5);
    }
    return c;
}

// ---------------------------------------------------------------------------
// Pointwise bound verification
// ---------------------------------------------------------------------------

struct BoundVerdict {
    bool passed = true;
    std::optional<double> first_violation;
    double K = 0.0;
    double lambda = 0.0;
    double G = 0.0;
    double u_sup = 0.0;
    double worst_ratio = 0.0;  // max ||x(t)|| / bound(t)
    std::size_t samples_checked = 0;
};

namespace detail {

inline BoundVerdict check_bound(const Trajectory& traj, const CircuitParams& p, const Vec4& x0, double K,
                                double lambda, double G, double u_sup) {
    BoundVerdict v;
    v.K = K;
    v.lambda = lambda;
    v.G = G;
    v.u_sup = u_sup;
    const double n0 = norm(x0);
    for (const auto& s : traj.samples) {
        const double nx = norm(to_x(s.state, p).values);
        const double bound = K * n0 * std::exp(-lambda * s.t) + G * u_sup;
        // Rounding slack for states that sit on the bound (e.g. K = 1, u = 0).
        const double slack = 1e-12 * std::max(1.0, bound);
        ++v.samples_checked;
        if (bound > 0.0) v.worst_ratio = std::max(v.worst_ratio, nx / bound);
        if (nx > bound + slack && v.passed) {
            v.passed = false;
            v.first_violation = s.t;
        }
    }
    return v;
}

}  // namespace detail

/**
 * Simulates the switched model from x0 under sig and checks the certificate
 * bound at every emitted sample. Unforced runs use (K, lambda); otherwise the
 * ISS constants with sup|u| = u_sup (0.5 for the inverter input).
 */
inline BoundVerdict iss_bound_check(const ModelMatrices& m, const SwitchedCertificate& cert, const PwmSignal& sig,
                                    const Forcing& forcing, const StateVector& x0, std::optional<double> u_sup = {},
                                    double sample_dt = 0.0) {
    if (std::abs(sig.T - cert.T) > 1e-12 * cert.T || sig.eps < cert.eps * (1.0 - 1e-12))
        throw Error(ErrorKind::precondition, "iss_bound_check: signal class differs from the certificate");
    const auto verdict = validate_pwm(sig);
    if (!verdict.passed) throw Error(ErrorKind::invalid_pwm, "iss_bound_check: " + verdict.message);
    SimConfig cfg;
    cfg.horizon = sig.end_time();
    cfg.ccm_check = false;
    cfg.sample_dt = sample_dt;
    const auto traj = simulate_switched(m, sig, x0, cfg, forcing);
    const Vec4 xv = to_x(x0, m.params).values;
    if (forcing.kind == Forcing::Kind::unforced)
        return detail::check_bound(traj, m.params, xv, cert.K, cert.lambda, 0.0, 0.0);
    const double us = u_sup.value_or(0.5);
    return detail::check_bound(traj, m.params, xv, cert.K_iss, cert.lambda_iss, cert.G, us);
}

/// Averaged-model counterpart with the certificate's ISS constants.
inline BoundVerdict iss_bound_check(const ModelMatrices& m, const AveragedCertificate& cert,
                                    const DutyProfile& profile, const Forcing& forcing, const StateVector& x0,
                                    double horizon, std::optional<double> u_sup = {}) {
    if (profile.eps_d < cert.eps_duty - 1e-15)
        throw Error(ErrorKind::precondition, "iss_bound_check: duty clamp is wider than the certified set");
    SimConfig cfg;
    cfg.horizon = horizon;
    cfg.ccm_check = false;
    const auto traj = simulate_averaged(m, profile, x0, cfg, forcing);
    const Vec4 xv = to_x(x0, m.params).values;
    if (forcing.kind == Forcing::Kind::unforced)
        return detail::check_bound(traj, m.params, xv, cert.K, cert.lambda, 0.0, 0.0);
    return detail::check_bound(traj, m.params, xv, cert.K, cert.lambda, cert.G, u_sup.value_or(cert.mu_bar));
}

}  // namespace zsource
