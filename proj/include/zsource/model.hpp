#pragma once

#include <cmath>
#include <numbers>
#include <string>

#include "zsource/error.hpp"
#include "zsource/numerics.hpp"

namespace zsource {

/// Component values of the inverter with a resistive load (SI units).
struct CircuitParams {
    double L1 = 1.0;
    double L2 = 1.0;
    double C1 = 1.0;
    double C2 = 1.0;
    double R = 1.0;
    double Vin = 1.0;

    static CircuitParams unit() { return {}; }

    void validate() const {
        auto check = [](double v, const char* name) {
            if (!std::isfinite(v) || v <= 0.0)
                throw Error(ErrorKind::invalid_input,
                            std::string("circuit parameter ") + name + " must be positive and finite");
        };
        check(L1, "L1");
        check(L2, "L2");
        check(C1, "C1");
        check(C2, "C2");
        check(R, "R");
        check(Vin, "Vin");
    }

    /// Half-period of the L1–C1 resonance, pi*sqrt(L1*C1): the bound on Mode II
    /// dwell (and on the PWM period) under which the switched model contracts.
    double resonance_half_period() const { return std::numbers::pi * std::sqrt(L1 * C1); }

    friend bool operator==(const CircuitParams&, const CircuitParams&) = default;
};

enum class Frame { z, x };

constexpr const char* to_string(Frame f) { return f == Frame::z ? "z" : "x"; }

/// [i_L1, i_L2, v_C1, v_C2] either in physical coordinates (z) or shifted by
/// the D = 0.5 equilibrium (x).
struct StateVector {
    Vec4 values{};
    Frame frame = Frame::x;

    double i_L1() const { return values[0]; }
    double i_L2() const { return values[1]; }
    double v_C1() const { return values[2]; }
    double v_C2() const { return values[3]; }

    friend bool operator==(const StateVector&, const StateVector&) = default;
};

struct ModelMatrices {
    CircuitParams params;
    Mat4 A_I;    // Mode I (S1 on)
    Mat4 A_II;   // Mode II (S2 on)
    Mat4 A_Iq;   // unscaled forms, A_i = P^{-1} A_i^q / 2
    Mat4 A_IIq;
    Mat4 A0q;    // A(mu) = P^{-1} [A0q + E0q mu] / 2
    Mat4 E0q;
    Mat4 P;      // stored-energy matrix, V(x) = x' P x
    Mat4 Q;      // A_i' P + P A_i = -Q for both modes
    Vec4 B{};    // x-frame input vector
    Vec4 b_I{};
    Vec4 b_II{};
    Vec4 z_half{};  // equilibrium for D = 0.5
};

inline ModelMatrices build(const CircuitParams& p) {
    p.validate();
    ModelMatrices m;
    m.params = p;
    const double g = 1.0 / p.R;
    m.A_Iq = Mat4{0, 0, 0, 0,
                  0, 0, 1, 1,
                  0, -1, 0, 0,
                  0, -1, 0, -g};
    m.A_IIq = Mat4{0, 0, -1, 0,
                   0, 0, 0, 1,
                   1, 0, 0, 0,
                   0, -1, 0, -g};
    m.A0q = Mat4{0, 0, -0.5, 0,
                 0, 0, 0.5, 1,
                 0.5, -0.5, 0, 0,
                 0, -1, 0, -g};
    m.E0q = Mat4{0, 0, 1, 0,
                 0, 0, 1, 0,
                 -1, -1, 0, 0,
                 0, 0, 0, 0};
    m.P = Mat4::diag({0.5 * p.L1, 0.5 * p.L2, 0.5 * p.C1, 0.5 * p.C2});
    m.Q = Mat4::diag({0, 0, 0, g});
    // P^{-1}/2 is diag(1/L1, 1/L2, 1/C1, 1/C2).
    const Mat4 half_pinv = Mat4::diag({1.0 / p.L1, 1.0 / p.L2, 1.0 / p.C1, 1.0 / p.C2});
    m.A_I = half_pinv * m.A_Iq;
    m.A_II = half_pinv * m.A_IIq;
    m.b_I = half_pinv * Vec4{p.Vin, 0, 0, 0};
    m.b_II = half_pinv * Vec4{0, -p.Vin, 0, 0};
    m.B = half_pinv * Vec4{2.0 * p.Vin, 2.0 * p.Vin, 0, 0};
    m.z_half = Vec4{0, 0, p.Vin, 0};
    return m;
}

/// A(mu) for mu in [-0.5, 0.5]; A(0.5) = A_I and A(-0.5) = A_II.
inline Mat4 a_of_mu(const ModelMatrices& m, double mu) {
    if (!(std::abs(mu) <= 0.5))
        throw Error(ErrorKind::out_of_range, "a_of_mu: |mu| must not exceed 0.5");
    const auto& p = m.params;
    const Mat4 half_pinv = Mat4::diag({1.0 / p.L1, 1.0 / p.L2, 1.0 / p.C1, 1.0 / p.C2});
    return half_pinv * (m.A0q + mu * m.E0q);
}

/// Steady-state input/output voltage gain (1 - 2D)/(1 - D).
inline double gain(double D) {
    if (!(D > 0.0 && D < 1.0)) throw Error(ErrorKind::out_of_range, "gain: duty cycle must lie in (0, 1)");
    return (1.0 - 2.0 * D) / (1.0 - D);
}

/// Closed-form equilibrium of the averaged model at constant duty D (z-frame).
inline StateVector steady_state(const CircuitParams& p, double D) {
    p.validate();
    if (!(D > 0.0 && D < 1.0))
        throw Error(ErrorKind::out_of_range, "steady_state: duty cycle must lie in (0, 1)");
    const double v_c2 = p.Vin * gain(D);
    // Adding zero turns -0 into +0 at D = 0.5.
    const double i_l2 = -v_c2 / p.R + 0.0;
    const double i_l1 = i_l2 * D / (1.0 - D) + 0.0;
    const double v_c1 = p.Vin * D / (1.0 - D);
    return {{i_l1, i_l2, v_c1, v_c2}, Frame::z};
}

/// Residual data of the linear-system route to the equilibrium.
struct SteadyStateCheck {
    Vec4 from_solve{};
    double residual_closed_form = 0.0;  // ||A_D z_cf + b_D||
    double max_abs_difference = 0.0;    // ||z_solve - z_cf||_inf
};

/// Solves [A_I D + A_II (1-D)] z + b_I D + b_II (1-D) = 0 and compares it
/// with the closed form.
inline SteadyStateCheck steady_state_check(const CircuitParams& p, double D) {
    const auto cf = steady_state(p, D);
    const auto m = build(p);
    const Mat4 a = D * m.A_I + (1.0 - D) * m.A_II;
    const Vec4 b = D * m.b_I + (1.0 - D) * m.b_II;
    SteadyStateCheck out;
    out.from_solve = solve(a, -1.0 * b);
    out.residual_closed_form = norm(a * cf.values + b);
    for (std::size_t i = 0; i < 4; ++i)
        out.max_abs_difference = std::max(out.max_abs_difference, std::abs(out.from_solve[i] - cf.values[i]));
    return out;
}

inline StateVector to_x(const StateVector& v, const CircuitParams& p) {
    if (v.frame == Frame::x) return v;
    return {{v.values[0], v.values[1], v.values[2] - p.Vin, v.values[3]}, Frame::x};
}

inline StateVector to_z(const StateVector& v, const CircuitParams& p) {
    if (v.frame == Frame::z) return v;
    return {{v.values[0], v.values[1], v.values[2] + p.Vin, v.values[3]}, Frame::z};
}

/// V(x) = x' P x, evaluated in the x-frame regardless of the input frame.
inline double energy(const ModelMatrices& m, const StateVector& v) {
    return quadratic_form(m.P, to_x(v, m.params).values);
}

}  // namespace zsource
