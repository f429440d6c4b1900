// Library walkthrough: equilibrium, both certificates, and a switched run checked against the decay bound.
#include <cstdio>

#include "zsource/zsource.hpp"

using namespace zsource;

int main() {
    const auto p = CircuitParams::unit();
    const auto m = build(p);

    const auto eq = steady_state(p, 0.3);
    std::printf("equilibrium at D=0.3 (z-frame): %g %g %g %g\n", eq.values[0], eq.values[1], eq.values[2],
                eq.values[3]);

    const auto avg = certify_averaged(p, 0.1);
    std::printf("averaged certificate: passed=%d xi=%g alpha=%g\n", avg.passed(), avg.xi, avg.alpha);

    const auto sw = certify_switched(p, 2.0, 0.2);
    std::printf("switched certificate: passed=%d kappa3=%g K=%g lambda=%g\n", sw.passed(), sw.kappa3, sw.K,
                sw.lambda);

    const auto sig = pwm_from_duty(DutyProfile::constant_duty(0.3), 2.0, 0.2, 40);
    const StateVector x0{{0.5, -0.2, 0.1, 0.3}, Frame::z};
    const auto bound = iss_bound_check(m, sw, sig, Forcing::unforced(), x0, 0.0, 0.25);
    std::printf("decay bound on %zu samples: passed=%d worst ratio=%g\n", bound.samples_checked, bound.passed,
                bound.worst_ratio);
    return bound.passed ? 0 : 1;
}
