#include "gridfreq/machine.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "gridfreq/model.hpp"
#include "numeric.hpp"

namespace gridfreq {

SwingDerivatives swing_derivatives(const SynchronousMachine& machine, double p_elec_mw,
                                   double p_mech_mw, double d_omega_pu, double f_n,
                                   double d_omega_ref_pu) {
    SwingDerivatives out;
    out.d_delta = 2.0 * std::numbers::pi * f_n * d_omega_pu;
    out.d_omega = ((p_mech_mw - p_elec_mw) / machine.s_rated - machine.d * (d_omega_pu - d_omega_ref_pu)) /
                  (2.0 * machine.h);
    return out;
}

namespace {

// Rate and non-windup position limits on the gate derivative.
double limit_gate_rate(const GovernorParams& gov, double gate, double rate, double p_mech0) {
    rate = std::clamp(rate, -gov.rate_max, gov.rate_max);
    if (gate >= gov.p_max - p_mech0 && rate > 0.0) {
        return 0.0;
    }
    if (gate <= gov.p_min - p_mech0 && rate < 0.0) {
        return 0.0;
    }
    return rate;
}

}  // namespace

GovernorState governor_derivatives(const GovernorParams& gov, const GovernorState& s,
                                   double df_hz, double p_mech0) {
    GovernorState d;
    const double demand = -gov.droop_mw_per_hz * df_hz;
    if (gov.kind == GovernorKind::Hydro) {
        double u = demand;
        if (gov.transient_ratio > 1.0 && gov.t_r > 0.0) {
            const double r = gov.transient_ratio;
            u = demand / r + (1.0 - 1.0 / r) * s.reset;
            d.reset = (demand - s.reset) / (gov.t_r * r);
        }
        d.gate = limit_gate_rate(gov, s.gate, (u - s.gate) / gov.t_g, p_mech0);
        d.turbine = gov.t_w > 0.0 ? (s.gate - s.turbine) / (0.5 * gov.t_w) : 0.0;
    } else {
        d.gate = limit_gate_rate(gov, s.gate, (demand - s.gate) / gov.t_g, p_mech0);
        d.reset = (s.gate - s.reset) / gov.t_reheat;
    }
    return d;
}

double governor_output(const GovernorParams& gov, const GovernorState& s) {
    if (gov.kind == GovernorKind::Hydro) {
        return gov.t_w > 0.0 ? 3.0 * s.turbine - 2.0 * s.gate : s.gate;
    }
    return gov.f_hp * s.gate + (1.0 - gov.f_hp) * s.reset;
}

void enforce_limits(const GovernorParams& gov, GovernorState& state, double p_mech0) {
    state.gate = std::clamp(state.gate, gov.p_min - p_mech0, gov.p_max - p_mech0);
}

double governor_step(const GovernorParams& gov, double df_hz, GovernorState& state, double dt,
                     double p_mech0) {
    const auto f = [&](const std::array<double, 3>& x) {
        const GovernorState d = governor_derivatives(gov, {x[0], x[1], x[2]}, df_hz, p_mech0);
        return std::array<double, 3>{d.reset, d.gate, d.turbine};
    };
    const auto x = detail::trapezoid_step<3>(f, {state.reset, state.gate, state.turbine}, dt);
    state = {x[0], x[1], x[2]};
    enforce_limits(gov, state, p_mech0);
    return governor_output(gov, state);
}

double avr_derivative(const AvrParams& avr, double efd, double efd0, double v_error) {
    const double rate = (efd0 + avr.k_a * v_error - efd) / avr.t_a;
    if (efd >= avr.efd_max && rate > 0.0) {
        return 0.0;
    }
    if (efd <= avr.efd_min && rate < 0.0) {
        return 0.0;
    }
    return rate;
}

double avr_step(const AvrParams& avr, double v_error, double& efd, double dt, double efd0) {
    const auto f = [&](const std::array<double, 1>& x) {
        return std::array<double, 1>{avr_derivative(avr, x[0], efd0, v_error)};
    };
    efd = std::clamp(detail::trapezoid_step<1>(f, {efd}, dt)[0], avr.efd_min, avr.efd_max);
    return efd;
}

double system_kinetic_energy(std::span<const SynchronousMachine> machines) {
    double ek = 0.0;
    for (const auto& m : machines) {
        if (m.online) {
            ek += m.h * m.s_rated;
        }
    }
    return ek / 1000.0;
}

double system_kinetic_energy(const NetworkModel& model) {
    return system_kinetic_energy(std::span<const SynchronousMachine>(model.machines));
}

}  // namespace gridfreq
