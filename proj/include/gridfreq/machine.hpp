#pragma once

#include <limits>
#include <span>
#include <string>

namespace gridfreq {

enum class MachineKind { Hydro, Thermal, Nuclear };
enum class GovernorKind { Hydro, Thermal };

/// Turbine-governor parameters. Hydro units use a transient-droop governor
/// (lead-lag with reset time `t_r` and high-frequency gain reduced by
/// `transient_ratio`) feeding a gate servo and the non-minimum-phase water
/// column (1 - s t_w)/(1 + s t_w/2). Thermal units use a servo lag and a
/// reheater with high-pressure fraction `f_hp`.
struct GovernorParams {
    GovernorKind kind = GovernorKind::Hydro;
    double droop_mw_per_hz = 0.0;
    double t_g = 0.2;
    double t_w = 1.0;
    double t_r = 5.0;
    double transient_ratio = 1.0;
    double t_reheat = 7.0;
    double f_hp = 0.3;
    /// Absolute mechanical power limits (MW) and gate rate limit (MW/s).
    double p_max = std::numeric_limits<double>::infinity();
    double p_min = -std::numeric_limits<double>::infinity();
    double rate_max = std::numeric_limits<double>::infinity();
};

struct AvrParams {
    double k_a = 50.0;
    double t_a = 1.0;
    double efd_min = 0.0;
    double efd_max = 3.0;
};

struct SynchronousMachine {
    std::string id;
    std::string bus;
    MachineKind kind = MachineKind::Hydro;
    double s_rated = 100.0;  // MVA
    double h = 3.0;          // s, on s_rated
    double d = 0.0;          // pu power per pu speed, on s_rated
    double p_mech = 0.0;     // MW dispatch
    bool is_fcr = false;
    bool slack = false;
    bool online = true;
    double xd_p = 0.3;       // pu on s_rated
    GovernorParams governor;
    AvrParams avr;
};

struct SwingDerivatives {
    double d_delta = 0.0;  // rad/s
    double d_omega = 0.0;  // pu/s
};

/// Classical swing equation with powers in MW and speed deviation in pu.
/// Damping acts on the slip against `d_omega_ref_pu` (0: nominal speed).
SwingDerivatives swing_derivatives(const SynchronousMachine& machine, double p_elec_mw,
                                   double p_mech_mw, double d_omega_pu,
                                   double f_n = 50.0, double d_omega_ref_pu = 0.0);

/// Governor dynamic state. Hydro: reset lag, gate, water-column lag.
/// Thermal: servo, reheater (the third slot is unused).
struct GovernorState {
    double reset = 0.0;
    double gate = 0.0;
    double turbine = 0.0;
};

/// Time derivative of the governor state for local frequency deviation `df_hz`.
/// `p_mech0` is the dispatch the deviation is measured from; it places the
/// position limits.
GovernorState governor_derivatives(const GovernorParams& gov, const GovernorState& state,
                                   double df_hz, double p_mech0);

/// Mechanical power deviation (MW) produced by the governor state.
double governor_output(const GovernorParams& gov, const GovernorState& state);

/// Projects the gate onto the position limits.
void enforce_limits(const GovernorParams& gov, GovernorState& state, double p_mech0);

/// Advances the governor by one implicit trapezoidal step with `df_hz` held and
/// returns the resulting mechanical power deviation.
double governor_step(const GovernorParams& gov, double df_hz, GovernorState& state,
                     double dt, double p_mech0 = 0.0);

/// d(efd)/dt of the first-order AVR with a non-windup output limit.
/// `efd0` is the initialized field voltage; the steady state is efd0 + k_a * v_error.
double avr_derivative(const AvrParams& avr, double efd, double efd0, double v_error);

/// Advances the AVR by one implicit trapezoidal step and returns the new efd.
double avr_step(const AvrParams& avr, double v_error, double& efd, double dt,
                double efd0 = 0.0);

struct NetworkModel;

/// Stored kinetic energy of online machines, GWs.
double system_kinetic_energy(const NetworkModel& model);
double system_kinetic_energy(std::span<const SynchronousMachine> machines);

}  // namespace gridfreq
