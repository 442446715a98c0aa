#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gridfreq/network.hpp"

namespace gridfreq {

enum class ConverterKind { Lcc, Vsc };
enum class VscMode { ReactivePower, AcVoltage };
enum class LccMode { Import, Export };

/// Converter bridge parameters in the link's DC per-unit system
/// (power base = p_rated, DC voltage base = rated direct voltage).
struct LccParams {
    double x_c = 0.1;       // commutation reactance
    int b = 2;              // bridges in series
    double v_d0 = 1.14;     // no-load direct voltage at 1 pu AC voltage
    double xi_min = 0.2967; // minimum extinction angle of the inverter, rad (17 deg)
    double alpha_min = 0.0873; // minimum firing angle of the rectifier, rad (5 deg)
    double v_d_set = 1.0;   // direct voltage held by the remote inverter when rectifying
};

/// Stepwise reactive compensation that follows the converter's consumption.
/// Step k (0-based) engages when consumption reaches q_hi[k] and drops out
/// below q_lo[k].
struct ShuntAutomaton {
    ShuntBank bank;
    double t_sw = 0.5;
    std::vector<double> q_hi;
    std::vector<double> q_lo;
};

struct VscLimits {
    double i_q_max = 0.3;
    double i_max = 1.0;
    double k_v = 10.0;  // pu reactive power per pu voltage error
    double t_v = 0.2;
};

struct HvdcLink {
    std::string id;
    std::string name;
    std::string acronym;
    std::string bus;
    ConverterKind kind = ConverterKind::Lcc;
    double p_rated = 0.0;  // MW
    double p0 = 0.0;       // MW, import positive
    VscMode vsc_mode = VscMode::ReactivePower;
    double q_sched = 0.0;  // MVAr, reactive-power mode schedule
    std::optional<LccParams> lcc;
    std::optional<ShuntAutomaton> shunt;
    std::optional<VscLimits> vsc;
    bool epc_enabled = true;
};

/// Throws ModelError when the link record is inconsistent.
void validate(const HvdcLink& link);

/// Five equal steps totalling half the rating, engagement at each half step of
/// consumption and 20 % hysteresis.
ShuntAutomaton default_shunt_automaton(const std::string& bus, double p_rated);

struct LccOperatingPoint {
    double p = 0.0;      // MW magnitude
    double q = 0.0;      // MVAr consumed
    double phi = 0.0;    // rad
    double i_d = 0.0;    // pu
    double v_d = 0.0;    // pu
    double v_d0 = 0.0;   // pu, no-load direct voltage at the present AC voltage
    double xi = 0.0;     // rad, firing or extinction angle in use
    bool xi_clamped = false;
};

/// Direct-current operating point for active power magnitude `p_mw` at AC
/// voltage `v_pcc`. Import runs the local station as an inverter at minimum
/// extinction angle; export runs it as a current-controlled rectifier whose
/// firing angle floors at alpha_min.
LccOperatingPoint lcc_operating_point(double p_mw, double v_pcc, const LccParams& params,
                                      LccMode mode, double p_base_mw);

/// Mode implied by a signed active power (import positive).
inline LccMode lcc_mode_for(double p_signed) {
    return p_signed >= 0.0 ? LccMode::Import : LccMode::Export;
}

/// +1 when a positive EPC injection raises the converter's reactive
/// consumption, -1 when it lowers it.
int lcc_epc_reactive_sign(LccMode mode);
int lcc_epc_reactive_sign(LccMode mode, double delta_p_mw);

struct ShuntState {
    int n_on = 0;
    double b = 0.0;  // MVAr at 1 pu voltage, lags n_on * q_step
    int switch_events = 0;
};

struct ShuntOutput {
    int n_on = 0;
    double q_shunt = 0.0;  // MVAr injected
};

/// Applies the threshold logic for consumption `q_lcc_mvar`; returns true if
/// the number of engaged steps changed.
bool shunt_switch(const ShuntAutomaton& automaton, double q_lcc_mvar, ShuntState& state);

/// Initial state consistent with the thresholds for a steady consumption.
ShuntState shunt_initial_state(const ShuntAutomaton& automaton, double q_lcc_mvar);

inline double shunt_derivative(const ShuntAutomaton& automaton, const ShuntState& state) {
    return (state.n_on * automaton.bank.q_step - state.b) / automaton.t_sw;
}

ShuntOutput shunt_automaton_step(const ShuntAutomaton& automaton, double q_lcc_mvar,
                                 double v_pcc, ShuntState& state, double dt);

struct VscState {
    double q_cmd = 0.0;   // MVAr, voltage-control lag output before limiting
    double q_bias = 0.0;  // MVAr, initialization offset
    double v_ref = 1.0;
};

struct VscOutput {
    double p = 0.0;  // MW injected
    double q = 0.0;  // MVAr injected
    bool q_saturated = false;
    bool p_saturated = false;
    double i_p = 0.0;  // pu on p_rated
    double i_q = 0.0;
};

/// Current-limited active and reactive injection for an order `p_order`
/// given the present controller state. Active current has priority.
VscOutput vsc_limit(const HvdcLink& link, double v_pcc, double p_order, double q_request);

/// Reactive capability (MVAr) left by the active current at `p_order`.
double vsc_q_capability(const HvdcLink& link, double v_pcc, double p_order);

/// Reactive request of the converter before limiting.
double vsc_q_request(const HvdcLink& link, const VscState& state);

/// Unlimited reactive demand of the AC-voltage controller, MVAr.
double vsc_voltage_target(const HvdcLink& link, double v_pcc, const VscState& state);

/// d(q_cmd)/dt of the AC-voltage controller with non-windup limits.
double vsc_derivative(const HvdcLink& link, double v_pcc, double q_limit,
                      const VscState& state);

/// Advances the converter controls by one step and returns the injections.
VscOutput vsc_outputs(const HvdcLink& link, double v_pcc, double v_ref, double p_order,
                      VscState& state, double dt);

}  // namespace gridfreq
