#include "gridfreq/hvdc.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "gridfreq/error.hpp"
#include "numeric.hpp"

namespace gridfreq {

void validate(const HvdcLink& link) {
    const std::string who = "hvdc link " + link.id;
    if (link.p_rated <= 0.0) {
        throw ModelError(who + ": p_rated must be positive");
    }
    if (std::abs(link.p0) > link.p_rated) {
        throw ModelError(who + ": |p0| exceeds p_rated");
    }
    if (link.kind == ConverterKind::Lcc) {
        if (!link.lcc || !link.shunt || link.vsc) {
            throw ModelError(who + ": LCC links carry lcc and shunt records only");
        }
        if (link.lcc->x_c <= 0.0 || link.lcc->b < 1) {
            throw ModelError(who + ": x_c must be positive and b >= 1");
        }
        const auto& sh = *link.shunt;
        if (sh.bank.n_steps < 0 || sh.bank.n_on < 0 || sh.bank.n_on > sh.bank.n_steps) {
            throw ModelError(who + ": shunt step count out of range");
        }
        if (sh.q_hi.size() != static_cast<std::size_t>(sh.bank.n_steps) ||
            sh.q_lo.size() != sh.q_hi.size()) {
            throw ModelError(who + ": one threshold pair per shunt step required");
        }
        for (std::size_t k = 0; k < sh.q_hi.size(); ++k) {
            if (!(sh.q_hi[k] > sh.q_lo[k])) {
                throw ModelError(who + ": shunt hysteresis band must be non-empty");
            }
        }
        if (sh.t_sw <= 0.0) {
            throw ModelError(who + ": shunt time constant must be positive");
        }
    } else {
        if (!link.vsc || link.lcc || link.shunt) {
            throw ModelError(who + ": VSC links carry a vsc record only");
        }
        const auto& lim = *link.vsc;
        if (!(lim.i_q_max > 0.0 && lim.i_q_max <= lim.i_max)) {
            throw ModelError(who + ": need 0 < i_q_max <= i_max");
        }
        if (lim.t_v <= 0.0) {
            throw ModelError(who + ": t_v must be positive");
        }
    }
}

ShuntAutomaton default_shunt_automaton(const std::string& bus, double p_rated) {
    ShuntAutomaton a;
    a.bank.bus = bus;
    a.bank.n_steps = 5;
    a.bank.q_step = 0.5 * p_rated / a.bank.n_steps;
    for (int k = 0; k < a.bank.n_steps; ++k) {
        const double hi = (k + 0.5) * a.bank.q_step;
        a.q_hi.push_back(hi);
        a.q_lo.push_back(hi - 0.2 * a.bank.q_step);
    }
    return a;
}

namespace {

constexpr double kBridgeFactor = 3.0 / std::numbers::pi;

// Direct current for power `p` at fixed angle: k I^2 - V cos(xi) I + p = 0.
double direct_current(double p, double v_d0, double xi, double k) {
    const double a = v_d0 * std::cos(xi);
    if (p == 0.0) {
        return 0.0;
    }
    if (k == 0.0) {
        return p / a;
    }
    const double disc = a * a - 4.0 * k * p;
    if (disc < 0.0) {
        throw InfeasibleOperatingPoint("LCC: power exceeds the transfer limit at this AC voltage");
    }
    return (a - std::sqrt(disc)) / (2.0 * k);
}

}  // namespace

LccOperatingPoint lcc_operating_point(double p_mw, double v_pcc, const LccParams& params,
                                      LccMode mode, double p_base_mw) {
    if (v_pcc <= 0.0) {
        throw InfeasibleOperatingPoint("LCC: AC voltage must be positive");
    }
    LccOperatingPoint op;
    op.p = std::abs(p_mw);
    op.v_d0 = params.v_d0 * v_pcc;
    const double p = op.p / p_base_mw;
    const double k = kBridgeFactor * params.x_c * params.b;

    if (mode == LccMode::Import) {
        op.xi = params.xi_min;
        op.i_d = direct_current(p, op.v_d0, op.xi, k);
        op.v_d = op.v_d0 * std::cos(op.xi) - k * op.i_d;
    } else {
        op.v_d = params.v_d_set;
        op.i_d = p / op.v_d;
        const double cos_alpha = (op.v_d + k * op.i_d) / op.v_d0;
        if (cos_alpha > std::cos(params.alpha_min)) {
            // Firing angle floors; the direct voltage gives way.
            op.xi = params.alpha_min;
            op.xi_clamped = true;
            op.i_d = direct_current(p, op.v_d0, op.xi, k);
            op.v_d = op.v_d0 * std::cos(op.xi) - k * op.i_d;
        } else {
            op.xi = std::acos(cos_alpha);
        }
    }
    const double cos_phi = op.v_d / op.v_d0;
    if (cos_phi > 1.0 || cos_phi <= 0.0) {
        throw InfeasibleOperatingPoint("LCC: no displacement angle satisfies cos(phi) = Vd/Vd0");
    }
    op.phi = std::acos(cos_phi);
    op.q = op.p * std::tan(op.phi);
    return op;
}

int lcc_epc_reactive_sign(LccMode mode) {
    return mode == LccMode::Import ? 1 : -1;
}

int lcc_epc_reactive_sign(LccMode mode, double delta_p_mw) {
    if (delta_p_mw == 0.0) {
        return 0;
    }
    return (delta_p_mw > 0.0 ? 1 : -1) * lcc_epc_reactive_sign(mode);
}

bool shunt_switch(const ShuntAutomaton& a, double q_lcc_mvar, ShuntState& state) {
    const int before = state.n_on;
    while (state.n_on < a.bank.n_steps && q_lcc_mvar >= a.q_hi[state.n_on]) {
        ++state.n_on;
    }
    while (state.n_on > 0 && q_lcc_mvar < a.q_lo[state.n_on - 1]) {
        --state.n_on;
    }
    if (state.n_on != before) {
        ++state.switch_events;
        return true;
    }
    return false;
}

ShuntState shunt_initial_state(const ShuntAutomaton& a, double q_lcc_mvar) {
    ShuntState s;
    s.n_on = std::clamp(a.bank.n_on, 0, a.bank.n_steps);
    shunt_switch(a, q_lcc_mvar, s);
    s.b = s.n_on * a.bank.q_step;
    s.switch_events = 0;
    return s;
}

ShuntOutput shunt_automaton_step(const ShuntAutomaton& a, double q_lcc_mvar, double v_pcc,
                                 ShuntState& state, double dt) {
    shunt_switch(a, q_lcc_mvar, state);
    // Linear lag: the trapezoidal update is explicit.
    const double target = state.n_on * a.bank.q_step;
    const double c = 0.5 * dt / a.t_sw;
    state.b = (state.b * (1.0 - c) + 2.0 * c * target) / (1.0 + c);
    return {state.n_on, state.b * v_pcc * v_pcc};
}

namespace {

double active_current(const VscLimits& lim, double v_pcc, double p_order, double s) {
    return std::clamp(p_order / (v_pcc * s), -lim.i_max, lim.i_max);
}

double reactive_current_cap(const VscLimits& lim, double i_p) {
    return std::min(lim.i_q_max, std::sqrt(std::max(0.0, lim.i_max * lim.i_max - i_p * i_p)));
}

}  // namespace

double vsc_q_capability(const HvdcLink& link, double v_pcc, double p_order) {
    const VscLimits lim = link.vsc.value_or(VscLimits{});
    const double i_p = active_current(lim, v_pcc, p_order, link.p_rated);
    return reactive_current_cap(lim, i_p) * v_pcc * link.p_rated;
}

VscOutput vsc_limit(const HvdcLink& link, double v_pcc, double p_order, double q_request) {
    const VscLimits lim = link.vsc.value_or(VscLimits{});
    const double s = link.p_rated;
    VscOutput out;
    const double i_p = active_current(lim, v_pcc, p_order, s);
    out.p_saturated = std::abs(p_order / (v_pcc * s)) > lim.i_max;
    out.p = i_p * v_pcc * s;
    const double q_cap = reactive_current_cap(lim, i_p) * v_pcc * s;
    out.q = std::clamp(q_request, -q_cap, q_cap);
    out.q_saturated = std::abs(q_request) > q_cap;
    out.i_p = i_p;
    out.i_q = out.q / (v_pcc * s);
    return out;
}

double vsc_q_request(const HvdcLink& link, const VscState& state) {
    return link.vsc_mode == VscMode::ReactivePower ? link.q_sched : state.q_cmd;
}

double vsc_voltage_target(const HvdcLink& link, double v_pcc, const VscState& state) {
    const VscLimits lim = link.vsc.value_or(VscLimits{});
    return state.q_bias + lim.k_v * (state.v_ref - v_pcc) * link.p_rated;
}

double vsc_derivative(const HvdcLink& link, double v_pcc, double q_limit, const VscState& state) {
    if (link.vsc_mode == VscMode::ReactivePower) {
        return 0.0;
    }
    const VscLimits lim = link.vsc.value_or(VscLimits{});
    const double target = vsc_voltage_target(link, v_pcc, state);
    // Lag towards the capability-clamped target: bounded by the limit, no windup.
    return (std::clamp(target, -q_limit, q_limit) - state.q_cmd) / lim.t_v;
}

VscOutput vsc_outputs(const HvdcLink& link, double v_pcc, double v_ref, double p_order,
                      VscState& state, double dt) {
    state.v_ref = v_ref;
    if (link.vsc_mode == VscMode::AcVoltage) {
        const double q_limit = vsc_q_capability(link, v_pcc, p_order);
        const auto f = [&](const std::array<double, 1>& x) {
            VscState s = state;
            s.q_cmd = x[0];
            return std::array<double, 1>{vsc_derivative(link, v_pcc, q_limit, s)};
        };
        state.q_cmd = std::clamp(detail::trapezoid_step<1>(f, {state.q_cmd}, dt)[0], -q_limit, q_limit);
        VscOutput out = vsc_limit(link, v_pcc, p_order, state.q_cmd);
        out.q_saturated = out.q_saturated || std::abs(vsc_voltage_target(link, v_pcc, state)) > q_limit;
        return out;
    }
    return vsc_limit(link, v_pcc, p_order, vsc_q_request(link, state));
}

}  // namespace gridfreq
