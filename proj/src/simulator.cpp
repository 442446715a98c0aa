#include "gridfreq/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <sstream>

#include <Eigen/Dense>

#include "gridfreq/error.hpp"
#include "gridfreq/powerflow.hpp"

namespace gridfreq {

void Scenario::validate() const {
    if (!(duration > 0.0)) {
        throw ModelError("scenario '" + label + "': duration must be positive");
    }
    if (!disturbance.machine.empty() &&
        (disturbance.trip_time < 0.0 || disturbance.trip_time > duration)) {
        throw ModelError("scenario '" + label + "': trip time outside the horizon");
    }
    if (ramp && (ramp->duration <= 0.0 || ramp->start < 0.0)) {
        throw ModelError("scenario '" + label + "': invalid power ramp");
    }
}

std::size_t SimulationTrace::link_index(std::string_view id) const {
    for (std::size_t k = 0; k < link_ids.size(); ++k) {
        if (link_ids[k] == id) {
            return k;
        }
    }
    throw ModelError("trace has no link '" + std::string(id) + "'");
}

double coi_frequency(const std::vector<double>& weights, const std::vector<double>& f) {
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        num += weights[i] * f[i];
        den += weights[i];
    }
    if (den <= 0.0) {
        throw DomainError("centre-of-inertia frequency needs at least one machine");
    }
    return num / den;
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr int kMachineStates = 6;  // delta, d_omega, efd, reset, gate, turbine
constexpr int kLinkStates = 2;     // shunt b or q_cmd, frequency filter

struct MachineInit {
    double p_mech0 = 0.0;
    double efd0 = 0.0;
    double v_ref = 1.0;
    double x_sys = 0.0;
};

struct LinkInit {
    double v_ref = 1.0;
    double q_bias = 0.0;
};

// Everything the recorder needs from one evaluation.
struct Outputs {
    std::vector<double> machine_p;
    std::vector<double> link_p, link_q, link_q_shunt, link_epc, link_df, link_sat;
    std::vector<double> link_phi, link_vd, link_vd0, link_q_cons;
    std::vector<double> load_p, load_q;
    double coi_df = 0.0;
};

class Engine {
public:
    Engine(const NetworkModel& model, const Scenario& scenario, const std::vector<EpcConfig>& epc,
           const SimulationConfig& config)
        : m_(model), sc_(scenario), cfg_(config), nb_(model.buses.size()),
          ng_(model.machines.size()), nl_(model.hvdc.size()) {
        nx_ = kMachineStates * ng_ + kLinkStates * nl_ + 1;
        ny_ = nx_ + 2 * nb_;
        online_.resize(ng_);
        for (std::size_t g = 0; g < ng_; ++g) {
            online_[g] = model.machines[g].online;
        }
        epc_.resize(nl_);
        for (const auto& c : epc) {
            const std::size_t k = model.link_index(c.link);
            epc_[k] = c;
        }
        latched_.assign(nl_, false);
        shunt_on_.assign(nl_, 0);
        build_admittance();
        for (std::size_t k = 0; k < m_.loads.size(); ++k) {
            load_bus_.push_back(m_.bus_index(m_.loads[k].bus));
        }
        machine_bus_.resize(ng_);
        for (std::size_t g = 0; g < ng_; ++g) {
            machine_bus_[g] = m_.bus_index(m_.machines[g].bus);
        }
        link_bus_.resize(nl_);
        for (std::size_t k = 0; k < nl_; ++k) {
            link_bus_[k] = m_.bus_index(m_.hvdc[k].bus);
        }
        scale_.assign(ny_, 1.0);
        for (std::size_t g = 0; g < ng_; ++g) {
            const std::size_t b = kMachineStates * g;
            scale_[b + 1] = 1e-3;
            for (std::size_t j = 3; j < 6; ++j) scale_[b + j] = m_.s_base;
        }
        for (std::size_t k = 0; k < nl_; ++k) {
            scale_[kMachineStates * ng_ + kLinkStates * k] = m_.s_base;
        }
    }

    SimulationTrace run() {
        sc_.validate();
        const PowerFlowSolution pf = solve_power_flow(m_);
        Eigen::VectorXd y = initial_state(pf);

        const double dt = cfg_.dt;
        const auto steps = static_cast<long>(std::llround(sc_.duration / dt));
        long trip_step = -1;
        if (!sc_.disturbance.machine.empty()) {
            trip_g_ = m_.machine_index(sc_.disturbance.machine);
            trip_step = std::lround(sc_.disturbance.trip_time / dt);
            const auto& mach = m_.machines[trip_g_];
            if (!mach.online) {
                throw ModelError("scenario trips machine '" + mach.id + "', which is offline");
            }
            sc_.disturbance.p_lost = pf.machine_p[trip_g_];
            sc_.disturbance.q_lost = pf.machine_q[trip_g_];
            sc_.disturbance.ek_lost = mach.h * mach.s_rated / 1000.0;
        }
        init_trace();

        Outputs out;
        Eigen::VectorXd f_old = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nx_));
        Eigen::VectorXd g_tmp(static_cast<Eigen::Index>(2 * nb_));
        int iters = 0;

        // Polish the algebraic variables at the initial point.
        solve_step(y, y, f_old, 0.0, 0.0, iters, true);
        if (trip_step == 0) {
            apply_trip();
            solve_step(y, y, f_old, 0.0, 0.0, iters, true);
        }
        evaluate(y, 0.0, &f_old, &g_tmp, &out);
        record(0.0, y, out, iters);
        update_discrete(out);

        // Linear extrapolation predictor, reset across discrete events.
        Eigen::VectorXd y_prev = y;
        bool smooth = false;
        for (long k = 1; k <= steps; ++k) {
            const double t = static_cast<double>(k) * dt;
            const Eigen::VectorXd y_old = y;
            if (smooth) {
                y = 2.0 * y_old - y_prev;
            }
            solve_step(y, y_old, f_old, dt, t, iters, false);
            smooth = true;
            if (k == trip_step) {
                apply_trip();
                const Eigen::VectorXd y_pre = y;
                evaluate(y, t, &f_old, &g_tmp, nullptr);
                solve_step(y, y_pre, f_old, 0.0, t, iters, true);
                smooth = false;
            }
            y_prev = y_old;
            evaluate(y, t, &f_old, &g_tmp, &out);
            if (!std::isfinite(out.coi_df) || std::abs(out.coi_df) > cfg_.frequency_limit) {
                throw UnstableSimulation("frequency deviation exceeded " +
                                             std::to_string(cfg_.frequency_limit) + " Hz",
                                         t);
            }
            if (k % cfg_.record_every == 0) {
                record(t, y, out, iters);
            }
            if (update_discrete(out)) {
                evaluate(y, t, &f_old, &g_tmp, nullptr);
                smooth = false;
            }
        }
        return std::move(trace_);
    }

private:
    const NetworkModel& m_;
    Scenario sc_;
    SimulationConfig cfg_;
    std::size_t nb_, ng_, nl_, nx_ = 0, ny_ = 0;
    std::vector<bool> online_;
    std::vector<std::optional<EpcConfig>> epc_;
    std::vector<bool> latched_;
    std::vector<int> shunt_on_;
    std::vector<MachineInit> minit_;
    std::vector<LinkInit> linit_;
    std::vector<std::size_t> load_bus_, machine_bus_, link_bus_;
    std::vector<double> scale_;
    std::size_t trip_g_ = static_cast<std::size_t>(-1);

    // Sparse rows of the bus admittance matrix.
    std::vector<std::vector<std::pair<std::size_t, Complex>>> yrows_;

    Eigen::MatrixXd jac_;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
    bool have_lu_ = false;
    double lu_dt_ = -1.0;

    SimulationTrace trace_;

    std::size_t mx(std::size_t g) const { return kMachineStates * g; }
    std::size_t lx(std::size_t k) const { return kMachineStates * ng_ + kLinkStates * k; }
    std::size_t vx(std::size_t i) const { return nx_ + 2 * i; }
    // Network phasors live in a frame rotating at the centre-of-inertia speed.
    std::size_t frame() const { return nx_ - 1; }

    void build_admittance() {
        const Eigen::MatrixXcd y = build_ybus(m_);
        yrows_.resize(nb_);
        for (std::size_t i = 0; i < nb_; ++i) {
            for (std::size_t k = 0; k < nb_; ++k) {
                const Complex v = y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
                if (v != Complex(0.0, 0.0)) {
                    yrows_[i].emplace_back(k, v);
                }
            }
        }
    }

    Eigen::VectorXd initial_state(const PowerFlowSolution& pf) {
        Eigen::VectorXd y = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ny_));
        const double sb = m_.s_base;
        minit_.resize(ng_);
        for (std::size_t g = 0; g < ng_; ++g) {
            const auto& mach = m_.machines[g];
            MachineInit& mi = minit_[g];
            mi.x_sys = mach.xd_p * sb / mach.s_rated;
            if (!mach.online) continue;
            const Complex vt = pf.v[machine_bus_[g]];
            const Complex i = std::conj(Complex(pf.machine_p[g], pf.machine_q[g]) / sb / vt);
            const Complex e = vt + Complex(0.0, mi.x_sys) * i;
            mi.p_mech0 = pf.machine_p[g];
            mi.efd0 = std::abs(e);
            mi.v_ref = std::abs(vt);
            if (mi.efd0 > mach.avr.efd_max || mi.efd0 < mach.avr.efd_min) {
                throw InfeasibleOperatingPoint("machine '" + mach.id +
                                               "': initial field voltage outside AVR limits");
            }
            const auto b = static_cast<Eigen::Index>(mx(g));
            y(b) = std::arg(e);
            y(b + 2) = mi.efd0;
        }
        linit_.resize(nl_);
        for (std::size_t k = 0; k < nl_; ++k) {
            const auto& l = m_.hvdc[k];
            const auto b = static_cast<Eigen::Index>(lx(k));
            const Complex v = pf.v[link_bus_[k]];
            if (l.kind == ConverterKind::Lcc) {
                shunt_on_[k] = pf.link_shunt_on[k];
                y(b) = l.shunt ? shunt_on_[k] * l.shunt->bank.q_step : 0.0;
            } else if (l.vsc_mode == VscMode::AcVoltage) {
                if (pf.link_q_limited[k]) {
                    // Keep the set point, but never start with a target inside the limit.
                    linit_[k].v_ref = m_.buses[link_bus_[k]].v_mag;
                    VscState st{pf.link_q[k], 0.0, linit_[k].v_ref};
                    const double target = vsc_voltage_target(l, std::abs(v), st);
                    const double q = pf.link_q[k];
                    linit_[k].q_bias = std::abs(target) < std::abs(q) ? q - target : 0.0;
                } else {
                    linit_[k].v_ref = std::abs(v);
                    linit_[k].q_bias = pf.link_q[k];
                }
                y(b) = pf.link_q[k];
            }
            y(b + 1) = std::arg(v);
        }
        for (std::size_t i = 0; i < nb_; ++i) {
            y(static_cast<Eigen::Index>(vx(i))) = pf.v[i].real();
            y(static_cast<Eigen::Index>(vx(i) + 1)) = pf.v[i].imag();
        }
        return y;
    }

    double ramp_at(std::size_t k, double t) const {
        if (!sc_.ramp || m_.hvdc[k].id != sc_.ramp->link) {
            return 0.0;
        }
        const double s = std::clamp((t - sc_.ramp->start) / sc_.ramp->duration, 0.0, 1.0);
        return s * sc_.ramp->delta_mw;
    }

    // Differential right-hand side f and algebraic current mismatch g at y.
    void evaluate(const Eigen::VectorXd& y, double t, Eigen::VectorXd* f, Eigen::VectorXd* g,
                  Outputs* out) const {
        const double sb = m_.s_base;
        const double fn = m_.f_n;
        std::vector<Complex> v(nb_);
        for (std::size_t i = 0; i < nb_; ++i) {
            v[i] = Complex(y(static_cast<Eigen::Index>(vx(i))), y(static_cast<Eigen::Index>(vx(i) + 1)));
        }
        std::vector<Complex> idev(nb_, Complex(0.0, 0.0));
        f->setZero();

        double wsum = 0.0, wdf = 0.0;
        for (std::size_t g2 = 0; g2 < ng_; ++g2) {
            if (!online_[g2]) continue;
            const auto& mach = m_.machines[g2];
            const double w = mach.h * mach.s_rated;
            wsum += w;
            wdf += w * y(static_cast<Eigen::Index>(mx(g2) + 1));
        }
        const double coi_dw = wsum > 0.0 ? wdf / wsum : 0.0;
        const double coi_df = fn * coi_dw;

        if (out) {
            out->machine_p.assign(ng_, 0.0);
            out->coi_df = coi_df;
        }
        for (std::size_t gi = 0; gi < ng_; ++gi) {
            if (!online_[gi]) continue;
            const auto& mach = m_.machines[gi];
            const MachineInit& mi = minit_[gi];
            const auto b = static_cast<Eigen::Index>(mx(gi));
            const double delta = y(b);
            const double dw = y(b + 1);
            const double efd = y(b + 2);
            const GovernorState gs{y(b + 3), y(b + 4), y(b + 5)};
            const std::size_t bus = machine_bus_[gi];
            const Complex e = std::polar(efd, delta);
            const Complex cur = (e - v[bus]) / Complex(0.0, mi.x_sys);
            idev[bus] += cur;
            const double pe = (e * std::conj(cur)).real() * sb;
            double pm = mi.p_mech0;
            if (mach.is_fcr) {
                pm += governor_output(mach.governor, gs);
                const GovernorState d = governor_derivatives(mach.governor, gs, fn * dw, mi.p_mech0);
                (*f)(b + 3) = d.reset;
                (*f)(b + 4) = d.gate;
                (*f)(b + 5) = d.turbine;
            }
            const SwingDerivatives sd = swing_derivatives(mach, pe, pm, dw, fn, coi_dw);
            (*f)(b) = sd.d_delta - kTwoPi * fn * coi_dw;
            (*f)(b + 1) = sd.d_omega;
            (*f)(b + 2) = avr_derivative(mach.avr, efd, mi.efd0, mi.v_ref - std::abs(v[bus]));
            if (out) {
                out->machine_p[gi] = (v[bus] * std::conj(cur)).real() * sb;
            }
        }

        if (out) {
            out->link_p.assign(nl_, 0.0);
            out->link_q.assign(nl_, 0.0);
            out->link_q_shunt.assign(nl_, 0.0);
            out->link_epc.assign(nl_, 0.0);
            out->link_df.assign(nl_, 0.0);
            out->link_sat.assign(nl_, 0.0);
            out->link_phi.assign(nl_, 0.0);
            out->link_vd.assign(nl_, 0.0);
            out->link_vd0.assign(nl_, 0.0);
            out->link_q_cons.assign(nl_, 0.0);
        }
        const double tf = m_.epc.filter_t;
        const double theta = y(static_cast<Eigen::Index>(frame()));
        (*f)(static_cast<Eigen::Index>(frame())) = kTwoPi * fn * coi_dw;
        for (std::size_t k = 0; k < nl_; ++k) {
            const auto& l = m_.hvdc[k];
            const auto b = static_cast<Eigen::Index>(lx(k));
            const std::size_t bus = link_bus_[k];
            const double vm = std::abs(v[bus]);
            const double lag = std::arg(v[bus] * std::polar(1.0, theta - y(b + 1)));
            (*f)(b + 1) = lag / tf;
            const double df = lag / (tf * kTwoPi);
            double epc = 0.0;
            if (epc_[k]) {
                epc = epc_power(df, *epc_[k], latched_[k]);
            }
            const double p_order = l.p0 + epc + ramp_at(k, t);
            double p = p_order;
            double q = 0.0;
            double q_sh = 0.0;
            if (l.kind == ConverterKind::Lcc) {
                const auto op = lcc_operating_point(p_order, vm, *l.lcc, lcc_mode_for(p_order), l.p_rated);
                q = -op.q;
                if (l.shunt) {
                    const double bsh = y(b);
                    q_sh = bsh * vm * vm;
                    (*f)(b) = (shunt_on_[k] * l.shunt->bank.q_step - bsh) / l.shunt->t_sw;
                }
                if (out) {
                    out->link_phi[k] = op.phi;
                    out->link_vd[k] = op.v_d;
                    out->link_vd0[k] = op.v_d0;
                    out->link_q_cons[k] = op.q;
                }
            } else {
                VscOutput vo;
                if (l.vsc_mode == VscMode::AcVoltage) {
                    const VscState st{y(b), linit_[k].q_bias, linit_[k].v_ref};
                    const double q_limit = vsc_q_capability(l, vm, p_order);
                    (*f)(b) = vsc_derivative(l, vm, q_limit, st);
                    vo = vsc_limit(l, vm, p_order, st.q_cmd);
                    vo.q_saturated = vo.q_saturated || std::abs(vsc_voltage_target(l, vm, st)) > q_limit;
                } else {
                    vo = vsc_limit(l, vm, p_order, l.q_sched);
                }
                p = vo.p;
                q = vo.q;
                if (out) out->link_sat[k] = vo.q_saturated ? 1.0 : 0.0;
            }
            idev[bus] += std::conj(Complex(p, q + q_sh) / sb / v[bus]);
            if (out) {
                out->link_p[k] = p;
                out->link_q[k] = q;
                out->link_q_shunt[k] = q_sh;
                out->link_epc[k] = epc;
                out->link_df[k] = df;
            }
        }

        for (const auto& sh : m_.shunts) {
            const std::size_t bus = m_.bus_index(sh.bus);
            idev[bus] += Complex(0.0, sh.n_on * sh.q_step / sb) * v[bus];
        }
        if (out) {
            out->load_p.assign(m_.loads.size(), 0.0);
            out->load_q.assign(m_.loads.size(), 0.0);
        }
        for (std::size_t k = 0; k < m_.loads.size(); ++k) {
            const std::size_t bus = load_bus_[k];
            const LoadPower lp = zip_load_power(m_.loads[k], std::abs(v[bus]), coi_df, fn);
            idev[bus] -= std::conj(Complex(lp.p, lp.q) / sb / v[bus]);
            if (out) {
                out->load_p[k] = lp.p;
                out->load_q[k] = lp.q;
            }
        }
        for (std::size_t i = 0; i < nb_; ++i) {
            Complex flow(0.0, 0.0);
            for (const auto& [k, yik] : yrows_[i]) {
                flow += yik * v[k];
            }
            const Complex mis = idev[i] - flow;
            (*g)(static_cast<Eigen::Index>(2 * i)) = mis.real();
            (*g)(static_cast<Eigen::Index>(2 * i + 1)) = mis.imag();
        }
    }

    // Scaled implicit-trapezoid residual for the step ending at y.
    void residual(const Eigen::VectorXd& y, const Eigen::VectorXd& y_old,
                  const Eigen::VectorXd& f_old, double dt, double t, Eigen::VectorXd& r) const {
        Eigen::VectorXd f(static_cast<Eigen::Index>(nx_));
        Eigen::VectorXd g(static_cast<Eigen::Index>(2 * nb_));
        evaluate(y, t, &f, &g, nullptr);
        r.resize(static_cast<Eigen::Index>(ny_));
        for (std::size_t i = 0; i < nx_; ++i) {
            const auto ii = static_cast<Eigen::Index>(i);
            r(ii) = (y(ii) - y_old(ii) - 0.5 * dt * (f_old(ii) + f(ii))) / scale_[i];
        }
        r.tail(static_cast<Eigen::Index>(2 * nb_)) = g;
    }

    void build_jacobian(const Eigen::VectorXd& y, const Eigen::VectorXd& y_old,
                        const Eigen::VectorXd& f_old, double dt, double t, const Eigen::VectorXd& r0) {
        const auto n = static_cast<Eigen::Index>(ny_);
        jac_.resize(n, n);
        Eigen::VectorXd yp = y;
        Eigen::VectorXd r1;
        for (Eigen::Index j = 0; j < n; ++j) {
            const double h = 1e-7 * std::max(std::abs(y(j)), scale_[static_cast<std::size_t>(j)]);
            yp(j) = y(j) + h;
            residual(yp, y_old, f_old, dt, t, r1);
            jac_.col(j) = (r1 - r0) / h;
            yp(j) = y(j);
        }
        lu_.compute(jac_);
        have_lu_ = true;
        lu_dt_ = dt;
    }

    void solve_step(Eigen::VectorXd& y, const Eigen::VectorXd& y_old, const Eigen::VectorXd& f_old,
                    double dt, double t, int& iterations, bool fresh) {
        if (fresh || lu_dt_ != dt) {
            have_lu_ = false;
        }
        Eigen::VectorXd r;
        bool rebuilt = false;
        for (iterations = 0; iterations <= cfg_.max_newton; ++iterations) {
            residual(y, y_old, f_old, dt, t, r);
            const double worst = r.lpNorm<Eigen::Infinity>();
            if (!std::isfinite(worst)) {
                throw NonConvergence("non-finite residual in the time step", t);
            }
            if (worst <= cfg_.tolerance) {
                return;
            }
            if (!have_lu_ || (iterations >= cfg_.refresh_after && !rebuilt)) {
                build_jacobian(y, y_old, f_old, dt, t, r);
                rebuilt = true;
            }
            const Eigen::VectorXd dy = lu_.solve(-r);
            if (!dy.allFinite()) {
                throw SingularJacobian("time-step Jacobian is singular at t = " + std::to_string(t));
            }
            y += dy;
        }
        std::ostringstream msg;
        msg << "time step did not converge at t = " << t << " s";
        throw NonConvergence(msg.str(), t);
    }

    void apply_trip() {
        online_[trip_g_] = false;
        have_lu_ = false;
    }

    bool update_discrete(const Outputs& out) {
        bool changed = false;
        for (std::size_t k = 0; k < nl_; ++k) {
            const auto& l = m_.hvdc[k];
            if (l.shunt) {
                ShuntState s;
                s.n_on = shunt_on_[k];
                if (shunt_switch(*l.shunt, out.link_q_cons[k], s)) {
                    shunt_on_[k] = s.n_on;
                    changed = true;
                }
            }
            if (epc_[k] && epc_[k]->latch && !latched_[k] && out.link_df[k] <= epc_[k]->f_activ) {
                latched_[k] = true;
                changed = true;
                have_lu_ = false;
            }
        }
        return changed;
    }

    void init_trace() {
        trace_ = SimulationTrace{};
        trace_.f_n = m_.f_n;
        trace_.dt = cfg_.dt * cfg_.record_every;
        trace_.label = sc_.label;
        trace_.trip_time = sc_.disturbance.machine.empty() ? -1.0 : sc_.disturbance.trip_time;
        for (const auto& mach : m_.machines) trace_.machine_ids.push_back(mach.id);
        for (const auto& b : m_.buses) trace_.bus_ids.push_back(b.id);
        for (const auto& l : m_.hvdc) trace_.link_ids.push_back(l.id);
        for (std::size_t k = 0; k < m_.loads.size(); ++k) {
            trace_.load_ids.push_back(m_.loads[k].bus + "#" + std::to_string(k));
        }
        trace_.machine_df.resize(ng_);
        trace_.machine_p.resize(ng_);
        trace_.bus_v.resize(nb_);
        for (auto* s : {&trace_.link_p, &trace_.link_q, &trace_.link_q_shunt, &trace_.link_epc,
                        &trace_.link_df, &trace_.link_q_saturated, &trace_.link_shunt_on,
                        &trace_.link_phi, &trace_.link_vd, &trace_.link_vd0}) {
            s->resize(nl_);
        }
        trace_.load_p.resize(m_.loads.size());
        trace_.load_q.resize(m_.loads.size());
    }

    void record(double t, const Eigen::VectorXd& y, const Outputs& out, int iters) {
        trace_.t.push_back(t);
        std::vector<Complex> v(nb_);
        for (std::size_t i = 0; i < nb_; ++i) {
            v[i] = Complex(y(static_cast<Eigen::Index>(vx(i))), y(static_cast<Eigen::Index>(vx(i) + 1)));
            trace_.bus_v[i].push_back(std::abs(v[i]));
        }
        double gen = 0.0, ek = 0.0;
        for (std::size_t g = 0; g < ng_; ++g) {
            trace_.machine_df[g].push_back(online_[g] ? m_.f_n * y(static_cast<Eigen::Index>(mx(g) + 1)) : 0.0);
            trace_.machine_p[g].push_back(out.machine_p[g]);
            gen += out.machine_p[g];
            if (online_[g]) ek += m_.machines[g].h * m_.machines[g].s_rated / 1000.0;
        }
        trace_.coi_df.push_back(out.coi_df);
        double hvdc = 0.0;
        for (std::size_t k = 0; k < nl_; ++k) {
            trace_.link_p[k].push_back(out.link_p[k]);
            trace_.link_q[k].push_back(out.link_q[k]);
            trace_.link_q_shunt[k].push_back(out.link_q_shunt[k]);
            trace_.link_epc[k].push_back(out.link_epc[k]);
            trace_.link_df[k].push_back(out.link_df[k]);
            trace_.link_q_saturated[k].push_back(out.link_sat[k]);
            trace_.link_shunt_on[k].push_back(shunt_on_[k]);
            trace_.link_phi[k].push_back(out.link_phi[k]);
            trace_.link_vd[k].push_back(out.link_vd[k]);
            trace_.link_vd0[k].push_back(out.link_vd0[k]);
            hvdc += out.link_p[k];
        }
        double lp = 0.0, lq = 0.0;
        for (std::size_t k = 0; k < m_.loads.size(); ++k) {
            trace_.load_p[k].push_back(out.load_p[k]);
            trace_.load_q[k].push_back(out.load_q[k]);
            lp += out.load_p[k];
            lq += out.load_q[k];
        }
        trace_.total_load_p.push_back(lp);
        trace_.total_load_q.push_back(lq);
        const double loss = total_losses(m_, v);
        trace_.losses.push_back(loss);
        trace_.balance_residual.push_back((gen + hvdc - lp - loss) / m_.s_base);
        trace_.kinetic_energy.push_back(ek);
        trace_.newton_iterations.push_back(iters);
    }
};

}  // namespace

SimulationTrace run_simulation(const NetworkModel& model, const Scenario& scenario,
                               const std::vector<EpcConfig>& epc, const SimulationConfig& config) {
    if (!(config.dt > 0.0) || config.record_every < 1) {
        throw ModelError("simulation config: dt must be positive and record_every >= 1");
    }
    Engine engine(model, scenario, epc, config);
    return engine.run();
}

void write_trace_csv(const SimulationTrace& tr, std::ostream& out) {
    out << std::setprecision(12);
    out << "t_s,coi_df_Hz,total_load_p_MW,total_load_q_MVAr,losses_MW,balance_residual_pu,"
           "kinetic_energy_GWs";
    for (const auto& id : tr.machine_ids) out << ",machine_" << id << "_df_Hz,machine_" << id << "_p_MW";
    for (const auto& id : tr.bus_ids) out << ",bus_" << id << "_v_pu";
    for (const auto& id : tr.link_ids) {
        out << ",link_" << id << "_p_MW,link_" << id << "_q_MVAr,link_" << id << "_q_shunt_MVAr,link_"
            << id << "_epc_MW,link_" << id << "_df_Hz,link_" << id << "_q_saturated";
    }
    for (const auto& id : tr.load_ids) out << ",load_" << id << "_p_MW,load_" << id << "_q_MVAr";
    out << '\n';
    for (std::size_t s = 0; s < tr.size(); ++s) {
        out << tr.t[s] << ',' << tr.coi_df[s] << ',' << tr.total_load_p[s] << ',' << tr.total_load_q[s]
            << ',' << tr.losses[s] << ',' << tr.balance_residual[s] << ',' << tr.kinetic_energy[s];
        for (std::size_t g = 0; g < tr.machine_ids.size(); ++g) {
            out << ',' << tr.machine_df[g][s] << ',' << tr.machine_p[g][s];
        }
        for (std::size_t i = 0; i < tr.bus_ids.size(); ++i) out << ',' << tr.bus_v[i][s];
        for (std::size_t k = 0; k < tr.link_ids.size(); ++k) {
            out << ',' << tr.link_p[k][s] << ',' << tr.link_q[k][s] << ',' << tr.link_q_shunt[k][s] << ','
                << tr.link_epc[k][s] << ',' << tr.link_df[k][s] << ',' << tr.link_q_saturated[k][s];
        }
        for (std::size_t k = 0; k < tr.load_ids.size(); ++k) {
            out << ',' << tr.load_p[k][s] << ',' << tr.load_q[k][s];
        }
        out << '\n';
    }
}

}  // namespace gridfreq
