#include "gridfreq/powerflow.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gridfreq/error.hpp"

namespace gridfreq {

namespace {

constexpr Complex kJ{0.0, 1.0};

struct BranchAdmittance {
    Complex y_series;
    Complex yff, yft, ytf, ytt;
};

BranchAdmittance branch_admittance(const Branch& br) {
    BranchAdmittance a;
    a.y_series = 1.0 / Complex(br.r, br.x);
    const Complex ysh(0.0, 0.5 * br.b_sh);
    a.yff = (a.y_series + ysh) / (br.tap * br.tap);
    a.ytt = a.y_series + ysh;
    a.yft = -a.y_series / br.tap;
    a.ytf = -a.y_series / br.tap;
    return a;
}

}  // namespace

Eigen::MatrixXcd build_ybus(const NetworkModel& model) {
    const auto n = static_cast<Eigen::Index>(model.buses.size());
    Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(n, n);
    for (const auto& br : model.branches) {
        const auto f = static_cast<Eigen::Index>(model.bus_index(br.from));
        const auto t = static_cast<Eigen::Index>(model.bus_index(br.to));
        const auto a = branch_admittance(br);
        y(f, f) += a.yff;
        y(t, t) += a.ytt;
        y(f, t) += a.yft;
        y(t, f) += a.ytf;
    }
    return y;
}

// ---------------------------------------------------------------------------
// Power flow

namespace {

enum class BusType { Pq, Pv, Slack };

// Voltage-dependent injections seen by the power flow at one bus, pu.
struct PfBusDevices {
    double p_fixed = 0.0;
    double q_fixed = 0.0;
    double b_shunt = 0.0;  // pu at 1 pu
    std::vector<std::size_t> loads;
    std::vector<std::size_t> lcc_links;
    std::vector<std::size_t> vsc_voltage_links;
};

class PowerFlowProblem {
public:
    PowerFlowProblem(const NetworkModel& model, const PowerFlowOptions& options)
        : m_(model), opt_(options), n_(model.buses.size()), y_(build_ybus(model)) {
        shunt_on_.assign(model.hvdc.size(), 0);
        vsc_limited_.assign(model.hvdc.size(), 0);
        for (std::size_t k = 0; k < model.hvdc.size(); ++k) {
            if (model.hvdc[k].shunt) {
                shunt_on_[k] = model.hvdc[k].shunt->bank.n_on;
            }
        }
    }

    PowerFlowSolution solve() {
        std::vector<Complex> v = initial_guess(false);
        int total_iterations = 0;
        for (int outer = 0; outer < 25; ++outer) {
            setup_buses();
            int iterations = 0;
            if (!newton(v, iterations)) {
                if (!opt_.flat_start_fallback) {
                    throw NonConvergence("power flow did not converge in " +
                                         std::to_string(opt_.max_iterations) + " iterations");
                }
                v = initial_guess(true);
                iterations = 0;
                if (!newton(v, iterations)) {
                    throw NonConvergence("power flow did not converge from flat start either");
                }
            }
            total_iterations += iterations;
            if (!update_discrete(v)) {
                return finish(v, total_iterations);
            }
        }
        throw NonConvergence("power flow: converter limits and filter banks did not settle");
    }

private:
    const NetworkModel& m_;
    PowerFlowOptions opt_;
    std::size_t n_;
    Eigen::MatrixXcd y_;
    std::vector<BusType> type_;
    std::vector<PfBusDevices> dev_;
    std::vector<double> p_spec_base_;
    std::vector<int> shunt_on_;
    // +1 / -1 when a voltage-controlling VSC is held at its upper / lower limit.
    std::vector<int> vsc_limited_;
    std::size_t slack_bus_ = 0;

    std::vector<Complex> initial_guess(bool flat) const {
        std::vector<Complex> v(n_);
        for (std::size_t i = 0; i < n_; ++i) {
            const auto& b = m_.buses[i];
            const double mag = flat && !is_voltage_controlled(i) ? 1.0 : b.v_mag;
            const double ang = flat && i != slack_bus_ ? 0.0 : b.v_ang;
            v[i] = std::polar(mag, ang);
        }
        return v;
    }

    bool is_voltage_controlled(std::size_t bus) const {
        for (const auto& mach : m_.machines) {
            if (mach.online && m_.bus_index(mach.bus) == bus) {
                return true;
            }
        }
        return false;
    }

    void setup_buses() {
        type_.assign(n_, BusType::Pq);
        dev_.assign(n_, PfBusDevices{});
        p_spec_base_.assign(n_, 0.0);
        const double sb = m_.s_base;
        for (const auto& mach : m_.machines) {
            if (!mach.online) {
                continue;
            }
            const std::size_t b = m_.bus_index(mach.bus);
            if (mach.slack) {
                type_[b] = BusType::Slack;
                slack_bus_ = b;
            } else {
                if (type_[b] != BusType::Slack) {
                    type_[b] = BusType::Pv;
                }
                p_spec_base_[b] += mach.p_mech / sb;
            }
        }
        for (std::size_t k = 0; k < m_.loads.size(); ++k) {
            dev_[m_.bus_index(m_.loads[k].bus)].loads.push_back(k);
        }
        for (const auto& sh : m_.shunts) {
            dev_[m_.bus_index(sh.bus)].b_shunt += sh.n_on * sh.q_step / sb;
        }
        for (std::size_t k = 0; k < m_.hvdc.size(); ++k) {
            const auto& l = m_.hvdc[k];
            const std::size_t b = m_.bus_index(l.bus);
            p_spec_base_[b] += l.p0 / sb;
            if (l.kind == ConverterKind::Lcc) {
                dev_[b].lcc_links.push_back(k);
                dev_[b].b_shunt += shunt_on_[k] * l.shunt->bank.q_step / sb;
            } else if (l.vsc_mode == VscMode::AcVoltage && vsc_limited_[k] == 0) {
                dev_[b].vsc_voltage_links.push_back(k);
                if (type_[b] == BusType::Pq) {
                    type_[b] = BusType::Pv;
                }
            } else if (l.vsc_mode == VscMode::AcVoltage) {
                // Held at its limit; handled as a voltage-dependent PQ injection.
                dev_[b].vsc_voltage_links.push_back(k);
            } else {
                dev_[b].q_fixed += l.q_sched / sb;
            }
        }
    }

    // Converter, shunt and load injections at bus `i` for magnitude `vm`, pu.
    // VSC links that still regulate are excluded (their Q is the unknown).
    Complex device_injection(std::size_t i, double vm) const {
        const double sb = m_.s_base;
        const auto& d = dev_[i];
        double p = p_spec_base_[i];
        double q = d.q_fixed + d.b_shunt * vm * vm;
        for (std::size_t k : d.loads) {
            const LoadPower lp = zip_load_power(m_.loads[k], vm, 0.0, m_.f_n);
            p -= lp.p / sb;
            q -= lp.q / sb;
        }
        for (std::size_t k : d.lcc_links) {
            const auto& l = m_.hvdc[k];
            const auto op = lcc_operating_point(l.p0, vm, *l.lcc, lcc_mode_for(l.p0), l.p_rated);
            q -= op.q / sb;
        }
        for (std::size_t k : d.vsc_voltage_links) {
            if (vsc_limited_[k] != 0) {
                q += vsc_limited_[k] * vsc_q_capability(m_.hvdc[k], vm, m_.hvdc[k].p0) / sb;
            }
        }
        return {p, q};
    }

    bool newton(std::vector<Complex>& v, int& iterations) {
        // Unknown layout: angles of non-slack buses, then magnitudes of PQ buses.
        std::vector<int> ang_idx(n_, -1), mag_idx(n_, -1);
        int nu = 0;
        for (std::size_t i = 0; i < n_; ++i) {
            if (type_[i] != BusType::Slack) {
                ang_idx[i] = nu++;
            }
        }
        for (std::size_t i = 0; i < n_; ++i) {
            if (type_[i] == BusType::Pq) {
                mag_idx[i] = nu++;
            }
        }
        const double target = std::min(opt_.tolerance, 1e-11);
        double best = std::numeric_limits<double>::infinity();
        int stalls = 0;
        for (iterations = 0; iterations <= opt_.max_iterations; ++iterations) {
            Eigen::VectorXcd vv(static_cast<Eigen::Index>(n_));
            for (std::size_t i = 0; i < n_; ++i) {
                vv(static_cast<Eigen::Index>(i)) = v[i];
            }
            const Eigen::VectorXcd ibus = y_ * vv;
            Eigen::VectorXd f(nu);
            double worst = 0.0;
            for (std::size_t i = 0; i < n_; ++i) {
                const Complex s_calc = v[i] * std::conj(ibus(static_cast<Eigen::Index>(i)));
                const Complex s_spec = device_injection(i, std::abs(v[i]));
                if (ang_idx[i] >= 0) {
                    f(ang_idx[i]) = s_spec.real() - s_calc.real();
                    worst = std::max(worst, std::abs(f(ang_idx[i])));
                }
                if (mag_idx[i] >= 0) {
                    f(mag_idx[i]) = s_spec.imag() - s_calc.imag();
                    worst = std::max(worst, std::abs(f(mag_idx[i])));
                }
            }
            if (!std::isfinite(worst)) {
                return false;
            }
            if (worst <= target || (worst <= opt_.tolerance && stalls >= 2)) {
                return true;
            }
            if (worst < 0.5 * best) {
                stalls = 0;
            } else {
                ++stalls;
            }
            best = std::min(best, worst);
            if (iterations == opt_.max_iterations) {
                break;
            }

            // dS/dVa = j diag(V) conj(diag(I) - Y diag(V)),
            // dS/dVm = diag(V) conj(Y diag(Vn)) + conj(diag(I)) diag(Vn).
            Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(nu, nu);
            for (std::size_t i = 0; i < n_; ++i) {
                const int ri_p = ang_idx[i];
                const int ri_q = mag_idx[i];
                if (ri_p < 0 && ri_q < 0) {
                    continue;
                }
                const auto ii = static_cast<Eigen::Index>(i);
                for (std::size_t k = 0; k < n_; ++k) {
                    const auto kk = static_cast<Eigen::Index>(k);
                    const Complex yik = y_(ii, kk);
                    const Complex vn_k = v[k] / std::abs(v[k]);
                    Complex ds_da = kJ * v[i] * std::conj(-yik * v[k]);
                    Complex ds_dm = v[i] * std::conj(yik * vn_k);
                    if (i == k) {
                        ds_da += kJ * v[i] * std::conj(ibus(ii));
                        ds_dm += std::conj(ibus(ii)) * vn_k;
                    }
                    if (ang_idx[k] >= 0) {
                        if (ri_p >= 0) jac(ri_p, ang_idx[k]) = ds_da.real();
                        if (ri_q >= 0) jac(ri_q, ang_idx[k]) = ds_da.imag();
                    }
                    if (mag_idx[k] >= 0) {
                        if (ri_p >= 0) jac(ri_p, mag_idx[k]) = ds_dm.real();
                        if (ri_q >= 0) jac(ri_q, mag_idx[k]) = ds_dm.imag();
                    }
                }
                if (ri_q >= 0) {
                    // Voltage dependence of loads, converters and shunts.
                    const double vm = std::abs(v[i]);
                    const double h = 1e-6;
                    const Complex dspec =
                        (device_injection(i, vm + h) - device_injection(i, vm - h)) / (2.0 * h);
                    if (ri_p >= 0) jac(ri_p, ri_q) -= dspec.real();
                    jac(ri_q, ri_q) -= dspec.imag();
                }
            }
            Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
            if (!lu.isInvertible()) {
                throw SingularJacobian("power flow Jacobian is singular");
            }
            const Eigen::VectorXd dx = lu.solve(f);
            for (std::size_t i = 0; i < n_; ++i) {
                double va = std::arg(v[i]);
                double vm = std::abs(v[i]);
                if (ang_idx[i] >= 0) va += dx(ang_idx[i]);
                if (mag_idx[i] >= 0) vm += dx(mag_idx[i]);
                if (!(vm > 0.0)) {
                    return false;
                }
                v[i] = std::polar(vm, va);
            }
        }
        return false;
    }

    // Reactive power the regulating VSC links at bus `i` must supply, pu.
    double regulating_vsc_q(std::size_t i, const std::vector<Complex>& v) const {
        Complex ibus(0.0, 0.0);
        for (std::size_t k = 0; k < n_; ++k) {
            ibus += y_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) * v[k];
        }
        const Complex s_calc = v[i] * std::conj(ibus);
        return s_calc.imag() - device_injection(i, std::abs(v[i])).imag();
    }

    // Re-evaluates converter limits and filter steps; true if anything changed.
    bool update_discrete(const std::vector<Complex>& v) {
        bool changed = false;
        for (std::size_t i = 0; i < n_; ++i) {
            double rating = 0.0;
            std::vector<std::size_t> regulating;
            for (std::size_t k : dev_[i].vsc_voltage_links) {
                if (vsc_limited_[k] == 0) {
                    regulating.push_back(k);
                    rating += m_.hvdc[k].p_rated;
                }
            }
            if (regulating.empty() || type_[i] == BusType::Slack) {
                continue;
            }
            const double q_total = regulating_vsc_q(i, v) * m_.s_base;
            for (std::size_t k : regulating) {
                const double share = q_total * m_.hvdc[k].p_rated / rating;
                const double cap = vsc_q_capability(m_.hvdc[k], std::abs(v[i]), m_.hvdc[k].p0);
                if (std::abs(share) > cap) {
                    vsc_limited_[k] = share > 0.0 ? 1 : -1;
                    changed = true;
                }
            }
        }
        for (std::size_t k = 0; k < m_.hvdc.size(); ++k) {
            const auto& l = m_.hvdc[k];
            if (!l.shunt) {
                continue;
            }
            const double vm = std::abs(v[m_.bus_index(l.bus)]);
            const double q = lcc_operating_point(l.p0, vm, *l.lcc, lcc_mode_for(l.p0), l.p_rated).q;
            ShuntState s;
            s.n_on = shunt_on_[k];
            shunt_switch(*l.shunt, q, s);
            if (s.n_on != shunt_on_[k]) {
                shunt_on_[k] = s.n_on;
                changed = true;
            }
        }
        return changed;
    }

    PowerFlowSolution finish(const std::vector<Complex>& v, int iterations) const {
        const double sb = m_.s_base;
        PowerFlowSolution sol;
        sol.v = v;
        sol.iterations = iterations;
        for (const auto& x : v) {
            sol.v_mag.push_back(std::abs(x));
            sol.v_ang.push_back(std::arg(x));
        }
        Eigen::VectorXcd vv(static_cast<Eigen::Index>(n_));
        for (std::size_t i = 0; i < n_; ++i) {
            vv(static_cast<Eigen::Index>(i)) = v[i];
        }
        const Eigen::VectorXcd ibus = y_ * vv;
        std::vector<Complex> s_net(n_);
        for (std::size_t i = 0; i < n_; ++i) {
            s_net[i] = v[i] * std::conj(ibus(static_cast<Eigen::Index>(i)));
        }

        // Link injections.
        sol.link_p.assign(m_.hvdc.size(), 0.0);
        sol.link_q.assign(m_.hvdc.size(), 0.0);
        sol.link_q_shunt.assign(m_.hvdc.size(), 0.0);
        sol.link_shunt_on.assign(m_.hvdc.size(), 0);
        sol.link_q_limited.assign(m_.hvdc.size(), false);
        std::vector<double> q_known(n_, 0.0);  // MVAr from everything but machines / regulating VSC
        std::vector<double> p_known(n_, 0.0);
        for (std::size_t i = 0; i < n_; ++i) {
            const double vm = std::abs(v[i]);
            for (std::size_t k : dev_[i].loads) {
                const LoadPower lp = zip_load_power(m_.loads[k], vm, 0.0, m_.f_n);
                p_known[i] -= lp.p;
                q_known[i] -= lp.q;
            }
        }
        for (const auto& sh : m_.shunts) {
            const std::size_t b = m_.bus_index(sh.bus);
            q_known[b] += sh.n_on * sh.q_step * sol.v_mag[b] * sol.v_mag[b];
        }
        for (std::size_t k = 0; k < m_.hvdc.size(); ++k) {
            const auto& l = m_.hvdc[k];
            const std::size_t b = m_.bus_index(l.bus);
            const double vm = sol.v_mag[b];
            sol.link_p[k] = l.p0;
            p_known[b] += l.p0;
            if (l.kind == ConverterKind::Lcc) {
                sol.link_q[k] = -lcc_operating_point(l.p0, vm, *l.lcc, lcc_mode_for(l.p0), l.p_rated).q;
                sol.link_shunt_on[k] = shunt_on_[k];
                sol.link_q_shunt[k] = shunt_on_[k] * l.shunt->bank.q_step * vm * vm;
                q_known[b] += sol.link_q[k] + sol.link_q_shunt[k];
            } else if (l.vsc_mode == VscMode::ReactivePower) {
                sol.link_q[k] = l.q_sched;
                q_known[b] += l.q_sched;
            } else if (vsc_limited_[k] != 0) {
                sol.link_q[k] = vsc_limited_[k] * vsc_q_capability(l, vm, l.p0);
                sol.link_q_limited[k] = true;
                q_known[b] += sol.link_q[k];
            }
        }
        for (std::size_t i = 0; i < n_; ++i) {
            double rating = 0.0;
            for (std::size_t k : dev_[i].vsc_voltage_links) {
                if (vsc_limited_[k] == 0) rating += m_.hvdc[k].p_rated;
            }
            if (rating == 0.0) continue;
            const double q_total = s_net[i].imag() * sb - q_known[i];
            for (std::size_t k : dev_[i].vsc_voltage_links) {
                if (vsc_limited_[k] == 0) {
                    sol.link_q[k] = q_total * m_.hvdc[k].p_rated / rating;
                }
            }
        }

        // Machines: non-slack run at dispatch, the slack closes the balance; Q by rating.
        sol.machine_p.assign(m_.machines.size(), 0.0);
        sol.machine_q.assign(m_.machines.size(), 0.0);
        std::vector<double> rating(n_, 0.0), p_fixed_gen(n_, 0.0);
        for (std::size_t g = 0; g < m_.machines.size(); ++g) {
            const auto& mach = m_.machines[g];
            if (!mach.online) continue;
            const std::size_t b = m_.bus_index(mach.bus);
            rating[b] += mach.s_rated;
            if (!mach.slack) {
                sol.machine_p[g] = mach.p_mech;
                p_fixed_gen[b] += mach.p_mech;
            }
        }
        for (std::size_t g = 0; g < m_.machines.size(); ++g) {
            const auto& mach = m_.machines[g];
            if (!mach.online) continue;
            const std::size_t b = m_.bus_index(mach.bus);
            if (mach.slack) {
                sol.machine_p[g] = s_net[b].real() * sb - p_known[b] - p_fixed_gen[b];
            }
            sol.machine_q[g] = (s_net[b].imag() * sb - q_known[b]) * mach.s_rated / rating[b];
        }
        for (std::size_t k = 0; k < m_.loads.size(); ++k) {
            const LoadPower lp = zip_load_power(m_.loads[k], sol.v_mag[m_.bus_index(m_.loads[k].bus)], 0.0, m_.f_n);
            sol.load_p.push_back(lp.p);
            sol.load_q.push_back(lp.q);
        }
        sol.losses_mw = total_losses(m_, v);

        // Mismatch over every bus, with machine and regulating-VSC outputs as found.
        double worst = 0.0;
        std::vector<Complex> s_dev(n_);
        for (std::size_t i = 0; i < n_; ++i) s_dev[i] = Complex(p_known[i], q_known[i]);
        for (std::size_t g = 0; g < m_.machines.size(); ++g) {
            if (!m_.machines[g].online) continue;
            s_dev[m_.bus_index(m_.machines[g].bus)] += Complex(sol.machine_p[g], sol.machine_q[g]);
        }
        for (std::size_t k = 0; k < m_.hvdc.size(); ++k) {
            const auto& l = m_.hvdc[k];
            if (l.kind == ConverterKind::Vsc && l.vsc_mode == VscMode::AcVoltage && vsc_limited_[k] == 0) {
                s_dev[m_.bus_index(l.bus)] += Complex(0.0, sol.link_q[k]);
            }
        }
        for (std::size_t i = 0; i < n_; ++i) {
            worst = std::max(worst, std::abs(s_dev[i] / sb - s_net[i]));
        }
        sol.max_mismatch = worst;
        return sol;
    }
};

}  // namespace

PowerFlowSolution solve_power_flow(const NetworkModel& model, const PowerFlowOptions& options) {
    model.validate();
    PowerFlowProblem problem(model, options);
    return problem.solve();
}

// ---------------------------------------------------------------------------
// Network equations shared by the dynamic solution

NetworkEquations::NetworkEquations(const NetworkModel& model)
    : model_(&model), n_(model.buses.size()), ybus_(build_ybus(model)) {
    for (const auto& l : model.loads) {
        load_bus_.push_back(model.bus_index(l.bus));
    }
}

LoadPower NetworkEquations::load_power(std::size_t k, const std::vector<Complex>& v,
                                       const std::vector<double>& df) const {
    const std::size_t b = load_bus_[k];
    return zip_load_power(model_->loads[k], std::abs(v[b]), df.empty() ? 0.0 : df[b], model_->f_n);
}

void NetworkEquations::current_mismatch(const std::vector<Complex>& v,
                                        const std::vector<Complex>& i_dev,
                                        const std::vector<double>& df,
                                        std::vector<Complex>& out) const {
    out.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) {
        Complex flow(0.0, 0.0);
        const auto ii = static_cast<Eigen::Index>(i);
        for (std::size_t k = 0; k < n_; ++k) {
            const Complex y = ybus_(ii, static_cast<Eigen::Index>(k));
            if (y != Complex(0.0, 0.0)) {
                flow += y * v[k];
            }
        }
        out[i] = i_dev[i] - flow;
    }
    const double sb = model_->s_base;
    for (std::size_t k = 0; k < load_bus_.size(); ++k) {
        const std::size_t b = load_bus_[k];
        const LoadPower lp = load_power(k, v, df);
        out[b] -= std::conj(Complex(lp.p, lp.q) / sb / v[b]);
    }
}

LoadPower NetworkEquations::total_load(const std::vector<Complex>& v,
                                       const std::vector<double>& df) const {
    LoadPower tot;
    for (std::size_t k = 0; k < load_bus_.size(); ++k) {
        const LoadPower lp = load_power(k, v, df);
        tot.p += lp.p;
        tot.q += lp.q;
    }
    return tot;
}

Complex machine_current(const SynchronousMachine& machine, Complex emf, Complex v_term,
                        double s_base) {
    const double x_sys = machine.xd_p * s_base / machine.s_rated;
    return (emf - v_term) / Complex(0.0, x_sys);
}

// ---------------------------------------------------------------------------
// Stand-alone algebraic solve

namespace {

// Current injected at bus `i` by everything except the branch network.
Complex local_injection(const NetworkModel& model, const NetworkEquations& eq,
                        const StepInjections& inj, const std::vector<std::vector<std::size_t>>& machines_at,
                        const std::vector<std::vector<std::size_t>>& loads_at, std::size_t i, Complex vi) {
    const double sb = model.s_base;
    Complex cur(0.0, 0.0);
    for (std::size_t g : machines_at[i]) {
        if (inj.machine_online[g]) {
            cur += machine_current(model.machines[g], inj.machine_emf[g], vi, sb);
        }
    }
    cur += std::conj(Complex(inj.p_inj[i], inj.q_inj[i]) / sb / vi);
    // Capacitive bank: injects b |v|^2 MVAr.
    cur += Complex(0.0, -inj.shunt_b[i] / sb) * vi;
    const double df = inj.df.empty() ? 0.0 : inj.df[i];
    for (std::size_t k : loads_at[i]) {
        const LoadPower lp = zip_load_power(model.loads[k], std::abs(vi), df, model.f_n);
        cur -= std::conj(Complex(lp.p, lp.q) / sb / vi);
    }
    (void)eq;
    return cur;
}

}  // namespace

std::vector<Complex> network_step_solve(const NetworkModel& model, const StepInjections& inj,
                                        const std::vector<Complex>& v_guess,
                                        const StepSolveOptions& options) {
    const std::size_t n = model.buses.size();
    if (inj.p_inj.size() != n || inj.q_inj.size() != n || inj.shunt_b.size() != n ||
        inj.machine_emf.size() != model.machines.size() ||
        inj.machine_online.size() != model.machines.size()) {
        throw ModelError("network_step_solve: injection vectors do not match the model");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(inj.p_inj[i]) || !std::isfinite(inj.q_inj[i])) {
            throw ModelError("network_step_solve: non-finite injection");
        }
    }
    const NetworkEquations eq(model);
    std::vector<std::vector<std::size_t>> machines_at(n), loads_at(n);
    for (std::size_t g = 0; g < model.machines.size(); ++g) {
        machines_at[model.bus_index(model.machines[g].bus)].push_back(g);
    }
    for (std::size_t k = 0; k < model.loads.size(); ++k) {
        loads_at[model.bus_index(model.loads[k].bus)].push_back(k);
    }
    const auto& y = eq.ybus();
    const auto nn = static_cast<Eigen::Index>(2 * n);

    auto attempt = [&](std::vector<Complex> v) -> std::optional<std::vector<Complex>> {
        for (int it = 0; it <= options.max_iterations; ++it) {
            Eigen::VectorXd r(nn);
            double worst = 0.0;
            std::vector<Complex> local(n);
            for (std::size_t i = 0; i < n; ++i) {
                Complex flow(0.0, 0.0);
                for (std::size_t k = 0; k < n; ++k) {
                    flow += y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) * v[k];
                }
                local[i] = local_injection(model, eq, inj, machines_at, loads_at, i, v[i]);
                const Complex mis = local[i] - flow;
                r(static_cast<Eigen::Index>(2 * i)) = mis.real();
                r(static_cast<Eigen::Index>(2 * i + 1)) = mis.imag();
                worst = std::max(worst, std::abs(v[i] * std::conj(mis)));
            }
            if (!std::isfinite(worst)) {
                return std::nullopt;
            }
            if (worst <= std::min(options.tolerance, 1e-12)) {
                return v;
            }
            if (it == options.max_iterations) {
                return worst <= options.tolerance ? std::optional(v) : std::nullopt;
            }
            Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(nn, nn);
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t k = 0; k < n; ++k) {
                    const Complex yik = y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
                    const auto ri = static_cast<Eigen::Index>(2 * i);
                    const auto ck = static_cast<Eigen::Index>(2 * k);
                    jac(ri, ck) -= yik.real();
                    jac(ri, ck + 1) += yik.imag();
                    jac(ri + 1, ck) -= yik.imag();
                    jac(ri + 1, ck + 1) -= yik.real();
                }
                const double h = 1e-7;
                const Complex de = (local_injection(model, eq, inj, machines_at, loads_at, i, v[i] + h) - local[i]) / h;
                const Complex df = (local_injection(model, eq, inj, machines_at, loads_at, i, v[i] + Complex(0.0, h)) - local[i]) / h;
                const auto ri = static_cast<Eigen::Index>(2 * i);
                jac(ri, ri) += de.real();
                jac(ri + 1, ri) += de.imag();
                jac(ri, ri + 1) += df.real();
                jac(ri + 1, ri + 1) += df.imag();
            }
            Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac);
            const Eigen::VectorXd dx = lu.solve(-r);
            if (!dx.allFinite()) {
                throw SingularJacobian("network step Jacobian is singular");
            }
            for (std::size_t i = 0; i < n; ++i) {
                v[i] += Complex(dx(static_cast<Eigen::Index>(2 * i)), dx(static_cast<Eigen::Index>(2 * i + 1)));
            }
        }
        return std::nullopt;
    };

    if (auto v = attempt(v_guess)) {
        return *v;
    }
    std::vector<Complex> flat(n, Complex(1.0, 0.0));
    if (auto v = attempt(flat)) {
        return *v;
    }
    throw NonConvergence("network step solve did not converge");
}

StepInjections injections_from_power_flow(const NetworkModel& model, const PowerFlowSolution& pf) {
    const std::size_t n = model.buses.size();
    const double sb = model.s_base;
    StepInjections inj;
    inj.p_inj.assign(n, 0.0);
    inj.q_inj.assign(n, 0.0);
    inj.shunt_b.assign(n, 0.0);
    inj.df.assign(n, 0.0);
    for (std::size_t g = 0; g < model.machines.size(); ++g) {
        const auto& m = model.machines[g];
        inj.machine_online.push_back(m.online);
        if (!m.online) {
            inj.machine_emf.emplace_back(0.0, 0.0);
            continue;
        }
        const Complex vt = pf.v[model.bus_index(m.bus)];
        const Complex i = std::conj(Complex(pf.machine_p[g], pf.machine_q[g]) / sb / vt);
        inj.machine_emf.push_back(vt + Complex(0.0, m.xd_p * sb / m.s_rated) * i);
    }
    for (std::size_t k = 0; k < model.hvdc.size(); ++k) {
        const auto& l = model.hvdc[k];
        const std::size_t b = model.bus_index(l.bus);
        inj.p_inj[b] += pf.link_p[k];
        inj.q_inj[b] += pf.link_q[k];
        if (l.shunt) {
            inj.shunt_b[b] += pf.link_shunt_on[k] * l.shunt->bank.q_step;
        }
    }
    for (const auto& sh : model.shunts) {
        inj.shunt_b[model.bus_index(sh.bus)] += sh.n_on * sh.q_step;
    }
    return inj;
}

double total_losses(const NetworkModel& model, const std::vector<Complex>& v) {
    double loss = 0.0;
    for (const auto& f : branch_flows(model, v)) {
        loss += f.loss_mw;
    }
    return loss;
}

std::vector<BranchFlow> branch_flows(const NetworkModel& model, const std::vector<Complex>& v) {
    std::vector<BranchFlow> flows;
    flows.reserve(model.branches.size());
    for (const auto& br : model.branches) {
        const Complex vf = v[model.bus_index(br.from)];
        const Complex vt = v[model.bus_index(br.to)];
        const auto a = branch_admittance(br);
        const Complex i_f = a.yff * vf + a.yft * vt;
        const Complex i_t = a.ytf * vf + a.ytt * vt;
        const Complex i_s = (vf / br.tap - vt) * a.y_series;
        BranchFlow bf;
        bf.s_from = vf * std::conj(i_f) * model.s_base;
        bf.s_to = vt * std::conj(i_t) * model.s_base;
        bf.loss_mw = std::norm(i_s) * br.r * model.s_base;
        flows.push_back(bf);
    }
    return flows;
}

}  // namespace gridfreq
