#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "gridfreq/model.hpp"

namespace gridfreq {

using Complex = std::complex<double>;

/// Bus admittance matrix of the branch set (pu on s_base). Machines, loads and
/// converters are not included.
Eigen::MatrixXcd build_ybus(const NetworkModel& model);

struct PowerFlowOptions {
    int max_iterations = 30;
    double tolerance = 1e-8;  // pu power mismatch
    bool flat_start_fallback = true;
};

struct PowerFlowSolution {
    std::vector<Complex> v;  // per-bus complex voltage, pu
    std::vector<double> v_mag;
    std::vector<double> v_ang;
    std::vector<double> machine_p, machine_q;  // MW, MVAr
    std::vector<double> link_p, link_q;        // converter injection, MW / MVAr
    std::vector<double> link_q_shunt;          // LCC filter bank injection, MVAr
    std::vector<int> link_shunt_on;            // engaged steps, LCC only
    std::vector<bool> link_q_limited;          // VSC voltage control at its limit
    std::vector<double> load_p, load_q;
    double losses_mw = 0.0;
    double max_mismatch = 0.0;  // pu
    int iterations = 0;
};

/// Newton-Raphson power flow. Machine buses and AC-voltage VSC buses are
/// voltage controlled; the slack machine closes the balance. ZIP loads and LCC
/// consumption are evaluated at the solved voltage, and LCC filter banks settle
/// on the step count their thresholds select.
PowerFlowSolution solve_power_flow(const NetworkModel& model, const PowerFlowOptions& options = {});

/// Per-element bookkeeping shared by the static and dynamic network solutions.
class NetworkEquations {
public:
    explicit NetworkEquations(const NetworkModel& model);

    std::size_t size() const { return n_; }
    const Eigen::MatrixXcd& ybus() const { return ybus_; }

    /// Current balance at every bus: device injections minus network flow minus
    /// ZIP load current. `df` is the per-bus frequency deviation (Hz).
    void current_mismatch(const std::vector<Complex>& v, const std::vector<Complex>& i_dev,
                          const std::vector<double>& df, std::vector<Complex>& out) const;

    /// Total ZIP load at the given voltages, MW / MVAr.
    LoadPower total_load(const std::vector<Complex>& v, const std::vector<double>& df) const;

    /// Power drawn by load `k`.
    LoadPower load_power(std::size_t k, const std::vector<Complex>& v,
                         const std::vector<double>& df) const;

    const std::vector<std::size_t>& load_bus() const { return load_bus_; }

private:
    const NetworkModel* model_;
    std::size_t n_ = 0;
    Eigen::MatrixXcd ybus_;
    std::vector<std::size_t> load_bus_;
};

/// Current injected by a classical machine (pu on s_base) behind its transient reactance.
Complex machine_current(const SynchronousMachine& machine, Complex emf, Complex v_term,
                        double s_base);

/// Injections for a stand-alone algebraic network solve.
struct StepInjections {
    std::vector<Complex> machine_emf;  // per machine, pu, synchronous frame
    std::vector<bool> machine_online;
    std::vector<double> p_inj;    // per bus, MW (converters, EPC)
    std::vector<double> q_inj;    // per bus, MVAr
    std::vector<double> shunt_b;  // per bus, MVAr at 1 pu
    std::vector<double> df;       // per bus, Hz
};

struct StepSolveOptions {
    int max_iterations = 30;
    double tolerance = 1e-8;
};

/// Solves the algebraic network with machines as EMF sources behind
/// transient reactance and fixed P/Q injections, starting from `v_guess`
/// (flat start if it fails).
std::vector<Complex> network_step_solve(const NetworkModel& model, const StepInjections& inj,
                                        const std::vector<Complex>& v_guess,
                                        const StepSolveOptions& options = {});

/// Step injections reproducing a power-flow solution.
StepInjections injections_from_power_flow(const NetworkModel& model, const PowerFlowSolution& pf);

/// Sum of branch series I^2 R losses, MW.
double total_losses(const NetworkModel& model, const std::vector<Complex>& v);

struct BranchFlow {
    Complex s_from;  // MVA into the branch at `from`
    Complex s_to;
    double loss_mw = 0.0;
};
std::vector<BranchFlow> branch_flows(const NetworkModel& model, const std::vector<Complex>& v);

}  // namespace gridfreq
