#pragma once

#include <cstddef>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "gridfreq/epc.hpp"
#include "gridfreq/model.hpp"

namespace gridfreq {

struct Disturbance {
    std::string machine;    // machine to disconnect; empty = none
    double trip_time = 1.0; // s
    // Filled from the initial operating point when the run starts.
    double p_lost = 0.0;    // MW
    double q_lost = 0.0;    // MVAr
    double ek_lost = 0.0;   // GWs
};

/// Slow open-loop change of one link's order, used to measure the
/// reactive side effect of extra import without a disturbance.
struct PowerRamp {
    std::string link;
    double start = 1.0;      // s
    double duration = 5.0;   // s
    double delta_mw = 10.0;  // MW added at the end of the ramp
};

struct Scenario {
    std::string label;
    std::string zone;
    Disturbance disturbance;
    double duration = 60.0;
    std::optional<PowerRamp> ramp;

    void validate() const;
};

struct SimulationConfig {
    double dt = 0.01;
    int record_every = 1;
    double tolerance = 1e-10;         // scaled Newton residual
    int max_newton = 12;
    int refresh_after = 4;            // iterations before the Jacobian is rebuilt
    double frequency_limit = 5.0;     // Hz, divergence guard on the COI deviation
};

/// Column-oriented record of one run. Per-element series are indexed
/// [element][sample]; every series has t.size() samples.
struct SimulationTrace {
    double f_n = kNominalFrequency;
    double dt = 0.0;
    double trip_time = -1.0;
    std::string label;
    std::vector<double> t;

    std::vector<std::string> machine_ids;
    std::vector<std::string> bus_ids;
    std::vector<std::string> link_ids;
    std::vector<std::string> load_ids;

    std::vector<std::vector<double>> machine_df;   // Hz
    std::vector<std::vector<double>> machine_p;    // MW electrical
    std::vector<double> coi_df;                    // Hz
    std::vector<std::vector<double>> bus_v;        // pu
    std::vector<std::vector<double>> link_p;       // MW injected
    std::vector<std::vector<double>> link_q;       // MVAr injected by the converter
    std::vector<std::vector<double>> link_q_shunt; // MVAr injected by its filter bank
    std::vector<std::vector<double>> link_epc;     // MW EPC order
    std::vector<std::vector<double>> link_df;      // Hz measured at the link bus
    std::vector<std::vector<double>> link_q_saturated;  // 0/1
    std::vector<std::vector<double>> link_shunt_on;
    std::vector<std::vector<double>> link_phi;     // rad, LCC only (0 otherwise)
    std::vector<std::vector<double>> link_vd;      // pu, LCC only
    std::vector<std::vector<double>> link_vd0;     // pu, LCC only
    std::vector<std::vector<double>> load_p;       // MW
    std::vector<std::vector<double>> load_q;       // MVAr
    std::vector<double> total_load_p;              // MW
    std::vector<double> total_load_q;              // MVAr
    std::vector<double> losses;                    // MW
    std::vector<double> balance_residual;          // pu
    std::vector<double> kinetic_energy;            // GWs
    std::vector<int> newton_iterations;

    std::size_t size() const { return t.size(); }
    std::size_t link_index(std::string_view id) const;
};

/// Inertia-weighted mean of per-machine frequencies (or deviations).
double coi_frequency(const std::vector<double>& weights, const std::vector<double>& f);

/// Fixed-step implicit trapezoidal simulation from the power-flow operating
/// point. Throws NonConvergence or UnstableSimulation with the failure time.
SimulationTrace run_simulation(const NetworkModel& model, const Scenario& scenario,
                               const std::vector<EpcConfig>& epc = {},
                               const SimulationConfig& config = {});

/// CSV with one row per sample and a unit-tagged header.
void write_trace_csv(const SimulationTrace& trace, std::ostream& out);

}  // namespace gridfreq
