#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gridfreq/simulator.hpp"

namespace gridfreq {

struct Ifd {
    double deviation = 0.0;  // Hz, most negative COI deviation (<= 0)
    double t_min = 0.0;      // s, first time it is reached
};

/// Searches from the trip time onwards (whole trace without a disturbance).
Ifd max_ifd(const SimulationTrace& trace);

/// B minus A of the link's active injection, per sample.
std::vector<double> delta_p_epc(const SimulationTrace& a, const SimulationTrace& b,
                                const std::string& link);
/// B minus A of the link's reactive injection including its filter bank.
std::vector<double> delta_q_epc_star(const SimulationTrace& a, const SimulationTrace& b,
                                     const std::string& link);

inline constexpr double kKpqEpsilon = 1.0;  // MW

/// Trapezoidal integral of dq/dp over [0, t_min]; samples with |dp| < eps
/// contribute zero. Throws EmptyWindow when no sample passes the guard.
double k_pq_sum(const std::vector<double>& t, const std::vector<double>& dq,
                const std::vector<double>& dp, double t_min, double eps = kKpqEpsilon);

/// Integral over [0, t_min] of total load change, MWs.
double load_energy_change(const SimulationTrace& a, const SimulationTrace& b, double t_min);
/// Integral over [0, t_min] of total loss change, MWs.
double loss_energy_change(const SimulationTrace& a, const SimulationTrace& b, double t_min);

/// min(f_B) - min(f_A); positive when B's nadir is shallower.
double nadir_improvement(const SimulationTrace& a, const SimulationTrace& b);

/// Mean COI deviation over the last `window` seconds.
double ssfd(const SimulationTrace& trace, double window = 5.0);

/// Largest |df/dt| of the COI deviation, differenced over `window` seconds
/// (one sample when window <= dt).
double max_rocof(const SimulationTrace& trace, double window = 0.5);

/// Trapezoid of samples up to and including t_max.
double integrate_until(const std::vector<double>& t, const std::vector<double>& y, double t_max);

enum class TminSource { CaseB, CaseA };

struct MetricsReport {
    std::string link;
    double f_nadir_a = 0.0;  // Hz deviation
    double f_nadir_b = 0.0;
    double t_min = 0.0;
    double delta_f = 0.0;    // Hz, nadir improvement
    std::vector<double> dp_epc;   // MW
    double dp_peak = 0.0;         // MW
    std::vector<double> dq_epc;   // MVAr
    std::optional<double> k_pq_sum;  // s; absent when EPC never activated
    double de_load = 0.0;    // MWs
    double de_loss = 0.0;    // MWs
    double ssfd_a = 0.0;
    double ssfd_b = 0.0;
    double rocof_a = 0.0;    // Hz/s
    double rocof_b = 0.0;
    bool q_saturated = false;  // the link hit its reactive limit in B
    bool headroom_reached = false;
};

MetricsReport compute_metrics(const SimulationTrace& a, const SimulationTrace& b,
                              const std::string& link, TminSource source = TminSource::CaseB);

std::string to_text(const MetricsReport& report);
std::string metrics_csv_header();
std::string to_csv_row(const MetricsReport& report);

/// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace gridfreq
