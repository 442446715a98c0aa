#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gridfreq/linear_model.hpp"
#include "gridfreq/metrics.hpp"
#include "gridfreq/model.hpp"
#include "gridfreq/simulator.hpp"

namespace gridfreq {

struct HarnessOptions {
    SimulationConfig sim;
    unsigned threads = 0;  // 0: hardware concurrency
    TminSource t_min_source = TminSource::CaseB;
    bool keep_traces = false;
    /// Called with (message) for clamped gains and similar notices.
    std::function<void(const std::string&)> warn;
};

/// Runs `jobs` tasks on a fixed pool; task i writes only its own slot.
void parallel_for(std::size_t jobs, unsigned threads, const std::function<void(std::size_t)>& task);

struct RankingRow {
    std::string link;
    ConverterKind kind = ConverterKind::Lcc;
    double g_prime = 0.0;       // gain actually applied
    bool gain_clamped = false;
    bool shared_bus = false;    // another link sits on the same bus
    std::optional<MetricsReport> metrics;
    std::optional<SimulationTrace> trace;
    std::string error;          // non-empty when the run failed
};

struct RankingTable {
    std::string scenario;
    double requested_gain = 0.0;
    double nadir_a = 0.0;
    double t_min_a = 0.0;
    std::optional<SimulationTrace> case_a;
    std::vector<RankingRow> rows;  // sorted by delta_f descending, failures last
    std::vector<std::string> warnings;
};

/// Case A once, then case B per link with the same gain (clamped to the
/// link's headroom-based limit with a warning). Empty `links` means all.
RankingTable assess_all_links(const NetworkModel& model, const Scenario& scenario, double g_prime,
                              const HarnessOptions& options = {},
                              const std::vector<std::string>& links = {});

void sort_ranking(std::vector<RankingRow>& rows);
std::string ranking_csv(const RankingTable& table);
std::string ranking_text(const RankingTable& table);

struct SweepResult {
    std::vector<RankingTable> tables;  // scenario order
    /// relative[s][k]: delta_f / |nadir_A| of link_ids[k] in scenario s.
    std::vector<std::string> link_ids;
    std::vector<std::vector<double>> relative;
};

SweepResult multi_disturbance_sweep(const NetworkModel& model, const std::vector<Scenario>& scenarios,
                                    double g_prime, const HarnessOptions& options = {});
std::string sweep_csv(const SweepResult& sweep);

struct Distribution {
    std::string name;
    std::vector<std::pair<std::string, double>> gains;  // link, MW/Hz
    std::string note;

    double total_gain() const;
    void validate(const NetworkModel& model) const;
};

Distribution parse_distribution(const std::string& text);
Distribution load_distribution(const std::filesystem::path& path);

struct BudgetOptions {
    double tolerance = 0.005;  // Hz band below the target
    /// Smallest scale considered. 1 keeps the nominal gains as a floor.
    double min_scale = 1.0;
    double max_scale = 64.0;
    /// Bisection continues until the bracket is this fraction of the scale.
    double scale_resolution = 0.01;
    int max_iterations = 60;
};

struct BudgetIterate {
    double scale = 0.0;
    double nadir = 0.0;  // Hz deviation magnitude
};

struct GainBudgetResult {
    Distribution distribution;
    double scale = 1.0;
    double achieved_nadir = 0.0;   // Hz deviation magnitude
    double total_peak_mw = 0.0;
    double total_gain = 0.0;       // scaled, MW/Hz
    std::vector<BudgetIterate> iterates;
};

/// Smallest uniform scale of `dist` whose nadir deviation magnitude lies in
/// [target - tolerance, target]. Throws TargetUnreachable.
GainBudgetResult gain_budget_search(const NetworkModel& model, const Scenario& scenario,
                                    const Distribution& dist, double target_ifd,
                                    const HarnessOptions& options = {}, const BudgetOptions& budget = {});

struct KpqMeasurement {
    std::string link;
    double k_pq = 0.0;
    double dp = 0.0;   // MW
    double dq = 0.0;   // MVAr, converter plus filter bank
    double delta_mw = 0.0;
    bool shunt_switched = false;
    bool q_saturated = false;
};

/// Static coupling from a slow open-loop increase of the link's import with
/// no disturbance; the step is halved while it makes the filter bank switch.
KpqMeasurement measure_kpq(const NetworkModel& model, const std::string& link, double delta_mw = 10.0,
                           const SimulationConfig& sim = {});

/// Aggregate inertia, load damping and FCR of the model after losing `tripped`.
AggregateSystem aggregate_from_model(const NetworkModel& model, const std::string& tripped = {});

struct CqSample {
    double k_pq = 0.0;
    double delta_f = 0.0;  // nonlinear nadir improvement, Hz
};

/// Least-squares c_q in [0, c_max] so the aggregate loop's nadir improvement
/// matches the simulated improvements of links with different couplings.
double calibrate_cq(const AggregateSystem& sys, double g_prime, double disturbance_mw,
                    const std::vector<CqSample>& samples, double c_max = 1.0);

}  // namespace gridfreq
