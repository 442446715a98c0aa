#include "gridfreq/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "gridfreq/error.hpp"
#include "gridfreq/model_io.hpp"

namespace gridfreq {

void parallel_for(std::size_t jobs, unsigned threads, const std::function<void(std::size_t)>& task) {
    if (threads == 0) {
        threads = std::max(1u, std::thread::hardware_concurrency());
    }
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, jobs));
    if (threads <= 1) {
        for (std::size_t i = 0; i < jobs; ++i) task(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned w = 0; w < threads; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < jobs; i = next++) task(i);
        });
    }
    for (auto& th : pool) th.join();
}

void sort_ranking(std::vector<RankingRow>& rows) {
    std::stable_sort(rows.begin(), rows.end(), [](const RankingRow& x, const RankingRow& y) {
        if (x.metrics.has_value() != y.metrics.has_value()) {
            return x.metrics.has_value();
        }
        if (x.metrics && y.metrics && x.metrics->delta_f != y.metrics->delta_f) {
            return x.metrics->delta_f > y.metrics->delta_f;
        }
        return x.link < y.link;
    });
}

RankingTable assess_all_links(const NetworkModel& model, const Scenario& scenario, double g_prime,
                              const HarnessOptions& options, const std::vector<std::string>& links) {
    if (g_prime < 0.0) {
        throw ModelError("EPC gain must be non-negative");
    }
    RankingTable table;
    table.scenario = scenario.label;
    table.requested_gain = g_prime;

    std::vector<std::string> ids = links;
    if (ids.empty()) {
        for (const auto& l : model.hvdc) {
            if (l.epc_enabled) ids.push_back(l.id);
        }
    }
    std::map<std::string, int> per_bus;
    for (const auto& l : model.hvdc) per_bus[l.bus]++;

    const SimulationTrace a = run_simulation(model, scenario, {}, options.sim);
    const Ifd ia = max_ifd(a);
    table.nadir_a = ia.deviation;
    table.t_min_a = ia.t_min;

    std::vector<RankingRow> rows(ids.size());
    std::vector<EpcConfig> configs(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const HvdcLink& l = model.link(ids[i]);
        RankingRow& row = rows[i];
        row.link = l.id;
        row.kind = l.kind;
        row.shared_bus = per_bus[l.bus] > 1;
        EpcConfig cfg = make_epc_config(model, l.id, g_prime);
        // Without an activation in case A there is nothing to clamp against.
        if (ia.deviation < cfg.f_activ) {
            const double g_max = max_gain(cfg.p_headroom, cfg.f_activ, ia.deviation);
            if (cfg.g_prime > g_max) {
                std::ostringstream msg;
                msg << "link " << l.id << ": gain " << cfg.g_prime << " MW/Hz exceeds the headroom limit "
                    << g_max << " MW/Hz, clamped";
                table.warnings.push_back(msg.str());
                cfg.g_prime = g_max;
                row.gain_clamped = true;
            }
        }
        row.g_prime = cfg.g_prime;
        configs[i] = cfg;
    }
    for (const auto& w : table.warnings) {
        if (options.warn) options.warn(w);
    }

    parallel_for(ids.size(), options.threads, [&](std::size_t i) {
        RankingRow& row = rows[i];
        try {
            SimulationTrace b = run_simulation(model, scenario, {configs[i]}, options.sim);
            MetricsReport r = compute_metrics(a, b, row.link, options.t_min_source);
            r.headroom_reached = r.dp_peak >= configs[i].p_headroom - 1e-6;
            row.metrics = std::move(r);
            if (options.keep_traces) row.trace = std::move(b);
        } catch (const Error& e) {
            row.error = e.what();
        }
    });
    sort_ranking(rows);
    table.rows = std::move(rows);
    if (options.keep_traces) table.case_a = a;
    return table;
}

std::string ranking_csv(const RankingTable& t) {
    std::ostringstream o;
    o << "rank,kind,g_prime_MW_per_Hz,gain_clamped,shared_bus," << metrics_csv_header() << ",error\n";
    int rank = 0;
    for (const auto& row : t.rows) {
        o << ++rank << ',' << (row.kind == ConverterKind::Lcc ? "LCC" : "VSC") << ',' << std::setprecision(10)
          << row.g_prime << ',' << (row.gain_clamped ? 1 : 0) << ',' << (row.shared_bus ? 1 : 0) << ',';
        if (row.metrics) {
            o << to_csv_row(*row.metrics);
        } else {
            o << row.link << std::string(14, ',');
        }
        o << ',' << '"' << row.error << '"' << '\n';
    }
    return o.str();
}

std::string ranking_text(const RankingTable& t) {
    std::ostringstream o;
    o << "scenario " << t.scenario << ", gain " << t.requested_gain << " MW/Hz, FCR-only nadir "
      << std::fixed << std::setprecision(4) << t.nadir_a << " Hz at " << std::setprecision(2) << t.t_min_a
      << " s\n";
    o << std::left << std::setw(5) << "rank" << std::setw(8) << "link" << std::setw(5) << "kind"
      << std::right << std::setw(10) << "df_epc" << std::setw(10) << "K_pq_sum" << std::setw(12) << "dE_L"
      << std::setw(12) << "dE_loss" << std::setw(10) << "peak_dP" << "  flags\n";
    int rank = 0;
    for (const auto& row : t.rows) {
        o << std::left << std::setw(5) << ++rank << std::setw(8) << row.link << std::setw(5)
          << (row.kind == ConverterKind::Lcc ? "LCC" : "VSC") << std::right;
        if (!row.metrics) {
            o << "  failed: " << row.error << '\n';
            continue;
        }
        const auto& m = *row.metrics;
        o << std::setw(10) << std::setprecision(4) << m.delta_f << std::setw(10);
        if (m.k_pq_sum) {
            o << std::setprecision(3) << *m.k_pq_sum;
        } else {
            o << "-";
        }
        o << std::setw(12) << std::setprecision(1) << m.de_load << std::setw(12) << m.de_loss << std::setw(10)
          << m.dp_peak << " ";
        if (row.gain_clamped) o << " clamped";
        if (m.q_saturated) o << " q-saturated";
        if (m.headroom_reached) o << " headroom";
        if (row.shared_bus) o << " shared-bus";
        o << '\n';
    }
    for (const auto& w : t.warnings) o << "warning: " << w << '\n';
    return o.str();
}

SweepResult multi_disturbance_sweep(const NetworkModel& model, const std::vector<Scenario>& scenarios,
                                    double g_prime, const HarnessOptions& options) {
    if (scenarios.size() < 2) {
        throw ModelError("a disturbance sweep needs at least two scenarios");
    }
    SweepResult out;
    for (const auto& l : model.hvdc) {
        if (l.epc_enabled) out.link_ids.push_back(l.id);
    }
    for (const auto& sc : scenarios) {
        out.tables.push_back(assess_all_links(model, sc, g_prime, options, out.link_ids));
    }
    for (const auto& table : out.tables) {
        std::vector<double> rel(out.link_ids.size(), std::numeric_limits<double>::quiet_NaN());
        for (const auto& row : table.rows) {
            if (!row.metrics) continue;
            const auto it = std::find(out.link_ids.begin(), out.link_ids.end(), row.link);
            const double depth = std::abs(table.nadir_a);
            rel[static_cast<std::size_t>(it - out.link_ids.begin())] = depth > 0.0 ? row.metrics->delta_f / depth
                                                                                   : 0.0;
        }
        out.relative.push_back(std::move(rel));
    }
    return out;
}

std::string sweep_csv(const SweepResult& s) {
    std::ostringstream o;
    o << "scenario,nadir_a_Hz";
    for (const auto& id : s.link_ids) o << ",rel_" << id;
    o << '\n' << std::setprecision(10);
    for (std::size_t i = 0; i < s.tables.size(); ++i) {
        o << s.tables[i].scenario << ',' << s.tables[i].nadir_a;
        for (double v : s.relative[i]) {
            o << ',';
            if (!std::isnan(v)) o << v;
        }
        o << '\n';
    }
    return o.str();
}

double Distribution::total_gain() const {
    double sum = 0.0;
    for (const auto& [link, g] : gains) sum += g;
    return sum;
}

void Distribution::validate(const NetworkModel& model) const {
    std::set<std::string> seen;
    for (const auto& [link, g] : gains) {
        model.link(link);
        if (!seen.insert(link).second) {
            throw ModelError("distribution '" + name + "' lists link " + link + " twice");
        }
        if (g < 0.0) {
            throw ModelError("distribution '" + name + "': negative gain for " + link);
        }
    }
}

Distribution parse_distribution(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ModelError(std::string("distribution: ") + e.what());
    }
    if (j.value("format", std::string()) != kModelFormat) {
        throw ModelError(std::string("distribution: expected format '") + kModelFormat + "'");
    }
    Distribution d;
    d.name = j.value("name", std::string("distribution"));
    d.note = j.value("note", std::string());
    if (!j.contains("gains") || !j["gains"].is_array()) {
        throw ModelError("distribution: missing array 'gains'");
    }
    std::set<std::string> seen;
    for (const auto& g : j["gains"]) {
        if (!g.contains("link") || !g.contains("g_prime")) {
            throw ModelError("distribution: every entry needs 'link' and 'g_prime'");
        }
        const std::string link = g["link"].get<std::string>();
        if (!seen.insert(link).second) {
            throw ModelError("distribution: link " + link + " listed twice");
        }
        d.gains.emplace_back(link, g["g_prime"].get<double>());
    }
    return d;
}

Distribution load_distribution(const std::filesystem::path& path) {
    return parse_distribution(read_text_file(path));
}

namespace {

struct BudgetEval {
    double nadir = 0.0;  // magnitude
    double peak = 0.0;
    bool saturated = false;
};

BudgetEval evaluate_scale(const NetworkModel& model, const Scenario& scenario, const Distribution& dist,
                          double scale, const SimulationConfig& sim) {
    std::vector<EpcConfig> cfgs;
    for (const auto& [link, g] : dist.gains) {
        cfgs.push_back(make_epc_config(model, link, g * scale));
    }
    const SimulationTrace tr = run_simulation(model, scenario, cfgs, sim);
    BudgetEval e;
    e.nadir = -max_ifd(tr).deviation;
    e.saturated = !cfgs.empty();
    for (std::size_t s = 0; s < tr.size(); ++s) {
        double total = 0.0;
        for (const auto& c : cfgs) total += tr.link_epc[tr.link_index(c.link)][s];
        e.peak = std::max(e.peak, total);
    }
    for (const auto& c : cfgs) {
        const auto& epc = tr.link_epc[tr.link_index(c.link)];
        const double peak = *std::max_element(epc.begin(), epc.end());
        if (peak < c.p_headroom - 1e-6) e.saturated = false;
    }
    return e;
}

}  // namespace

GainBudgetResult gain_budget_search(const NetworkModel& model, const Scenario& scenario,
                                    const Distribution& dist, double target_ifd,
                                    const HarnessOptions& options, const BudgetOptions& budget) {
    dist.validate(model);
    if (!(target_ifd > 0.0) || !(budget.tolerance > 0.0) || budget.min_scale < 0.0 ||
        budget.max_scale <= budget.min_scale) {
        throw ModelError("budget search: invalid target, tolerance or scale range");
    }
    GainBudgetResult res;
    res.distribution = dist;
    auto eval = [&](double scale) {
        const BudgetEval e = evaluate_scale(model, scenario, dist, scale, options.sim);
        res.iterates.push_back({scale, e.nadir});
        return e;
    };
    auto finish = [&](double scale, const BudgetEval& e) {
        res.scale = scale;
        res.achieved_nadir = e.nadir;
        res.total_peak_mw = e.peak;
        res.total_gain = dist.total_gain() * scale;
        return res;
    };

    double lo = budget.min_scale;
    BudgetEval e_lo = eval(lo);
    if (e_lo.nadir <= target_ifd) {
        return finish(lo, e_lo);
    }
    double hi = lo > 0.0 ? 2.0 * lo : 1.0;
    BudgetEval e_hi = eval(hi);
    while (e_hi.nadir > target_ifd) {
        if (e_hi.saturated || hi >= budget.max_scale) {
            std::ostringstream msg;
            msg << "distribution '" << dist.name << "' cannot reach " << target_ifd << " Hz (nadir "
                << e_hi.nadir << " Hz at scale " << hi << ")";
            throw TargetUnreachable(msg.str());
        }
        lo = hi;
        e_lo = e_hi;
        hi = std::min(2.0 * hi, budget.max_scale);
        e_hi = eval(hi);
    }
    for (int it = 0; it < budget.max_iterations &&
                     (e_hi.nadir < target_ifd - budget.tolerance || hi - lo > budget.scale_resolution * hi);
         ++it) {
        const double mid = 0.5 * (lo + hi);
        const BudgetEval e_mid = eval(mid);
        if (e_mid.nadir <= target_ifd) {
            hi = mid;
            e_hi = e_mid;
        } else {
            lo = mid;
            e_lo = e_mid;
        }
    }
    return finish(hi, e_hi);
}

KpqMeasurement measure_kpq(const NetworkModel& model, const std::string& link, double delta_mw,
                           const SimulationConfig& sim) {
    const std::size_t k = model.link_index(link);
    KpqMeasurement m;
    m.link = link;
    double delta = delta_mw;
    for (int attempt = 0; attempt < 6; ++attempt, delta *= 0.5) {
        Scenario sc;
        sc.label = "kpq-" + link;
        sc.duration = 10.0;
        sc.ramp = PowerRamp{link, 1.0, 5.0, delta};
        const SimulationTrace tr = run_simulation(model, sc, {}, sim);
        const std::size_t last = tr.size() - 1;
        m.delta_mw = delta;
        m.dp = tr.link_p[k][last] - tr.link_p[k][0];
        m.dq = (tr.link_q[k][last] + tr.link_q_shunt[k][last]) - (tr.link_q[k][0] + tr.link_q_shunt[k][0]);
        m.k_pq = m.dq / m.dp;
        const auto& on = tr.link_shunt_on[k];
        m.shunt_switched = std::any_of(on.begin(), on.end(), [&](double n) { return n != on.front(); });
        const auto& sat = tr.link_q_saturated[k];
        m.q_saturated = std::any_of(sat.begin(), sat.end(), [](double v) { return v > 0.5; });
        if (!m.shunt_switched) break;
    }
    return m;
}

AggregateSystem aggregate_from_model(const NetworkModel& model, const std::string& tripped) {
    AggregateSystem sys;
    sys.f_n = model.f_n;
    bool have_gov = false;
    double droop = 0.0;
    for (const auto& mach : model.machines) {
        if (!mach.online || mach.id == tripped) continue;
        sys.ek_mws += mach.h * mach.s_rated;
        if (mach.is_fcr) {
            droop += mach.governor.droop_mw_per_hz;
            if (!have_gov) {
                sys.fcr = mach.governor;
                have_gov = true;
            }
        }
    }
    for (const auto& ld : model.loads) {
        sys.damping_mw_per_hz += ld.p0 * ld.kpf / model.f_n;
    }
    sys.fcr.droop_mw_per_hz = droop;
    sys.fcr.p_max = std::numeric_limits<double>::infinity();
    sys.fcr.p_min = -std::numeric_limits<double>::infinity();
    sys.fcr.rate_max = std::numeric_limits<double>::infinity();
    return sys;
}

namespace {

double linear_peak(const AggregateSystem& sys, double g_prime, double k_pq, double d_mw) {
    const LinearLoopConfig cfg = aggregate_loop(sys, g_prime, k_pq, d_mw);
    const TimeSeries ts = loop_response(cfg, 30.0, 0.01);
    double peak = 0.0;
    for (double v : ts.y) peak = std::max(peak, std::abs(v));
    return peak;
}

}  // namespace

double calibrate_cq(const AggregateSystem& sys, double g_prime, double disturbance_mw,
                    const std::vector<CqSample>& samples, double c_max) {
    if (samples.empty() || !(c_max > 0.0)) {
        throw DomainError("c_q calibration needs samples and a positive upper bound");
    }
    const double base = linear_peak(sys, 0.0, 0.0, disturbance_mw);
    auto cost = [&](double c) {
        AggregateSystem s = sys;
        s.c_q = c;
        double sum = 0.0;
        for (const auto& p : samples) {
            double improvement = 0.0;
            try {
                improvement = base - linear_peak(s, g_prime, p.k_pq, disturbance_mw);
            } catch (const UnstableClosedLoop&) {
                return std::numeric_limits<double>::infinity();
            }
            sum += (improvement - p.delta_f) * (improvement - p.delta_f);
        }
        return sum;
    };
    // Golden-section search; the cost is smooth and unimodal in practice.
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = 0.0, b = c_max;
    double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
    double f1 = cost(x1), f2 = cost(x2);
    while (b - a > 1e-6 * c_max) {
        if (f1 <= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = cost(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = cost(x2);
        }
    }
    return 0.5 * (a + b);
}

}  // namespace gridfreq
