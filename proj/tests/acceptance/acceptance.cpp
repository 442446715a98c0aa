// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "gridfreq/epc.hpp"
#include "gridfreq/error.hpp"
#include "gridfreq/harness.hpp"
#include "gridfreq/linear_model.hpp"
#include "gridfreq/machine.hpp"
#include "gridfreq/metrics.hpp"
#include "gridfreq/model_io.hpp"
#include "gridfreq/simulator.hpp"

using namespace gridfreq;

namespace {

const std::string kData = GRIDFREQ_DATA_DIR;

struct Outcome {
    bool pass = true;
    std::string detail;
};

int g_failed = 0;

void report(int id, const std::string& title, const std::function<Outcome()>& check) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = check();
    } catch (const std::exception& e) {
        o.pass = false;
        o.detail = std::string("exception: ") + e.what();
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++g_failed;
    std::printf("%s C%d %s | %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, title.c_str(), o.detail.c_str(), s);
    std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

const NetworkModel& model() {
    static const NetworkModel m = load_model(kData + "/reduced_nordic.json");
    return m;
}

Scenario scenario(const std::string& name) {
    return load_scenario(kData + "/scenarios/" + name + ".json");
}

const SimulationTrace& case_a() {
    static const SimulationTrace tr = run_simulation(model(), scenario("dimensioning"));
    return tr;
}

HarnessOptions quiet() {
    HarnessOptions h;
    h.threads = 0;
    return h;
}

// Rankings are shared by criteria 6 and 7.
const RankingTable& ranking(double gain) {
    static std::vector<std::pair<double, RankingTable>> cache;
    for (const auto& [g, t] : cache) {
        if (g == gain) return t;
    }
    cache.emplace_back(gain, assess_all_links(model(), scenario("dimensioning"), gain, quiet()));
    return cache.back().second;
}

// ---------------------------------------------------------------------------

Outcome c1_lcc_identity() {
    // Exercise both converter modes away from the set point: EPC on an
    // importing and on an exporting link.
    const NetworkModel& m = model();
    const auto tr = run_simulation(m, scenario("dimensioning"),
                                   {make_epc_config(m, "KS1", 250.0), make_epc_config(m, "EST2", 250.0)});
    double worst_q = 0.0, worst_cos = 0.0;
    std::size_t checked = 0;
    for (std::size_t k = 0; k < m.hvdc.size(); ++k) {
        if (m.hvdc[k].kind != ConverterKind::Lcc) continue;
        for (std::size_t s = 0; s < tr.size(); ++s) {
            const double p = std::abs(tr.link_p[k][s]);
            const double q_cons = -tr.link_q[k][s];
            const double phi = tr.link_phi[k][s];
            worst_q = std::max(worst_q, std::abs(q_cons - p * std::tan(phi)) / m.s_base);
            worst_cos = std::max(worst_cos, std::abs(std::cos(phi) - tr.link_vd[k][s] / tr.link_vd0[k][s]));
            ++checked;
        }
    }
    Outcome o;
    o.pass = checked > 0 && worst_q <= 1e-9 && worst_cos <= 1e-9;
    o.detail = std::to_string(checked) + " link-steps, max |Q - P tan phi| " + fmt("%.2e pu", worst_q) +
               ", max |cos phi - Vd/Vd0| " + fmt("%.2e", worst_cos);
    return o;
}

Outcome c2_droop_law() {
    EpcConfig cfg;
    cfg.f_activ = -0.4;
    cfg.p_headroom = 300.0;
    std::size_t mismatches = 0;
    for (int i = 0; i < 40; ++i) {
        for (int j = 0; j < 25; ++j) {
            const double df = -2.5 + 2.6 * i / 39.0;
            cfg.g_prime = 20.0 * j;
            const double hand = df <= -0.4 ? std::min(300.0, cfg.g_prime * (-0.4 - df)) : 0.0;
            if (epc_power(df, cfg) != hand) ++mismatches;
        }
    }
    const double g_max = max_gain(300.0, -0.4, -1.226);
    Outcome o;
    o.pass = mismatches == 0 && std::abs(g_max - 363.2) <= 0.1;
    o.detail = "1000-point grid mismatches " + std::to_string(mismatches) + ", gain limit " +
               fmt("%.3f MW/Hz", g_max);
    return o;
}

double max_coeff_error(const RationalTf& a, const RationalTf& b) {
    const RationalTf na = a.normalized(), nb = b.normalized();
    if (na.num.degree() != nb.num.degree() || na.den.degree() != nb.den.degree()) return 1e300;
    double e = 0.0;
    for (int k = 0; k <= na.num.degree(); ++k) e = std::max(e, std::abs(na.num[k] - nb.num[k]));
    for (int k = 0; k <= na.den.degree(); ++k) e = std::max(e, std::abs(na.den[k] - nb.den[k]));
    return e;
}

Outcome c3_linear_cases() {
    const AggregateSystem sys = aggregate_from_model(model(), "N_O3");
    AggregateSystem with_q = sys;
    with_q.c_q = 0.05;
    const double g = 250.0, k = -0.87, d = -1450.0;

    // FCR only: the loop is d G_d.
    LinearLoopConfig fcr = aggregate_loop(with_q, 0.0, k, d);
    const double e0 = max_coeff_error(closed_loop_tf(fcr).d_to_f, fcr.gd);

    // No reactive coupling: G_d / (1 + g' G_p), assembled by hand from the
    // shared denominator L: n_d / (L + g' n_p).
    LinearLoopConfig nok = aggregate_loop(with_q, g, 0.0, d);
    const Polynomial l = nok.gp.den;
    std::vector<double> den(std::max(l.coefficients().size(), nok.gp.num.coefficients().size()), 0.0);
    for (std::size_t i = 0; i < den.size(); ++i) den[i] = l[i] + g * nok.gp.num[i];
    const double e1 = max_coeff_error(closed_loop_tf(nok).d_to_f, RationalTf(nok.gd.num, Polynomial(den)));

    // Reconstruction: (1 + g'(G_p + G_q K)) applied to the EPC response gives
    // the FCR-only response, for a constant coupling K.
    LinearLoopConfig epc = aggregate_loop(with_q, g, k, d);
    const double dt = 0.01;
    const std::vector<double> u(3001, d);
    const auto y_epc = simulate_tustin(closed_loop_tf(epc).d_to_f, u, dt);
    const auto lhs = simulate_tustin(loop_operator(epc, k), y_epc, dt);
    const auto rhs = simulate_tustin(fcr.gd, u, dt);
    double e2 = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) e2 = std::max(e2, std::abs(lhs[i] - rhs[i]));

    Outcome o;
    o.pass = e0 <= 1e-12 && e1 <= 1e-12 && e2 <= 1e-9;
    o.detail = "coeff error FCR-only " + fmt("%.1e", e0) + ", no coupling " + fmt("%.1e", e1) +
               ", reconstruction " + fmt("%.1e Hz", e2);
    return o;
}

Outcome c4_kpq_signs() {
    const NetworkModel& m = model();
    Outcome o;
    std::string bad;
    int ok = 0;
    for (const auto& l : m.hvdc) {
        const KpqMeasurement r = measure_kpq(m, l.id);
        bool good = false;
        std::string expect;
        if (l.kind == ConverterKind::Lcc) {
            good = l.p0 >= 0.0 ? r.k_pq < 0.0 : r.k_pq > 0.0;
            expect = l.p0 >= 0.0 ? "<0" : ">0";
        } else if (l.vsc_mode == VscMode::ReactivePower || r.q_saturated) {
            good = std::abs(r.k_pq) < 0.02;
            expect = "|k|<0.02";
        } else {
            good = r.k_pq < 0.0;
            expect = "<0";
        }
        if (good) {
            ++ok;
        } else {
            bad += " " + l.id + "=" + fmt("%.3f", r.k_pq) + "(want " + expect + ")";
        }
    }
    o.pass = bad.empty();
    o.detail = std::to_string(ok) + "/" + std::to_string(m.hvdc.size()) + " links match the sign table" + bad;
    return o;
}

Outcome c5_fcr_realism() {
    const NetworkModel& m = model();
    double s = 0.0, fcr = 0.0;
    for (const auto& g : m.machines) {
        s += g.s_rated;
        if (g.is_fcr) fcr += g.governor.droop_mw_per_hz;
    }
    const double h = system_kinetic_energy(m) * 1000.0 / s;
    const SimulationTrace& a = case_a();
    const double nadir = -max_ifd(a).deviation;
    const double steady = -ssfd(a);
    double dv = 0.0;
    for (const auto& v : a.bus_v) {
        for (double x : v) dv = std::max(dv, std::abs(x - 1.0));
    }
    Outcome o;
    o.pass = std::abs(h - 2.84) < 0.005 && std::abs(fcr - 3468.0) < 1e-6 && steady <= 0.4 && nadir > 1.1 &&
             nadir < 1.35 && dv <= 0.1;
    o.detail = "H " + fmt("%.3f s", h) + ", FCR " + fmt("%.1f MW/Hz", fcr) + ", nadir " + fmt("%.4f Hz", nadir) +
               ", SSFD " + fmt("%.4f Hz", steady) + ", max |v-1| " + fmt("%.3f pu", dv);
    return o;
}

Outcome c6_epc_effective() {
    Outcome o;
    int rows = 0;
    double min_df = 1e9, max_rocof_change = 0.0;
    std::string bad;
    for (double g : {50.0, 100.0, 250.0}) {
        const RankingTable& t = ranking(g);
        for (const auto& r : t.rows) {
            ++rows;
            if (!r.metrics) {
                bad += " " + r.link + "@" + fmt("%.0f", g) + " failed: " + r.error;
                continue;
            }
            min_df = std::min(min_df, r.metrics->delta_f);
            const double dr = std::abs(r.metrics->rocof_b - r.metrics->rocof_a);
            max_rocof_change = std::max(max_rocof_change, dr);
            if (!(r.metrics->delta_f > 0.0) || dr > 1e-9) {
                bad += " " + r.link + "@" + fmt("%.0f", g);
            }
        }
    }
    o.pass = bad.empty() && rows == 3 * static_cast<int>(model().hvdc.size());
    o.detail = std::to_string(rows) + " runs, min delta_f " + fmt("%.4f Hz", min_df) + ", max RoCoF change " +
               fmt("%.1e Hz/s", max_rocof_change) + bad;
    return o;
}

Outcome c7_rank_correlation() {
    const RankingTable& t = ranking(250.0);
    std::vector<double> df, energy, kpq;
    for (const auto& r : t.rows) {
        if (!r.metrics || !r.metrics->k_pq_sum) continue;
        df.push_back(r.metrics->delta_f);
        energy.push_back(-r.metrics->de_load - r.metrics->de_loss);
        kpq.push_back(*r.metrics->k_pq_sum);
    }
    const double rho_e = spearman(df, energy);
    const double rho_k = spearman(df, kpq);
    Outcome o;
    o.pass = rho_e > 0.0 && rho_k >= 0.0;
    o.detail = std::to_string(df.size()) + " links, rho(df, -dE_L-dE_loss) " + fmt("%.3f", rho_e) +
               ", rho(df, K_pq_sum) " + fmt("%.3f", rho_k);
    return o;
}

Outcome c8_multi_disturbance() {
    const NetworkModel& m = model();
    const std::vector<Scenario> sc{scenario("dimensioning"), scenario("no1"), scenario("se2")};
    std::size_t largest = 0;
    double p_max = -1.0;
    for (std::size_t s = 0; s < sc.size(); ++s) {
        const double p = m.machines[m.machine_index(sc[s].disturbance.machine)].p_mech;
        if (p > p_max) {
            p_max = p;
            largest = s;
        }
    }
    const SweepResult res = multi_disturbance_sweep(m, sc, 250.0, quiet());
    std::string bad;
    double margin = 1e9;
    for (std::size_t k = 0; k < res.link_ids.size(); ++k) {
        for (std::size_t s = 0; s < sc.size(); ++s) {
            if (s == largest) continue;
            const double gap = res.relative[largest][k] - res.relative[s][k];
            margin = std::min(margin, gap);
            if (!(gap > 0.0)) bad += " " + res.link_ids[k] + "/" + sc[s].label;
        }
    }
    Outcome o;
    o.pass = bad.empty() && !res.link_ids.empty();
    o.detail = "largest trip " + sc[largest].label + ", smallest lead over other trips " + fmt("%.4f", margin) + bad;
    return o;
}

Outcome c9_budget_gap() {
    const Distribution bad = load_distribution(kData + "/distributions/bad.json");
    const Distribution good = load_distribution(kData + "/distributions/good.json");
    BudgetOptions opt;
    opt.min_scale = 0.0;
    const Scenario sc = scenario("dimensioning");
    const GainBudgetResult rb = gain_budget_search(model(), sc, bad, 0.9, quiet(), opt);
    const GainBudgetResult rg = gain_budget_search(model(), sc, good, 0.9, quiet(), opt);
    const double gap = (rb.scale - rg.scale) / rg.scale;
    Outcome o;
    o.pass = rb.scale > rg.scale && gap >= 0.10;
    o.detail = "scale bad " + fmt("%.4f", rb.scale) + " vs good " + fmt("%.4f", rg.scale) + ", gap " +
               fmt("%.1f %%", 100.0 * gap) + ", total gain " + fmt("%.1f", rb.total_gain) + " vs " +
               fmt("%.1f MW/Hz", rg.total_gain) + ", peak EPC " + fmt("%.1f", rb.total_peak_mw) + " vs " +
               fmt("%.1f MW", rg.total_peak_mw);
    return o;
}

bool same(const std::vector<double>& a, const std::vector<double>& b) { return a == b; }
bool same(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b) { return a == b; }

bool identical(const SimulationTrace& a, const SimulationTrace& b) {
    return same(a.t, b.t) && same(a.coi_df, b.coi_df) && same(a.machine_df, b.machine_df) &&
           same(a.machine_p, b.machine_p) && same(a.bus_v, b.bus_v) && same(a.link_p, b.link_p) &&
           same(a.link_q, b.link_q) && same(a.link_q_shunt, b.link_q_shunt) && same(a.link_epc, b.link_epc) &&
           same(a.load_p, b.load_p) && same(a.losses, b.losses) && same(a.balance_residual, b.balance_residual);
}

Outcome c10_numerics() {
    const NetworkModel& m = model();
    const Scenario sc = scenario("dimensioning");
    SimulationConfig half;
    half.dt = 0.005;
    const double n1 = max_ifd(case_a()).deviation;
    const double n2 = max_ifd(run_simulation(m, sc, {}, half)).deviation;

    const std::vector<EpcConfig> epc{make_epc_config(m, "KS1", 250.0)};
    const SimulationTrace b1 = run_simulation(m, sc, epc);
    const SimulationTrace b2 = run_simulation(m, sc, epc);
    const SimulationTrace a2 = run_simulation(m, sc);

    double resid = 0.0;
    for (const auto* tr : {&case_a(), &b1}) {
        for (double r : tr->balance_residual) resid = std::max(resid, std::abs(r));
    }
    const bool replay = identical(b1, b2) && identical(case_a(), a2);
    Outcome o;
    o.pass = std::abs(n1 - n2) < 1e-4 && resid <= 1e-6 && replay;
    o.detail = "nadir drift dt/2 " + fmt("%.2e Hz", std::abs(n1 - n2)) + ", max balance residual " +
               fmt("%.2e pu", resid) + ", replay " + (replay ? "bit-identical" : "DIFFERS");
    return o;
}

}  // namespace

int main() {
    report(1, "LCC coupling identity", c1_lcc_identity);
    report(2, "EPC droop law and gain limit", c2_droop_law);
    report(3, "linear-model special cases", c3_linear_cases);
    report(4, "k_pq sign table", c4_kpq_signs);
    report(5, "FCR-only realism", c5_fcr_realism);
    report(6, "EPC effectiveness", c6_epc_effective);
    report(7, "ranking correlation", c7_rank_correlation);
    report(8, "multi-disturbance", c8_multi_disturbance);
    report(9, "budget gap", c9_budget_gap);
    report(10, "numerics", c10_numerics);
    std::printf("%d of 10 criteria failed\n", g_failed);
    return g_failed == 0 ? 0 : 1;
}
