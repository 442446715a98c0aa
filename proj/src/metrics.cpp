#include "gridfreq/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "gridfreq/error.hpp"

namespace gridfreq {

namespace {

void check_aligned(const SimulationTrace& a, const SimulationTrace& b) {
    if (a.t.size() != b.t.size()) {
        throw GridMismatch("traces have different lengths");
    }
    for (std::size_t s = 0; s < a.t.size(); ++s) {
        if (std::abs(a.t[s] - b.t[s]) > 1e-9) {
            throw GridMismatch("traces have different time grids");
        }
    }
}

std::vector<double> diff(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> d(a.size());
    for (std::size_t s = 0; s < a.size(); ++s) d[s] = b[s] - a[s];
    return d;
}

}  // namespace

double integrate_until(const std::vector<double>& t, const std::vector<double>& y, double t_max) {
    if (t.size() != y.size()) {
        throw GridMismatch("integrand and time grid differ in length");
    }
    double sum = 0.0;
    for (std::size_t s = 1; s < t.size() && t[s] <= t_max + 1e-9; ++s) {
        sum += 0.5 * (t[s] - t[s - 1]) * (y[s] + y[s - 1]);
    }
    return sum;
}

Ifd max_ifd(const SimulationTrace& trace) {
    Ifd out;
    if (trace.t.empty()) {
        return out;
    }
    const double start = trace.trip_time >= 0.0 ? trace.trip_time : trace.t.front();
    bool found = false;
    for (std::size_t s = 0; s < trace.size(); ++s) {
        if (trace.t[s] < start - 1e-9) continue;
        const double f = std::min(trace.coi_df[s], 0.0);
        if (!found || f < out.deviation) {
            out.deviation = f;
            out.t_min = trace.t[s];
            found = true;
        }
    }
    return out;
}

std::vector<double> delta_p_epc(const SimulationTrace& a, const SimulationTrace& b,
                                const std::string& link) {
    check_aligned(a, b);
    return diff(a.link_p[a.link_index(link)], b.link_p[b.link_index(link)]);
}

std::vector<double> delta_q_epc_star(const SimulationTrace& a, const SimulationTrace& b,
                                     const std::string& link) {
    check_aligned(a, b);
    const std::size_t ka = a.link_index(link);
    const std::size_t kb = b.link_index(link);
    std::vector<double> d(a.size());
    for (std::size_t s = 0; s < a.size(); ++s) {
        d[s] = (b.link_q[kb][s] + b.link_q_shunt[kb][s]) - (a.link_q[ka][s] + a.link_q_shunt[ka][s]);
    }
    return d;
}

double k_pq_sum(const std::vector<double>& t, const std::vector<double>& dq,
                const std::vector<double>& dp, double t_min, double eps) {
    if (t.size() != dq.size() || t.size() != dp.size()) {
        throw GridMismatch("k_pq integrand series differ in length");
    }
    std::vector<double> ratio(t.size(), 0.0);
    bool any = false;
    for (std::size_t s = 0; s < t.size() && t[s] <= t_min + 1e-9; ++s) {
        if (std::abs(dp[s]) >= eps) {
            ratio[s] = dq[s] / dp[s];
            any = true;
        }
    }
    if (!any) {
        throw EmptyWindow("EPC never exceeded the guard before the nadir");
    }
    return integrate_until(t, ratio, t_min);
}

double load_energy_change(const SimulationTrace& a, const SimulationTrace& b, double t_min) {
    check_aligned(a, b);
    return integrate_until(a.t, diff(a.total_load_p, b.total_load_p), t_min);
}

double loss_energy_change(const SimulationTrace& a, const SimulationTrace& b, double t_min) {
    check_aligned(a, b);
    return integrate_until(a.t, diff(a.losses, b.losses), t_min);
}

double nadir_improvement(const SimulationTrace& a, const SimulationTrace& b) {
    check_aligned(a, b);
    return max_ifd(b).deviation - max_ifd(a).deviation;
}

double ssfd(const SimulationTrace& trace, double window) {
    if (trace.t.empty()) {
        throw EmptyWindow("empty trace");
    }
    const double from = trace.t.back() - window;
    double sum = 0.0;
    int n = 0;
    for (std::size_t s = 0; s < trace.size(); ++s) {
        if (trace.t[s] >= from - 1e-9) {
            sum += trace.coi_df[s];
            ++n;
        }
    }
    return sum / n;
}

double max_rocof(const SimulationTrace& trace, double window) {
    if (trace.size() < 2) {
        return 0.0;
    }
    const double dt = trace.t[1] - trace.t[0];
    const auto lag = static_cast<std::size_t>(std::max(1L, std::lround(window / dt)));
    double best = 0.0;
    for (std::size_t s = lag; s < trace.size(); ++s) {
        const double r = (trace.coi_df[s] - trace.coi_df[s - lag]) / (trace.t[s] - trace.t[s - lag]);
        best = std::max(best, std::abs(r));
    }
    return best;
}

MetricsReport compute_metrics(const SimulationTrace& a, const SimulationTrace& b,
                              const std::string& link, TminSource source) {
    check_aligned(a, b);
    MetricsReport r;
    r.link = link;
    const Ifd ia = max_ifd(a);
    const Ifd ib = max_ifd(b);
    r.f_nadir_a = ia.deviation;
    r.f_nadir_b = ib.deviation;
    r.t_min = source == TminSource::CaseB ? ib.t_min : ia.t_min;
    r.delta_f = ib.deviation - ia.deviation;
    r.dp_epc = delta_p_epc(a, b, link);
    r.dq_epc = delta_q_epc_star(a, b, link);
    for (double p : r.dp_epc) r.dp_peak = std::max(r.dp_peak, p);
    try {
        r.k_pq_sum = k_pq_sum(b.t, r.dq_epc, r.dp_epc, r.t_min);
    } catch (const EmptyWindow&) {
        r.k_pq_sum.reset();
    }
    r.de_load = load_energy_change(a, b, r.t_min);
    r.de_loss = loss_energy_change(a, b, r.t_min);
    r.ssfd_a = ssfd(a);
    r.ssfd_b = ssfd(b);
    r.rocof_a = max_rocof(a);
    r.rocof_b = max_rocof(b);
    const auto& sat = b.link_q_saturated[b.link_index(link)];
    r.q_saturated = std::any_of(sat.begin(), sat.end(), [](double v) { return v > 0.5; });
    return r;
}

std::string to_text(const MetricsReport& r) {
    std::ostringstream o;
    o << std::setprecision(10);
    o << "link = " << r.link << '\n'
      << "nadir_a_Hz = " << r.f_nadir_a << '\n'
      << "nadir_b_Hz = " << r.f_nadir_b << '\n'
      << "t_min_s = " << r.t_min << '\n'
      << "delta_f_epc_Hz = " << r.delta_f << '\n'
      << "peak_dp_epc_MW = " << r.dp_peak << '\n';
    o << "k_pq_sum_s = ";
    if (r.k_pq_sum) {
        o << *r.k_pq_sum;
    } else {
        o << "absent";
    }
    o << '\n'
      << "de_load_MWs = " << r.de_load << '\n'
      << "de_loss_MWs = " << r.de_loss << '\n'
      << "ssfd_a_Hz = " << r.ssfd_a << '\n'
      << "ssfd_b_Hz = " << r.ssfd_b << '\n'
      << "max_rocof_a_Hz_per_s = " << r.rocof_a << '\n'
      << "max_rocof_b_Hz_per_s = " << r.rocof_b << '\n'
      << "q_saturated = " << (r.q_saturated ? "true" : "false") << '\n'
      << "headroom_reached = " << (r.headroom_reached ? "true" : "false") << '\n';
    return o.str();
}

std::string metrics_csv_header() {
    return "link,nadir_a_Hz,nadir_b_Hz,t_min_s,delta_f_epc_Hz,peak_dp_epc_MW,k_pq_sum_s,de_load_MWs,"
           "de_loss_MWs,ssfd_a_Hz,ssfd_b_Hz,max_rocof_a_Hz_per_s,max_rocof_b_Hz_per_s,q_saturated,"
           "headroom_reached";
}

std::string to_csv_row(const MetricsReport& r) {
    std::ostringstream o;
    o << std::setprecision(10);
    o << r.link << ',' << r.f_nadir_a << ',' << r.f_nadir_b << ',' << r.t_min << ',' << r.delta_f << ','
      << r.dp_peak << ',';
    if (r.k_pq_sum) o << *r.k_pq_sum;
    o << ',' << r.de_load << ',' << r.de_loss << ',' << r.ssfd_a << ',' << r.ssfd_b << ',' << r.rocof_a
      << ',' << r.rocof_b << ',' << (r.q_saturated ? 1 : 0) << ',' << (r.headroom_reached ? 1 : 0);
    return o.str();
}

namespace {

std::vector<double> ranks(const std::vector<double>& x) {
    std::vector<std::size_t> idx(x.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return x[i] < x[j]; });
    std::vector<double> r(x.size());
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
        i = j + 1;
    }
    return r;
}

}  // namespace

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) {
        throw GridMismatch("correlation inputs differ in length");
    }
    if (x.size() < 2) {
        throw DomainError("correlation needs at least two points");
    }
    const std::vector<double> rx = ranks(x);
    const std::vector<double> ry = ranks(y);
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
    const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) {
        throw DomainError("correlation undefined for a constant series");
    }
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace gridfreq
