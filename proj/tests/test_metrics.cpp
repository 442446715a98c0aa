#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "gridfreq/error.hpp"
#include "gridfreq/metrics.hpp"
#include "test_support.hpp"

using namespace gridfreq;
using Catch::Approx;

namespace {

// One link "L", every series zero.
SimulationTrace synthetic(double duration, double dt, double trip = 1.0) {
    SimulationTrace tr;
    tr.dt = dt;
    tr.trip_time = trip;
    const auto n = static_cast<std::size_t>(std::lround(duration / dt)) + 1;
    for (std::size_t s = 0; s < n; ++s) tr.t.push_back(static_cast<double>(s) * dt);
    tr.link_ids = {"L"};
    const std::vector<double> zero(n, 0.0);
    tr.coi_df = zero;
    tr.link_p = tr.link_q = tr.link_q_shunt = tr.link_q_saturated = {zero};
    tr.total_load_p = tr.losses = zero;
    return tr;
}

}  // namespace

TEST_CASE("nadir search", "[metrics]") {
    SECTION("flat trace") {
        const auto tr = synthetic(10.0, 0.01, 1.0);
        const Ifd i = max_ifd(tr);
        CHECK(i.deviation == 0.0);
        CHECK(i.t_min == 1.0);
        CHECK(nadir_improvement(tr, tr) == 0.0);
    }
    SECTION("damped sinusoid hits its grid minimum") {
        auto tr = synthetic(20.0, 0.01, 1.0);
        std::size_t arg = 0;
        for (std::size_t s = 0; s < tr.size(); ++s) {
            const double t = tr.t[s] - 1.0;
            tr.coi_df[s] = t < 0.0 ? 0.0 : -std::exp(-0.2 * t) * std::sin(0.8 * t);
            if (tr.coi_df[s] < tr.coi_df[arg]) arg = s;
        }
        const Ifd i = max_ifd(tr);
        CHECK(i.deviation == tr.coi_df[arg]);
        CHECK(i.t_min == tr.t[arg]);
        // Continuous minimum at tan(0.8 t) = 4.
        const double t_star = std::atan(4.0) / 0.8;
        CHECK(i.t_min - 1.0 == Approx(t_star).margin(0.01));
        CHECK(i.deviation == Approx(-std::exp(-0.2 * t_star) * std::sin(0.8 * t_star)).margin(1e-4));
    }
    SECTION("pre-trip excursions are ignored") {
        auto tr = synthetic(10.0, 0.01, 5.0);
        tr.coi_df[100] = -0.5;
        tr.coi_df[700] = -0.2;
        CHECK(max_ifd(tr).deviation == -0.2);
        CHECK(max_ifd(tr).t_min == Approx(7.0));
    }
    SECTION("improvement is B minus A") {
        auto a = synthetic(10.0, 0.01);
        auto b = a;
        a.coi_df[300] = -1.2;
        b.coi_df[320] = -1.0;
        CHECK(nadir_improvement(a, b) == Approx(0.2));
        CHECK(nadir_improvement(b, a) == Approx(-0.2));
    }
}

TEST_CASE("coupling integral", "[metrics]") {
    const auto tr = synthetic(10.0, 0.01);
    const std::size_t n = tr.size();
    SECTION("constant ratio over four seconds") {
        std::vector<double> dp(n, 50.0), dq(n, -15.0);
        CHECK(k_pq_sum(tr.t, dq, dp, 4.0) == Approx(-1.2).epsilon(1e-12));
    }
    SECTION("no reactive change") {
        CHECK(k_pq_sum(tr.t, std::vector<double>(n, 0.0), std::vector<double>(n, 80.0), 6.0) == 0.0);
    }
    SECTION("samples below the guard add nothing") {
        std::vector<double> dp(n, 0.0), dq(n, 3.0);
        for (std::size_t s = 300; s < n; ++s) dp[s] = 10.0;  // active from 3 s
        // Ratio 0.3 from 3 s to 7 s, plus the ramp-in half sample.
        CHECK(k_pq_sum(tr.t, dq, dp, 7.0) == Approx(0.3 * 4.0 + 0.5 * 0.01 * 0.3).epsilon(1e-12));
    }
    SECTION("never active before the nadir") {
        std::vector<double> dp(n, 0.0), dq(n, 1.0);
        for (std::size_t s = 800; s < n; ++s) dp[s] = 10.0;
        CHECK_THROWS_AS(k_pq_sum(tr.t, dq, dp, 5.0), EmptyWindow);
    }
}

TEST_CASE("energy changes", "[metrics]") {
    const auto a = synthetic(10.0, 0.01);
    CHECK(load_energy_change(a, a, 8.0) == 0.0);
    CHECK(loss_energy_change(a, a, 8.0) == 0.0);

    auto b = a;
    for (auto& p : b.total_load_p) p += 10.0;
    CHECK(load_energy_change(a, b, 5.0) == Approx(50.0).epsilon(1e-12));

    auto c = a;
    for (std::size_t s = 0; s < c.size(); ++s) c.losses[s] = 2.0 * c.t[s];  // piecewise linear
    CHECK(loss_energy_change(a, c, 6.0) == Approx(36.0).epsilon(1e-12));

    SECTION("grids must agree") {
        const auto short_trace = synthetic(9.0, 0.01);
        CHECK_THROWS_AS(load_energy_change(a, short_trace, 5.0), GridMismatch);
        auto shifted = a;
        shifted.t[10] += 1e-3;
        CHECK_THROWS_AS(delta_p_epc(a, shifted, "L"), GridMismatch);
    }
}

TEST_CASE("link differences", "[metrics]") {
    auto a = synthetic(10.0, 0.1);
    auto b = a;
    for (std::size_t s = 0; s < a.size(); ++s) {
        a.link_p[0][s] = 300.0;
        b.link_p[0][s] = 300.0 + s;
        a.link_q[0][s] = -100.0;
        b.link_q[0][s] = -120.0;
        a.link_q_shunt[0][s] = 50.0;
        b.link_q_shunt[0][s] = 100.0;
    }
    const auto dp = delta_p_epc(a, b, "L");
    const auto dq = delta_q_epc_star(a, b, "L");
    for (std::size_t s = 0; s < a.size(); ++s) {
        CHECK(dp[s] == static_cast<double>(s));
        CHECK(dq[s] == 30.0);
    }
    for (double v : delta_p_epc(a, a, "L")) CHECK(v == 0.0);
}

TEST_CASE("summaries", "[metrics]") {
    auto tr = synthetic(20.0, 0.01, 1.0);
    for (std::size_t s = 0; s < tr.size(); ++s) {
        tr.coi_df[s] = tr.t[s] < 1.0 ? 0.0 : -0.3 * (1.0 - std::exp(-(tr.t[s] - 1.0)));
    }
    CHECK(ssfd(tr) == Approx(-0.3).epsilon(1e-5));
    // Steepest slope right after the trip, averaged over 0.5 s.
    CHECK(max_rocof(tr) == Approx(0.3 * (1.0 - std::exp(-0.5)) / 0.5).epsilon(1e-9));
    CHECK(max_rocof(tr, 0.0) == Approx(0.3 * (1.0 - std::exp(-0.01)) / 0.01).epsilon(1e-9));
    CHECK(integrate_until(tr.t, std::vector<double>(tr.size(), 1.0), 3.0) == Approx(3.0).epsilon(1e-12));
}

TEST_CASE("rank correlation", "[metrics]") {
    CHECK(spearman({1, 2, 3, 4}, {10, 20, 30, 40}) == Approx(1.0));
    CHECK(spearman({1, 2, 3, 4}, {4, 3, 2, 1}) == Approx(-1.0));
    CHECK(spearman({1, 2, 3, 4, 5}, {1, 4, 9, 16, 25}) == Approx(1.0));
    // Ties take the average rank: ranks (1.5, 1.5, 3) against (1, 2, 3).
    CHECK(spearman({1, 1, 2}, {1, 2, 3}) == Approx(std::sqrt(3.0) / 2.0).epsilon(1e-12));
    CHECK_THROWS_AS(spearman({1, 2}, {1, 2, 3}), GridMismatch);
    CHECK_THROWS_AS(spearman({1, 1, 1}, {1, 2, 3}), DomainError);
}

TEST_CASE("bundled A/B metrics", "[metrics][bundled]") {
    const auto& a = test::bundled_case_a();
    const MetricsReport sw = compute_metrics(a, test::bundled_case_b("SwPl", 250.0), "SwPl");
    const MetricsReport e1 = compute_metrics(a, test::bundled_case_b("EST1", 250.0), "EST1");
    const MetricsReport e2 = compute_metrics(a, test::bundled_case_b("EST2", 250.0), "EST2");

    for (const auto* r : {&sw, &e1, &e2}) {
        INFO(r->link);
        CHECK(r->delta_f > 0.0);
        CHECK(r->t_min > a.trip_time);
        CHECK(r->de_load > 0.0);
        CHECK(std::isfinite(r->de_loss));
        CHECK(r->k_pq_sum.has_value());
        // Peak order follows the droop law applied to the local excursion.
        CHECK(r->dp_peak > 0.0);
        CHECK(r->dp_peak <= 250.0 * (-r->f_nadir_a - 0.4) * 1.2);
    }
    // Supporting from the exporting end adds corridor losses; elsewhere they fall.
    CHECK(e1.de_loss > 0.0);
    CHECK(e2.de_loss > 0.0);
    CHECK(sw.de_loss < 0.0);
    // LCC export: extra import lowers consumption, injection change positive.
    CHECK(*e2.k_pq_sum > 0.0);
    CHECK(*std::max_element(e2.dq_epc.begin(), e2.dq_epc.end()) > 0.0);
    // LCC import: consumption rises.
    CHECK(*sw.k_pq_sum < 0.0);
    CHECK(*std::min_element(sw.dq_epc.begin(), sw.dq_epc.end()) < 0.0);

    const std::string text = to_text(sw);
    CHECK(text.find("k_pq_sum_s = ") != std::string::npos);
    const std::string header = metrics_csv_header();
    const std::string row = to_csv_row(sw);
    CHECK(std::count(header.begin(), header.end(), ',') == std::count(row.begin(), row.end(), ','));
}
