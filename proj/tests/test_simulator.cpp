#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "gridfreq/error.hpp"
#include "gridfreq/metrics.hpp"
#include "gridfreq/simulator.hpp"
#include "test_support.hpp"

using namespace gridfreq;
using Catch::Approx;

namespace {

std::size_t index_at(const SimulationTrace& tr, double t) {
    return static_cast<std::size_t>(std::lower_bound(tr.t.begin(), tr.t.end(), t - 1e-9) - tr.t.begin());
}

}  // namespace

TEST_CASE("centre-of-inertia frequency", "[simulator]") {
    CHECK(coi_frequency({1.0, 2.0, 3.0}, {50.0, 50.0, 50.0}) == 50.0);
    CHECK(coi_frequency({1.0, 1.0}, {0.1, -0.1}) == 0.0);
    CHECK(coi_frequency({2.0, 1.0}, {-0.3, 0.0}) == Approx(-0.2).epsilon(1e-15));
    CHECK_THROWS_AS(coi_frequency({}, {}), DomainError);
}

TEST_CASE("equilibrium is held without a disturbance", "[simulator][bundled]") {
    Scenario quiet;
    quiet.label = "quiet";
    quiet.duration = 20.0;
    const SimulationTrace tr = run_simulation(test::bundled(), quiet);
    double worst_f = 0.0, worst_v = 0.0;
    for (std::size_t s = 0; s < tr.size(); ++s) {
        worst_f = std::max(worst_f, std::abs(tr.coi_df[s]));
        for (const auto& g : tr.machine_df) worst_f = std::max(worst_f, std::abs(g[s]));
        for (const auto& v : tr.bus_v) worst_v = std::max(worst_v, std::abs(v[s] - v[0]));
    }
    CHECK(worst_f <= 1e-6);
    CHECK(worst_v <= 1e-6);
    CHECK(max_ifd(tr).deviation == Approx(0.0).margin(1e-6));
}

TEST_CASE("dimensioning trip without EPC", "[simulator][bundled]") {
    const NetworkModel& m = test::bundled();
    const SimulationTrace& a = test::bundled_case_a();
    const Ifd i = max_ifd(a);
    CHECK(-i.deviation > 1.1);
    CHECK(-i.deviation < 1.35);
    CHECK(i.t_min > a.trip_time);
    CHECK(std::abs(ssfd(a)) < -i.deviation);

    SECTION("uniform grid and complete series") {
        for (std::size_t s = 1; s < a.size(); ++s) CHECK(a.t[s] - a.t[s - 1] == Approx(a.dt).epsilon(1e-9));
        CHECK(a.t.back() == Approx(60.0));
        CHECK(a.coi_df.size() == a.size());
        CHECK(a.losses.size() == a.size());
        for (const auto& v : a.link_p) CHECK(v.size() == a.size());
        for (const auto& v : a.bus_v) CHECK(v.size() == a.size());
    }
    SECTION("trip removes the unit's stored energy") {
        const auto& g = m.machines[m.machine_index("N_O3")];
        const std::size_t before = index_at(a, a.trip_time) - 1;
        const std::size_t after = index_at(a, a.trip_time);
        CHECK(a.kinetic_energy[before] - a.kinetic_energy[after] ==
              Approx(g.h * g.s_rated / 1000.0).epsilon(1e-9));
    }
    SECTION("voltages stay within 0.1 pu") {
        for (const auto& v : a.bus_v) {
            for (double x : v) CHECK(std::abs(x - 1.0) <= 0.1);
        }
    }
    SECTION("flat before the trip") {
        for (std::size_t s = 0; s < index_at(a, a.trip_time); ++s) CHECK(std::abs(a.coi_df[s]) <= 1e-6);
    }
}

TEST_CASE("one EPC link on the dimensioning trip", "[simulator][bundled]") {
    const SimulationTrace& a = test::bundled_case_a();
    const SimulationTrace& b = test::bundled_case_b("BC", 250.0);
    CHECK(nadir_improvement(a, b) > 0.0);
    CHECK(std::abs(ssfd(b) - ssfd(a)) <= 0.005);
    CHECK(std::abs(max_rocof(b) - max_rocof(a)) <= 1e-9);

    const std::size_t k = b.link_index("BC");
    const double p0 = test::bundled().link("BC").p0;
    for (std::size_t s = 0; s < b.size(); ++s) {
        // No order until the local frequency crosses the threshold.
        if (b.link_df[k][s] > -0.4) CHECK(b.link_epc[k][s] == 0.0);
        CHECK(b.link_p[k][s] - p0 == Approx(b.link_epc[k][s]).margin(1e-6));
    }

    SECTION("zero gain replays case A exactly") {
        const std::vector<EpcConfig> none{make_epc_config(test::bundled(), "BC", 0.0)};
        const SimulationTrace z = run_simulation(test::bundled(), test::dimensioning(), none);
        CHECK(z.coi_df == a.coi_df);
        CHECK(z.link_p == a.link_p);
        CHECK(z.bus_v == a.bus_v);
    }
}

TEST_CASE("trace CSV", "[simulator][bundled]") {
    Scenario quiet;
    quiet.duration = 0.05;
    const SimulationTrace tr = run_simulation(test::bundled(), quiet);
    std::ostringstream out;
    write_trace_csv(tr, out);
    std::istringstream in(out.str());
    std::string header;
    std::getline(in, header);
    CHECK(header.rfind("t_s,coi_df_Hz,", 0) == 0);
    CHECK(header.find("link_BC_p_MW") != std::string::npos);
    CHECK(header.find("link_NC_q_MVAr") != std::string::npos);
    CHECK(header.find("_v_pu") != std::string::npos);
    const auto columns = std::count(header.begin(), header.end(), ',');
    std::string line;
    int rows = 0;
    while (std::getline(in, line)) {
        CHECK(std::count(line.begin(), line.end(), ',') == columns);
        ++rows;
    }
    CHECK(rows == static_cast<int>(tr.size()));
}

TEST_CASE("scenario checks", "[simulator]") {
    Scenario s;
    s.label = "x";
    s.duration = 10.0;
    s.disturbance.machine = "G";
    s.disturbance.trip_time = 12.0;
    CHECK_THROWS_AS(s.validate(), ModelError);
    s.disturbance.trip_time = 1.0;
    CHECK_NOTHROW(s.validate());
    s.duration = 0.0;
    CHECK_THROWS_AS(s.validate(), ModelError);

    Scenario bad = test::dimensioning();
    bad.disturbance.machine = "NOPE";
    CHECK_THROWS_AS(run_simulation(test::bundled(), bad), ModelError);
}
