#include <catch_amalgamated.hpp>

#include <cmath>

#include "gridfreq/epc.hpp"
#include "gridfreq/error.hpp"
#include "test_support.hpp"

using namespace gridfreq;
using Catch::Approx;

namespace {

EpcConfig droop(double g, double headroom = 1e9) {
    EpcConfig c;
    c.link = "L";
    c.g_prime = g;
    c.p_headroom = headroom;
    return c;
}

}  // namespace

TEST_CASE("EPC droop law", "[epc]") {
    CHECK(epc_power(-0.3, droop(250.0)) == 0.0);
    CHECK(epc_power(0.2, droop(250.0)) == 0.0);
    CHECK(epc_power(-1.226, droop(250.0)) == Approx(206.5).epsilon(1e-12));
    CHECK(epc_power(-2.0, droop(250.0, 300.0)) == 300.0);
    CHECK(epc_power(-1.0, droop(0.0)) == 0.0);

    SECTION("continuous at the threshold") {
        CHECK(epc_power(-0.4, droop(250.0)) == 0.0);
        CHECK(epc_power(-0.4 - 1e-9, droop(250.0)) == Approx(0.0).margin(1e-6));
    }
    SECTION("literal reading jumps at activation") {
        EpcConfig c = droop(250.0);
        c.law = EpcLaw::Literal;
        CHECK(epc_power(-0.3, c) == 0.0);
        CHECK(epc_power(-0.4, c) == Approx(100.0));
        CHECK(epc_power(-1.0, c) == Approx(250.0));
    }
    SECTION("latched controller keeps the droop on recovery") {
        EpcConfig c = droop(250.0);
        c.latch = true;
        CHECK(epc_power(-0.3, c, false) == 0.0);
        // Above the threshold the threshold-referenced droop output is negative and floors at 0.
        CHECK(epc_power(-0.3, c, true) == 0.0);
        c.law = EpcLaw::Literal;
        CHECK(epc_power(-0.3, c, true) == Approx(75.0));
    }
    SECTION("never negative, monotone in the deviation") {
        double prev = 0.0;
        for (int k = 0; k <= 300; ++k) {
            const double p = epc_power(-0.01 * k, droop(250.0, 200.0));
            CHECK(p >= prev);
            CHECK(p <= 200.0);
            prev = p;
        }
    }
}

TEST_CASE("gain conversion", "[epc]") {
    CHECK(gain_per_unit(250.0, 500.0) == Approx(25.0).epsilon(1e-15));
    CHECK(gain_per_unit(0.0, 500.0) == 0.0);
    CHECK(gain_physical(gain_per_unit(137.0, 650.0), 650.0) == Approx(137.0).epsilon(1e-15));
    CHECK_THROWS_AS(gain_per_unit(250.0, 0.0), DomainError);

    const auto& m = test::bundled();
    const double sk4 = gain_per_unit(250.0, m.link("SK4").p_rated);
    const double nswph = gain_per_unit(250.0, m.link("NSWPH").p_rated);
    CHECK(sk4 / nswph == Approx(3.0).epsilon(1e-15));
}

TEST_CASE("gain limit from the FCR-only extreme", "[epc]") {
    CHECK(max_gain(300.0, -0.4, -1.226) == Approx(363.196).epsilon(1e-5));
    CHECK(max_gain(0.0, -0.4, -1.226) == 0.0);
    CHECK(max_gain(100.0, -0.4, -0.5) == Approx(1000.0).epsilon(1e-12));
    CHECK_THROWS_AS(max_gain(100.0, -0.4, -0.4), DomainError);
    CHECK_THROWS_AS(max_gain(100.0, -0.4, -0.2), DomainError);

    // At the limit the request just reaches the headroom at the extreme.
    const double g = max_gain(300.0, -0.4, -1.226);
    CHECK(epc_power(-1.226, droop(g)) == Approx(300.0).epsilon(1e-12));
}

TEST_CASE("default headroom", "[epc]") {
    CHECK(default_headroom(600.0, 276.0) == 324.0);
    CHECK(default_headroom(650.0, -468.0) == 1118.0);
    CHECK(default_headroom(600.0, 600.0) == 0.0);
}
