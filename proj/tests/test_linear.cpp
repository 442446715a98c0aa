#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "gridfreq/error.hpp"
#include "gridfreq/linear_model.hpp"

using namespace gridfreq;
using Catch::Approx;

namespace {

AggregateSystem aggregate(double damping, double c_q) {
    AggregateSystem s;
    s.ek_mws = 101510.0;
    s.damping_mw_per_hz = damping;
    s.c_q = c_q;
    s.fcr.kind = GovernorKind::Hydro;
    s.fcr.droop_mw_per_hz = 3468.0;
    s.fcr.t_g = 1.0;
    s.fcr.t_w = 1.0;
    s.fcr.t_r = 1.5;
    s.fcr.transient_ratio = 20.0;
    return s;
}

double nadir(const LinearLoopConfig& cfg, double horizon = 30.0) {
    const auto r = loop_response(cfg, horizon, 0.01);
    return *std::min_element(r.y.begin(), r.y.end());
}

}  // namespace

TEST_CASE("polynomial algebra", "[linear]") {
    const Polynomial a({-1.0, 1.0});   // s - 1
    const Polynomial b({2.0, 1.0});    // s + 2
    const Polynomial c({1.0, 0.0, 1.0});  // s^2 + 1
    const Polynomial p = a * b * c;
    CHECK(p.degree() == 4);
    CHECK(p(3.0) == Approx(2.0 * 5.0 * 10.0));
    CHECK((p - p).is_zero());

    auto r = p.roots();
    REQUIRE(r.size() == 4);
    std::sort(r.begin(), r.end(), [](auto x, auto y) {
        return x.real() != y.real() ? x.real() < y.real() : x.imag() < y.imag();
    });
    CHECK(std::abs(r[0] - std::complex<double>(-2.0, 0.0)) < 1e-12);
    CHECK(std::abs(r[1] - std::complex<double>(0.0, -1.0)) < 1e-12);
    CHECK(std::abs(r[2] - std::complex<double>(0.0, 1.0)) < 1e-12);
    CHECK(std::abs(r[3] - std::complex<double>(1.0, 0.0)) < 1e-12);

    CHECK_FALSE(is_stable(RationalTf(Polynomial::constant(1.0), a)));
    CHECK(is_stable(RationalTf(Polynomial::constant(1.0), b)));
    CHECK_THROWS_AS(RationalTf(Polynomial::constant(1.0), Polynomial::constant(0.0)), DomainError);
    CHECK_THROWS_AS(RationalTf(c, b), DomainError);

    const RationalTf h(Polynomial({2.0, 4.0}), Polynomial({1.0, 2.0, 4.0}));
    const RationalTf n = h.normalized();
    CHECK(n.den.leading() == 1.0);
    CHECK(std::abs(n(std::complex<double>(0.3, 1.1)) - h(std::complex<double>(0.3, 1.1))) < 1e-14);
}

TEST_CASE("step responses", "[linear]") {
    SECTION("first-order lag") {
        const auto r = step_response(RationalTf(Polynomial::constant(1.0), Polynomial({1.0, 1.0})), 5.0, 0.01);
        CHECK(r.t[100] == Approx(1.0));
        CHECK(r.y[100] == Approx(1.0 - std::exp(-1.0)).margin(1e-6));
        CHECK(r.y[100] == Approx(0.6321).margin(1e-4));
    }
    SECTION("static gain") {
        const auto r = step_response(RationalTf(Polynomial::constant(1.0), Polynomial::constant(1.0)), 2.0, 0.1);
        for (double y : r.y) CHECK(y == Approx(1.0).epsilon(1e-14));
    }
    SECTION("halving the step changes nothing") {
        const RationalTf tf(Polynomial({1.0, -0.5}), Polynomial({3.0, 2.0, 1.0}));
        const auto a = step_response(tf, 10.0, 0.02);
        const auto b = step_response(tf, 10.0, 0.01);
        for (std::size_t k = 0; k < a.y.size(); ++k) CHECK(std::abs(a.y[k] - b.y[2 * k]) <= 1e-6);
    }
    SECTION("underdamped second order matches its closed form") {
        // 1 / (m s^2 + c s + k), the swing-with-droop analog.
        const double m = 2.0, c = 0.8, k = 2.0;
        const double wn = std::sqrt(k / m);
        const double zeta = c / (2.0 * std::sqrt(k * m));
        const double wd = wn * std::sqrt(1.0 - zeta * zeta);
        const double dt = 0.001;
        const auto r = step_response(RationalTf(Polynomial::constant(1.0), Polynomial({k, c, m})), 10.0, dt);
        const auto peak = std::max_element(r.y.begin(), r.y.end());
        const double t_peak = r.t[static_cast<std::size_t>(peak - r.y.begin())];
        CHECK(t_peak == Approx(std::numbers::pi / wd).margin(dt));
        const double overshoot = std::exp(-zeta * std::numbers::pi / std::sqrt(1.0 - zeta * zeta));
        CHECK(*peak == Approx((1.0 + overshoot) / k).epsilon(1e-6));
        for (std::size_t i = 0; i < r.t.size(); i += 250) {
            const double t = r.t[i];
            const double exact = (1.0 - std::exp(-zeta * wn * t) *
                                            (std::cos(wd * t) + zeta / std::sqrt(1.0 - zeta * zeta) * std::sin(wd * t))) / k;
            CHECK(r.y[i] == Approx(exact).margin(1e-9));
        }
    }
}

TEST_CASE("bilinear simulation", "[linear]") {
    const RationalTf lag(Polynomial::constant(1.0), Polynomial({1.0, 1.0}));
    SECTION("zero input, zero output") {
        for (double y : simulate_tustin(lag, std::vector<double>(50, 0.0), 0.01)) CHECK(y == 0.0);
    }
    SECTION("static gain passes samples through") {
        const std::vector<double> u{0.0, 1.0, -2.0, 3.5};
        const auto y = simulate_tustin(RationalTf(Polynomial::constant(2.0), Polynomial::constant(1.0)), u, 0.1);
        for (std::size_t k = 0; k < u.size(); ++k) CHECK(y[k] == Approx(2.0 * u[k]));
    }
    SECTION("step settles on the dc gain") {
        const auto y = simulate_tustin(lag * 3.0, std::vector<double>(4000, 1.0), 0.01);
        CHECK(y.back() == Approx(3.0).epsilon(1e-9));
    }
}

TEST_CASE("closed-loop assembly", "[linear]") {
    const AggregateSystem sys = aggregate(677.6, 0.05);

    SECTION("without EPC the loop is the disturbance block") {
        const LinearLoopConfig cfg = aggregate_loop(sys, 0.0, -0.87, -1450.0);
        const ClosedLoop cl = closed_loop_tf(cfg);
        const RationalTf a = cl.d_to_f.normalized(), b = cfg.gd.normalized();
        REQUIRE(a.den.degree() == b.den.degree());
        for (int k = 0; k <= a.den.degree(); ++k) CHECK(a.den[k] == Approx(b.den[k]).epsilon(1e-12));
        for (int k = 0; k <= b.num.degree(); ++k) CHECK(a.num[k] == Approx(b.num[k]).epsilon(1e-12));
    }

    SECTION("more gain, shallower nadir") {
        double prev = nadir(aggregate_loop(sys, 0.0, -0.87, -1450.0));
        for (double g : {100.0, 250.0, 1000.0, 3000.0}) {
            const double n = nadir(aggregate_loop(sys, g, -0.87, -1450.0));
            CHECK(n > prev);
            prev = n;
        }
    }

    SECTION("more negative coupling, deeper nadir") {
        double prev = -1e9;
        for (double k = -2.0; k <= 1.0 + 1e-12; k += 0.25) {
            const double n = nadir(aggregate_loop(sys, 250.0, k, -1450.0));
            CHECK(n > prev);
            prev = n;
        }
    }

    SECTION("loop operator undoes the EPC at constant coupling") {
        const LinearLoopConfig cfg = aggregate_loop(sys, 250.0, -0.87, -1450.0);
        const auto with = loop_response(cfg, 20.0, 0.01);
        LinearLoopConfig none = cfg;
        none.g_prime = 0.0;
        const auto without = loop_response(none, 20.0, 0.01);
        const auto back = simulate_tustin(loop_operator(cfg, -0.87), with.y, 0.01);
        double worst = 0.0;
        for (std::size_t k = 0; k < back.size(); ++k) worst = std::max(worst, std::abs(back[k] - without.y[k]));
        CHECK(worst < 1e-3);
    }

    SECTION("a right-half-plane pole is reported") {
        LinearLoopConfig cfg;
        cfg.gp = RationalTf(Polynomial::constant(1.0), Polynomial({1.0, 1.0}));
        cfg.gq = cfg.gp;
        cfg.gd = RationalTf(Polynomial::constant(1.0), Polynomial({-1.0, 1.0}));
        CHECK_THROWS_AS(closed_loop_tf(cfg), UnstableClosedLoop);
        cfg.gd = cfg.gp;
        cfg.g_prime = 1.0;
        cfg.k_pq = -5.0;  // 1 + g'(1 + k_pq)/(s + 1) has its pole at s = 3
        CHECK_THROWS_AS(closed_loop_tf(cfg), UnstableClosedLoop);
    }
}

TEST_CASE("aggregate droop steady state", "[linear]") {
    // Pure droop behind a governor lag, no load damping, no water column.
    AggregateSystem sys = aggregate(0.0, 0.0);
    sys.fcr.t_w = 0.0;
    sys.fcr.transient_ratio = 1.0;
    const LinearLoopConfig cfg = aggregate_loop(sys, 0.0, 0.0, -1450.0);
    CHECK(cfg.gd.dc_gain() * 3468.0 == Approx(1.0).epsilon(1e-12));
    const auto r = loop_response(cfg, 400.0, 0.01);
    CHECK(r.y.back() == Approx(-1450.0 / 3468.0).epsilon(0.01));
    CHECK(-*std::min_element(r.y.begin(), r.y.end()) > 1450.0 / 3468.0);
}

TEST_CASE("governor transfer functions", "[linear]") {
    GovernorParams th;
    th.kind = GovernorKind::Thermal;
    th.droop_mw_per_hz = 1000.0;
    th.t_g = 0.3;
    th.t_reheat = 7.0;
    th.f_hp = 0.3;
    CHECK(governor_tf(th).dc_gain() == Approx(1000.0));
    GovernorParams hy = aggregate(0.0, 0.0).fcr;
    const RationalTf r = governor_tf(hy);
    CHECK(r.dc_gain() == Approx(3468.0));
    // Water column zero in the right half plane.
    bool rhp_zero = false;
    for (const auto& z : r.num.roots()) rhp_zero = rhp_zero || z.real() > 0.0;
    CHECK(rhp_zero);
}

TEST_CASE("effective coupling", "[linear]") {
    const std::vector<double> dp{0.0, 5.0, 10.0, 20.0};
    SECTION("no filter bank change") {
        const auto k = effective_coupling(-0.3, std::vector<double>(4, 0.0), dp);
        CHECK_FALSE(k[0].has_value());
        for (std::size_t i = 1; i < 4; ++i) CHECK(*k[i] == -0.3);
    }
    SECTION("constant ratio adds on") {
        const auto k = effective_coupling(-0.3, {0.0, 0.5, 1.0, 2.0}, dp);
        for (std::size_t i = 1; i < 4; ++i) CHECK(*k[i] == Approx(-0.2).epsilon(1e-12));
    }
    SECTION("masked samples are absent, not zero") {
        const auto k = effective_coupling(0.0, {1.0, 1.0, 1.0, 1.0}, {1e-5, -1e-4, 2.0, -4.0});
        CHECK_FALSE(k[0].has_value());
        CHECK_FALSE(k[1].has_value());
        CHECK(*k[2] == 0.5);
        CHECK(*k[3] == -0.25);
    }
    CHECK_THROWS_AS(effective_coupling(0.0, {1.0}, {1.0, 2.0}), GridMismatch);
}
