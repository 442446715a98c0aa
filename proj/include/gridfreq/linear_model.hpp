#pragma once

#include <complex>
#include <optional>
#include <vector>

#include "gridfreq/machine.hpp"

namespace gridfreq {

/// Real polynomial in the Laplace variable, coefficients in ascending powers:
/// c[0] + c[1] s + c[2] s^2 + ...
class Polynomial {
public:
    Polynomial() = default;
    Polynomial(std::vector<double> ascending);
    Polynomial(std::initializer_list<double> ascending);
    static Polynomial constant(double c) { return Polynomial({c}); }

    const std::vector<double>& coefficients() const { return c_; }
    int degree() const { return static_cast<int>(c_.size()) - 1; }
    bool is_zero() const { return c_.size() == 1 && c_[0] == 0.0; }
    double leading() const { return c_.back(); }
    double operator[](std::size_t k) const { return k < c_.size() ? c_[k] : 0.0; }

    double operator()(double s) const;
    std::complex<double> operator()(std::complex<double> s) const;

    Polynomial operator+(const Polynomial& o) const;
    Polynomial operator-(const Polynomial& o) const;
    Polynomial operator*(const Polynomial& o) const;
    Polynomial operator*(double k) const;
    bool operator==(const Polynomial& o) const { return c_ == o.c_; }

    std::vector<std::complex<double>> roots() const;

private:
    std::vector<double> c_{0.0};
    void trim();
};

/// Proper or bi-proper rational transfer function num/den.
struct RationalTf {
    Polynomial num = Polynomial::constant(0.0);
    Polynomial den = Polynomial::constant(1.0);

    RationalTf() = default;
    RationalTf(Polynomial n, Polynomial d);

    /// Same function with a monic denominator.
    RationalTf normalized() const;
    std::complex<double> operator()(std::complex<double> s) const { return num(s) / den(s); }
    double dc_gain() const { return num[0] / den[0]; }
    bool is_proper() const { return num.degree() <= den.degree(); }

    RationalTf operator*(const RationalTf& o) const;
    RationalTf operator+(const RationalTf& o) const;
    RationalTf operator*(double k) const;
};

std::vector<std::complex<double>> poles(const RationalTf& tf);
bool is_stable(const RationalTf& tf);

/// Piecewise-linear time profile (t, value), held constant beyond the ends.
struct TimeProfile {
    std::vector<double> t;
    std::vector<double> value;
    double at(double time) const;
    bool empty() const { return t.empty(); }
};

/// Single-EPC, single-frequency loop. Units are MW, MVAr and Hz throughout:
/// G_p, G_q and G_d map MW, MVAr and MW to Hz.
struct LinearLoopConfig {
    double g_prime = 0.0;  // MW/Hz
    double k_pq = 0.0;
    RationalTf gp;
    RationalTf gq;
    RationalTf gd;
    TimeProfile q_sh_profile;  // MVAr
    double disturbance_mw = 0.0;  // step size of d, signed (generation loss < 0)
};

struct ClosedLoop {
    RationalTf d_to_f;
    RationalTf qsh_to_f;
};

/// Frequency response to the disturbance and to the shunt input:
/// G_d / (1 + g' G_p + g' k_pq G_q) and G_q over the same denominator.
/// Shared denominators are combined without extra factors, so the special
/// cases reduce to the open-loop blocks coefficient for coefficient.
/// Throws UnstableClosedLoop on a right-half-plane pole.
ClosedLoop closed_loop_tf(const LinearLoopConfig& cfg);

/// 1 + g' (G_p + G_q K) for a constant effective coupling K.
RationalTf loop_operator(const LinearLoopConfig& cfg, double k_eff);

struct TimeSeries {
    std::vector<double> t;
    std::vector<double> y;
};

/// Unit-step response, exact for a step input (zero-order hold on the
/// state-space realization).
TimeSeries step_response(const RationalTf& tf, double horizon, double dt);

/// Output of `tf` driven by samples `u` under the bilinear discretization,
/// zero initial state.
std::vector<double> simulate_tustin(const RationalTf& tf, const std::vector<double>& u, double dt);

/// Closed-loop frequency over time for the configured step disturbance and
/// shunt profile.
TimeSeries loop_response(const LinearLoopConfig& cfg, double horizon, double dt);

/// K_pq(t) = k_pq + dq_sh(t)/dp_epc(t); samples with |dp_epc| < epsilon are
/// absent. Inputs in MW / MVAr; the default epsilon is 1e-6 pu on 1000 MVA.
std::vector<std::optional<double>> effective_coupling(double k_pq, const std::vector<double>& dq_sh,
                                                      const std::vector<double>& dp_epc,
                                                      double epsilon = 1e-3);

/// Aggregate system seen from the frequency: one inertia, load damping and
/// one governor of the full FCR strength.
struct AggregateSystem {
    double ek_mws = 0.0;           // kinetic energy, MWs
    double damping_mw_per_hz = 0.0;
    GovernorParams fcr;            // droop_mw_per_hz is the total regulating strength
    double f_n = 50.0;
    double c_q = 0.0;              // G_q = c_q G_p
};

/// Governor transfer function R(s), MW per Hz of under-frequency.
RationalTf governor_tf(const GovernorParams& gov);

/// Loop with G_p = G_d = 1/(2 E_k s / f_n + D + R(s)) and G_q = c_q G_p.
LinearLoopConfig aggregate_loop(const AggregateSystem& sys, double g_prime, double k_pq,
                                double disturbance_mw);

}  // namespace gridfreq
