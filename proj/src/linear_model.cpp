#include "gridfreq/linear_model.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "gridfreq/error.hpp"

namespace gridfreq {

// ---------------------------------------------------------------------------
// Polynomial

Polynomial::Polynomial(std::vector<double> ascending) : c_(std::move(ascending)) {
    if (c_.empty()) {
        c_.push_back(0.0);
    }
    trim();
}

Polynomial::Polynomial(std::initializer_list<double> ascending)
    : Polynomial(std::vector<double>(ascending)) {}

void Polynomial::trim() {
    while (c_.size() > 1 && c_.back() == 0.0) {
        c_.pop_back();
    }
}

double Polynomial::operator()(double s) const {
    double acc = 0.0;
    for (auto it = c_.rbegin(); it != c_.rend(); ++it) {
        acc = acc * s + *it;
    }
    return acc;
}

std::complex<double> Polynomial::operator()(std::complex<double> s) const {
    std::complex<double> acc(0.0, 0.0);
    for (auto it = c_.rbegin(); it != c_.rend(); ++it) {
        acc = acc * s + *it;
    }
    return acc;
}

Polynomial Polynomial::operator+(const Polynomial& o) const {
    std::vector<double> r(std::max(c_.size(), o.c_.size()), 0.0);
    for (std::size_t k = 0; k < r.size(); ++k) {
        r[k] = (*this)[k] + o[k];
    }
    return Polynomial(std::move(r));
}

Polynomial Polynomial::operator-(const Polynomial& o) const { return *this + o * -1.0; }

Polynomial Polynomial::operator*(const Polynomial& o) const {
    std::vector<double> r(c_.size() + o.c_.size() - 1, 0.0);
    for (std::size_t i = 0; i < c_.size(); ++i) {
        for (std::size_t j = 0; j < o.c_.size(); ++j) {
            r[i + j] += c_[i] * o.c_[j];
        }
    }
    return Polynomial(std::move(r));
}

Polynomial Polynomial::operator*(double k) const {
    std::vector<double> r = c_;
    for (auto& x : r) {
        x *= k;
    }
    return Polynomial(std::move(r));
}

std::vector<std::complex<double>> Polynomial::roots() const {
    const int n = degree();
    if (n < 1) {
        return {};
    }
    Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(n, n);
    for (int i = 1; i < n; ++i) {
        comp(i, i - 1) = 1.0;
    }
    for (int i = 0; i < n; ++i) {
        comp(i, n - 1) = -c_[static_cast<std::size_t>(i)] / leading();
    }
    Eigen::EigenSolver<Eigen::MatrixXd> es(comp, false);
    std::vector<std::complex<double>> r;
    for (int i = 0; i < n; ++i) {
        r.push_back(es.eigenvalues()(i));
    }
    return r;
}

// ---------------------------------------------------------------------------
// RationalTf

RationalTf::RationalTf(Polynomial n, Polynomial d) : num(std::move(n)), den(std::move(d)) {
    if (den.is_zero()) {
        throw DomainError("transfer function with zero denominator");
    }
    if (!is_proper()) {
        throw DomainError("transfer function is improper");
    }
}

RationalTf RationalTf::normalized() const {
    const double lead = den.leading();
    return {num * (1.0 / lead), den * (1.0 / lead)};
}

RationalTf RationalTf::operator*(const RationalTf& o) const { return {num * o.num, den * o.den}; }

RationalTf RationalTf::operator+(const RationalTf& o) const {
    if (den == o.den) {
        return {num + o.num, den};
    }
    return {num * o.den + o.num * den, den * o.den};
}

RationalTf RationalTf::operator*(double k) const { return {num * k, den}; }

std::vector<std::complex<double>> poles(const RationalTf& tf) { return tf.den.roots(); }

bool is_stable(const RationalTf& tf) {
    for (const auto& p : poles(tf)) {
        if (p.real() >= 0.0) {
            return false;
        }
    }
    return true;
}

double TimeProfile::at(double time) const {
    if (t.empty()) {
        return 0.0;
    }
    if (time <= t.front()) {
        return value.front();
    }
    if (time >= t.back()) {
        return value.back();
    }
    const auto it = std::upper_bound(t.begin(), t.end(), time);
    const std::size_t k = static_cast<std::size_t>(it - t.begin());
    const double w = (time - t[k - 1]) / (t[k] - t[k - 1]);
    return value[k - 1] + w * (value[k] - value[k - 1]);
}

// ---------------------------------------------------------------------------
// Loop assembly

namespace {

// Product of every distinct denominator except `skip`.
Polynomial cofactor(const std::vector<Polynomial>& dens, std::size_t skip) {
    Polynomial r = Polynomial::constant(1.0);
    for (std::size_t k = 0; k < dens.size(); ++k) {
        if (k != skip) {
            r = r * dens[k];
        }
    }
    return r;
}

std::size_t slot(std::vector<Polynomial>& dens, const Polynomial& d) {
    for (std::size_t k = 0; k < dens.size(); ++k) {
        if (dens[k] == d) {
            return k;
        }
    }
    dens.push_back(d);
    return dens.size() - 1;
}

struct CommonForm {
    Polynomial l;       // common denominator
    Polynomial np, nq, nd;  // numerators over l
};

CommonForm common_form(const LinearLoopConfig& cfg) {
    std::vector<Polynomial> dens;
    const std::size_t ip = slot(dens, cfg.gp.den);
    const std::size_t iq = slot(dens, cfg.gq.den);
    const std::size_t id = slot(dens, cfg.gd.den);
    CommonForm f;
    f.l = cofactor(dens, dens.size());
    f.np = cfg.gp.num * cofactor(dens, ip);
    f.nq = cfg.gq.num * cofactor(dens, iq);
    f.nd = cfg.gd.num * cofactor(dens, id);
    return f;
}

}  // namespace

ClosedLoop closed_loop_tf(const LinearLoopConfig& cfg) {
    const CommonForm f = common_form(cfg);
    const Polynomial den = f.l + f.np * cfg.g_prime + f.nq * (cfg.g_prime * cfg.k_pq);
    ClosedLoop cl;
    cl.d_to_f = RationalTf(f.nd, den);
    cl.qsh_to_f = RationalTf(f.nq, den);
    for (const auto& p : poles(cl.d_to_f)) {
        if (p.real() > 0.0) {
            throw UnstableClosedLoop("closed loop has a right-half-plane pole at " +
                                     std::to_string(p.real()) + (p.imag() >= 0 ? "+" : "") +
                                     std::to_string(p.imag()) + "j");
        }
    }
    return cl;
}

RationalTf loop_operator(const LinearLoopConfig& cfg, double k_eff) {
    const CommonForm f = common_form(cfg);
    return {f.l + f.np * cfg.g_prime + f.nq * (cfg.g_prime * k_eff), f.l};
}

// ---------------------------------------------------------------------------
// Time responses

namespace {

struct Realization {
    Eigen::MatrixXd a;
    Eigen::VectorXd b;
    Eigen::RowVectorXd c;
    double d = 0.0;
};

// Controllable canonical form of a proper transfer function.
Realization realize(const RationalTf& tf) {
    const RationalTf m = tf.normalized();
    const int n = m.den.degree();
    Realization r;
    r.d = m.num.degree() == n ? m.num[static_cast<std::size_t>(n)] : 0.0;
    r.a = Eigen::MatrixXd::Zero(n, n);
    r.b = Eigen::VectorXd::Zero(n);
    r.c = Eigen::RowVectorXd::Zero(n);
    for (int i = 0; i + 1 < n; ++i) {
        r.a(i, i + 1) = 1.0;
    }
    for (int i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        r.a(n - 1, i) = -m.den[k];
        r.c(i) = m.num[k] - r.d * m.den[k];
    }
    if (n > 0) {
        r.b(n - 1) = 1.0;
    }
    return r;
}

std::vector<double> simulate_zoh(const RationalTf& tf, const std::vector<double>& u, double dt) {
    const Realization r = realize(tf);
    const auto n = r.a.rows();
    std::vector<double> y(u.size(), 0.0);
    if (n == 0) {
        for (std::size_t k = 0; k < u.size(); ++k) {
            y[k] = r.d * u[k];
        }
        return y;
    }
    Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(n + 1, n + 1);
    aug.topLeftCorner(n, n) = r.a * dt;
    aug.topRightCorner(n, 1) = r.b * dt;
    const Eigen::MatrixXd e = aug.exp();
    const Eigen::MatrixXd ad = e.topLeftCorner(n, n);
    const Eigen::VectorXd bd = e.topRightCorner(n, 1);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    for (std::size_t k = 0; k < u.size(); ++k) {
        y[k] = r.c.dot(x) + r.d * u[k];
        x = ad * x + bd * u[k];
    }
    return y;
}

std::vector<double> time_grid(double horizon, double dt) {
    if (!(dt > 0.0) || !(horizon >= 0.0)) {
        throw DomainError("time grid needs dt > 0 and horizon >= 0");
    }
    const auto steps = static_cast<std::size_t>(std::llround(horizon / dt));
    std::vector<double> t(steps + 1);
    for (std::size_t k = 0; k <= steps; ++k) {
        t[k] = static_cast<double>(k) * dt;
    }
    return t;
}

}  // namespace

TimeSeries step_response(const RationalTf& tf, double horizon, double dt) {
    TimeSeries ts;
    ts.t = time_grid(horizon, dt);
    ts.y = simulate_zoh(tf, std::vector<double>(ts.t.size(), 1.0), dt);
    return ts;
}

std::vector<double> simulate_tustin(const RationalTf& tf, const std::vector<double>& u, double dt) {
    // Trapezoidal recursion on a state-space realization: the bilinear map of
    // tf with the input rising from zero over the step before t = 0. Better
    // conditioned than the equivalent difference equation when poles sit close
    // to z = 1.
    const Realization r = realize(tf);
    const auto n = r.a.rows();
    std::vector<double> y(u.size(), 0.0);
    if (n == 0) {
        for (std::size_t k = 0; k < u.size(); ++k) y[k] = r.d * u[k];
        return y;
    }
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(eye - 0.5 * dt * r.a);
    const Eigen::MatrixXd m = lu.solve(eye + 0.5 * dt * r.a);
    const Eigen::VectorXd g = lu.solve(0.5 * dt * r.b);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    double u_prev = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
        x = m * x + g * (u_prev + u[k]);
        y[k] = r.c.dot(x) + r.d * u[k];
        u_prev = u[k];
    }
    return y;
}

TimeSeries loop_response(const LinearLoopConfig& cfg, double horizon, double dt) {
    const ClosedLoop cl = closed_loop_tf(cfg);
    TimeSeries ts;
    ts.t = time_grid(horizon, dt);
    ts.y = simulate_zoh(cl.d_to_f, std::vector<double>(ts.t.size(), cfg.disturbance_mw), dt);
    if (!cfg.q_sh_profile.empty()) {
        std::vector<double> q(ts.t.size());
        for (std::size_t k = 0; k < q.size(); ++k) {
            q[k] = cfg.q_sh_profile.at(ts.t[k]);
        }
        const auto yq = simulate_zoh(cl.qsh_to_f, q, dt);
        for (std::size_t k = 0; k < q.size(); ++k) {
            ts.y[k] += yq[k];
        }
    }
    return ts;
}

std::vector<std::optional<double>> effective_coupling(double k_pq, const std::vector<double>& dq_sh,
                                                      const std::vector<double>& dp_epc,
                                                      double epsilon) {
    if (dq_sh.size() != dp_epc.size()) {
        throw GridMismatch("effective_coupling: traces differ in length");
    }
    std::vector<std::optional<double>> k(dp_epc.size());
    for (std::size_t i = 0; i < dp_epc.size(); ++i) {
        if (std::abs(dp_epc[i]) >= epsilon) {
            k[i] = k_pq + dq_sh[i] / dp_epc[i];
        }
    }
    return k;
}

// ---------------------------------------------------------------------------
// Aggregate blocks

RationalTf governor_tf(const GovernorParams& gov) {
    const double k = gov.droop_mw_per_hz;
    if (gov.kind == GovernorKind::Thermal) {
        return {Polynomial({k, k * gov.f_hp * gov.t_reheat}),
                Polynomial({1.0, gov.t_g}) * Polynomial({1.0, gov.t_reheat})};
    }
    Polynomial num = Polynomial::constant(k);
    Polynomial den = Polynomial({1.0, gov.t_g});
    if (gov.transient_ratio > 1.0 && gov.t_r > 0.0) {
        num = num * Polynomial({1.0, gov.t_r});
        den = den * Polynomial({1.0, gov.t_r * gov.transient_ratio});
    }
    if (gov.t_w > 0.0) {
        num = num * Polynomial({1.0, -gov.t_w});
        den = den * Polynomial({1.0, 0.5 * gov.t_w});
    }
    return {num, den};
}

LinearLoopConfig aggregate_loop(const AggregateSystem& sys, double g_prime, double k_pq,
                                double disturbance_mw) {
    const RationalTf r = governor_tf(sys.fcr);
    const Polynomial swing({sys.damping_mw_per_hz, 2.0 * sys.ek_mws / sys.f_n});
    const RationalTf g(r.den, swing * r.den + r.num);
    LinearLoopConfig cfg;
    cfg.g_prime = g_prime;
    cfg.k_pq = k_pq;
    cfg.gp = g;
    cfg.gd = g;
    cfg.gq = g * sys.c_q;
    cfg.disturbance_mw = disturbance_mw;
    return cfg;
}

}  // namespace gridfreq
