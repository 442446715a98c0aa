#pragma once

#include <string>
#include <utility>

namespace gridfreq {

inline constexpr double kNominalFrequency = 50.0;

struct Bus {
    std::string id;
    double base_kv = 400.0;
    /// Voltage magnitude (pu). Acts as the set point for voltage-controlled buses
    /// and as the initial guess elsewhere.
    double v_mag = 1.0;
    double v_ang = 0.0;  // rad
    std::string zone;
};

/// Pi-model branch; the off-nominal tap sits on the `from` side.
struct Branch {
    std::string from;
    std::string to;
    double r = 0.0;     // pu
    double x = 0.0;     // pu
    double b_sh = 0.0;  // pu, total line charging
    double tap = 1.0;
};

/// Static ZIP load. Shares of each polynomial sum to one.
struct ZipLoad {
    std::string bus;
    double p0 = 0.0;  // MW at v0
    double q0 = 0.0;  // MVAr at v0
    double v0 = 1.0;  // pu
    double zp = 0.0, ip = 0.0, pp = 1.0;
    double zq = 0.0, iq = 0.0, pq = 1.0;
    /// Active-power frequency sensitivity, pu power per pu frequency.
    double kpf = 0.0;
};

struct ShuntBank {
    std::string bus;
    double q_step = 0.0;  // MVAr per step at 1 pu voltage
    int n_steps = 0;
    int n_on = 0;
};

struct LoadPower {
    double p = 0.0;  // MW
    double q = 0.0;  // MVAr
};

/// Evaluates the ZIP law at voltage `v` (pu) and frequency deviation `df` (Hz).
LoadPower zip_load_power(const ZipLoad& load, double v, double df,
                         double f_n = kNominalFrequency);

/// Throws ModelError when the shares are negative or do not sum to one.
void validate(const ZipLoad& load);

}  // namespace gridfreq
