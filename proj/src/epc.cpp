#include "gridfreq/epc.hpp"

#include <algorithm>
#include <cmath>

#include "gridfreq/error.hpp"

namespace gridfreq {

double epc_power(double df_hz, const EpcConfig& cfg, bool latched) {
    if (cfg.g_prime == 0.0) {
        return 0.0;
    }
    const bool active = df_hz <= cfg.f_activ || (cfg.latch && latched);
    if (!active) {
        return 0.0;
    }
    const double reference = cfg.law == EpcLaw::ThresholdReferenced ? cfg.f_activ : 0.0;
    const double p = -cfg.g_prime * (df_hz - reference);
    return std::clamp(p, 0.0, cfg.p_headroom);
}

double gain_per_unit(double g_prime, double p_rated, double f_n) {
    if (p_rated <= 0.0) {
        throw DomainError("gain_per_unit: p_rated must be positive");
    }
    return g_prime * f_n / p_rated;
}

double gain_physical(double g_pu, double p_rated, double f_n) {
    return g_pu * p_rated / f_n;
}

double max_gain(double p_headroom, double f_activ, double f_max_fcr) {
    if (std::abs(f_max_fcr) <= std::abs(f_activ)) {
        throw DomainError("max_gain: the FCR-only extreme never reaches the activation threshold");
    }
    return p_headroom / (f_activ - f_max_fcr);
}

double default_headroom(double p_rated, double p0) {
    return std::max(0.0, p_rated - p0);
}

}  // namespace gridfreq
