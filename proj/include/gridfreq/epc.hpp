#pragma once

#include <limits>
#include <string>

#include "gridfreq/network.hpp"

namespace gridfreq {

enum class EpcLaw {
    /// Output proportional to the excursion beyond the threshold; continuous.
    ThresholdReferenced,
    /// Output proportional to the full deviation once the threshold is crossed.
    Literal,
};

struct EpcConfig {
    std::string link;
    double g_prime = 0.0;   // MW/Hz
    double f_activ = -0.4;  // Hz
    double p_headroom = std::numeric_limits<double>::infinity();  // MW
    EpcLaw law = EpcLaw::ThresholdReferenced;
    /// Keep the controller engaged once activated, even if df recovers above the threshold.
    bool latch = false;
};

/// Droop EPC output (MW, positive = more import) for local deviation `df_hz`.
/// `latched` forces the active branch, see EpcConfig::latch.
double epc_power(double df_hz, const EpcConfig& cfg, bool latched = false);

/// Converts a physical gain (MW/Hz) to the per-unit gain on the link rating.
double gain_per_unit(double g_prime, double p_rated, double f_n = kNominalFrequency);
double gain_physical(double g_pu, double p_rated, double f_n = kNominalFrequency);

/// Largest gain that keeps the linear EPC request within `p_headroom` when the
/// frequency reaches the FCR-only extreme `f_max_fcr` (signed, Hz).
double max_gain(double p_headroom, double f_activ, double f_max_fcr);

/// Remaining capacity towards full import.
double default_headroom(double p_rated, double p0);

}  // namespace gridfreq
