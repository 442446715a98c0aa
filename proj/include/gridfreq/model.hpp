#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "gridfreq/epc.hpp"
#include "gridfreq/hvdc.hpp"
#include "gridfreq/machine.hpp"
#include "gridfreq/network.hpp"

namespace gridfreq {

struct EpcSettings {
    double f_activ = -0.4;
    EpcLaw law = EpcLaw::ThresholdReferenced;
    bool latch = false;
    /// Low-pass time constant of the local frequency measurement, s.
    double filter_t = 0.1;
    std::vector<EpcConfig> assignments;
};

/// Static grid description. Immutable once loaded; simulations copy what they mutate.
struct NetworkModel {
    std::string name;
    double s_base = 1000.0;  // MVA
    double f_n = kNominalFrequency;
    std::vector<Bus> buses;
    std::vector<Branch> branches;
    std::vector<ZipLoad> loads;
    std::vector<ShuntBank> shunts;
    std::vector<SynchronousMachine> machines;
    std::vector<HvdcLink> hvdc;
    EpcSettings epc;

    std::size_t bus_index(std::string_view id) const;
    std::size_t machine_index(std::string_view id) const;
    std::size_t link_index(std::string_view id) const;
    const HvdcLink& link(std::string_view id) const { return hvdc[link_index(id)]; }

    /// Checks cross references and per-element invariants; throws ModelError.
    void validate() const;
};

/// EPC configuration for `link_id` at gain `g_prime`, using the model's law,
/// threshold and default headroom.
EpcConfig make_epc_config(const NetworkModel& model, std::string_view link_id, double g_prime);

}  // namespace gridfreq
