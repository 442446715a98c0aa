#include "gridfreq/model.hpp"

#include <algorithm>
#include <set>

#include "gridfreq/error.hpp"

namespace gridfreq {

namespace {

template <class Range, class Proj>
std::size_t find_index(const Range& items, std::string_view id, Proj proj, const char* what) {
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (proj(items[i]) == id) {
            return i;
        }
    }
    throw ModelError(std::string("unknown ") + what + " '" + std::string(id) + "'");
}

void check_positive(double v, const std::string& what) {
    if (!(v > 0.0)) {
        throw ModelError(what + " must be positive");
    }
}

}  // namespace

std::size_t NetworkModel::bus_index(std::string_view id) const {
    return find_index(buses, id, [](const Bus& b) -> const std::string& { return b.id; }, "bus");
}

std::size_t NetworkModel::machine_index(std::string_view id) const {
    return find_index(machines, id, [](const SynchronousMachine& m) -> const std::string& { return m.id; },
                      "machine");
}

std::size_t NetworkModel::link_index(std::string_view id) const {
    return find_index(hvdc, id, [](const HvdcLink& l) -> const std::string& { return l.id; },
                      "hvdc link");
}

void NetworkModel::validate() const {
    check_positive(s_base, "s_base");
    check_positive(f_n, "f_n");
    if (buses.empty()) {
        throw ModelError("model has no buses");
    }
    std::set<std::string> ids;
    for (const auto& b : buses) {
        if (!ids.insert(b.id).second) {
            throw ModelError("duplicate bus id " + b.id);
        }
        check_positive(b.base_kv, "bus " + b.id + " base_kv");
        check_positive(b.v_mag, "bus " + b.id + " v_mag");
    }
    for (const auto& br : branches) {
        bus_index(br.from);
        bus_index(br.to);
        if (br.x == 0.0) {
            throw ModelError("branch " + br.from + "-" + br.to + ": x must be non-zero");
        }
        if (br.r < 0.0) {
            throw ModelError("branch " + br.from + "-" + br.to + ": r must be non-negative");
        }
        check_positive(br.tap, "branch " + br.from + "-" + br.to + " tap");
    }
    for (const auto& l : loads) {
        bus_index(l.bus);
        gridfreq::validate(l);
    }
    for (const auto& s : shunts) {
        bus_index(s.bus);
        if (s.n_on < 0 || s.n_on > s.n_steps) {
            throw ModelError("shunt at " + s.bus + ": n_on out of range");
        }
    }
    int slack = 0;
    ids.clear();
    for (const auto& m : machines) {
        if (!ids.insert(m.id).second) {
            throw ModelError("duplicate machine id " + m.id);
        }
        bus_index(m.bus);
        check_positive(m.h, "machine " + m.id + " h");
        check_positive(m.s_rated, "machine " + m.id + " s_rated");
        check_positive(m.xd_p, "machine " + m.id + " xd_p");
        check_positive(m.avr.t_a, "machine " + m.id + " avr t_a");
        const auto& g = m.governor;
        if (g.droop_mw_per_hz < 0.0) {
            throw ModelError("machine " + m.id + ": negative droop");
        }
        check_positive(g.t_g, "machine " + m.id + " governor t_g");
        if (g.kind == GovernorKind::Thermal) {
            check_positive(g.t_reheat, "machine " + m.id + " governor t_reheat");
        } else {
            check_positive(g.t_w, "machine " + m.id + " governor t_w");
        }
        if (m.slack && m.online) {
            ++slack;
        }
    }
    if (slack != 1) {
        throw ModelError("exactly one online slack machine is required");
    }
    ids.clear();
    for (const auto& l : hvdc) {
        if (!ids.insert(l.id).second) {
            throw ModelError("duplicate hvdc id " + l.id);
        }
        const std::size_t b = bus_index(l.bus);
        gridfreq::validate(l);
        if (l.kind == ConverterKind::Vsc && l.vsc_mode == VscMode::AcVoltage) {
            for (const auto& m : machines) {
                if (m.online && bus_index(m.bus) == b) {
                    throw ModelError("hvdc link " + l.id + ": voltage-controlling VSC shares a bus with machine " + m.id);
                }
            }
        }
    }
    for (const auto& a : epc.assignments) {
        link_index(a.link);
        if (a.g_prime < 0.0) {
            throw ModelError("epc assignment " + a.link + ": negative gain");
        }
    }
    if (!(epc.f_activ < 0.0)) {
        throw ModelError("epc f_activ must be negative for under-frequency service");
    }
    check_positive(epc.filter_t, "epc filter_t");
}

EpcConfig make_epc_config(const NetworkModel& model, std::string_view link_id, double g_prime) {
    const HvdcLink& l = model.link(link_id);
    EpcConfig cfg;
    cfg.link = l.id;
    cfg.g_prime = g_prime;
    cfg.f_activ = model.epc.f_activ;
    cfg.law = model.epc.law;
    cfg.latch = model.epc.latch;
    cfg.p_headroom = default_headroom(l.p_rated, l.p0);
    return cfg;
}

}  // namespace gridfreq
