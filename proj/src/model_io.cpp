#include "gridfreq/model_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "gridfreq/error.hpp"

namespace gridfreq {

using nlohmann::json;

namespace {

template <class T>
T get_or(const json& j, const char* key, T fallback) {
    const auto it = j.find(key);
    if (it == j.end() || it->is_null()) {
        return fallback;
    }
    try {
        return it->get<T>();
    } catch (const json::exception& e) {
        throw ModelError(std::string("field '") + key + "': " + e.what());
    }
}

template <class T>
T require(const json& j, const char* key, const std::string& where) {
    const auto it = j.find(key);
    if (it == j.end() || it->is_null()) {
        throw ModelError(where + ": missing field '" + key + "'");
    }
    try {
        return it->get<T>();
    } catch (const json::exception& e) {
        throw ModelError(where + ": field '" + key + "': " + e.what());
    }
}

const json& array_or_empty(const json& j, const char* key) {
    static const json empty = json::array();
    const auto it = j.find(key);
    if (it == j.end()) {
        return empty;
    }
    if (!it->is_array()) {
        throw ModelError(std::string("section '") + key + "' must be an array");
    }
    return *it;
}

// Finite values only; infinite limits are written by omission.
void put(json& j, const char* key, double v) {
    if (std::isfinite(v)) {
        j[key] = v;
    }
}

MachineKind machine_kind(const std::string& s) {
    if (s == "hydro") return MachineKind::Hydro;
    if (s == "thermal") return MachineKind::Thermal;
    if (s == "nuclear") return MachineKind::Nuclear;
    throw ModelError("unknown machine kind '" + s + "'");
}

std::string machine_kind_name(MachineKind k) {
    switch (k) {
        case MachineKind::Hydro: return "hydro";
        case MachineKind::Thermal: return "thermal";
        case MachineKind::Nuclear: return "nuclear";
    }
    return "hydro";
}

GovernorParams parse_governor(const json& j) {
    GovernorParams g;
    const std::string kind = get_or<std::string>(j, "kind", "hydro");
    if (kind == "hydro") {
        g.kind = GovernorKind::Hydro;
    } else if (kind == "thermal") {
        g.kind = GovernorKind::Thermal;
    } else {
        throw ModelError("unknown governor kind '" + kind + "'");
    }
    g.droop_mw_per_hz = get_or(j, "droop_mw_per_hz", g.droop_mw_per_hz);
    g.t_g = get_or(j, "t_g", g.t_g);
    g.t_w = get_or(j, "t_w", g.t_w);
    g.t_r = get_or(j, "t_r", g.t_r);
    g.transient_ratio = get_or(j, "transient_ratio", g.transient_ratio);
    g.t_reheat = get_or(j, "t_reheat", g.t_reheat);
    g.f_hp = get_or(j, "f_hp", g.f_hp);
    g.p_max = get_or(j, "p_max", g.p_max);
    g.p_min = get_or(j, "p_min", g.p_min);
    g.rate_max = get_or(j, "rate_max", g.rate_max);
    return g;
}

json governor_json(const GovernorParams& g) {
    json j;
    j["kind"] = g.kind == GovernorKind::Hydro ? "hydro" : "thermal";
    j["droop_mw_per_hz"] = g.droop_mw_per_hz;
    j["t_g"] = g.t_g;
    j["t_w"] = g.t_w;
    j["t_r"] = g.t_r;
    j["transient_ratio"] = g.transient_ratio;
    j["t_reheat"] = g.t_reheat;
    j["f_hp"] = g.f_hp;
    put(j, "p_max", g.p_max);
    put(j, "p_min", g.p_min);
    put(j, "rate_max", g.rate_max);
    return j;
}

ShuntBank parse_bank(const json& j, const std::string& where) {
    ShuntBank b;
    b.bus = require<std::string>(j, "bus", where);
    b.q_step = require<double>(j, "q_step", where);
    b.n_steps = require<int>(j, "n_steps", where);
    b.n_on = get_or(j, "n_on", 0);
    return b;
}

json bank_json(const ShuntBank& b) {
    return {{"bus", b.bus}, {"q_step", b.q_step}, {"n_steps", b.n_steps}, {"n_on", b.n_on}};
}

HvdcLink parse_link(const json& j) {
    HvdcLink l;
    l.id = require<std::string>(j, "id", "hvdc");
    const std::string where = "hvdc " + l.id;
    l.name = get_or<std::string>(j, "name", l.id);
    l.acronym = get_or<std::string>(j, "acronym", l.id);
    l.bus = require<std::string>(j, "bus", where);
    const std::string kind = require<std::string>(j, "kind", where);
    if (kind == "LCC") {
        l.kind = ConverterKind::Lcc;
    } else if (kind == "VSC") {
        l.kind = ConverterKind::Vsc;
    } else {
        throw ModelError(where + ": kind must be LCC or VSC");
    }
    l.p_rated = require<double>(j, "p_rated", where);
    l.p0 = require<double>(j, "p0", where);
    l.epc_enabled = get_or(j, "epc_enabled", true);
    if (l.kind == ConverterKind::Lcc) {
        LccParams p;
        if (const auto it = j.find("lcc"); it != j.end()) {
            p.x_c = get_or(*it, "x_c", p.x_c);
            p.b = get_or(*it, "b", p.b);
            p.v_d0 = get_or(*it, "v_d0", p.v_d0);
            p.xi_min = get_or(*it, "xi_min", p.xi_min);
            p.alpha_min = get_or(*it, "alpha_min", p.alpha_min);
            p.v_d_set = get_or(*it, "v_d_set", p.v_d_set);
        }
        l.lcc = p;
        ShuntAutomaton a = default_shunt_automaton(l.bus, l.p_rated);
        if (const auto it = j.find("shunt"); it != j.end()) {
            if (const auto bk = it->find("bank"); bk != it->end()) {
                json bank = *bk;
                if (!bank.contains("bus")) bank["bus"] = l.bus;
                a.bank = parse_bank(bank, where + " shunt");
            }
            a.t_sw = get_or(*it, "t_sw", a.t_sw);
            a.q_hi = get_or(*it, "q_hi", a.q_hi);
            a.q_lo = get_or(*it, "q_lo", a.q_lo);
        }
        l.shunt = a;
    } else {
        const std::string mode = get_or<std::string>(j, "vsc_mode", "ReactivePower");
        if (mode == "ReactivePower") {
            l.vsc_mode = VscMode::ReactivePower;
        } else if (mode == "AcVoltage") {
            l.vsc_mode = VscMode::AcVoltage;
        } else {
            throw ModelError(where + ": vsc_mode must be ReactivePower or AcVoltage");
        }
        l.q_sched = get_or(j, "q_sched", 0.0);
        VscLimits v;
        if (const auto it = j.find("vsc"); it != j.end()) {
            v.i_q_max = get_or(*it, "i_q_max", v.i_q_max);
            v.i_max = get_or(*it, "i_max", v.i_max);
            v.k_v = get_or(*it, "k_v", v.k_v);
            v.t_v = get_or(*it, "t_v", v.t_v);
        }
        l.vsc = v;
    }
    return l;
}

json link_json(const HvdcLink& l) {
    json j{{"id", l.id}, {"name", l.name}, {"acronym", l.acronym}, {"bus", l.bus},
           {"kind", l.kind == ConverterKind::Lcc ? "LCC" : "VSC"}, {"p_rated", l.p_rated},
           {"p0", l.p0}, {"epc_enabled", l.epc_enabled}};
    if (l.lcc) {
        j["lcc"] = {{"x_c", l.lcc->x_c}, {"b", l.lcc->b}, {"v_d0", l.lcc->v_d0},
                    {"xi_min", l.lcc->xi_min}, {"alpha_min", l.lcc->alpha_min},
                    {"v_d_set", l.lcc->v_d_set}};
    }
    if (l.shunt) {
        j["shunt"] = {{"bank", bank_json(l.shunt->bank)}, {"t_sw", l.shunt->t_sw},
                      {"q_hi", l.shunt->q_hi}, {"q_lo", l.shunt->q_lo}};
    }
    if (l.kind == ConverterKind::Vsc) {
        j["vsc_mode"] = l.vsc_mode == VscMode::AcVoltage ? "AcVoltage" : "ReactivePower";
        j["q_sched"] = l.q_sched;
        const VscLimits v = l.vsc.value_or(VscLimits{});
        j["vsc"] = {{"i_q_max", v.i_q_max}, {"i_max", v.i_max}, {"k_v", v.k_v}, {"t_v", v.t_v}};
    }
    return j;
}

EpcLaw parse_law(const std::string& s) {
    if (s == "threshold_referenced") return EpcLaw::ThresholdReferenced;
    if (s == "literal") return EpcLaw::Literal;
    throw ModelError("epc_law must be threshold_referenced or literal");
}

json parse_json(const std::string& text, const char* what) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ModelError(std::string(what) + ": " + e.what());
    }
}

void check_format(const json& j, const char* what) {
    const auto it = j.find("format");
    if (it == j.end() || !it->is_string() || it->get<std::string>() != kModelFormat) {
        throw ModelError(std::string(what) + ": missing or unsupported format tag (expected \"" +
                         kModelFormat + "\")");
    }
}

RationalTf parse_tf(const json& j, const std::string& where) {
    return {Polynomial(require<std::vector<double>>(j, "num", where)),
            Polynomial(require<std::vector<double>>(j, "den", where))};
}

}  // namespace

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ModelError("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

NetworkModel parse_model(const std::string& text) {
    const json j = parse_json(text, "model");
    check_format(j, "model");
    NetworkModel m;
    m.name = get_or<std::string>(j, "name", "");
    m.s_base = get_or(j, "s_base", m.s_base);
    m.f_n = get_or(j, "f_n", m.f_n);
    for (const auto& b : array_or_empty(j, "buses")) {
        Bus bus;
        bus.id = require<std::string>(b, "id", "bus");
        bus.base_kv = get_or(b, "base_kv", bus.base_kv);
        bus.v_mag = get_or(b, "v_mag", bus.v_mag);
        bus.v_ang = get_or(b, "v_ang", bus.v_ang);
        bus.zone = get_or<std::string>(b, "zone", "");
        m.buses.push_back(bus);
    }
    for (const auto& b : array_or_empty(j, "branches")) {
        Branch br;
        br.from = require<std::string>(b, "from", "branch");
        br.to = require<std::string>(b, "to", "branch");
        br.r = get_or(b, "r", 0.0);
        br.x = require<double>(b, "x", "branch " + br.from + "-" + br.to);
        br.b_sh = get_or(b, "b_sh", 0.0);
        br.tap = get_or(b, "tap", 1.0);
        m.branches.push_back(br);
    }
    for (const auto& l : array_or_empty(j, "loads")) {
        ZipLoad z;
        z.bus = require<std::string>(l, "bus", "load");
        const std::string where = "load at " + z.bus;
        z.p0 = require<double>(l, "p0", where);
        z.q0 = get_or(l, "q0", 0.0);
        z.v0 = get_or(l, "v0", z.v0);
        z.zp = get_or(l, "zp", z.zp);
        z.ip = get_or(l, "ip", z.ip);
        z.pp = get_or(l, "pp", z.pp);
        z.zq = get_or(l, "zq", z.zq);
        z.iq = get_or(l, "iq", z.iq);
        z.pq = get_or(l, "pq", z.pq);
        z.kpf = get_or(l, "kpf", z.kpf);
        m.loads.push_back(z);
    }
    for (const auto& s : array_or_empty(j, "shunts")) {
        m.shunts.push_back(parse_bank(s, "shunt"));
    }
    for (const auto& g : array_or_empty(j, "machines")) {
        SynchronousMachine mc;
        mc.id = require<std::string>(g, "id", "machine");
        const std::string where = "machine " + mc.id;
        mc.bus = require<std::string>(g, "bus", where);
        mc.kind = machine_kind(get_or<std::string>(g, "kind", "hydro"));
        mc.s_rated = require<double>(g, "s_rated", where);
        mc.h = require<double>(g, "h", where);
        mc.d = get_or(g, "d", mc.d);
        mc.p_mech = get_or(g, "p_mech", mc.p_mech);
        mc.is_fcr = get_or(g, "is_fcr", mc.is_fcr);
        mc.slack = get_or(g, "slack", mc.slack);
        mc.online = get_or(g, "online", mc.online);
        mc.xd_p = get_or(g, "xd_p", mc.xd_p);
        if (const auto it = g.find("governor"); it != g.end()) mc.governor = parse_governor(*it);
        if (const auto it = g.find("avr"); it != g.end()) {
            mc.avr.k_a = get_or(*it, "k_a", mc.avr.k_a);
            mc.avr.t_a = get_or(*it, "t_a", mc.avr.t_a);
            mc.avr.efd_min = get_or(*it, "efd_min", mc.avr.efd_min);
            mc.avr.efd_max = get_or(*it, "efd_max", mc.avr.efd_max);
        }
        m.machines.push_back(mc);
    }
    for (const auto& l : array_or_empty(j, "hvdc")) {
        m.hvdc.push_back(parse_link(l));
    }
    if (const auto it = j.find("epc"); it != j.end()) {
        const json& e = *it;
        m.epc.f_activ = get_or(e, "f_activ", m.epc.f_activ);
        m.epc.law = parse_law(get_or<std::string>(e, "epc_law", "threshold_referenced"));
        m.epc.latch = get_or(e, "latch", m.epc.latch);
        m.epc.filter_t = get_or(e, "filter_t", m.epc.filter_t);
        for (const auto& a : array_or_empty(e, "assignments")) {
            EpcConfig c;
            c.link = require<std::string>(a, "link", "epc assignment");
            c.g_prime = require<double>(a, "g_prime", "epc assignment " + c.link);
            c.f_activ = get_or(a, "f_activ", m.epc.f_activ);
            c.law = m.epc.law;
            c.latch = m.epc.latch;
            c.p_headroom = get_or(a, "p_headroom", std::numeric_limits<double>::infinity());
            m.epc.assignments.push_back(c);
        }
    }
    m.validate();
    for (auto& c : m.epc.assignments) {
        if (!std::isfinite(c.p_headroom)) {
            const auto& l = m.link(c.link);
            c.p_headroom = default_headroom(l.p_rated, l.p0);
        }
    }
    return m;
}

NetworkModel load_model(const std::filesystem::path& path) {
    return parse_model(read_text_file(path));
}

std::string dump_model(const NetworkModel& m) {
    json j;
    j["format"] = kModelFormat;
    j["name"] = m.name;
    j["s_base"] = m.s_base;
    j["f_n"] = m.f_n;
    j["buses"] = json::array();
    for (const auto& b : m.buses) {
        j["buses"].push_back({{"id", b.id}, {"base_kv", b.base_kv}, {"v_mag", b.v_mag},
                              {"v_ang", b.v_ang}, {"zone", b.zone}});
    }
    j["branches"] = json::array();
    for (const auto& b : m.branches) {
        j["branches"].push_back({{"from", b.from}, {"to", b.to}, {"r", b.r}, {"x", b.x},
                                 {"b_sh", b.b_sh}, {"tap", b.tap}});
    }
    j["loads"] = json::array();
    for (const auto& l : m.loads) {
        j["loads"].push_back({{"bus", l.bus}, {"p0", l.p0}, {"q0", l.q0}, {"v0", l.v0},
                              {"zp", l.zp}, {"ip", l.ip}, {"pp", l.pp}, {"zq", l.zq},
                              {"iq", l.iq}, {"pq", l.pq}, {"kpf", l.kpf}});
    }
    j["shunts"] = json::array();
    for (const auto& s : m.shunts) j["shunts"].push_back(bank_json(s));
    j["machines"] = json::array();
    for (const auto& g : m.machines) {
        j["machines"].push_back({{"id", g.id}, {"bus", g.bus}, {"kind", machine_kind_name(g.kind)},
                                 {"s_rated", g.s_rated}, {"h", g.h}, {"d", g.d},
                                 {"p_mech", g.p_mech}, {"is_fcr", g.is_fcr}, {"slack", g.slack},
                                 {"online", g.online}, {"xd_p", g.xd_p},
                                 {"governor", governor_json(g.governor)},
                                 {"avr", {{"k_a", g.avr.k_a}, {"t_a", g.avr.t_a},
                                          {"efd_min", g.avr.efd_min}, {"efd_max", g.avr.efd_max}}}});
    }
    j["hvdc"] = json::array();
    for (const auto& l : m.hvdc) j["hvdc"].push_back(link_json(l));
    json e{{"f_activ", m.epc.f_activ},
           {"epc_law", m.epc.law == EpcLaw::Literal ? "literal" : "threshold_referenced"},
           {"latch", m.epc.latch},
           {"filter_t", m.epc.filter_t},
           {"assignments", json::array()}};
    for (const auto& c : m.epc.assignments) {
        json a{{"link", c.link}, {"g_prime", c.g_prime}, {"f_activ", c.f_activ}};
        put(a, "p_headroom", c.p_headroom);
        e["assignments"].push_back(a);
    }
    j["epc"] = e;
    return j.dump(2);
}

Scenario parse_scenario(const std::string& text) {
    const json j = parse_json(text, "scenario");
    check_format(j, "scenario");
    Scenario s;
    s.label = get_or<std::string>(j, "label", "");
    s.zone = get_or<std::string>(j, "zone", "");
    s.duration = get_or(j, "duration", s.duration);
    if (const auto it = j.find("disturbance"); it != j.end() && !it->is_null()) {
        s.disturbance.machine = get_or<std::string>(*it, "machine", "");
        s.disturbance.trip_time = get_or(*it, "trip_time", s.disturbance.trip_time);
        s.disturbance.p_lost = get_or(*it, "p_lost", 0.0);
        s.disturbance.q_lost = get_or(*it, "q_lost", 0.0);
        s.disturbance.ek_lost = get_or(*it, "ek_lost", 0.0);
    }
    if (const auto it = j.find("ramp"); it != j.end() && !it->is_null()) {
        PowerRamp r;
        r.link = require<std::string>(*it, "link", "ramp");
        r.start = get_or(*it, "start", r.start);
        r.duration = get_or(*it, "duration", r.duration);
        r.delta_mw = get_or(*it, "delta_mw", r.delta_mw);
        s.ramp = r;
    }
    s.validate();
    return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
    return parse_scenario(read_text_file(path));
}

std::string dump_scenario(const Scenario& s) {
    json j{{"format", kModelFormat}, {"label", s.label}, {"zone", s.zone}, {"duration", s.duration}};
    if (!s.disturbance.machine.empty()) {
        j["disturbance"] = {{"machine", s.disturbance.machine},
                            {"trip_time", s.disturbance.trip_time},
                            {"p_lost", s.disturbance.p_lost},
                            {"q_lost", s.disturbance.q_lost},
                            {"ek_lost", s.disturbance.ek_lost}};
    }
    if (s.ramp) {
        j["ramp"] = {{"link", s.ramp->link}, {"start", s.ramp->start},
                     {"duration", s.ramp->duration}, {"delta_mw", s.ramp->delta_mw}};
    }
    return j.dump(2);
}

LinearLoopFile parse_loop_config(const std::string& text) {
    const json j = parse_json(text, "loop config");
    check_format(j, "loop config");
    LinearLoopFile f;
    const double g = get_or(j, "g_prime", 0.0);
    const double k = get_or(j, "k_pq", 0.0);
    const double d = get_or(j, "disturbance_mw", 0.0);
    if (const auto it = j.find("aggregate"); it != j.end()) {
        AggregateSystem sys;
        sys.ek_mws = require<double>(*it, "ek_mws", "aggregate");
        sys.damping_mw_per_hz = get_or(*it, "damping_mw_per_hz", 0.0);
        sys.f_n = get_or(*it, "f_n", sys.f_n);
        sys.c_q = get_or(*it, "c_q", 0.0);
        if (const auto gv = it->find("governor"); gv != it->end()) sys.fcr = parse_governor(*gv);
        f.loop = aggregate_loop(sys, g, k, d);
    } else {
        f.loop.g_prime = g;
        f.loop.k_pq = k;
        f.loop.disturbance_mw = d;
        f.loop.gp = parse_tf(require<json>(j, "gp", "loop config"), "gp");
        f.loop.gq = parse_tf(require<json>(j, "gq", "loop config"), "gq");
        f.loop.gd = parse_tf(require<json>(j, "gd", "loop config"), "gd");
    }
    if (const auto it = j.find("q_sh_profile"); it != j.end()) {
        f.loop.q_sh_profile.t = require<std::vector<double>>(*it, "t", "q_sh_profile");
        f.loop.q_sh_profile.value = require<std::vector<double>>(*it, "value", "q_sh_profile");
        if (f.loop.q_sh_profile.t.size() != f.loop.q_sh_profile.value.size()) {
            throw ModelError("q_sh_profile: t and value differ in length");
        }
    }
    f.horizon = get_or(j, "horizon", f.horizon);
    f.dt = get_or(j, "dt", f.dt);
    return f;
}

LinearLoopFile load_loop_config(const std::filesystem::path& path) {
    return parse_loop_config(read_text_file(path));
}

}  // namespace gridfreq
