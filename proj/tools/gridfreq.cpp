#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gridfreq/error.hpp"
#include "gridfreq/harness.hpp"
#include "gridfreq/linear_model.hpp"
#include "gridfreq/metrics.hpp"
#include "gridfreq/model_io.hpp"
#include "gridfreq/simulator.hpp"

namespace fs = std::filesystem;
using namespace gridfreq;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitConvergence = 2;
constexpr int kExitUnreachable = 3;

struct Common {
    std::string out;
    double dt = 0.01;
    double duration = 0.0;  // 0 keeps the scenario's own
    unsigned threads = 0;
    bool quiet = false;
};

void add_common(CLI::App* cmd, Common& c, const std::string& name) {
    c.out = "gridfreq-out/" + name;
    cmd->add_option("-o,--out", c.out, "Run directory")->capture_default_str();
    cmd->add_option("--dt", c.dt, "Integration step, s")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--duration", c.duration, "Override the scenario horizon, s");
    cmd->add_option("-j,--threads", c.threads, "Worker threads (0: all cores)");
    cmd->add_flag("-q,--quiet", c.quiet, "Only report errors");
}

fs::path prepare(const std::string& dir) {
    fs::path p(dir);
    fs::create_directories(p);
    return p;
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream f(path);
    if (!f) throw Error("cannot write " + path.string());
    f << text;
}

void write_trace(const fs::path& path, const SimulationTrace& trace) {
    std::ofstream f(path);
    if (!f) throw Error("cannot write " + path.string());
    write_trace_csv(trace, f);
}

Scenario scenario_from(const std::string& path, const Common& c) {
    Scenario s = load_scenario(path);
    if (c.duration > 0.0) s.duration = c.duration;
    s.validate();
    return s;
}

HarnessOptions harness_options(const Common& c) {
    HarnessOptions h;
    h.sim.dt = c.dt;
    h.threads = c.threads;
    if (!c.quiet) h.warn = [](const std::string& m) { std::cerr << "warning: " << m << '\n'; };
    return h;
}

std::string run_summary(const SimulationTrace& tr) {
    const Ifd nadir = max_ifd(tr);
    double vmin = 1e9, vmax = -1e9, resid = 0.0;
    for (const auto& v : tr.bus_v) {
        vmin = std::min(vmin, *std::min_element(v.begin(), v.end()));
        vmax = std::max(vmax, *std::max_element(v.begin(), v.end()));
    }
    for (double r : tr.balance_residual) resid = std::max(resid, std::abs(r));
    std::ostringstream o;
    o << std::setprecision(10);
    o << "label = " << tr.label << '\n'
      << "samples = " << tr.size() << '\n'
      << "nadir_Hz = " << nadir.deviation << '\n'
      << "t_min_s = " << nadir.t_min << '\n'
      << "ssfd_Hz = " << ssfd(tr) << '\n'
      << "max_rocof_Hz_per_s = " << max_rocof(tr) << '\n'
      << "v_min_pu = " << vmin << '\n'
      << "v_max_pu = " << vmax << '\n'
      << "max_balance_residual_pu = " << resid << '\n';
    return o.str();
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

// --- run ---------------------------------------------------------------

struct RunArgs {
    std::string model, scenario;
    std::vector<std::string> epc;  // LINK=GAIN
    Common c;
};

int cmd_run(const RunArgs& a) {
    const NetworkModel model = load_model(a.model);
    const Scenario sc = scenario_from(a.scenario, a.c);
    std::vector<EpcConfig> epc = model.epc.assignments;
    if (!a.epc.empty()) {
        epc.clear();
        for (const auto& spec : a.epc) {
            const auto eq = spec.find('=');
            if (eq == std::string::npos) throw ModelError("--epc expects LINK=GAIN, got '" + spec + "'");
            epc.push_back(make_epc_config(model, spec.substr(0, eq), std::stod(spec.substr(eq + 1))));
        }
    }
    SimulationConfig cfg;
    cfg.dt = a.c.dt;
    const SimulationTrace tr = run_simulation(model, sc, epc, cfg);
    const fs::path dir = prepare(a.c.out);
    write_trace(dir / "trace.csv", tr);
    std::string summary = run_summary(tr);
    for (const auto& e : epc) summary += "epc = " + e.link + " " + std::to_string(e.g_prime) + " MW/Hz\n";
    write_file(dir / "metrics.txt", summary);
    if (!a.c.quiet) std::cout << summary << "run directory: " << dir.string() << '\n';
    return kExitOk;
}

// --- assess ------------------------------------------------------------

struct AssessArgs {
    std::string model, scenario, links;
    double gain = 250.0;
    bool traces = false;
    bool t_min_a = false;
    Common c;
};

void write_table(const fs::path& dir, const RankingTable& t, bool traces) {
    write_file(dir / "ranking.csv", ranking_csv(t));
    write_file(dir / "ranking.txt", ranking_text(t));
    fs::create_directories(dir / "metrics");
    for (const auto& row : t.rows) {
        if (row.metrics) write_file(dir / "metrics" / (row.link + ".txt"), to_text(*row.metrics));
        if (traces && row.trace) write_trace(dir / ("trace_" + row.link + ".csv"), *row.trace);
    }
    if (traces && t.case_a) write_trace(dir / "trace_case_a.csv", *t.case_a);
}

int failures(const RankingTable& t) {
    return static_cast<int>(std::count_if(t.rows.begin(), t.rows.end(),
                                          [](const RankingRow& r) { return !r.error.empty(); }));
}

int cmd_assess(const AssessArgs& a) {
    const NetworkModel model = load_model(a.model);
    const Scenario sc = scenario_from(a.scenario, a.c);
    HarnessOptions h = harness_options(a.c);
    h.keep_traces = a.traces;
    h.t_min_source = a.t_min_a ? TminSource::CaseA : TminSource::CaseB;
    const RankingTable t = assess_all_links(model, sc, a.gain, h, split_list(a.links));
    const fs::path dir = prepare(a.c.out);
    write_table(dir, t, a.traces);
    if (!a.c.quiet) std::cout << ranking_text(t) << "run directory: " << dir.string() << '\n';
    return failures(t) > 0 ? kExitConvergence : kExitOk;
}

// --- sweep -------------------------------------------------------------

struct SweepArgs {
    std::string model, scenario_dir;
    double gain = 250.0;
    Common c;
};

int cmd_sweep(const SweepArgs& a) {
    const NetworkModel model = load_model(a.model);
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(a.scenario_dir)) {
        if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<Scenario> scenarios;
    for (const auto& f : files) {
        Scenario s = scenario_from(f.string(), a.c);
        if (s.label.empty()) s.label = f.stem().string();
        scenarios.push_back(s);
    }
    const SweepResult res = multi_disturbance_sweep(model, scenarios, a.gain, harness_options(a.c));
    const fs::path dir = prepare(a.c.out);
    write_file(dir / "sweep.csv", sweep_csv(res));
    int failed = 0;
    for (std::size_t s = 0; s < res.tables.size(); ++s) {
        const fs::path sub = dir / files[s].stem();
        fs::create_directories(sub);
        write_table(sub, res.tables[s], false);
        failed += failures(res.tables[s]);
    }
    if (!a.c.quiet) std::cout << sweep_csv(res) << "run directory: " << dir.string() << '\n';
    return failed > 0 ? kExitConvergence : kExitOk;
}

// --- budget ------------------------------------------------------------

struct BudgetArgs {
    std::string model, scenario;
    std::vector<std::string> dists;
    double target = 0.9;
    BudgetOptions opts;
    Common c;
};

int cmd_budget(const BudgetArgs& a) {
    const NetworkModel model = load_model(a.model);
    const Scenario sc = scenario_from(a.scenario, a.c);
    const HarnessOptions h = harness_options(a.c);
    const fs::path dir = prepare(a.c.out);
    std::ostringstream summary;
    summary << std::setprecision(10);
    std::ofstream it(dir / "iterates.csv");
    it << "distribution,step,scale,nadir_Hz\n";
    int code = kExitOk;
    for (const auto& path : a.dists) {
        const Distribution d = load_distribution(path);
        const std::string name = d.name.empty() ? fs::path(path).stem().string() : d.name;
        summary << "[" << name << "]\n";
        try {
            const GainBudgetResult r = gain_budget_search(model, sc, d, a.target, h, a.opts);
            summary << "target_Hz = " << a.target << '\n'
                    << "scale = " << r.scale << '\n'
                    << "achieved_nadir_Hz = " << r.achieved_nadir << '\n'
                    << "total_gain_MW_per_Hz = " << r.total_gain << '\n'
                    << "total_peak_MW = " << r.total_peak_mw << '\n';
            for (const auto& [link, g] : r.distribution.gains) {
                summary << "base_gain." << link << " = " << g << '\n';
            }
            for (std::size_t k = 0; k < r.iterates.size(); ++k) {
                it << name << ',' << k << ',' << r.iterates[k].scale << ',' << r.iterates[k].nadir << '\n';
            }
        } catch (const TargetUnreachable& e) {
            summary << "unreachable = " << e.what() << '\n';
            code = kExitUnreachable;
        }
        summary << '\n';
    }
    write_file(dir / "budget.txt", summary.str());
    if (!a.c.quiet) std::cout << summary.str() << "run directory: " << dir.string() << '\n';
    return code;
}

// --- linear ------------------------------------------------------------

struct LinearArgs {
    std::string config;
    std::string out = "gridfreq-out/linear";
    bool quiet = false;
};

int cmd_linear(const LinearArgs& a) {
    const LinearLoopFile f = load_loop_config(a.config);
    const ClosedLoop cl = closed_loop_tf(f.loop);
    const TimeSeries r = loop_response(f.loop, f.horizon, f.dt);
    const fs::path dir = prepare(a.out);
    {
        std::ofstream csv(dir / "response.csv");
        csv << std::setprecision(12) << "t_s,df_Hz\n";
        for (std::size_t k = 0; k < r.t.size(); ++k) csv << r.t[k] << ',' << r.y[k] << '\n';
    }
    std::size_t imin = 0;
    for (std::size_t k = 1; k < r.y.size(); ++k) {
        if (r.y[k] < r.y[imin]) imin = k;
    }
    std::ostringstream o;
    o << std::setprecision(10);
    o << "g_prime_MW_per_Hz = " << f.loop.g_prime << '\n'
      << "k_pq = " << f.loop.k_pq << '\n'
      << "nadir_Hz = " << (r.y.empty() ? 0.0 : std::min(0.0, r.y[imin])) << '\n'
      << "t_min_s = " << (r.t.empty() ? 0.0 : r.t[imin]) << '\n'
      << "final_Hz = " << (r.y.empty() ? 0.0 : r.y.back()) << '\n';
    for (const auto& p : poles(cl.d_to_f)) o << "pole = " << p.real() << (p.imag() < 0 ? " - " : " + ") << std::abs(p.imag()) << "j\n";
    write_file(dir / "metrics.txt", o.str());
    if (!a.quiet) std::cout << o.str() << "run directory: " << dir.string() << '\n';
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Frequency containment studies with emergency power control on HVDC links"};
    app.require_subcommand(1);

    RunArgs run;
    auto* c_run = app.add_subcommand("run", "Simulate one scenario, FCR only unless EPC is assigned");
    c_run->add_option("model", run.model, "Model file")->required()->check(CLI::ExistingFile);
    c_run->add_option("scenario", run.scenario, "Scenario file")->required()->check(CLI::ExistingFile);
    c_run->add_option("--epc", run.epc, "LINK=GAIN in MW/Hz; replaces the model's assignments");
    add_common(c_run, run.c, "run");

    AssessArgs as;
    auto* c_as = app.add_subcommand("assess", "Rank every link by nadir improvement at one gain");
    c_as->add_option("model", as.model)->required()->check(CLI::ExistingFile);
    c_as->add_option("scenario", as.scenario)->required()->check(CLI::ExistingFile);
    c_as->add_option("-g,--gain", as.gain, "EPC gain, MW/Hz")->required()->check(CLI::NonNegativeNumber);
    c_as->add_option("--links", as.links, "Comma separated subset of link ids");
    c_as->add_flag("--traces", as.traces, "Write every case-B trace");
    c_as->add_flag("--t-min-from-a", as.t_min_a, "Integrate metrics up to the case-A nadir time");
    add_common(c_as, as.c, "assess");

    SweepArgs sw;
    auto* c_sw = app.add_subcommand("sweep", "Relative improvement of every link over a set of scenarios");
    c_sw->add_option("model", sw.model)->required()->check(CLI::ExistingFile);
    c_sw->add_option("scenario_dir", sw.scenario_dir)->required()->check(CLI::ExistingDirectory);
    c_sw->add_option("-g,--gain", sw.gain, "EPC gain, MW/Hz")->required()->check(CLI::NonNegativeNumber);
    add_common(c_sw, sw.c, "sweep");

    BudgetArgs bu;
    auto* c_bu = app.add_subcommand("budget", "Smallest scale of a gain distribution meeting a nadir target");
    c_bu->add_option("model", bu.model)->required()->check(CLI::ExistingFile);
    c_bu->add_option("scenario", bu.scenario)->required()->check(CLI::ExistingFile);
    c_bu->add_option("-d,--dist", bu.dists, "Distribution file (repeatable)")->required()->check(CLI::ExistingFile);
    c_bu->add_option("-t,--target", bu.target, "Nadir deviation magnitude, Hz")->required()->check(CLI::PositiveNumber);
    c_bu->add_option("--min-scale", bu.opts.min_scale, "Smallest scale tried")->capture_default_str();
    c_bu->add_option("--max-scale", bu.opts.max_scale, "Largest scale tried")->capture_default_str();
    c_bu->add_option("--tolerance", bu.opts.tolerance, "Band below the target, Hz")->capture_default_str();
    add_common(c_bu, bu.c, "budget");

    LinearArgs li;
    auto* c_li = app.add_subcommand("linear", "Closed-loop response of the single-frequency loop");
    c_li->add_option("config", li.config, "Loop file")->required()->check(CLI::ExistingFile);
    c_li->add_option("-o,--out", li.out, "Run directory")->capture_default_str();
    c_li->add_flag("-q,--quiet", li.quiet);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*c_run) return cmd_run(run);
        if (*c_as) return cmd_assess(as);
        if (*c_sw) return cmd_sweep(sw);
        if (*c_bu) return cmd_budget(bu);
        if (*c_li) return cmd_linear(li);
    } catch (const NonConvergence& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConvergence;
    } catch (const SingularJacobian& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConvergence;
    } catch (const UnstableSimulation& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConvergence;
    } catch (const TargetUnreachable& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUnreachable;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitError;
    }
    return kExitError;
}
