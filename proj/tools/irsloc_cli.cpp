// SPDX-License-Identifier: Apache-2.0
// irsloc: CRB sweeps, angle estimation and localization benchmarks for multi-IRS sensing.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "irsloc/bench/config.hpp"
#include "irsloc/bench/experiment.hpp"
#include "irsloc/bench/report.hpp"

namespace fs = std::filesystem;
using namespace irsloc;
using namespace irsloc::bench;

namespace {

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

ExperimentKind infer_kind(const std::vector<std::string>& schemes) {
    bool loc = false, angle = false;
    for (const auto& s : schemes) {
        if (s == "anm") angle = true;
        for (const char* m : {"three-stage", "two-stage", "wls", "ls"}) loc = loc || s == m;
    }
    if (angle) return ExperimentKind::Angle;
    if (loc) return ExperimentKind::Localization;
    return ExperimentKind::Crb;
}

void print_rows(const std::vector<ResultRow>& rows) {
    std::printf("%-8s %-6s %10s %-14s %-13s %12s %6s %6s %9s\n", "scenario", "var", "value", "scheme", "metric", "dB",
                "trials", "failed", "time(s)");
    for (const auto& r : rows)
        std::printf("%-8s %-6s %10g %-14s %-13s %12.3f %6d %6d %9.2f\n", r.scenario.c_str(), r.variable.c_str(),
                    r.sweep_value, r.scheme.c_str(), r.metric.c_str(), r.value_db, r.trials, r.failed, r.wall_time);
}

struct RunArgs {
    std::string scenario = "fig3";
    int trials = 0;
    std::uint64_t seed = 1;
    std::string out = "out";
    std::string schemes;
    std::string config;
    std::string variable;
    std::string grid;
    bool full_pipeline = false;
    bool trace = false;
};

int cmd_run(const RunArgs& a) {
    ExperimentSpec e = preset(scenario_from_string(a.scenario));
    e.seed = a.seed;
    e.output = a.out;
    e.threads = default_thread_count();
    if (a.trials > 0) e.n_trials = a.trials;
    if (!a.config.empty()) {
        const json j = load_json(a.config);
        e.base = scene_from_json(j);
        e.angle.admm = j.contains("admm") ? admm_from_json(j) : observation_fit_hyper();
    }
    if (!a.schemes.empty()) {
        e.schemes = split_list(a.schemes);
        if (e.scenario == Scenario::Custom) e.kind = infer_kind(e.schemes);
    }
    if (!a.variable.empty()) e.variable = sweep_variable_from_string(a.variable);
    if (!a.grid.empty()) {
        e.grid.clear();
        for (const auto& g : split_list(a.grid)) e.grid.push_back(parse_double(g));
    }
    e.full_pipeline = e.full_pipeline || a.full_pipeline;
    e.trace = a.trace;

    const ExperimentResult res = run_experiment(e);
    fs::create_directories(e.output);
    emit_csv(res.rows, fs::path(e.output) / "results.csv");
    write_text(fs::path(e.output) / "timing.csv", format_timing_csv(res.rows));
    emit_plotdata(res.rows, fs::path(e.output) / "plot");
    if (e.trace) write_text(fs::path(e.output) / "trace.csv", format_trace_csv(res.traces));
    print_rows(res.rows);
    if (!all_points_succeeded(res.rows)) {
        std::fprintf(stderr, "some sweep points produced no successful trial\n");
        return 1;
    }
    return 0;
}

int cmd_crb(const std::string& config, const std::string& out) {
    const SceneConfig s = load_scene(config);
    fs::create_directories(out);
    json doc;
    doc["target"] = {s.target_position.x(), s.target_position.y()};
    std::string csv = "scheme,crb_location,crb_location_db\r\n";
    for (const auto& name : all_crb_schemes()) {
        json entry;
        try {
            const CrbReport r = scheme_crb(s, scheme_from_string(name));
            entry["crb_location"] = r.crb_location;
            entry["crb_location_db"] = db10(r.crb_location);
            std::vector<double> fa, fd;
            for (Eigen::Index k = 0; k < r.fim_angle.aoa.rows(); ++k) {
                fa.push_back(r.fim_angle.aoa(k, k));
                fd.push_back(r.fim_angle.aod(k, k));
            }
            entry["fim_aoa"] = fa;
            entry["fim_aod"] = fd;
            csv += name + "," + format_double(r.crb_location) + "," + format_double(db10(r.crb_location)) + "\r\n";
            std::printf("%-14s %12.4e m^2  %8.3f dB\n", name.c_str(), r.crb_location, db10(r.crb_location));
        } catch (const SingularFimError& ex) {
            entry["error"] = ex.what();
            csv += name + ",nan,nan\r\n";
            std::printf("%-14s singular FIM\n", name.c_str());
        }
        doc["schemes"][name] = entry;
    }
    write_text(fs::path(out) / "crb.csv", csv);
    write_text(fs::path(out) / "crb.json", doc.dump(2) + "\n");
    return 0;
}

int cmd_angles(const std::string& config, const std::string& out, bool trace) {
    const json j = load_json(config);
    const SceneConfig s = scene_from_json(j);
    AngleOptions opt;
    if (j.contains("admm")) opt.admm = admm_from_json(j);
    opt.admm.record_trace = trace;
    opt.threads = default_thread_count();
    const SensingStreams st = make_orthogonal_streams(s);
    const ReceivedSignal rx = synthesize_received(s, st, geometry_params(s), s.seed);
    MatchedFilterOptions mf;
    mf.refine = true;
    const DelayStageResult d = estimate_delays(s, st, rx, mf);
    const auto angles = estimate_all_angles(d.observations, s, opt);
    const Geometry g = geometry_params(s);

    fs::create_directories(out);
    std::string csv = "irs,theta_true,theta_aoa,theta_aod,theta_fused,w_aoa,status,aod_method,aoa_iterations\r\n";
    bool ok = true;
    for (const auto& a : angles) {
        csv += std::to_string(a.irs) + "," + format_double(g.angle[a.irs]) + "," + format_double(a.theta_aoa) + "," +
               (a.theta_aod ? format_double(*a.theta_aod) : std::string("nan")) + "," + format_double(a.theta_fused) + "," +
               format_double(a.w_aoa) + "," + to_string(a.status) + "," + to_string(a.aod_method) + "," +
               std::to_string(a.aoa_iterations) + "\r\n";
        std::printf("IRS %d  true %+.6f  fused %+.6f  (%s)\n", a.irs, g.angle[a.irs], a.theta_fused, to_string(a.status));
        ok = ok && a.status != AngleStatus::Failed;
    }
    std::string dcsv = "l,k,tau_true,tau_hat\r\n";
    for (const auto& e : d.delays)
        dcsv += std::to_string(e.l) + "," + std::to_string(e.k) + "," + format_double(g.cascade_delay(e.l, e.k)) + "," +
                format_double(e.tau_hat) + "\r\n";
    write_text(fs::path(out) / "angles.csv", csv);
    write_text(fs::path(out) / "delays.csv", dcsv);
    if (trace) {
        std::vector<TraceRecord> tr;
        for (const auto& a : angles) tr.push_back({0.0, a.irs, a.aoa_trace});
        write_text(fs::path(out) / "trace.csv", format_trace_csv(tr));
    }
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-IRS hybrid delay/angle localization benchmarks"};
    app.require_subcommand(1);

    RunArgs ra;
    auto* run = app.add_subcommand("run", "run a preset or custom sweep and write CSV and plot data");
    run->add_option("--scenario", ra.scenario, "fig3 | fig4 | fig5 | fig6 | fig7 | fig8 | custom")->required();
    run->add_option("--trials", ra.trials, "Monte Carlo trials per sweep point (preset default 100)");
    run->add_option("--seed", ra.seed, "master seed");
    run->add_option("--out", ra.out, "output directory");
    run->add_option("--scheme", ra.schemes, "comma-separated schemes or methods");
    run->add_option("--config", ra.config, "scene JSON replacing the preset scene");
    run->add_option("--variable", ra.variable, "sweep variable: N | M | r | P_dbm | d");
    run->add_option("--grid", ra.grid, "comma-separated sweep values");
    run->add_flag("--full-pipeline", ra.full_pipeline, "localization from estimated delays and angles");
    run->add_flag("--trace", ra.trace, "write the ADMM trace of trial 0");

    std::string config, out = "out";
    bool trace = false;
    auto* crb = app.add_subcommand("crb", "CRB of every scheme for one scene");
    crb->add_option("--config", config, "scene JSON")->required()->check(CLI::ExistingFile);
    crb->add_option("--out", out, "output directory");
    auto* ang = app.add_subcommand("angles", "delay and angle estimation on one noisy realization");
    ang->add_option("--config", config, "scene JSON")->required()->check(CLI::ExistingFile);
    ang->add_option("--out", out, "output directory");
    ang->add_flag("--trace", trace, "write the AOA ADMM traces");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*run) return cmd_run(ra);
        if (*crb) return cmd_crb(config, out);
        if (*ang) return cmd_angles(config, out, trace);
    } catch (const irsloc::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
