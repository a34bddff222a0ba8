// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "irsloc/anm/pipeline.hpp"
#include "irsloc/delay.hpp"
#include "irsloc/fisher.hpp"
#include "irsloc/localization.hpp"
#include "irsloc/parallel.hpp"
#include "irsloc/received.hpp"

namespace irsloc::bench {

enum class Scenario { Fig3, Fig4, Fig5, Fig6, Fig7, Fig8, Custom };

inline const char* to_string(Scenario s) {
    switch (s) {
        case Scenario::Fig3: return "fig3";
        case Scenario::Fig4: return "fig4";
        case Scenario::Fig5: return "fig5";
        case Scenario::Fig6: return "fig6";
        case Scenario::Fig7: return "fig7";
        case Scenario::Fig8: return "fig8";
        case Scenario::Custom: return "custom";
    }
    return "?";
}

inline Scenario scenario_from_string(const std::string& s) {
    for (Scenario v : {Scenario::Fig3, Scenario::Fig4, Scenario::Fig5, Scenario::Fig6, Scenario::Fig7, Scenario::Fig8,
                       Scenario::Custom})
        if (s == to_string(v)) return v;
    throw ConfigError("no scenario preset named '" + s + "'");
}

enum class SweepVariable { Elements, Sensors, Radius, TxPowerDbm, IrsAbscissa };

inline const char* to_string(SweepVariable v) {
    switch (v) {
        case SweepVariable::Elements: return "N";
        case SweepVariable::Sensors: return "M";
        case SweepVariable::Radius: return "r";
        case SweepVariable::TxPowerDbm: return "P_dbm";
        case SweepVariable::IrsAbscissa: return "d";
    }
    return "?";
}

inline SweepVariable sweep_variable_from_string(const std::string& s) {
    for (SweepVariable v : {SweepVariable::Elements, SweepVariable::Sensors, SweepVariable::Radius, SweepVariable::TxPowerDbm,
                            SweepVariable::IrsAbscissa})
        if (s == to_string(v)) return v;
    throw ConfigError("unknown sweep variable '" + s + "'");
}

inline const char* axis_label(SweepVariable v) {
    switch (v) {
        case SweepVariable::Elements: return "reflecting elements per IRS";
        case SweepVariable::Sensors: return "sensors per IRS";
        case SweepVariable::Radius: return "target disc radius around IRS 1 (m)";
        case SweepVariable::TxPowerDbm: return "BS transmit power (dBm)";
        case SweepVariable::IrsAbscissa: return "abscissa of IRS 1 and 2 (m)";
    }
    return "?";
}

enum class Metric { CrbLocation, MseLocation, MseAngle, CrbAngle };

inline const char* to_string(Metric m) {
    switch (m) {
        case Metric::CrbLocation: return "crb_location";
        case Metric::MseLocation: return "mse_location";
        case Metric::MseAngle: return "mse_angle";
        case Metric::CrbAngle: return "crb_angle";
    }
    return "?";
}

inline Metric metric_from_string(const std::string& s) {
    for (Metric m : {Metric::CrbLocation, Metric::MseLocation, Metric::MseAngle, Metric::CrbAngle})
        if (s == to_string(m)) return m;
    throw ConfigError("unknown metric '" + s + "'");
}

/// What a sweep point evaluates.
enum class ExperimentKind { Crb, Angle, Localization };

struct ExperimentSpec {
    Scenario scenario = Scenario::Custom;
    ExperimentKind kind = ExperimentKind::Crb;
    SweepVariable variable = SweepVariable::Elements;
    std::vector<double> grid;
    std::vector<std::string> schemes;
    int n_trials = 100;
    std::uint64_t seed = 1;
    std::string output = "out";
    bool full_pipeline = false;
    bool trace = false;
    bool redraw_phases = true;  // CRB sweeps: fresh random IRS phases per trial
    SceneConfig base;
    Region region = Region::rectangle({0.0, 0.0}, {10.0, 10.0});
    AngleOptions angle;
    int threads = 1;
};

inline void validate(const ExperimentSpec& e) {
    if (e.grid.empty()) throw ConfigError("sweep grid is empty");
    for (std::size_t i = 1; i < e.grid.size(); ++i)
        if (!(e.grid[i] > e.grid[i - 1])) throw ConfigError("sweep grid must be strictly increasing");
    if (e.n_trials < 1) throw ConfigError("n_trials must be at least 1");
    if (e.schemes.empty()) throw ConfigError("no schemes selected");
    for (const auto& s : e.schemes) {
        switch (e.kind) {
            case ExperimentKind::Crb: scheme_from_string(s); break;
            case ExperimentKind::Localization:
                if (s != "crb") loc_method_from_string(s);
                break;
            case ExperimentKind::Angle:
                if (s != "anm" && s != "crb") throw ConfigError("angle experiments take schemes anm and crb, not " + s);
                break;
        }
    }
    if (e.variable == SweepVariable::Elements || e.variable == SweepVariable::Sensors)
        for (double v : e.grid)
            if (v < 1.0 || v != std::floor(v)) throw ConfigError("element and sensor counts must be positive integers");
    if (e.variable == SweepVariable::Radius)
        for (double v : e.grid)
            if (!(v > 0.0)) throw ConfigError("radius must be positive");
    if (e.variable == SweepVariable::IrsAbscissa && e.base.num_irs() < 2)
        throw ConfigError("abscissa sweep moves IRS 1 and 2; the scene has fewer");
    validate(e.base);
}

/// Table I deployment with 20 extra BS-IRS paths per IRS (full-rank effective signals) and each array facing `aim`.
inline SceneConfig full_rank_scene(std::uint64_t seed, Vec2 aim = {5.0, 5.0}) {
    SceneConfig s = table_one_scene(seed);
    std::mt19937_64 rng(derive_seed(seed, 0x73636174ULL));
    for (int k = 0; k < s.num_irs(); ++k) {
        add_random_scatterers(s, k, 20, -3.0, rng);
        const Vec2 d = aim - s.irs[k].position;
        s.irs[k].orientation = std::atan2(d.y(), d.x());
    }
    return s;
}

inline std::vector<std::string> all_crb_schemes() {
    return {"collaborative", "angle-only", "delay-only", "no-collab", "single-irs"};
}

inline std::vector<std::string> all_loc_methods() { return {"three-stage", "two-stage", "wls", "ls", "crb"}; }

/// Preset sweeps; `custom` starts from the Table I scene with an N sweep and expects the caller to override.
inline ExperimentSpec preset(Scenario s) {
    ExperimentSpec e;
    e.scenario = s;
    e.base = table_one_scene(e.seed);
    switch (s) {
        case Scenario::Fig3:
            e.variable = SweepVariable::Elements;
            e.grid = {8, 16, 32, 64};
            e.schemes = all_crb_schemes();
            break;
        case Scenario::Fig4:
            e.variable = SweepVariable::Sensors;
            e.grid = {8, 16, 32, 64};
            e.schemes = all_crb_schemes();
            break;
        case Scenario::Fig5:
            e.variable = SweepVariable::Radius;
            e.grid = {10, 20, 30, 40, 50, 60};
            e.schemes = all_crb_schemes();
            break;
        case Scenario::Fig6:
            e.kind = ExperimentKind::Angle;
            e.variable = SweepVariable::TxPowerDbm;
            e.grid = {40, 45, 50, 55, 60};
            e.schemes = {"anm", "crb"};
            e.base = full_rank_scene(e.seed);
            e.full_pipeline = true;
            e.redraw_phases = false;
            break;
        case Scenario::Fig7:
            e.kind = ExperimentKind::Localization;
            e.variable = SweepVariable::TxPowerDbm;
            e.grid = {30, 40, 50, 60};
            e.schemes = all_loc_methods();
            e.redraw_phases = false;
            break;
        case Scenario::Fig8:
            e.kind = ExperimentKind::Localization;
            e.variable = SweepVariable::IrsAbscissa;
            e.grid = {5, 10, 20, 30, 40};
            e.schemes = all_loc_methods();
            e.redraw_phases = false;
            break;
        case Scenario::Custom:
            e.variable = SweepVariable::Elements;
            e.grid = {10};
            e.schemes = {"collaborative"};
            break;
    }
    return e;
}

/// Aggregated metric of one (sweep point, scheme).
struct ResultRow {
    std::string scenario;
    std::string variable;
    double sweep_value = 0.0;
    std::string scheme;
    std::string metric;
    double value = 0.0;     // linear (m^2 or rad^2)
    double value_db = 0.0;  // 10 log10(value)
    int trials = 0;
    int failed = 0;
    double wall_time = 0.0;  // seconds; not part of the result CSV

    bool operator==(const ResultRow&) const = default;
};

inline ResultRow make_row(const ExperimentSpec& e, double x, const std::string& scheme, Metric m, double value, int trials,
                          int failed, double seconds) {
    ResultRow r;
    r.scenario = to_string(e.scenario);
    r.variable = to_string(e.variable);
    r.sweep_value = x;
    r.scheme = scheme;
    r.metric = to_string(m);
    r.value = value;
    r.value_db = 10.0 * std::log10(value);
    r.trials = trials;
    r.failed = failed;
    r.wall_time = seconds;
    return r;
}

/// ADMM trace of the AOA solves of trial 0 at one sweep point.
struct TraceRecord {
    double sweep_value = 0.0;
    int irs = 0;
    std::vector<AdmmTraceRow> rows;
};

struct ExperimentResult {
    std::vector<ResultRow> rows;
    std::vector<TraceRecord> traces;
};

/// The base scene and target region at one sweep value.
inline std::pair<SceneConfig, Region> sweep_point(const ExperimentSpec& e, double x) {
    SceneConfig s = e.base;
    Region region = e.region;
    std::mt19937_64 rng(derive_seed(e.seed, 0x706f696e74ULL, static_cast<std::uint64_t>(std::llround(x * 1000.0))));
    switch (e.variable) {
        case SweepVariable::Elements:
            for (auto& d : s.irs) {
                d.n_elements = static_cast<int>(x);
                d.phase_profile = random_phase_profile(d.n_elements, rng);
            }
            break;
        case SweepVariable::Sensors:
            for (auto& d : s.irs) d.n_sensors = static_cast<int>(x);
            break;
        case SweepVariable::Radius: region = Region::disc(s.irs.front().position, x); break;
        case SweepVariable::TxPowerDbm: s.tx_power = dbm_to_watt(x); break;
        case SweepVariable::IrsAbscissa:
            s.irs[0].position.x() = x;
            s.irs[1].position.x() = x;
            break;
    }
    return {s, region};
}

namespace detail {

inline std::uint64_t point_seed(const ExperimentSpec& e, std::size_t point) { return derive_seed(e.seed, point); }

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline void run_crb_point(const ExperimentSpec& e, std::size_t p, ExperimentResult& out) {
    const double x = e.grid[p];
    const auto [scene, region] = sweep_point(e, x);
    AverageOptions opt;
    opt.threads = e.threads;
    opt.redraw_phases = e.redraw_phases;
    for (const auto& name : e.schemes) {
        const auto t0 = std::chrono::steady_clock::now();
        const CrbContext ctx = make_crb_context(scene, scheme_from_string(name));
        double mean = std::numeric_limits<double>::quiet_NaN();
        int failed = e.n_trials;
        try {
            const AverageCrb a = average_crb(ctx, region, e.n_trials, point_seed(e, p), opt);
            mean = a.mean;
            failed = a.singular;
        } catch (const SingularFimError&) {
        }
        out.rows.push_back(make_row(e, x, name, Metric::CrbLocation, mean, e.n_trials, failed, seconds_since(t0)));
    }
}

/// Mean fused-angle CRB over the IRSs of one scene.
inline double mean_angle_crb(const FimAngle& f) {
    double c = 0.0;
    const Eigen::Index K = f.aoa.rows();
    for (Eigen::Index k = 0; k < K; ++k) c += 1.0 / (f.aoa(k, k) + f.aod(k, k));
    return c / static_cast<double>(K);
}

struct PipelineOutput {
    DelayStageResult delays;
    std::vector<AnglePairEstimate> angles;
    bool ok = false;
};

inline PipelineOutput run_pipeline(const SceneConfig& s, const SensingStreams& st, std::uint64_t noise_seed,
                                   const AngleOptions& opt) {
    PipelineOutput o;
    const ReceivedSignal rx = synthesize_received(s, st, geometry_params(s), noise_seed);
    MatchedFilterOptions mf;
    mf.refine = true;
    o.delays = estimate_delays(s, st, rx, mf);
    o.angles = estimate_all_angles(o.delays.observations, s, opt);
    o.ok = std::all_of(o.angles.begin(), o.angles.end(),
                       [](const AnglePairEstimate& a) { return a.status != AngleStatus::Failed && std::isfinite(a.theta_fused); });
    return o;
}

inline void run_angle_point(const ExperimentSpec& e, std::size_t p, ExperimentResult& out) {
    const double x = e.grid[p];
    const auto t0 = std::chrono::steady_clock::now();
    const auto [scene, region] = sweep_point(e, x);
    const SensingStreams st = make_orthogonal_streams(scene);
    const std::uint64_t ps = point_seed(e, p);
    std::vector<std::optional<double>> err(e.n_trials);
    std::vector<double> crb(e.n_trials, 0.0);
    std::vector<std::vector<AdmmTraceRow>> traces(scene.num_irs());
    parallel_for(e.n_trials, e.threads, [&](int t) {
        const SceneConfig s = trial_scene(scene, region, ps, t, e.redraw_phases);
        crb[t] = mean_angle_crb(fim_angles(s, st));
        AngleOptions opt = e.angle;
        opt.threads = 1;
        opt.admm.record_trace = e.trace && t == 0;
        try {
            const PipelineOutput o = run_pipeline(s, st, derive_seed(ps, 0x6e6f697365ULL, static_cast<std::uint64_t>(t)), opt);
            if (opt.admm.record_trace)
                for (const auto& a : o.angles) traces[a.irs] = a.aoa_trace;
            if (!o.ok) return;
            const Geometry g = geometry_params(s);
            double se = 0.0;
            for (const auto& a : o.angles) se += std::pow(a.theta_fused - g.angle[a.irs], 2);
            err[t] = se / static_cast<double>(o.angles.size());
        } catch (const Error&) {
        }
    });
    double sum = 0.0, csum = 0.0;
    int ok = 0;
    for (int t = 0; t < e.n_trials; ++t) {
        csum += crb[t];
        if (err[t]) {
            sum += *err[t];
            ++ok;
        }
    }
    const double secs = seconds_since(t0);
    for (const auto& name : e.schemes) {
        if (name == "anm")
            out.rows.push_back(make_row(e, x, name, Metric::MseAngle, ok ? sum / ok : std::numeric_limits<double>::quiet_NaN(),
                                        e.n_trials, e.n_trials - ok, secs));
        else
            out.rows.push_back(make_row(e, x, name, Metric::CrbAngle, csum / e.n_trials, e.n_trials, 0, secs));
    }
    if (e.trace)
        for (int k = 0; k < scene.num_irs(); ++k) out.traces.push_back({x, k, traces[k]});
}

inline void run_localization_point(const ExperimentSpec& e, std::size_t p, ExperimentResult& out) {
    const double x = e.grid[p];
    const auto t0 = std::chrono::steady_clock::now();
    const auto [scene, region] = sweep_point(e, x);
    const CrbContext ctx = make_crb_context(scene, Scheme::Collaborative);
    const std::uint64_t ps = point_seed(e, p);
    constexpr int n_methods = 4;
    struct Trial {
        std::optional<std::array<double, n_methods>> err;
        std::optional<double> crb;
    };
    std::vector<Trial> trials(e.n_trials);
    std::vector<std::vector<AdmmTraceRow>> traces(scene.num_irs());
    parallel_for(e.n_trials, e.threads, [&](int t) {
        const SceneConfig s = trial_scene(scene, region, ps, t, e.redraw_phases);
        try {
            const CrbReport crb = scheme_crb(ctx, s.target_position);
            trials[t].crb = crb.crb_location;
            HybridMeasurements m = crb_level_measurements(s, crb);
            if (e.full_pipeline) {
                AngleOptions opt = e.angle;
                opt.threads = 1;
                opt.admm.record_trace = e.trace && t == 0;
                const PipelineOutput o =
                    run_pipeline(s, ctx.streams, derive_seed(ps, 0x6e6f697365ULL, static_cast<std::uint64_t>(t)), opt);
                if (opt.admm.record_trace)
                    for (const auto& a : o.angles) traces[a.irs] = a.aoa_trace;
                if (!o.ok) return;
                for (std::size_t i = 0; i < o.delays.delays.size(); ++i) m.tau_hat(i) = o.delays.delays[i].tau_hat;
                for (const auto& a : o.angles) {
                    m.theta_hat(a.irs) = a.theta_fused;
                    m.aod_available[a.irs] = a.theta_aod.has_value();
                }
            } else {
                std::mt19937_64 rng(derive_seed(ps, 0x6d656173ULL, static_cast<std::uint64_t>(t)));
                m = perturb(m, rng);
            }
            const std::vector<LocationEstimate> est = localize_all(m, s);
            std::array<double, n_methods> se{};
            for (int i = 0; i < n_methods; ++i) se[i] = (est[i].position - s.target_position).squaredNorm();
            if (std::all_of(se.begin(), se.end(), [](double v) { return std::isfinite(v); })) trials[t].err = se;
        } catch (const Error&) {
        }
    });
    const double secs = seconds_since(t0);
    for (const auto& name : e.schemes) {
        double sum = 0.0;
        int ok = 0;
        if (name == "crb") {
            for (const auto& tr : trials)
                if (tr.crb) {
                    sum += *tr.crb;
                    ++ok;
                }
            out.rows.push_back(make_row(e, x, name, Metric::CrbLocation, ok ? sum / ok : std::numeric_limits<double>::quiet_NaN(),
                                        e.n_trials, e.n_trials - ok, secs));
            continue;
        }
        const int idx = static_cast<int>(loc_method_from_string(name));
        for (const auto& tr : trials)
            if (tr.err) {
                sum += (*tr.err)[idx];
                ++ok;
            }
        out.rows.push_back(make_row(e, x, name, Metric::MseLocation, ok ? sum / ok : std::numeric_limits<double>::quiet_NaN(),
                                    e.n_trials, e.n_trials - ok, secs));
    }
    if (e.trace && e.full_pipeline)
        for (int k = 0; k < scene.num_irs(); ++k) out.traces.push_back({x, k, traces[k]});
}

}  // namespace detail

/// Sweeps the grid in order; trials inside a point run on `threads` workers and reduce in trial order.
inline ExperimentResult run_experiment(const ExperimentSpec& e) {
    validate(e);
    ExperimentResult out;
    for (std::size_t p = 0; p < e.grid.size(); ++p) {
        switch (e.kind) {
            case ExperimentKind::Crb: detail::run_crb_point(e, p, out); break;
            case ExperimentKind::Angle: detail::run_angle_point(e, p, out); break;
            case ExperimentKind::Localization: detail::run_localization_point(e, p, out); break;
        }
    }
    return out;
}

/// True when every sweep point has at least one successful trial for every scheme.
inline bool all_points_succeeded(const std::vector<ResultRow>& rows) {
    return std::all_of(rows.begin(), rows.end(), [](const ResultRow& r) { return r.failed < r.trials; });
}

}  // namespace irsloc::bench
