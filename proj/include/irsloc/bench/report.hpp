// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "irsloc/bench/experiment.hpp"

namespace irsloc::bench {

/// Column order of results.csv.
inline const std::vector<std::string>& csv_header() {
    static const std::vector<std::string> h{"scenario", "variable", "sweep_value", "scheme", "metric",
                                            "value",    "value_db", "trials",      "failed"};
    return h;
}

/// Shortest text that parses back to the same double; non-finite values as nan, inf, -inf.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline double parse_double(const std::string& s) {
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw ConfigError("not a number: '" + s + "'");
    }
    if (used != s.size()) throw ConfigError("not a number: '" + s + "'");
    return v;
}

namespace detail {

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') q += '"';
        q += c;
    }
    return q + '"';
}

inline std::string csv_line(const std::vector<std::string>& fields) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out += ',';
        out += csv_field(fields[i]);
    }
    return out + "\r\n";
}

/// Splits RFC-4180 text into records; quoted fields may hold separators and doubled quotes.
inline std::vector<std::vector<std::string>> csv_records(const std::string& text) {
    std::vector<std::vector<std::string>> out;
    std::vector<std::string> rec;
    std::string field;
    bool quoted = false, any = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        if (c == '"') {
            quoted = true;
            any = true;
        } else if (c == ',') {
            rec.push_back(field);
            field.clear();
            any = true;
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
            if (any || !field.empty()) {
                rec.push_back(field);
                out.push_back(rec);
            }
            rec.clear();
            field.clear();
            any = false;
        } else {
            field += c;
            any = true;
        }
    }
    if (quoted) throw ConfigError("unterminated quoted CSV field");
    if (any || !field.empty()) {
        rec.push_back(field);
        out.push_back(rec);
    }
    return out;
}

}  // namespace detail

/// Writes `text` verbatim; failures name the path.
inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out << text;
    out.close();
    if (!out) throw Error("write failed: " + path.string());
}

/// results.csv contents; wall time is kept out so reruns compare byte for byte.
inline std::string format_csv(const std::vector<ResultRow>& rows) {
    std::string out = detail::csv_line(csv_header());
    for (const auto& r : rows)
        out += detail::csv_line({r.scenario, r.variable, format_double(r.sweep_value), r.scheme, r.metric,
                                 format_double(r.value), format_double(r.value_db), std::to_string(r.trials),
                                 std::to_string(r.failed)});
    return out;
}

/// Inverse of format_csv (wall_time comes back as 0).
inline std::vector<ResultRow> parse_csv(const std::string& text) {
    const auto recs = detail::csv_records(text);
    if (recs.empty() || recs.front() != csv_header()) throw ConfigError("results CSV header mismatch");
    std::vector<ResultRow> rows;
    for (std::size_t i = 1; i < recs.size(); ++i) {
        const auto& f = recs[i];
        if (f.size() != csv_header().size()) throw ConfigError("CSV record " + std::to_string(i) + " has the wrong field count");
        ResultRow r;
        r.scenario = f[0];
        r.variable = f[1];
        r.sweep_value = parse_double(f[2]);
        r.scheme = f[3];
        r.metric = f[4];
        r.value = parse_double(f[5]);
        r.value_db = parse_double(f[6]);
        r.trials = std::stoi(f[7]);
        r.failed = std::stoi(f[8]);
        rows.push_back(r);
    }
    return rows;
}

inline void emit_csv(const std::vector<ResultRow>& rows, const std::filesystem::path& path) {
    write_text(path, format_csv(rows));
}

inline std::vector<ResultRow> read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_csv(ss.str());
}

inline std::string format_timing_csv(const std::vector<ResultRow>& rows) {
    std::string out = detail::csv_line({"scenario", "sweep_value", "scheme", "wall_time_s"});
    for (const auto& r : rows)
        out += detail::csv_line({r.scenario, format_double(r.sweep_value), r.scheme, format_double(r.wall_time)});
    return out;
}

inline std::string format_trace_csv(const std::vector<TraceRecord>& traces) {
    std::string out = detail::csv_line(
        {"sweep_value", "irs", "iteration", "objective", "dx", "dz", "primal_residual", "min_eigenvalue"});
    for (const auto& t : traces)
        for (const auto& r : t.rows)
            out += detail::csv_line({format_double(t.sweep_value), std::to_string(t.irs), std::to_string(r.iteration),
                                     format_double(r.objective), format_double(r.dx), format_double(r.dz),
                                     format_double(r.primal_residual), format_double(r.min_eigenvalue)});
    return out;
}

struct PlotSeries {
    std::string file;
    std::string scenario;
    std::string scheme;
    std::string metric;
    std::string variable;
    std::string text;  // "x y_db" lines
};

inline std::string metric_axis_label(const std::string& metric) {
    if (metric == "crb_location") return "average location CRB (dB m^2)";
    if (metric == "mse_location") return "location MSE (dB m^2)";
    if (metric == "mse_angle") return "angle MSE (dB rad^2)";
    if (metric == "crb_angle") return "angle CRB (dB rad^2)";
    return metric + " (dB)";
}

/// One series per (scenario, scheme), in first-appearance order.
inline std::vector<PlotSeries> plot_series(const std::vector<ResultRow>& rows) {
    std::vector<PlotSeries> out;
    std::map<std::pair<std::string, std::string>, std::size_t> index;
    for (const auto& r : rows) {
        const auto key = std::make_pair(r.scenario, r.scheme);
        auto it = index.find(key);
        if (it == index.end()) {
            PlotSeries s;
            s.file = r.scenario + "_" + r.scheme + ".dat";
            s.scenario = r.scenario;
            s.scheme = r.scheme;
            s.metric = r.metric;
            s.variable = r.variable;
            it = index.emplace(key, out.size()).first;
            out.push_back(s);
        }
        out[it->second].text += format_double(r.sweep_value) + " " + format_double(r.value_db) + "\n";
    }
    return out;
}

inline nlohmann::json plot_manifest(const std::vector<PlotSeries>& series) {
    nlohmann::json m;
    m["series"] = nlohmann::json::array();
    for (const auto& s : series) {
        std::string x_label = s.variable;
        try {
            x_label = axis_label(sweep_variable_from_string(s.variable));
        } catch (const ConfigError&) {
        }
        m["series"].push_back({{"file", s.file},
                               {"scenario", s.scenario},
                               {"figure", s.scenario},
                               {"scheme", s.scheme},
                               {"metric", s.metric},
                               {"x_label", x_label},
                               {"y_label", metric_axis_label(s.metric)}});
    }
    return m;
}

/// Writes the .dat series and manifest.json into `dir`.
inline std::vector<PlotSeries> emit_plotdata(const std::vector<ResultRow>& rows, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto series = plot_series(rows);
    for (const auto& s : series) write_text(dir / s.file, s.text);
    write_text(dir / "manifest.json", plot_manifest(series).dump(2) + "\n");
    return series;
}

}  // namespace irsloc::bench
