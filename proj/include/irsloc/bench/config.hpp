// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "irsloc/anm/admm.hpp"
#include "irsloc/scene.hpp"

namespace irsloc::bench {

using nlohmann::json;

namespace detail {

inline Vec2 read_point(const json& j, const char* key) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
        throw ConfigError(std::string(key) + " must be a two-element number array");
    return {j[0].get<double>(), j[1].get<double>()};
}

template <class T>
T read(const json& obj, const char* key, T fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
    }
}

inline void reject_unknown(const json& obj, std::initializer_list<const char*> keys, const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* k : keys) known = known || it.key() == k;
        if (!known) throw ConfigError("unknown key '" + it.key() + "' in " + where);
    }
}

inline IrsDescriptor read_irs(const json& j, int index, std::mt19937_64& rng) {
    const std::string where = "irs[" + std::to_string(index) + "]";
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    reject_unknown(j,
                   {"position", "n_elements", "n_sensors", "orientation", "phases", "amplitudes", "noise_power_dbm",
                    "paths", "scatterers"},
                   where);
    IrsDescriptor d;
    if (!j.contains("position")) throw ConfigError(where + ".position is required");
    d.position = read_point(j.at("position"), "position");
    d.n_elements = read(j, "n_elements", 10);
    d.n_sensors = read(j, "n_sensors", 10);
    d.orientation = read(j, "orientation", 0.0);
    if (d.n_elements <= 0 || d.n_sensors <= 0) throw ConfigError(where + ": element and sensor counts must be positive");
    if (j.contains("phases")) {
        const auto ph = j.at("phases").get<std::vector<double>>();
        if (static_cast<int>(ph.size()) != d.n_elements) throw ConfigError(where + ".phases length differs from n_elements");
        for (double p : ph) d.phase_profile.push_back({1.0, p});
    } else {
        d.phase_profile = random_phase_profile(d.n_elements, rng);
    }
    if (j.contains("amplitudes")) {
        const auto am = j.at("amplitudes").get<std::vector<double>>();
        if (static_cast<int>(am.size()) != d.n_elements) throw ConfigError(where + ".amplitudes length differs from n_elements");
        for (int n = 0; n < d.n_elements; ++n) d.phase_profile[n].amplitude = am[n];
    }
    if (j.contains("noise_power_dbm"))
        d.noise_power = j.at("noise_power_dbm").is_null() ? 0.0 : dbm_to_watt(j.at("noise_power_dbm").get<double>());
    if (j.contains("paths"))
        for (const auto& p : j.at("paths")) {
            reject_unknown(p, {"gain", "aoa", "aod"}, where + ".paths");
            PathComponent c;
            const auto g = p.at("gain").get<std::vector<double>>();
            if (g.size() != 2) throw ConfigError(where + ".paths gain must be [re, im]");
            c.gain = {g[0], g[1]};
            c.aoa = p.at("aoa").get<double>();
            c.aod = p.at("aod").get<double>();
            d.scatter_paths.push_back(c);
        }
    return d;
}

}  // namespace detail

/// Scene from a JSON document; absent keys take the Table I deployment and waveform values.
inline SceneConfig scene_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("scene configuration must be a JSON object");
    detail::reject_unknown(j,
                           {"seed", "bs", "target", "irs", "wavelength", "rcs_dbsm", "noise_power_dbm", "tx_power_dbm",
                            "bandwidth", "frame_length", "n_tx", "element_spacing_ratio", "fractional_delay",
                            "face_target", "admm"},
                           "scene");
    SceneConfig s;
    s.seed = detail::read<std::uint64_t>(j, "seed", 0);
    if (j.contains("bs")) {
        const json& b = j.at("bs");
        detail::reject_unknown(b, {"position", "orientation"}, "bs");
        if (b.contains("position")) s.bs_position = detail::read_point(b.at("position"), "bs.position");
        s.bs_orientation = detail::read(b, "orientation", 0.0);
    }
    if (j.contains("target")) s.target_position = detail::read_point(j.at("target"), "target");
    s.wavelength = detail::read(j, "wavelength", s.wavelength);
    if (j.contains("rcs_dbsm")) s.rcs = from_db10(j.at("rcs_dbsm").get<double>());
    // null stands for a noiseless receiver
    if (j.contains("noise_power_dbm"))
        s.noise_power = j.at("noise_power_dbm").is_null() ? 0.0 : dbm_to_watt(j.at("noise_power_dbm").get<double>());
    if (j.contains("tx_power_dbm")) s.tx_power = dbm_to_watt(j.at("tx_power_dbm").get<double>());
    s.bandwidth = detail::read(j, "bandwidth", s.bandwidth);
    s.frame_length = detail::read(j, "frame_length", s.frame_length);
    s.n_tx = detail::read(j, "n_tx", s.n_tx);
    s.element_spacing_ratio = detail::read(j, "element_spacing_ratio", s.element_spacing_ratio);
    s.fractional_delay = detail::read(j, "fractional_delay", false);

    if (j.contains("irs")) {
        std::mt19937_64 rng(s.seed ^ 0x5eedfacecafef00dULL);
        const json& arr = j.at("irs");
        if (!arr.is_array() || arr.empty()) throw ConfigError("irs must be a non-empty array");
        for (std::size_t k = 0; k < arr.size(); ++k) s.irs.push_back(detail::read_irs(arr[k], static_cast<int>(k), rng));
    } else {
        const SceneConfig t = table_one_scene(s.seed);
        s.irs = t.irs;
    }
    // Random scatterers are drawn after every phase profile so adding them leaves the phases unchanged.
    if (j.contains("irs")) {
        std::mt19937_64 srng(s.seed ^ 0x5ca77e2edULL);
        const json& arr = j.at("irs");
        for (std::size_t k = 0; k < arr.size(); ++k)
            if (arr[k].contains("scatterers")) {
                const json& sc = arr[k].at("scatterers");
                detail::reject_unknown(sc, {"count", "relative_db"}, "scatterers");
                add_random_scatterers(s, static_cast<int>(k), sc.at("count").get<int>(), detail::read(sc, "relative_db", -3.0),
                                      srng);
            }
    }
    if (detail::read(j, "face_target", false))
        for (auto& d : s.irs) {
            const Vec2 v = s.target_position - d.position;
            d.orientation = std::atan2(v.y(), v.x());
        }
    validate(s);
    return s;
}

/// ADMM hyperparameters from the optional "admm" section.
inline AdmmHyper admm_from_json(const json& j) {
    AdmmHyper h;
    if (!j.contains("admm")) return h;
    const json& a = j.at("admm");
    detail::reject_unknown(a, {"rho", "adaptive_rho", "lambda_fit", "eps_x", "eps_z", "eps_primal", "max_iter", "cond_limit"},
                           "admm");
    h.rho = detail::read(a, "rho", h.rho);
    h.adaptive_rho = detail::read(a, "adaptive_rho", h.adaptive_rho);
    h.lambda_fit = detail::read(a, "lambda_fit", h.lambda_fit);
    h.eps_x = detail::read(a, "eps_x", h.eps_x);
    h.eps_z = detail::read(a, "eps_z", h.eps_z);
    h.eps_primal = detail::read(a, "eps_primal", h.eps_primal);
    h.max_iter = detail::read(a, "max_iter", h.max_iter);
    h.cond_limit = detail::read(a, "cond_limit", h.cond_limit);
    return h;
}

/// Full description of a scene; scene_from_json(scene_to_json(s)) reproduces s.
inline json scene_to_json(const SceneConfig& s) {
    json j;
    j["seed"] = s.seed;
    j["bs"] = {{"position", {s.bs_position.x(), s.bs_position.y()}}, {"orientation", s.bs_orientation}};
    j["target"] = {s.target_position.x(), s.target_position.y()};
    j["wavelength"] = s.wavelength;
    j["rcs_dbsm"] = db10(s.rcs);
    j["noise_power_dbm"] = s.noise_power > 0.0 ? json(watt_to_dbm(s.noise_power)) : json(nullptr);
    j["tx_power_dbm"] = watt_to_dbm(s.tx_power);
    j["bandwidth"] = s.bandwidth;
    j["frame_length"] = s.frame_length;
    j["n_tx"] = s.n_tx;
    j["element_spacing_ratio"] = s.element_spacing_ratio;
    j["fractional_delay"] = s.fractional_delay;
    j["irs"] = json::array();
    for (const auto& d : s.irs) {
        json e;
        e["position"] = {d.position.x(), d.position.y()};
        e["n_elements"] = d.n_elements;
        e["n_sensors"] = d.n_sensors;
        e["orientation"] = d.orientation;
        std::vector<double> ph, am;
        for (const auto& c : d.phase_profile) {
            ph.push_back(c.phase);
            am.push_back(c.amplitude);
        }
        e["phases"] = ph;
        e["amplitudes"] = am;
        if (d.noise_power) e["noise_power_dbm"] = *d.noise_power > 0.0 ? json(watt_to_dbm(*d.noise_power)) : json(nullptr);
        if (!d.scatter_paths.empty()) {
            e["paths"] = json::array();
            for (const auto& p : d.scatter_paths)
                e["paths"].push_back({{"gain", {p.gain.real(), p.gain.imag()}}, {"aoa", p.aoa}, {"aod", p.aod}});
        }
        j["irs"].push_back(e);
    }
    return j;
}

inline json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    try {
        return json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

inline SceneConfig load_scene(const std::string& path) { return scene_from_json(load_json(path)); }

}  // namespace irsloc::bench
