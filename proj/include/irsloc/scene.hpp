// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "irsloc/common.hpp"

namespace irsloc {

struct ReflectionCoefficient {
    double amplitude = 1.0;
    double phase = 0.0;
};

/// One propagation path of the BS-to-IRS channel.
struct PathComponent {
    cplx gain{1.0, 0.0};
    double aoa = 0.0;  // at the IRS array
    double aod = 0.0;  // at the BS array
};

struct IrsDescriptor {
    Vec2 position = Vec2::Zero();
    int n_elements = 10;
    int n_sensors = 10;
    std::vector<ReflectionCoefficient> phase_profile;
    // Broadside direction of the array in the global frame (radians); 0 means broadside along +-x.
    double orientation = 0.0;
    // Non line-of-sight BS-to-IRS paths added to the geometric LoS path.
    std::vector<PathComponent> scatter_paths;
    std::optional<double> noise_power;  // overrides SceneConfig::noise_power for this IRS
};

struct SceneConfig {
    Vec2 bs_position = Vec2::Zero();
    double bs_orientation = 0.0;
    std::vector<IrsDescriptor> irs;
    Vec2 target_position{5.0, 5.0};
    double wavelength = 0.3;
    double rcs = from_db10(7.0);
    double noise_power = dbm_to_watt(-100.0);
    double tx_power = dbm_to_watt(50.0);
    double bandwidth = 50e6;
    int frame_length = 100;
    int n_tx = 50;
    double element_spacing_ratio = 0.5;
    std::uint64_t seed = 0;
    bool fractional_delay = false;

    int num_irs() const { return static_cast<int>(irs.size()); }
    double sample_rate() const { return bandwidth; }
    double sensor_noise(int l) const { return irs[l].noise_power.value_or(noise_power); }
};

inline std::vector<ReflectionCoefficient> random_phase_profile(int n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 2.0 * pi);
    std::vector<ReflectionCoefficient> p(n);
    for (auto& c : p) c.phase = u(rng);
    return p;
}

inline void validate(const SceneConfig& s) {
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(name) + " must be positive");
    };
    positive(s.wavelength, "wavelength");
    positive(s.rcs, "rcs");
    if (!(s.noise_power >= 0.0)) throw ConfigError("noise_power must be non-negative");
    positive(s.tx_power, "tx_power");
    positive(s.bandwidth, "bandwidth");
    if (s.frame_length <= 0) throw ConfigError("frame_length must be positive");
    if (s.n_tx <= 0) throw ConfigError("n_tx must be positive");
    if (!(s.element_spacing_ratio > 0.0 && s.element_spacing_ratio <= 0.5))
        throw ConfigError("element_spacing_ratio must lie in (0, 0.5]");
    if (s.irs.empty()) throw ConfigError("scene needs at least one IRS");
    for (std::size_t k = 0; k < s.irs.size(); ++k) {
        const auto& d = s.irs[k];
        if (d.n_elements <= 0 || d.n_sensors <= 0) throw ConfigError("IRS element and sensor counts must be positive");
        if (static_cast<int>(d.phase_profile.size()) != d.n_elements)
            throw ConfigError("phase_profile length differs from n_elements for IRS " + std::to_string(k));
        for (const auto& c : d.phase_profile)
            if (!(c.amplitude > 0.0 && c.amplitude <= 1.0)) throw ConfigError("reflection amplitude outside (0, 1]");
        if (d.noise_power && !(*d.noise_power >= 0.0)) throw ConfigError("IRS noise_power must be non-negative");
        if ((d.position - s.bs_position).norm() == 0.0) throw ConfigError("IRS coincides with the BS");
        if ((d.position - s.target_position).norm() == 0.0)
            throw DegenerateGeometryError("target coincides with IRS " + std::to_string(k));
        for (std::size_t j = 0; j < k; ++j)
            if ((s.irs[j].position - d.position).norm() == 0.0) throw ConfigError("IRS positions must be distinct");
    }
}

/// Table I deployment: BS at the origin, IRSs at (10,50), (10,-50), (50,0), random unit-amplitude phases.
inline SceneConfig table_one_scene(std::uint64_t seed = 0, int n_elements = 10, int n_sensors = 10) {
    SceneConfig s;
    s.seed = seed;
    std::mt19937_64 rng(seed ^ 0x5eedfacecafef00dULL);
    for (Vec2 p : {Vec2(10, 50), Vec2(10, -50), Vec2(50, 0)}) {
        IrsDescriptor d;
        d.position = p;
        d.n_elements = n_elements;
        d.n_sensors = n_sensors;
        d.phase_profile = random_phase_profile(n_elements, rng);
        s.irs.push_back(d);
    }
    return s;
}

/// Per-IRS and per-pair geometric quantities of a scene.
struct Geometry {
    int K = 0;
    std::vector<double> distance;     // target to IRS k
    std::vector<double> angle;        // target angle seen by IRS k, in [-pi/2, pi/2]
    std::vector<double> bearing;      // global direction IRS k -> target
    std::vector<double> target_delay; // distance / c
    std::vector<double> bs_delay;     // BS to IRS k
    MatR cascade_delay;               // tau_k + tau_l
    MatR cascade_gain;                // alpha_{l,k}
};

inline Geometry geometry_params(const SceneConfig& s) {
    Geometry g;
    g.K = s.num_irs();
    const int K = g.K;
    for (int k = 0; k < K; ++k) {
        const auto& d = s.irs[k];
        const Vec2 delta = s.target_position - d.position;
        const double dist = delta.norm();
        if (dist == 0.0) throw DegenerateGeometryError("target coincides with IRS " + std::to_string(k));
        const double bearing = std::atan2(delta.y(), delta.x());
        g.distance.push_back(dist);
        g.bearing.push_back(bearing);
        g.angle.push_back(fold_half_pi(bearing - d.orientation));
        g.target_delay.push_back(dist / speed_of_light);
        g.bs_delay.push_back((d.position - s.bs_position).norm() / speed_of_light);
    }
    g.cascade_delay.resize(K, K);
    g.cascade_gain.resize(K, K);
    const double num = s.wavelength * s.wavelength * s.rcs / (64.0 * pi * pi * pi);
    for (int l = 0; l < K; ++l)
        for (int k = 0; k < K; ++k) {
            g.cascade_delay(l, k) = g.target_delay[l] + g.target_delay[k];
            g.cascade_gain(l, k) = std::sqrt(num) / (g.distance[l] * g.distance[k]);
        }
    return g;
}

/// Geometric line-of-sight BS-to-IRS path.
inline PathComponent line_of_sight_path(const SceneConfig& s, int k) {
    const auto& d = s.irs[k];
    const Vec2 to_bs = s.bs_position - d.position;
    PathComponent p;
    p.gain = s.wavelength / (4.0 * pi * to_bs.norm());
    p.aoa = fold_half_pi(std::atan2(to_bs.y(), to_bs.x()) - d.orientation);
    p.aod = fold_half_pi(std::atan2(-to_bs.y(), -to_bs.x()) - s.bs_orientation);
    return p;
}

/// Adds `count` scatter paths with random angles and phases, power `relative_db` below the LoS path each.
inline void add_random_scatterers(SceneConfig& s, int k, int count, double relative_db, std::mt19937_64& rng) {
    const double los = std::abs(line_of_sight_path(s, k).gain);
    const double mag = los * std::pow(10.0, relative_db / 20.0);
    std::uniform_real_distribution<double> ang(-0.45 * pi, 0.45 * pi);
    std::uniform_real_distribution<double> ph(0.0, 2.0 * pi);
    for (int r = 0; r < count; ++r) {
        PathComponent p;
        p.aoa = ang(rng);
        p.aod = ang(rng);
        p.gain = std::polar(mag, ph(rng));
        s.irs[k].scatter_paths.push_back(p);
    }
}

}  // namespace irsloc
