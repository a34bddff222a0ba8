// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "irsloc/channel.hpp"
#include "irsloc/streams.hpp"

namespace irsloc {

struct ReceivedSignal {
    std::vector<MatC> samples;  // per IRS, M x L
    double sample_rate = 0.0;
    double time_origin = 0.0;
    bool off_grid = false;      // some delay was rounded to the sample grid
};

/// Delay actually applied to a path: exact in fractional mode, else rounded to the nearest sample.
inline double applied_delay(double tau, double fs, bool fractional, bool* off_grid = nullptr) {
    if (fractional) return tau;
    const double samples = tau * fs;
    const double rounded = std::round(samples);
    if (off_grid && std::abs(samples - rounded) > 1e-6) *off_grid = true;
    return rounded / fs;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline void add_complex_noise(MatC& m, double variance, std::mt19937_64& rng) {
    if (variance == 0.0) return;
    std::normal_distribution<double> n(0.0, std::sqrt(variance / 2.0));
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) += cplx(n(rng), n(rng));
}

/// Sampled receive signal at every IRS sensor array; noise seeded from `noise_seed` (default scene.seed).
inline ReceivedSignal synthesize_received(const SceneConfig& scene, const SensingStreams& st, const Geometry& g,
                                          std::optional<std::uint64_t> noise_seed = std::nullopt) {
    const int K = scene.num_irs();
    const int L = st.frame_length;
    const double fs = st.sample_rate;
    const double sr = scene.element_spacing_ratio;
    ReceivedSignal out;
    out.sample_rate = fs;

    std::vector<MatC> theta_h(K);
    for (int k = 0; k < K; ++k)
        theta_h[k] = reflection_vector(scene.irs[k]).asDiagonal() * make_bs_irs_channel(scene, k);
    std::vector<MatC> dft(K);
    for (int k = 0; k < K; ++k) dft[k] = dft_rows(st.streams[k].bins, L);

    const std::uint64_t seed = noise_seed.value_or(scene.seed);
    for (int l = 0; l < K; ++l) {
        const int M = scene.irs[l].n_sensors;
        MatC r = MatC::Zero(M, L);
        const VecC a_rx = steering_vector(g.angle[l], M, sr);
        for (int k = 0; k < K; ++k) {
            const auto& ik = scene.irs[k];
            const Eigen::RowVectorXcd v = steering_vector(g.angle[k], ik.n_elements, sr).adjoint() * theta_h[k];
            const double tau = applied_delay(g.bs_delay[k] + g.cascade_delay(l, k), fs, scene.fractional_delay, &out.off_grid);
            Eigen::RowVectorXcd path = Eigen::RowVectorXcd::Zero(L);
            for (int kk = 0; kk < K; ++kk) {
                const Eigen::RowVectorXcd c = v * st.beamformers[kk];
                if (c.squaredNorm() == 0.0) continue;
                const auto& s = st.streams[kk];
                const Eigen::RowVectorXcd spec = (c * s.code).cwiseProduct(s.delay_ramp(tau, L, fs).transpose());
                path += spec * dft[kk];
            }
            r += g.cascade_gain(l, k) * a_rx * path;
        }
        std::mt19937_64 rng(splitmix64(seed ^ splitmix64(0x6e6f697365ULL + static_cast<std::uint64_t>(l))));
        add_complex_noise(r, scene.sensor_noise(l), rng);
        out.samples.push_back(std::move(r));
    }
    return out;
}

inline ReceivedSignal synthesize_received(const SceneConfig& scene, const SensingStreams& st) {
    return synthesize_received(scene, st, geometry_params(scene));
}

}  // namespace irsloc
