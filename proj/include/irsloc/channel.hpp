// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "irsloc/scene.hpp"
#include "irsloc/steering.hpp"

namespace irsloc {

/// H = sum_r g_r a(aoa_r, N) a^H(aod_r, N_t).
inline MatC make_bs_irs_channel(const std::vector<PathComponent>& paths, int n_elements, int n_tx,
                                double spacing_ratio = 0.5) {
    MatC h = MatC::Zero(n_elements, n_tx);
    for (const auto& p : paths)
        h += p.gain * steering_vector(p.aoa, n_elements, spacing_ratio) *
             steering_vector(p.aod, n_tx, spacing_ratio).adjoint();
    return h;
}

/// LoS path followed by the descriptor's scatter paths.
inline std::vector<PathComponent> bs_irs_paths(const SceneConfig& s, int k) {
    std::vector<PathComponent> paths{line_of_sight_path(s, k)};
    paths.insert(paths.end(), s.irs[k].scatter_paths.begin(), s.irs[k].scatter_paths.end());
    return paths;
}

inline MatC make_bs_irs_channel(const SceneConfig& s, int k) {
    return make_bs_irs_channel(bs_irs_paths(s, k), s.irs[k].n_elements, s.n_tx, s.element_spacing_ratio);
}

/// Diagonal reflection matrix Theta_k as a vector.
inline VecC reflection_vector(const IrsDescriptor& d) {
    VecC t(d.n_elements);
    for (int n = 0; n < d.n_elements; ++n) t[n] = std::polar(d.phase_profile[n].amplitude, d.phase_profile[n].phase);
    return t;
}

/// IRS k -> target -> IRS l channel, alpha_{l,k} a(theta_l, M) a^H(theta_k, N).
inline MatC make_cascade_channel(const SceneConfig& s, const Geometry& g, int l, int k) {
    const double sr = s.element_spacing_ratio;
    return g.cascade_gain(l, k) * steering_vector(g.angle[l], s.irs[l].n_sensors, sr) *
           steering_vector(g.angle[k], s.irs[k].n_elements, sr).adjoint();
}

inline MatC make_cascade_channel(const SceneConfig& s, int l, int k) {
    return make_cascade_channel(s, geometry_params(s), l, k);
}

}  // namespace irsloc
