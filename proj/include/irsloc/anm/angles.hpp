// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <limits>

#include "irsloc/anm/toeplitz.hpp"
#include "irsloc/delay.hpp"
#include "irsloc/steering.hpp"

namespace irsloc {

struct ToeplitzAngle {
    double theta = 0.0;
    double gap_ratio = 0.0;  // largest / second largest eigenvalue of T(v)
    bool low_confidence = false;
};

/// theta maximizing |a(theta)^H w| over [-pi/2, pi/2]: 2048-point grid, then golden section to 1e-8 rad.
inline double correlation_peak(const VecC& w, double spacing_ratio = 0.5, int grid = 2048) {
    const Eigen::Index n = w.size();
    auto corr = [&](double th) {
        const double step = 2.0 * pi * spacing_ratio * std::sin(th);
        cplx s = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) s += std::polar(1.0, -step * static_cast<double>(i)) * w[i];
        return std::norm(s);
    };
    int best = 0;
    double best_v = -1.0;
    const double h = pi / (grid - 1);
    for (int i = 0; i < grid; ++i) {
        const double v = corr(-pi / 2 + i * h);
        if (v > best_v) {
            best_v = v;
            best = i;
        }
    }
    const double lo = std::max(-pi / 2, -pi / 2 + (best - 1) * h);
    const double hi = std::min(pi / 2, -pi / 2 + (best + 1) * h);
    return detail::golden_max(corr, lo, hi, 1e-8);
}

/// Dominant eigenvector of T(v) read out as an angle.
inline ToeplitzAngle angle_from_toeplitz(const VecC& v, double spacing_ratio = 0.5) {
    const MatC t = toeplitz(v);
    Eigen::SelfAdjointEigenSolver<MatC> es(t);
    const VecR& ev = es.eigenvalues();
    const Eigen::Index n = ev.size();
    if (!(ev(n - 1) > 1e-14 * std::max(1.0, t.norm())) || t.norm() == 0.0) throw ZeroSignalError("Toeplitz matrix is numerically zero");
    ToeplitzAngle out;
    out.theta = correlation_peak(es.eigenvectors().col(n - 1), spacing_ratio);
    const double second = n > 1 ? ev(n - 2) : 0.0;
    out.gap_ratio = second > 0.0 ? ev(n - 1) / second : std::numeric_limits<double>::infinity();
    out.low_confidence = out.gap_ratio < 1.01;
    return out;
}

}  // namespace irsloc
