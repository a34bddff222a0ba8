// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>

#include "irsloc/common.hpp"

namespace irsloc {

namespace detail {
inline void check_steering_args(double theta, int count) {
    if (count <= 0) throw DomainError("steering vector needs at least one element");
    if (!(theta >= -pi / 2 - 1e-12 && theta <= pi / 2 + 1e-12))
        throw DomainError("steering angle outside [-pi/2, pi/2]: " + std::to_string(theta));
}
}  // namespace detail

/// Uniform linear array response, element n = exp(j 2 pi s n sin(theta)).
inline VecC steering_vector(double theta, int count, double spacing_ratio = 0.5) {
    detail::check_steering_args(theta, count);
    const double step = 2.0 * pi * spacing_ratio * std::sin(theta);
    VecC a(count);
    for (int n = 0; n < count; ++n) a[n] = std::polar(1.0, step * n);
    return a;
}

/// d a / d theta.
inline VecC steering_derivative(double theta, int count, double spacing_ratio = 0.5) {
    detail::check_steering_args(theta, count);
    const double step = 2.0 * pi * spacing_ratio * std::sin(theta);
    const double c = 2.0 * pi * spacing_ratio * std::cos(theta);
    VecC d(count);
    for (int n = 0; n < count; ++n) d[n] = I1 * (c * n) * std::polar(1.0, step * n);
    return d;
}

/// d^2 a / d theta^2.
inline VecC steering_second_derivative(double theta, int count, double spacing_ratio = 0.5) {
    detail::check_steering_args(theta, count);
    const double step = 2.0 * pi * spacing_ratio * std::sin(theta);
    VecC d(count);
    for (int n = 0; n < count; ++n) {
        const double cn = 2.0 * pi * spacing_ratio * n;
        const cplx jc = I1 * cn * std::cos(theta);
        d[n] = (-I1 * cn * std::sin(theta) + jc * jc) * std::polar(1.0, step * n);
    }
    return d;
}

/// ||d a / d theta||^2 in closed form.
inline double steering_derivative_norm2(double theta, int count, double spacing_ratio = 0.5) {
    const double c = 2.0 * pi * spacing_ratio * std::cos(theta);
    const double n = count;
    return c * c * (n - 1) * n * (2 * n - 1) / 6.0;
}

}  // namespace irsloc
