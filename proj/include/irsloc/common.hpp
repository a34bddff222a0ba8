// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Dense>

namespace irsloc {

using cplx = std::complex<double>;
using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using VecR = Eigen::VectorXd;
using MatR = Eigen::MatrixXd;
using VecC = Eigen::VectorXcd;
using MatC = Eigen::MatrixXcd;

inline constexpr double pi = std::numbers::pi;
inline constexpr double speed_of_light = 299792458.0;
inline constexpr cplx I1{0.0, 1.0};

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DomainError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct DegenerateGeometryError : Error {
    using Error::Error;
};

struct InfeasibleStreamsError : Error {
    using Error::Error;
};

struct ZeroSignalError : Error {
    using Error::Error;
};

struct WindowError : Error {
    using Error::Error;
};

struct IllConditionedError : Error {
    double condition;
    IllConditionedError(const std::string& what, double cond) : Error(what), condition(cond) {}
};

// Location FIM without full rank; carries the unobservable direction.
struct SingularFimError : Error {
    Vec2 null_direction;
    SingularFimError(const std::string& what, Vec2 dir) : Error(what), null_direction(std::move(dir)) {}
};

struct ConvergenceError : Error {
    int iterations;
    double residual_x;
    double residual_z;
    ConvergenceError(const std::string& what, int it, double rx, double rz)
        : Error(what), iterations(it), residual_x(rx), residual_z(rz) {}
};

inline double db10(double linear) { return 10.0 * std::log10(linear); }
inline double from_db10(double db) { return std::pow(10.0, db / 10.0); }
inline double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
inline double watt_to_dbm(double w) { return 10.0 * std::log10(w) + 30.0; }

// Fold an angle into [-pi/2, pi/2) by adding multiples of pi.
inline double fold_half_pi(double a) {
    double r = std::remainder(a, pi);
    if (r >= pi / 2) r -= pi;
    if (r < -pi / 2) r += pi;
    return r;
}

}  // namespace irsloc
