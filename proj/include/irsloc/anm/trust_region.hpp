// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "irsloc/common.hpp"
#include "irsloc/steering.hpp"

namespace irsloc {

/// Gain model of the AOD fit.  Real: alpha is a real path gain, as in the cascade model.  Complex: the gain phase is
/// treated as unknown and profiled out.
enum class GainModel { Real, Complex };

/// h(beta, theta) = || beta A a(theta) - r ||^2 with r normalized to unit norm and A scaled so that
/// ||A a(theta_ref)|| = 1.  With p = ||A a||^2 and c = (A a)^H r:
///   real gain:    beta^2 p - 2 beta Re c + 1
///   complex gain: beta^2 p - 2 beta |c| + 1   (minimum over the phase of beta)
class AodObjective {
public:
    AodObjective(const MatC& a_op, const VecC& r, double theta_ref, double spacing_ratio = 0.5,
                 GainModel model = GainModel::Real)
        : sr_(spacing_ratio), n_(static_cast<int>(a_op.cols())), model_(model) {
        if (a_op.rows() != r.size()) throw DomainError("AOD operator rows must match the observation length");
        r_norm_ = r.norm();
        if (!(r_norm_ > 0.0)) throw ZeroSignalError("AOD observation is zero");
        r_ = r / r_norm_;
        const double p0 = (a_op * steering_vector(reflect_angle(theta_ref), n_, sr_)).norm();
        if (!(p0 > 1e-12 * std::max(1.0, a_op.norm()))) throw DegenerateGeometryError("effective AOD response vanishes at the start angle");
        a_scale_ = p0;
        a_ = a_op / p0;
        gram_ = a_.adjoint() * a_;
        ah_r_ = a_.adjoint() * r_;
    }

    /// Angle in [-pi/2, pi/2] with the same sine.
    static double reflect_angle(double theta) { return std::asin(std::clamp(std::sin(theta), -1.0, 1.0)); }

    struct Parts {
        double p = 0, dp = 0, d2p = 0;
        cplx c = 0, dc = 0, d2c = 0;
    };

    Parts parts(double theta) const {
        const double t = reflect_angle(theta);
        // a(theta) depends on sin(theta) only; the first derivative picks up the sign of cos(theta).
        const double sgn = std::cos(theta) >= 0.0 ? 1.0 : -1.0;
        const VecC a = steering_vector(t, n_, sr_);
        const VecC da = sgn * steering_derivative(t, n_, sr_);
        const VecC d2a = steering_second_derivative(t, n_, sr_);
        Parts q;
        const VecC ga = gram_ * a;
        q.p = a.dot(ga).real();
        q.dp = 2.0 * da.dot(ga).real();
        q.d2p = 2.0 * d2a.dot(ga).real() + 2.0 * da.dot(gram_ * da).real();
        // c = a^H A^H r
        q.c = a.dot(ah_r_);
        q.dc = da.dot(ah_r_);
        q.d2c = d2a.dot(ah_r_);
        return q;
    }

    /// Correlation term m(theta) (Re c or |c|) and its first two derivatives.
    Vec3 correlation(const Parts& q) const {
        if (model_ == GainModel::Real) return {q.c.real(), q.dc.real(), q.d2c.real()};
        const double m = std::abs(q.c);
        if (!(m > 0.0)) throw DegenerateGeometryError("AOD correlation vanishes at the iterate");
        const double re1 = (std::conj(q.c) * q.dc).real();
        return {m, re1 / m, (std::norm(q.dc) + (std::conj(q.c) * q.d2c).real()) / m - re1 * re1 / (m * m * m)};
    }

    double value(const Vec2& y) const {
        const Parts q = parts(y[1]);
        const double m = model_ == GainModel::Real ? q.c.real() : std::abs(q.c);
        return y[0] * y[0] * q.p - 2.0 * y[0] * m + 1.0;
    }

    Vec2 gradient(const Vec2& y) const {
        const Parts q = parts(y[1]);
        const Vec3 m = correlation(q);
        return {2.0 * y[0] * q.p - 2.0 * m[0], y[0] * y[0] * q.dp - 2.0 * y[0] * m[1]};
    }

    Mat2 hessian(const Vec2& y) const {
        const Parts q = parts(y[1]);
        const Vec3 m = correlation(q);
        Mat2 h;
        h(0, 0) = 2.0 * q.p;
        h(0, 1) = h(1, 0) = 2.0 * y[0] * q.dp - 2.0 * m[1];
        h(1, 1) = y[0] * y[0] * q.d2p - 2.0 * y[0] * m[2];
        return h;
    }

    /// Least-squares gain at theta (in the scaled variables).
    double best_gain(double theta) const {
        const Parts q = parts(theta);
        if (!(q.p > 1e-14)) throw DegenerateGeometryError("effective AOD response vanishes");
        return (model_ == GainModel::Real ? q.c.real() : std::abs(q.c)) / q.p;
    }

    /// Gain alpha of the unscaled model r = alpha A a(theta) at the scaled iterate.
    cplx complex_gain(const Vec2& y) const {
        cplx phase = 1.0;
        if (model_ == GainModel::Complex) {
            // r ~ beta e^{j phi} (A/p0) a with e^{j phi} = c/|c| since c = (A a)^H r.
            const cplx c = parts(y[1]).c;
            if (std::abs(c) > 0.0) phase = c / std::abs(c);
        }
        return y[0] * phase * r_norm_ / a_scale_;
    }

    GainModel model() const { return model_; }

    int size() const { return n_; }
    double spacing_ratio() const { return sr_; }

private:
    double sr_;
    int n_;
    GainModel model_;
    double r_norm_ = 0.0;
    double a_scale_ = 1.0;
    MatC a_;
    VecC r_;
    MatC gram_;
    VecC ah_r_;
};

/// Exact minimizer of g.d + d.H.d/2 over ||d|| <= radius for a symmetric 2x2 H.
inline Vec2 trust_region_step(const Vec2& g, const Mat2& h, double radius) {
    Eigen::SelfAdjointEigenSolver<Mat2> es(h);
    const Vec2 lam = es.eigenvalues();
    const Mat2 q = es.eigenvectors();
    const Vec2 gq = q.transpose() * g;
    auto step_for = [&](double mu) {
        Vec2 d;
        for (int i = 0; i < 2; ++i) d[i] = -gq[i] / (lam[i] + mu);
        return d;
    };
    if (lam[0] > 0.0) {
        const Vec2 d = step_for(0.0);
        if (d.norm() <= radius) return q * d;
    }
    const double mu_lo = std::max(0.0, -lam[0]);
    const double gscale = std::max(g.norm(), 1e-300);
    // Hard case: no multiplier above -lambda_min reaches the boundary.
    if (std::abs(gq[0]) <= 1e-14 * gscale) {
        Vec2 d = Vec2::Zero();
        if (lam[1] + mu_lo > 0.0) d[1] = -gq[1] / (lam[1] + mu_lo);
        if (d.norm() <= radius) {
            d[0] = std::sqrt(std::max(0.0, radius * radius - d[1] * d[1]));
            return q * d;
        }
    }
    // ||d(mu)|| decreases on (mu_lo, inf); bracket and bisect on 1/||d|| - 1/radius.
    double lo = mu_lo, hi = mu_lo + gscale / radius + std::abs(lam[1]) + 1e-300;
    while (step_for(hi).norm() > radius) hi *= 2.0;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        if (step_for(mid).norm() > radius) lo = mid;
        else hi = mid;
    }
    return q * step_for(hi);
}

struct TrustRegionOptions {
    double initial_radius = 0.1;
    double eps_rel = 1e-12;  // relative objective change that ends the iteration
    int max_iter = 500;
    int coarse_grid = 256;
    double spacing_ratio = 0.5;
    GainModel gain = GainModel::Real;
};

struct TrustRegionResult {
    cplx alpha = 0.0;
    double theta = 0.0;
    double objective = 0.0;  // h at the solution, relative to ||r||^2
    int iterations = 0;
    bool converged = false;
    std::vector<double> accepted_objectives;  // h after initialization and after every accepted step
};

/// theta maximizing the fit after the optimal gain, m(theta)^2 / ||A a(theta)||^2 with m = |a^H A^H r| (complex
/// gain) or Re a^H A^H r (real gain), on a uniform grid over [-pi/2, pi/2].
inline double coarse_aod_scan(const MatC& a_op, const VecC& r, int grid, double spacing_ratio = 0.5,
                              GainModel model = GainModel::Real) {
    const VecC ahr = a_op.adjoint() * r;
    const int n = static_cast<int>(a_op.cols());
    double best = -1.0, best_t = 0.0;
    for (int i = 0; i < grid; ++i) {
        const double t = -pi / 2 + pi * (i + 0.5) / grid;
        const VecC a = steering_vector(t, n, spacing_ratio);
        const double p = (a_op * a).squaredNorm();
        const cplx c = a.dot(ahr);
        const double m2 = model == GainModel::Real ? c.real() * c.real() : std::norm(c);
        const double v = p > 0.0 ? m2 / p : 0.0;
        if (v > best) {
            best = v;
            best_t = t;
        }
    }
    return best_t;
}

/// Fits r ~ alpha A a(theta, N) over complex alpha and theta.  With no start angle a coarse scan supplies it.
inline TrustRegionResult trust_region_aod(const MatC& a_op, const VecC& r, const TrustRegionOptions& opt = {},
                                          std::optional<double> theta_init = std::nullopt) {
    const double t0 = theta_init ? *theta_init : coarse_aod_scan(a_op, r, opt.coarse_grid, opt.spacing_ratio, opt.gain);
    const AodObjective h(a_op, r, t0, opt.spacing_ratio, opt.gain);
    Vec2 y(h.best_gain(t0), t0);
    double f = h.value(y);
    double radius = opt.initial_radius;
    TrustRegionResult out;
    out.accepted_objectives.push_back(f);
    for (int it = 0; it < opt.max_iter; ++it) {
        out.iterations = it + 1;
        const Vec2 g = h.gradient(y);
        if (g.norm() <= 1e-15) {
            out.converged = true;
            break;
        }
        const Mat2 hm = h.hessian(y);
        const Vec2 d = trust_region_step(g, hm, radius);
        const double pred = -(g.dot(d) + 0.5 * d.dot(hm * d));
        if (!(pred > 0.0)) {
            out.converged = true;
            break;
        }
        const Vec2 y_new = y + d;
        const double f_new = h.value(y_new);
        const double ratio = (f - f_new) / pred;
        const bool interior = d.norm() < 0.999 * radius;
        if (ratio > 0.75) radius *= 2.0;
        else radius = 0.25 * d.squaredNorm();
        if (ratio > 0.0) {
            const double change = f - f_new;
            y = y_new;
            f = f_new;
            out.accepted_objectives.push_back(f);
            if (change <= opt.eps_rel * f + 1e-28 && interior) {
                out.converged = true;
                break;
            }
        }
        if (radius < 1e-18) {
            out.converged = true;
            break;
        }
    }
    if (!out.converged) throw ConvergenceError("trust-region AOD fit did not converge", out.iterations, f, radius);
    // With a complex gain a negative magnitude is the same atom with the phase flipped.
    if (opt.gain == GainModel::Complex && y[0] < 0.0) y[0] = -y[0];
    out.theta = AodObjective::reflect_angle(y[1]);
    out.alpha = h.complex_gain({y[0], out.theta});
    out.objective = f;
    return out;
}

/// One projected AOD observation r ~ alpha A a(theta, N) and its weight in a joint fit.
struct AodProjection {
    MatC op;  // A
    VecC r;
    double weight = 1.0;
    int source = 0;  // index of the IRS whose AOA produced r
};

/// Weighted sum over observations of the normalized fit after the optimal gain, m^2 / (||A a||^2 ||r||^2).
inline double joint_aod_fit(const std::vector<AodProjection>& obs, double theta, double spacing_ratio = 0.5,
                            GainModel model = GainModel::Real) {
    double v = 0.0;
    for (const auto& o : obs) {
        const VecC aa = o.op * steering_vector(theta, static_cast<int>(o.op.cols()), spacing_ratio);
        const double p = aa.squaredNorm() * o.r.squaredNorm();
        if (!(p > 0.0)) continue;
        const cplx c = aa.dot(o.r);
        v += o.weight * (model == GainModel::Real ? c.real() * c.real() : std::norm(c)) / p;
    }
    return v;
}

/// Grid maximizer of joint_aod_fit; pools the evidence of every observation before any local search.
inline double joint_aod_scan(const std::vector<AodProjection>& obs, int grid, double spacing_ratio = 0.5,
                             GainModel model = GainModel::Real) {
    double best = -1.0, best_t = 0.0;
    for (int i = 0; i < grid; ++i) {
        const double t = -pi / 2 + pi * (i + 0.5) / grid;
        const double v = joint_aod_fit(obs, t, spacing_ratio, model);
        if (v > best) {
            best = v;
            best_t = t;
        }
    }
    return best_t;
}

}  // namespace irsloc
