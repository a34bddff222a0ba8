// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "irsloc/fisher.hpp"
#include "irsloc/scene.hpp"

namespace irsloc {

enum class LocMethod { ThreeStage, TwoStage, Wls, Ls };

inline const char* to_string(LocMethod m) {
    switch (m) {
        case LocMethod::ThreeStage: return "three-stage";
        case LocMethod::TwoStage: return "two-stage";
        case LocMethod::Wls: return "wls";
        case LocMethod::Ls: return "ls";
    }
    return "?";
}

inline LocMethod loc_method_from_string(const std::string& s) {
    for (LocMethod m : {LocMethod::ThreeStage, LocMethod::TwoStage, LocMethod::Wls, LocMethod::Ls})
        if (s == to_string(m)) return m;
    throw ConfigError("unknown localization method: " + s);
}

struct NegativeSquareError : Error {
    using Error::Error;
};

/// Delay and angle estimates fed to the localizer.
struct HybridMeasurements {
    VecR tau_hat;    // K^2 cascade delays, lexicographic (l,k), seconds
    VecR theta_hat;  // K angles relative to each IRS broadside, radians
    MatR cov_tau;    // K^2 x K^2
    MatR cov_theta;  // K x K
    std::vector<bool> aod_available;

    int num_irs() const { return static_cast<int>(theta_hat.size()); }
};

inline void validate(const HybridMeasurements& m, int K) {
    if (m.theta_hat.size() != K || m.tau_hat.size() != K * K) throw DomainError("measurement dimensions do not match K");
    if (m.cov_tau.rows() != K * K || m.cov_tau.cols() != K * K) throw DomainError("delay covariance must be K^2 x K^2");
    if (m.cov_theta.rows() != K || m.cov_theta.cols() != K) throw DomainError("angle covariance must be K x K");
    if (!m.aod_available.empty() && static_cast<int>(m.aod_available.size()) != K)
        throw DomainError("aod_available must have K entries");
    if (!m.tau_hat.allFinite() || !m.theta_hat.allFinite()) throw DomainError("non-finite measurement");
    auto psd = [](const MatR& c, const char* name) {
        if (!c.allFinite() || (c - c.transpose()).norm() > 1e-9 * std::max(1e-300, c.norm()))
            throw DomainError(std::string(name) + " is not symmetric");
        Eigen::SelfAdjointEigenSolver<MatR> es(c);
        if (es.eigenvalues().minCoeff() < -1e-12 * std::max(1e-300, es.eigenvalues().cwiseAbs().maxCoeff()))
            throw DomainError(std::string(name) + " is not positive semidefinite");
    };
    psd(m.cov_tau, "delay covariance");
    psd(m.cov_theta, "angle covariance");
}

/// Row (l,k) of the K^2 x K map from segment delays to cascade delays.
inline MatR segment_map(int K) {
    MatR a = MatR::Zero(K * K, K);
    for (int l = 0; l < K; ++l)
        for (int k = 0; k < K; ++k) {
            a(l * K + k, l) += 1.0;
            a(l * K + k, k) += 1.0;
        }
    return a;
}

struct SegmentDelays {
    VecR tau;  // K one-way target-IRS delays
    MatR cov;  // (A1^T Q1^-1 A1)^-1
};

inline SegmentDelays stage1_segment_delays(const VecR& tau_hat, const MatR& cov_tau) {
    const Eigen::Index n = tau_hat.size();
    const int K = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
    if (K * K != n || K == 0) throw DomainError("cascade delay vector length must be K^2");
    if (cov_tau.rows() != n || cov_tau.cols() != n) throw DomainError("delay covariance must be K^2 x K^2");
    const Eigen::LLT<MatR> q(cov_tau);
    if (q.info() != Eigen::Success) throw DomainError("singular delay covariance");
    const MatR a = segment_map(K);
    const MatR qa = q.solve(a);
    const MatR normal = a.transpose() * qa;
    SegmentDelays out;
    out.cov = normal.inverse();
    out.tau = out.cov * (qa.transpose() * tau_hat);
    return out;
}

/// Linear system in x2 = [x, y, s] with s = x^2 + y^2, expressed in a frame centered at `origin`.
struct Stage2System {
    Vec2 origin = Vec2::Zero();
    MatR a_tau;        // K x 3, rows [-2 x_k, -2 y_k, 1]
    VecR b_tau;        // tau_k^2 c^2 - (x_k^2 + y_k^2)
    MatR r_b_tau;      // covariance of the delay-row errors
    MatR a_theta;      // rows [tan phi_k, -1, 0]
    VecR b_theta;      // x_k tan phi_k - y_k
    VecR r_a_theta;    // variance of the tan phi_k coefficient error
    VecR r_b_theta;    // variance of the right-hand side error
    std::vector<int> angle_irs;  // IRS index of each angle row
    std::vector<std::string> warnings;
};

inline Stage2System build_stage2_system(const SegmentDelays& seg, const VecR& theta_hat, const MatR& cov_theta,
                                        const std::vector<Vec2>& irs_positions, const std::vector<double>& orientations,
                                        const Vec2& origin = Vec2::Zero()) {
    const int K = static_cast<int>(seg.tau.size());
    if (theta_hat.size() != K || static_cast<int>(irs_positions.size()) != K ||
        static_cast<int>(orientations.size()) != K)
        throw DomainError("stage-2 inputs disagree on K");
    const double c2 = speed_of_light * speed_of_light;
    Stage2System s;
    s.origin = origin;
    s.a_tau.resize(K, 3);
    s.b_tau.resize(K);
    VecR d(K);
    for (int k = 0; k < K; ++k) {
        const Vec2 p = irs_positions[k] - origin;
        s.a_tau.row(k) << -2.0 * p.x(), -2.0 * p.y(), 1.0;
        s.b_tau(k) = seg.tau(k) * seg.tau(k) * c2 - p.squaredNorm();
        d(k) = 2.0 * c2 * seg.tau(k);
    }
    s.r_b_tau = d.asDiagonal() * seg.cov * d.asDiagonal();
    std::vector<double> ta, tb, ra, rb;
    for (int k = 0; k < K; ++k) {
        const double phi = theta_hat(k) + orientations[k];
        const double cs = std::cos(phi);
        if (std::abs(cs) < 1e-6) {
            s.warnings.push_back("angle row of IRS " + std::to_string(k) + " dropped: bearing is vertical");
            continue;
        }
        const Vec2 p = irs_positions[k] - origin;
        const double t = std::tan(phi);
        const double sec4 = 1.0 / (cs * cs * cs * cs);
        const double var = cov_theta(k, k);
        s.angle_irs.push_back(k);
        ta.push_back(t);
        tb.push_back(p.x() * t - p.y());
        ra.push_back(var * sec4);
        rb.push_back(p.x() * p.x() * var * sec4);
    }
    const int na = static_cast<int>(ta.size());
    s.a_theta.resize(na, 3);
    s.b_theta.resize(na);
    s.r_a_theta.resize(na);
    s.r_b_theta.resize(na);
    for (int i = 0; i < na; ++i) {
        s.a_theta.row(i) << ta[i], -1.0, 0.0;
        s.b_theta(i) = tb[i];
        s.r_a_theta(i) = ra[i];
        s.r_b_theta(i) = rb[i];
    }
    return s;
}

inline Stage2System build_stage2_system(const SegmentDelays& seg, const HybridMeasurements& m, const SceneConfig& scene) {
    std::vector<Vec2> pos;
    std::vector<double> ori;
    for (const auto& d : scene.irs) {
        pos.push_back(d.position);
        ori.push_back(d.orientation);
    }
    return build_stage2_system(seg, m.theta_hat, m.cov_theta, pos, ori, scene.bs_position);
}

struct Stage2Options {
    bool coefficient_error = true;  // weight angle rows by x^2 R_A + R_b and correct the coefficient matrix
    bool unit_weights = false;      // replace every error covariance by the identity
    double eps = 1e-10;             // on ||x^{r+1} - x^r||^2, m^2
    int max_iter = 100;
};

struct Stage2State {
    Vec3 x2 = Vec3::Zero();  // [x, y, s] in the system frame
    MatR b_theta;            // 3 x n_angle, (A + dA)^T W
    VecR delta_a;            // coefficient-error estimate per angle row
    Mat3 cov = Mat3::Zero(); // inverse normal matrix at the final iterate
    double objective = 0.0;
    int iterations = 0;
    bool converged = false;
};

namespace detail {

inline MatR stacked_a(const Stage2System& s) {
    MatR a(s.a_tau.rows() + s.a_theta.rows(), 3);
    a << s.a_tau, s.a_theta;
    return a;
}

inline VecR stacked_b(const Stage2System& s) {
    VecR b(s.b_tau.size() + s.b_theta.size());
    b << s.b_tau, s.b_theta;
    return b;
}

inline MatR delay_row_weight(const Stage2System& s, bool unit) {
    const Eigen::Index n = s.a_tau.rows();
    if (unit) return MatR::Identity(n, n);
    const Eigen::LLT<MatR> llt(s.r_b_tau);
    if (llt.info() != Eigen::Success) throw DomainError("singular delay-row covariance");
    return llt.solve(MatR::Identity(n, n));
}

inline VecR angle_row_weight(const Stage2System& s, double xt, const Stage2Options& opt) {
    VecR w(s.a_theta.rows());
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        double v = opt.unit_weights ? 1.0 : s.r_b_theta(i);
        if (opt.coefficient_error) v += xt * xt * (opt.unit_weights ? 1.0 : s.r_a_theta(i));
        if (!(v > 0.0)) throw DomainError("singular angle-row covariance");
        w(i) = 1.0 / v;
    }
    return w;
}

inline double stage2_objective(const Stage2System& s, const Vec3& x, const MatR& wt, const Stage2Options& opt) {
    const VecR et = s.a_tau * x - s.b_tau;
    const VecR ea = s.a_theta * x - s.b_theta;
    const VecR wa = angle_row_weight(s, x(0), opt);
    return et.dot(wt * et) + ea.dot(wa.asDiagonal() * ea);
}

}  // namespace detail

/// Unweighted least squares (A^T A)^+ A^T b on the stacked system.
inline Vec3 stage2_least_squares(const Stage2System& s) {
    const MatR a = detail::stacked_a(s);
    const MatR n = a.transpose() * a;
    return n.completeOrthogonalDecomposition().pseudoInverse() * (a.transpose() * detail::stacked_b(s));
}

/// Fixed-point iteration x = ((A+dA)^T W(x) A + A_t^T R^-1 A_t)^-1 ((A+dA)^T W(x) b + A_t^T R^-1 b_t),
/// W(x) = (x^2 R_A + R_b)^-1, dA = -x R_A W (A x - b) in the x column.
inline Stage2State stage2_solve(const Stage2System& s, const Vec3& init, const Stage2Options& opt = {}) {
    if (s.a_tau.rows() + s.a_theta.rows() < 3) throw DomainError("stage 2 needs at least three rows");
    const MatR wt = detail::delay_row_weight(s, opt.unit_weights);
    const MatR ntau = s.a_tau.transpose() * wt * s.a_tau;
    const VecR rtau = s.a_tau.transpose() * wt * s.b_tau;
    const Eigen::Index na = s.a_theta.rows();

    Stage2State best;
    best.objective = std::numeric_limits<double>::infinity();
    Vec3 x = init;
    Stage2State cur;
    for (int it = 1; it <= opt.max_iter; ++it) {
        const VecR wa = detail::angle_row_weight(s, x(0), opt);
        const VecR e = s.a_theta * x - s.b_theta;
        VecR da = VecR::Zero(na);
        if (opt.coefficient_error)
            for (Eigen::Index i = 0; i < na; ++i)
                da(i) = -x(0) * (opt.unit_weights ? 1.0 : s.r_a_theta(i)) * wa(i) * e(i);
        MatR a_corr = s.a_theta;
        a_corr.col(0) += da;
        const MatR bt = a_corr.transpose() * wa.asDiagonal();
        const Mat3 normal = bt * s.a_theta + ntau;
        const Eigen::FullPivLU<Mat3> lu(normal);
        if (!lu.isInvertible()) throw DomainError("singular stage-2 normal matrix");
        const Vec3 next = lu.solve(bt * s.b_theta + rtau);
        const double step = (next - x).squaredNorm();
        x = next;
        cur.x2 = x;
        cur.b_theta = bt;
        cur.delta_a = da;
        cur.iterations = it;
        cur.objective = detail::stage2_objective(s, x, wt, opt);
        if (cur.objective < best.objective) best = cur;
        if (step <= opt.eps) {
            cur.converged = true;
            break;
        }
    }
    Stage2State out = cur.converged ? cur : best;
    out.iterations = cur.iterations;
    // Covariance from the weighted normal matrix at the readout point.
    const VecR wa = detail::angle_row_weight(s, out.x2(0), opt);
    const Mat3 info = s.a_theta.transpose() * wa.asDiagonal() * s.a_theta + ntau;
    out.cov = info.inverse();
    return out;
}

/// Single-shot weighted least squares with the right-hand side covariances only (no coefficient-error term).
inline Stage2State stage2_weighted(const Stage2System& s) {
    Stage2Options opt;
    opt.coefficient_error = false;
    opt.max_iter = 1;
    Stage2State st = stage2_solve(s, Vec3::Zero(), opt);
    st.converged = true;
    return st;
}

struct Stage3Result {
    Vec2 position = Vec2::Zero();  // system frame
    Vec2 squares = Vec2::Zero();   // [x^2, y^2] after clamping
    Mat2 cov_squares = Mat2::Zero();
    bool clamped = false;
};

/// WLS on [1 0; 0 1; 1 1] [x^2; y^2] = [x2^2; y2^2; s], Q3 = J Cov(x2) J^T with J = diag(2x, 2y, 1);
/// square roots take the signs of the stage-2 coordinates.
inline Stage3Result stage3_refine(const Stage2State& st, bool strict = false) {
    const double x = st.x2(0), y = st.x2(1), sv = std::max(0.0, st.x2(2));
    Eigen::Matrix<double, 3, 2> a3;
    a3 << 1, 0, 0, 1, 1, 1;
    const Vec3 b3(x * x, y * y, sv);
    const Vec3 jd(2.0 * x, 2.0 * y, 1.0);
    Mat3 q3 = jd.asDiagonal() * st.cov * jd.asDiagonal();
    q3 = 0.5 * (q3 + q3.transpose()).eval();
    // A coordinate at exactly zero makes Q3 singular; a relative ridge keeps the solve defined.
    q3.diagonal().array() += 1e-14 * std::max(q3.trace(), 1e-300);
    const Eigen::LDLT<Mat3> ldlt(q3);
    const Eigen::Matrix<double, 3, 2> qa = ldlt.solve(a3);
    const Mat2 normal = a3.transpose() * qa;
    Stage3Result r;
    r.cov_squares = normal.inverse();
    Vec2 sq = r.cov_squares * (qa.transpose() * b3);
    for (int i = 0; i < 2; ++i)
        if (sq(i) < 0.0) {
            if (strict && sq(i) < -1e-9) throw NegativeSquareError("stage-3 square estimate is negative");
            sq(i) = 0.0;
            r.clamped = true;
        }
    r.squares = sq;
    r.position = Vec2(std::copysign(std::sqrt(sq(0)), x), std::copysign(std::sqrt(sq(1)), y));
    return r;
}

struct LocalizeOptions {
    Stage2Options stage2;
    bool strict_squares = false;
};

struct LocationEstimate {
    LocMethod method = LocMethod::ThreeStage;
    Vec2 position = Vec2::Zero();
    VecR stage1_segment_delays;
    Vec3 stage2_triple = Vec3::Zero();  // [x, y, s] in the frame centered at the BS
    Vec2 stage3_squares = Vec2::Constant(std::numeric_limits<double>::quiet_NaN());
    Mat2 covariance = Mat2::Zero();
    double consistency_stage2 = 0.0;  // |x^2 + y^2 - s| at the stage-2 point
    double consistency_stage3 = std::numeric_limits<double>::quiet_NaN();
    int iterations = 0;
    bool converged = true;
    bool square_clamped = false;
    std::vector<std::string> warnings;
};

namespace detail {

inline LocationEstimate from_stage2(LocMethod m, const SegmentDelays& seg, const Stage2System& sys, const Stage2State& st) {
    LocationEstimate e;
    e.method = m;
    e.stage1_segment_delays = seg.tau;
    e.stage2_triple = st.x2;
    e.position = sys.origin + st.x2.head<2>();
    e.covariance = st.cov.topLeftCorner<2, 2>();
    e.consistency_stage2 = std::abs(st.x2.head<2>().squaredNorm() - st.x2(2));
    e.iterations = st.iterations;
    e.converged = st.converged;
    e.warnings = sys.warnings;
    return e;
}

}  // namespace detail

/// Runs one method on a prepared stage-2 system.
inline LocationEstimate localize(const SegmentDelays& seg, const Stage2System& sys, LocMethod method,
                                 const LocalizeOptions& opt = {}) {
    switch (method) {
        case LocMethod::Ls: {
            Stage2State st;
            st.x2 = stage2_least_squares(sys);
            const MatR a = detail::stacked_a(sys);
            const Mat3 ginv = (a.transpose() * a).completeOrthogonalDecomposition().pseudoInverse();
            // Sandwich covariance under the row-error model at the LS point.
            MatR sigma = MatR::Zero(a.rows(), a.rows());
            sigma.topLeftCorner(sys.a_tau.rows(), sys.a_tau.rows()) = sys.r_b_tau;
            for (Eigen::Index i = 0; i < sys.a_theta.rows(); ++i)
                sigma(sys.a_tau.rows() + i, sys.a_tau.rows() + i) =
                    sys.r_b_theta(i) + st.x2(0) * st.x2(0) * sys.r_a_theta(i);
            st.cov = ginv * a.transpose() * sigma * a * ginv;
            st.iterations = 1;
            st.converged = true;
            return detail::from_stage2(method, seg, sys, st);
        }
        case LocMethod::Wls: return detail::from_stage2(method, seg, sys, stage2_weighted(sys));
        case LocMethod::TwoStage:
        case LocMethod::ThreeStage: {
            const Stage2State st = stage2_solve(sys, stage2_least_squares(sys), opt.stage2);
            LocationEstimate e = detail::from_stage2(method, seg, sys, st);
            if (!st.converged) e.warnings.push_back("stage 2 did not converge; best iterate returned");
            if (method == LocMethod::TwoStage) return e;
            const Stage3Result r = stage3_refine(st, opt.strict_squares);
            e.stage3_squares = r.squares;
            e.square_clamped = r.clamped;
            e.position = sys.origin + r.position;
            e.consistency_stage3 = std::abs(r.position.squaredNorm() - std::max(0.0, st.x2(2)));
            // Delta method through the square roots where both coordinates are away from zero.
            const Vec2 p = r.position;
            if (std::abs(p(0)) > 1e-9 && std::abs(p(1)) > 1e-9) {
                const Mat2 jinv = Vec2(0.5 / p(0), 0.5 / p(1)).asDiagonal();
                e.covariance = jinv * r.cov_squares * jinv;
            }
            if (r.clamped) e.warnings.push_back("stage-3 square clamped at zero");
            return e;
        }
    }
    throw DomainError("unknown localization method");
}

inline LocationEstimate localize(const HybridMeasurements& m, const SceneConfig& scene, LocMethod method,
                                 const LocalizeOptions& opt = {}) {
    validate(m, scene.num_irs());
    const SegmentDelays seg = stage1_segment_delays(m.tau_hat, m.cov_tau);
    const Stage2System sys = build_stage2_system(seg, m, scene);
    return localize(seg, sys, method, opt);
}

/// All four methods sharing stage 1 and the stage-2 system.
inline std::vector<LocationEstimate> localize_all(const HybridMeasurements& m, const SceneConfig& scene,
                                                  const LocalizeOptions& opt = {}) {
    validate(m, scene.num_irs());
    const SegmentDelays seg = stage1_segment_delays(m.tau_hat, m.cov_tau);
    const Stage2System sys = build_stage2_system(seg, m, scene);
    std::vector<LocationEstimate> out;
    for (LocMethod method : {LocMethod::ThreeStage, LocMethod::TwoStage, LocMethod::Wls, LocMethod::Ls})
        out.push_back(localize(seg, sys, method, opt));
    return out;
}

/// Exact measurements of a scene with the supplied covariances.
inline HybridMeasurements exact_measurements(const SceneConfig& scene, const MatR& cov_tau, const MatR& cov_theta) {
    const Geometry g = geometry_params(scene);
    const int K = g.K;
    HybridMeasurements m;
    m.tau_hat.resize(K * K);
    m.theta_hat.resize(K);
    for (int l = 0; l < K; ++l)
        for (int k = 0; k < K; ++k) m.tau_hat(l * K + k) = g.cascade_delay(l, k);
    for (int k = 0; k < K; ++k) m.theta_hat(k) = g.angle[k];
    m.cov_tau = cov_tau;
    m.cov_theta = cov_theta;
    m.aod_available.assign(K, true);
    return m;
}

/// Measurement covariances at the Cramer-Rao level: inverse delay information and inverse fused angle information.
inline HybridMeasurements crb_level_measurements(const SceneConfig& scene, const CrbReport& crb) {
    const int K = scene.num_irs();
    MatR ct = MatR::Zero(K * K, K * K), ca = MatR::Zero(K, K);
    for (int i = 0; i < K * K; ++i) {
        const double f = crb.fim_delay(i, i);
        if (!(f > 0.0)) throw DomainError("zero delay information");
        ct(i, i) = 1.0 / f;
    }
    for (int k = 0; k < K; ++k) {
        const double f = crb.fim_angle.aoa(k, k) + crb.fim_angle.aod(k, k);
        if (!(f > 0.0)) throw DomainError("zero angle information");
        ca(k, k) = 1.0 / f;
    }
    return exact_measurements(scene, ct, ca);
}

/// Adds zero-mean Gaussian errors with the measurement covariances; angles stay in [-pi/2, pi/2).
inline HybridMeasurements perturb(const HybridMeasurements& m, std::mt19937_64& rng) {
    std::normal_distribution<double> n01(0.0, 1.0);
    auto draw = [&](const MatR& cov) {
        Eigen::SelfAdjointEigenSolver<MatR> es(cov);
        VecR z(cov.rows());
        for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = n01(rng);
        return VecR(es.eigenvectors() * (es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() * z));
    };
    HybridMeasurements out = m;
    out.tau_hat += draw(m.cov_tau);
    out.theta_hat += draw(m.cov_theta);
    for (Eigen::Index k = 0; k < out.theta_hat.size(); ++k) out.theta_hat(k) = fold_half_pi(out.theta_hat(k));
    return out;
}

}  // namespace irsloc
