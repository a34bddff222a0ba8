// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "irsloc/anm/toeplitz.hpp"
#include "irsloc/delay.hpp"

namespace irsloc {

struct AdmmHyper {
    double rho = 1.0;  // initial penalty
    bool adaptive_rho = true;  // residual balancing: x2 / /2 when one residual exceeds the other tenfold
    double lambda_fit = 10.0;
    double eps_x = 1e-8;  // sum of squared changes of the fit blocks
    double eps_z = 1e-8;  // sum of squared changes of the PSD blocks
    double eps_primal = 1e-6;  // Frobenius norm of the constraint residual over all blocks
    int max_iter = 5000;
    int min_iter = 10;
    double cond_limit = 1e12;
    bool record_trace = false;
};

/// How the right-hand diagonal block of each PSD constraint is parameterized.
enum class RightBlock { Toeplitz, Dense };

/// One term of the joint problem: unit-norm target Y (left_dim x width) with weight w.
struct AdmmTerm {
    MatC target;
    double weight = 1.0;
    RightBlock right = RightBlock::Toeplitz;
    // Optional mixing of the fit: lambda ||X B - Y||^2 (right) or lambda ||A X - Y||^2 (left) instead of ||X - Y||^2.
    std::optional<MatC> mix_right;
    std::optional<MatC> mix_left;
};

struct AdmmTraceRow {
    int iteration = 0;
    double objective = 0.0;
    double dx = 0.0;
    double dz = 0.0;
    double primal_residual = 0.0;
    double min_eigenvalue = 0.0;  // smallest eigenvalue of any projected block before clamping
};

struct AdmmResult {
    VecC v;                        // shared left Toeplitz parameter
    std::vector<MatC> right;       // T(u_k) or P_k at the last iterate
    std::vector<VecC> u;           // Toeplitz parameters (empty vector for dense blocks)
    std::vector<MatC> fit;         // X_k
    int iterations = 0;
    bool converged = false;
    double dx = 0.0;
    double dz = 0.0;
    double primal_residual = 0.0;
    double objective = 0.0;
    std::vector<AdmmTraceRow> trace;
};

/// ADMM for  min sum_k w_k [ tr T(v) + tr R_k + lambda ||X_k - Y_k||^2 ]  s.t.  [T(v) X_k; X_k^H R_k] >= 0,
/// with R_k = T(u_k) (Toeplitz) or a free Hermitian block (dense).
class AdmmSolver {
public:
    AdmmSolver(std::vector<AdmmTerm> terms, const AdmmHyper& hyper) : terms_(std::move(terms)), h_(hyper) {
        if (terms_.empty()) throw DomainError("ADMM needs at least one observation");
        m_ = left_dim(terms_.front());
        double wsum = 0.0;
        for (const auto& t : terms_) {
            if (left_dim(t) != m_) throw DomainError("ADMM targets must share the left dimension");
            if (t.mix_right && t.mix_right->cols() != t.target.cols()) throw DomainError("right mixing does not match the target width");
            if (t.mix_left && t.mix_left->rows() != t.target.rows()) throw DomainError("left mixing does not match the target height");
            if (t.mix_right && t.mix_left) throw DomainError("a term takes either a left or a right mixing");
            if (!(t.weight >= 0.0)) throw DomainError("ADMM weights must be non-negative");
            wsum += t.weight;
        }
        if (!(wsum > 0.0)) throw DomainError("ADMM weights sum to zero");
        gm_ = toeplitz_gram(m_);
        v_ = VecC::Zero(m_);
        for (const auto& t : terms_) {
            const Eigen::Index n = t.mix_right ? t.mix_right->rows() : t.target.cols();
            State s;
            s.n = n;
            s.gram = toeplitz_gram(n);
            s.z = MatC::Zero(m_ + n, m_ + n);
            s.g = MatC::Zero(m_ + n, m_ + n);
            s.x = MatC::Zero(m_, n);
            s.right = MatC::Zero(n, n);
            s.u = VecC::Zero(t.right == RightBlock::Toeplitz ? n : 0);
            state_.push_back(std::move(s));
        }
        wsum_ = wsum;
        rho_ = h_.rho;
        if (!(rho_ > 0.0)) throw DomainError("ADMM penalty must be positive");
    }

    /// One pass of (v, u/P, X) closed forms, PSD projection and multiplier ascent.
    AdmmTraceRow step() {
        const double rho = rho_, lam = h_.lambda_fit;
        const Eigen::Index m = m_;
        double dx = 0.0, dz = 0.0;
        // v from the weighted upper-left blocks
        VecC acc = VecC::Zero(m);
        for (std::size_t k = 0; k < terms_.size(); ++k) {
            const auto& s = state_[k];
            VecC f = toeplitz_adjoint(s.g.topLeftCorner(m, m)) + 2.0 * rho * toeplitz_adjoint(s.z.topLeftCorner(m, m));
            f[0] -= static_cast<double>(m);
            acc += terms_[k].weight * f;
        }
        for (Eigen::Index n = 0; n < m; ++n) v_[n] = acc[n] / (2.0 * rho * gm_[n] * wsum_);
        v_[0] = v_[0].real();
        const MatC tv = toeplitz(v_);
        double min_eig = std::numeric_limits<double>::infinity();
        double primal = 0.0;
        for (std::size_t k = 0; k < terms_.size(); ++k) {
            auto& s = state_[k];
            const auto& t = terms_[k];
            const Eigen::Index n = s.n;
            if (t.right == RightBlock::Toeplitz) {
                VecC f = toeplitz_adjoint(s.g.bottomRightCorner(n, n)) + 2.0 * rho * toeplitz_adjoint(s.z.bottomRightCorner(n, n));
                f[0] -= static_cast<double>(n);
                for (Eigen::Index i = 0; i < n; ++i) s.u[i] = f[i] / (2.0 * rho * s.gram[i]);
                s.u[0] = s.u[0].real();
                s.right = toeplitz(s.u);
            } else {
                s.right = s.z.bottomRightCorner(n, n) + (s.g.bottomRightCorner(n, n) - MatC::Identity(n, n)) / (2.0 * rho);
                s.right = 0.5 * (s.right + s.right.adjoint()).eval();
            }
            MatC x_new;
            if (t.mix_right) {
                const MatC& bm = *t.mix_right;
                const MatC rhs = lam * t.target * bm.adjoint() + s.g.topRightCorner(m, n) + 2.0 * rho * s.z.topRightCorner(m, n);
                const MatC sys = lam * bm * bm.adjoint() + 2.0 * rho * MatC::Identity(n, n);
                x_new = sys.llt().solve(rhs.adjoint()).adjoint();
            } else if (t.mix_left) {
                const MatC& am = *t.mix_left;
                const MatC rhs = lam * am.adjoint() * t.target + s.g.topRightCorner(m, n) + 2.0 * rho * s.z.topRightCorner(m, n);
                const MatC sys = lam * am.adjoint() * am + 2.0 * rho * MatC::Identity(m, m);
                x_new = sys.llt().solve(rhs);
            } else {
                x_new = (lam * t.target + s.g.topRightCorner(m, n) + 2.0 * rho * s.z.topRightCorner(m, n)) / (lam + 2.0 * rho);
            }
            dx += (x_new - s.x).squaredNorm();
            s.x = x_new;

            MatC b(m + n, m + n);
            b.topLeftCorner(m, m) = tv;
            b.topRightCorner(m, n) = s.x;
            b.bottomLeftCorner(n, m) = s.x.adjoint();
            b.bottomRightCorner(n, n) = s.right;
            const PsdProjection p = psd_project_ex(b - s.g / (2.0 * rho));
            min_eig = std::min(min_eig, p.min_eigenvalue);
            dz += (p.matrix - s.z).squaredNorm();
            s.z = p.matrix;
            const MatC resid = s.z - b;
            primal += resid.squaredNorm();
            s.g += rho * resid;
        }
        ++iter_;
        if (h_.adaptive_rho) {
            const double dual = 2.0 * rho * std::sqrt(dz);
            const double prim = std::sqrt(primal);
            if (prim > 10.0 * dual) rho_ = std::min(rho_ * 2.0, 1e6);
            else if (dual > 10.0 * prim) rho_ = std::max(rho_ / 2.0, 1e-6);
        }
        AdmmTraceRow row;
        row.iteration = iter_;
        row.dx = dx;
        row.dz = dz;
        row.primal_residual = std::sqrt(primal);
        row.min_eigenvalue = min_eig;
        row.objective = objective();
        last_ = row;
        return row;
    }

    AdmmResult solve() {
        AdmmResult r;
        for (int it = 0; it < h_.max_iter; ++it) {
            const AdmmTraceRow row = step();
            if (h_.record_trace) r.trace.push_back(row);
            if (iter_ >= h_.min_iter && row.dx <= h_.eps_x && row.dz <= h_.eps_z && row.primal_residual <= h_.eps_primal) {
                r.converged = true;
                break;
            }
        }
        r.v = v_;
        for (const auto& s : state_) {
            r.right.push_back(s.right);
            r.u.push_back(s.u);
            r.fit.push_back(s.x);
        }
        r.iterations = iter_;
        r.dx = last_.dx;
        r.dz = last_.dz;
        r.primal_residual = last_.primal_residual;
        r.objective = last_.objective;
        return r;
    }

    /// Objective at the current (v, right blocks, X) with the normalized weights.
    double objective() const {
        double o = 0.0;
        for (std::size_t k = 0; k < terms_.size(); ++k) {
            const auto& s = state_[k];
            o += terms_[k].weight *
                 (m_ * v_[0].real() + s.right.trace().real() + h_.lambda_fit * fit_residual(k).squaredNorm());
        }
        return o / wsum_;
    }

    MatC fit_residual(std::size_t k) const {
        const auto& t = terms_[k];
        const auto& x = state_[k].x;
        if (t.mix_right) return x * *t.mix_right - t.target;
        if (t.mix_left) return *t.mix_left * x - t.target;
        return x - t.target;
    }

    const MatC& psd_block(std::size_t k) const { return state_[k].z; }
    std::size_t size() const { return terms_.size(); }
    int iterations() const { return iter_; }
    double rho() const { return rho_; }
    const VecC& toeplitz_vector() const { return v_; }

private:
    static Eigen::Index left_dim(const AdmmTerm& t) { return t.mix_left ? t.mix_left->cols() : t.target.rows(); }

    struct State {
        Eigen::Index n = 0;
        VecR gram;
        MatC z, g, x, right;
        VecC u;
    };
    std::vector<AdmmTerm> terms_;
    AdmmHyper h_;
    Eigen::Index m_ = 0;
    VecR gm_;
    VecC v_;
    double wsum_ = 0.0;
    double rho_ = 1.0;
    std::vector<State> state_;
    int iter_ = 0;
    AdmmTraceRow last_;
};

/// Normalized ADMM target from an observation and the mode of its right block.
struct PreparedTarget {
    MatC y;                 // unit Frobenius norm
    RightBlock right = RightBlock::Toeplitz;
    double scale = 0.0;     // Frobenius norm before normalization
};

/// Full rank: R S^dagger with S^dagger = S^H (S S^H)^-1.
inline MatC full_rank_target(const MatC& r, const MatC& s, double cond_limit) {
    Eigen::JacobiSVD<MatC> svd(s, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const Eigen::Index n = s.rows();
    if (sv.size() < n || sv(n - 1) <= 0.0) throw IllConditionedError("effective signal is rank deficient", std::numeric_limits<double>::infinity());
    const double cond = (sv(0) / sv(n - 1)) * (sv(0) / sv(n - 1));
    if (cond > cond_limit) throw IllConditionedError("S S^H is ill conditioned for the pseudo-inverse", cond);
    // S^dagger = V Sigma^-1 U^H
    const MatC pinv = svd.matrixV().leftCols(n) * sv.head(n).cwiseInverse().cast<cplx>().asDiagonal() * svd.matrixU().leftCols(n).adjoint();
    return r * pinv;
}

/// Reduced rank: R V Sigma^-1 over the numerical rank of S (width rank).
inline MatC reduced_rank_target(const MatC& r, const MatC& s, int rank) {
    Eigen::JacobiSVD<MatC> svd(s, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    return r * svd.matrixV().leftCols(rank) * sv.head(rank).cwiseInverse().cast<cplx>().asDiagonal();
}

inline PreparedTarget prepare_target(const MatC& y_raw, RightBlock right) {
    PreparedTarget p;
    p.scale = y_raw.norm();
    if (!(p.scale > 0.0)) throw ZeroSignalError("observation target is zero");
    p.y = y_raw / p.scale;
    p.right = right;
    return p;
}

inline PreparedTarget prepare_aoa_target(const CascadeObservation& o, const AdmmHyper& h) {
    switch (o.rank_class) {
        case RankClass::Full: return prepare_target(full_rank_target(o.r, o.s, h.cond_limit), RightBlock::Toeplitz);
        case RankClass::Intermediate: return prepare_target(reduced_rank_target(o.r, o.s, o.rank), RightBlock::Dense);
        case RankClass::RankOne: return prepare_target(reduced_rank_target(o.r, o.s, 1), RightBlock::Dense);
    }
    throw DomainError("unknown rank class");
}

/// Right mixing of the observation-domain fit: S itself for full rank, Sigma_r V_r^H over the numerical rank otherwise.
/// Scaled to unit mean squared singular value.
inline MatC observation_mixing(const CascadeObservation& o) {
    MatC b;
    if (o.rank_class == RankClass::Full) {
        b = o.s;
    } else {
        Eigen::JacobiSVD<MatC> svd(o.s, Eigen::ComputeThinV);
        const int r = o.rank_class == RankClass::RankOne ? 1 : o.rank;
        b = svd.singularValues().head(r).cast<cplx>().asDiagonal() * svd.matrixV().leftCols(r).adjoint();
    }
    const double rms = b.norm() / std::sqrt(static_cast<double>(b.rows()));
    if (!(rms > 0.0)) throw ZeroSignalError("effective signal is zero");
    return b / rms;
}

/// AOA term fitting X B to the normalized raw observation R, so the observation noise stays white.
inline AdmmTerm observation_aoa_term(const CascadeObservation& o, double weight) {
    const double sc = o.r.norm();
    if (!(sc > 0.0)) throw ZeroSignalError("observation target is zero");
    AdmmTerm t;
    t.target = o.r / sc;
    t.weight = weight;
    t.right = o.rank_class == RankClass::Full ? RightBlock::Toeplitz : RightBlock::Dense;
    t.mix_right = observation_mixing(o);
    return t;
}

/// Full-rank AOD term: S^H X ~ R^H with X ~ a(theta_aod, N) a^H(theta_l, M).
inline AdmmTerm observation_aod_term(const CascadeObservation& o, double weight) {
    if (o.rank_class != RankClass::Full) throw DomainError("Toeplitz AOD term needs a full-rank effective signal");
    const double sc = o.r.norm();
    if (!(sc > 0.0)) throw ZeroSignalError("observation target is zero");
    AdmmTerm t;
    t.target = o.r.adjoint() / sc;
    t.weight = weight;
    t.right = RightBlock::Toeplitz;
    t.mix_left = observation_mixing(o).adjoint();
    return t;
}

/// Builds terms with energy weights normalized to sum one.
inline std::vector<AdmmTerm> make_terms(const std::vector<PreparedTarget>& targets, const std::vector<double>& energy) {
    double total = 0.0;
    for (double e : energy) total += e;
    if (!(total > 0.0)) throw ZeroSignalError("observation energies sum to zero");
    std::vector<AdmmTerm> terms;
    for (std::size_t k = 0; k < targets.size(); ++k) terms.push_back({targets[k].y, energy[k] / total, targets[k].right, std::nullopt, std::nullopt});
    return terms;
}

inline AdmmResult run_admm(const std::vector<AdmmTerm>& terms, const AdmmHyper& h) {
    AdmmSolver solver(terms, h);
    AdmmResult r = solver.solve();
    if (!r.converged) throw ConvergenceError("ADMM did not converge", r.iterations, r.dx, r.dz);
    return r;
}

namespace detail {
inline void require_class(const std::vector<CascadeObservation>& obs, RankClass c, const char* who) {
    if (obs.empty()) throw DomainError(std::string(who) + ": empty batch");
    for (const auto& o : obs)
        if (o.rank_class != c) throw DomainError(std::string(who) + ": batch contains a different rank class");
}
inline std::vector<double> energies(const std::vector<CascadeObservation>& obs) {
    std::vector<double> e;
    for (const auto& o : obs) e.push_back(o.energy);
    return e;
}
}  // namespace detail

/// Joint AOA estimate of IRS i from {R_{i,k}} when every S_k has full row rank.
inline AdmmResult admm_joint_full_rank(const std::vector<CascadeObservation>& obs, const AdmmHyper& h = {}) {
    detail::require_class(obs, RankClass::Full, "admm_joint_full_rank");
    std::vector<PreparedTarget> t;
    for (const auto& o : obs) t.push_back(prepare_target(full_rank_target(o.r, o.s, h.cond_limit), RightBlock::Toeplitz));
    return run_admm(make_terms(t, detail::energies(obs)), h);
}

/// Joint AOA estimate when every S_k has intermediate rank; dense right blocks of width rank(S_k).
inline AdmmResult admm_joint_reduced_rank(const std::vector<CascadeObservation>& obs, const AdmmHyper& h = {}) {
    detail::require_class(obs, RankClass::Intermediate, "admm_joint_reduced_rank");
    std::vector<PreparedTarget> t;
    for (const auto& o : obs) t.push_back(prepare_target(reduced_rank_target(o.r, o.s, o.rank), RightBlock::Dense));
    return run_admm(make_terms(t, detail::energies(obs)), h);
}

/// Joint AOA estimate when every S_k has rank one; each target is an M-vector with a scalar right block.
inline AdmmResult admm_rank1(const std::vector<CascadeObservation>& obs, const AdmmHyper& h = {}) {
    detail::require_class(obs, RankClass::RankOne, "admm_rank1");
    std::vector<PreparedTarget> t;
    for (const auto& o : obs) t.push_back(prepare_target(reduced_rank_target(o.r, o.s, 1), RightBlock::Dense));
    return run_admm(make_terms(t, detail::energies(obs)), h);
}

}  // namespace irsloc
