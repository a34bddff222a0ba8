// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "irsloc/channel.hpp"
#include "irsloc/scene.hpp"

namespace irsloc {

/// Signed frequency (Hz) of DFT bin b for a frame of L samples at rate fs.
inline double bin_frequency(int b, int L, double fs) {
    const int s = (2 * b < L) ? b : b - L;
    return static_cast<double>(s) * fs / L;
}

/// Rows of the unitary DFT restricted to `bins`: F(i, n) = exp(j 2 pi b_i n / L) / sqrt(L).
inline MatC dft_rows(const std::vector<int>& bins, int L) {
    MatC f(bins.size(), L);
    const double scale = 1.0 / std::sqrt(static_cast<double>(L));
    for (std::size_t i = 0; i < bins.size(); ++i)
        for (int n = 0; n < L; ++n)
            f(i, n) = std::polar(scale, 2.0 * pi * static_cast<double>((static_cast<long>(bins[i]) * n) % L) / L);
    return f;
}

/// One sensing stream X = code * F_B, band-limited to the DFT bins B.
struct Stream {
    std::vector<int> bins;
    MatC code;  // rows x |B|, orthonormal rows

    /// Phase ramp exp(-j 2 pi f_b tau) that delays the stream by tau seconds.
    VecC delay_ramp(double tau, int L, double fs) const {
        VecC d(bins.size());
        for (std::size_t i = 0; i < bins.size(); ++i) d[i] = std::polar(1.0, -2.0 * pi * bin_frequency(bins[i], L, fs) * tau);
        return d;
    }
    /// Angular frequency 2 pi f_b per bin.
    VecR angular_frequencies(int L, double fs) const {
        VecR w(bins.size());
        for (std::size_t i = 0; i < bins.size(); ++i) w[i] = 2.0 * pi * bin_frequency(bins[i], L, fs);
        return w;
    }
};

struct SensingStreams {
    int rows = 0;          // stream rows per IRS
    int frame_length = 0;  // L
    double sample_rate = 0.0;
    bool reduced = false;  // rows < n_tx because K n_tx > L
    std::vector<Stream> streams;
    std::vector<MatC> beamformers;       // N_t x rows
    std::vector<int> excited;            // leading beamformer columns that are non-zero
    std::vector<bool> zero_forcing_exact;

    int num_irs() const { return static_cast<int>(streams.size()); }

    /// Time-domain X_k(t - tau), rows x L.
    MatC time_matrix(int k, double tau = 0.0) const {
        const auto& s = streams[k];
        return s.code * s.delay_ramp(tau, frame_length, sample_rate).asDiagonal() * dft_rows(s.bins, frame_length);
    }
    /// Per-second time derivative of X_k by spectral differentiation.
    MatC derivative_matrix(int k) const {
        const auto& s = streams[k];
        const VecC jw = I1 * s.angular_frequencies(frame_length, sample_rate).cast<cplx>();
        return s.code * jw.asDiagonal() * dft_rows(s.bins, frame_length);
    }
};

struct StreamOptions {
    bool allow_reduction = true;
    bool zero_forcing = true;
    double rank_tol = 1e-8;
};

namespace detail {

inline MatC random_isometry(int rows, int cols, std::mt19937_64& rng) {
    // rows x cols with orthonormal rows (rows <= cols).
    std::normal_distribution<double> n(0.0, 1.0);
    MatC g(cols, rows);
    for (int i = 0; i < cols; ++i)
        for (int j = 0; j < rows; ++j) g(i, j) = cplx(n(rng), n(rng));
    Eigen::HouseholderQR<MatC> qr(g);
    MatC q = qr.householderQ() * MatC::Identity(cols, rows);
    return q.adjoint();
}

/// Orthonormal basis (columns) of the range of m, singular values above tol * reference.
inline MatC range_basis(const MatC& m, double tol, double reference) {
    Eigen::JacobiSVD<MatC> svd(m, Eigen::ComputeThinU);
    const auto& sv = svd.singularValues();
    int r = 0;
    while (r < sv.size() && sv[r] > tol * reference) ++r;
    return svd.matrixU().leftCols(r);
}

}  // namespace detail

/// Mutually orthogonal, frequency-disjoint sensing streams and zero-forcing beamformers.
inline SensingStreams make_orthogonal_streams(const SceneConfig& scene, const StreamOptions& opt = {}) {
    validate(scene);
    const int K = scene.num_irs();
    const int L = scene.frame_length;
    SensingStreams out;
    out.frame_length = L;
    out.sample_rate = scene.sample_rate();
    const int bins_per = L / K;
    if (bins_per < 1) throw InfeasibleStreamsError("frame too short for one stream per IRS");
    if (static_cast<long>(K) * scene.n_tx > L) {
        if (!opt.allow_reduction)
            throw InfeasibleStreamsError("K * n_tx exceeds the frame length and stream reduction is disabled");
        out.rows = bins_per;
        out.reduced = true;
    } else {
        out.rows = scene.n_tx;
    }

    std::mt19937_64 rng(scene.seed ^ 0x73747265616d73ULL);
    std::vector<int> perm(L);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (int k = 0; k < K; ++k) {
        Stream s;
        s.bins.assign(perm.begin() + k * bins_per, perm.begin() + (k + 1) * bins_per);
        std::sort(s.bins.begin(), s.bins.end());
        s.code = detail::random_isometry(out.rows, bins_per, rng);
        out.streams.push_back(std::move(s));
    }

    std::vector<MatC> h;
    for (int k = 0; k < K; ++k) h.push_back(make_bs_irs_channel(scene, k));
    for (int k = 0; k < K; ++k) {
        const MatC hk_h = h[k].adjoint();
        const double ref = Eigen::JacobiSVD<MatC>(hk_h).singularValues()(0);
        MatC basis;
        bool exact = false;
        if (opt.zero_forcing && K > 1) {
            int rows_other = 0;
            for (int j = 0; j < K; ++j)
                if (j != k) rows_other += h[j].rows();
            MatC other(rows_other, scene.n_tx);
            for (int j = 0, r = 0; j < K; ++j)
                if (j != k) {
                    other.middleRows(r, h[j].rows()) = h[j];
                    r += h[j].rows();
                }
            Eigen::JacobiSVD<MatC> svd(other, Eigen::ComputeFullV);
            const auto& sv = svd.singularValues();
            int rank = 0;
            while (rank < sv.size() && sv[rank] > opt.rank_tol * sv(0)) ++rank;
            const MatC null = svd.matrixV().rightCols(scene.n_tx - rank);
            if (null.cols() > 0) {
                basis = detail::range_basis(null * (null.adjoint() * hk_h), opt.rank_tol, ref);
                exact = basis.cols() > 0;
            }
        }
        if (!exact) basis = detail::range_basis(hk_h, opt.rank_tol, ref);
        if (basis.cols() == 0) throw ZeroSignalError("BS-to-IRS channel is numerically zero");
        const int used = std::min<int>(basis.cols(), out.rows);
        const double scale = std::sqrt(scene.tx_power * L / (static_cast<double>(K) * used));
        MatC w = MatC::Zero(scene.n_tx, out.rows);
        w.leftCols(used) = scale * basis.leftCols(used);
        out.beamformers.push_back(std::move(w));
        out.excited.push_back(used);
        out.zero_forcing_exact.push_back(exact || K == 1);
    }
    return out;
}

enum class RankClass { Full, Intermediate, RankOne };

inline const char* to_string(RankClass r) {
    switch (r) {
        case RankClass::Full: return "full";
        case RankClass::Intermediate: return "intermediate";
        case RankClass::RankOne: return "rank-one";
    }
    return "?";
}

struct EffectiveSignal {
    MatC s;  // N x rows, Theta_k H_k W_k
    RankClass rank_class = RankClass::RankOne;
    int rank = 0;
};

inline int numerical_rank(const MatC& m, double tol = 1e-8) {
    Eigen::JacobiSVD<MatC> svd(m);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0 || sv(0) == 0.0) return 0;
    int r = 0;
    while (r < sv.size() && sv[r] > tol * sv(0)) ++r;
    return r;
}

inline RankClass classify_rank(int rank, int n_elements) {
    if (rank >= n_elements) return RankClass::Full;
    if (rank == 1) return RankClass::RankOne;
    return RankClass::Intermediate;
}

inline EffectiveSignal effective_signal(const MatC& theta_h, const MatC& w, int n_elements, double tol = 1e-8) {
    EffectiveSignal e;
    e.s = theta_h * w;
    e.rank = numerical_rank(e.s, tol);
    if (e.rank == 0) throw ZeroSignalError("effective reflected signal is numerically zero");
    e.rank_class = classify_rank(e.rank, n_elements);
    return e;
}

inline EffectiveSignal effective_signal(const SceneConfig& scene, int k, const SensingStreams& st, double tol = 1e-8) {
    const MatC th = reflection_vector(scene.irs[k]).asDiagonal() * make_bs_irs_channel(scene, k);
    return effective_signal(th, st.beamformers[k], scene.irs[k].n_elements, tol);
}

}  // namespace irsloc
