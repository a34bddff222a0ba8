// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "irsloc/received.hpp"
#include "irsloc/streams.hpp"

namespace irsloc {

/// Lag range in samples of the total delay (BS -> IRS k -> target -> IRS l).
struct SearchWindow {
    int first = 0;
    int last = 0;
};

/// Window from the bounding box of BS and IRS positions, 20% margin on the round trip, clamped to the frame.
inline SearchWindow search_window(const SceneConfig& s, int k, double margin = 0.2) {
    Vec2 lo = s.bs_position, hi = s.bs_position;
    for (const auto& d : s.irs) {
        lo = lo.cwiseMin(d.position);
        hi = hi.cwiseMax(d.position);
    }
    const double diag = (hi - lo).norm();
    const double fs = s.sample_rate();
    const double tb = (s.irs[k].position - s.bs_position).norm() / speed_of_light;
    SearchWindow w;
    w.first = std::max(0, static_cast<int>(std::floor(tb * fs)) - 1);
    w.last = static_cast<int>(std::ceil((tb + (1.0 + margin) * 2.0 * diag / speed_of_light) * fs));
    w.last = std::min(w.last, s.frame_length - 1);
    if (w.last - w.first < 2) throw WindowError("search window shorter than three lags");
    return w;
}

/// Correlates R_l against a stream in the DFT domain: metric(tau) = || R_l X^H(t - tau) ||_F over chosen rows.
class StreamCorrelator {
public:
    StreamCorrelator(const MatC& r, const Stream& stream, int L, double fs, int rows_used)
        : L_(L), fs_(fs), omega_(stream.angular_frequencies(L, fs)) {
        spectrum_ = r * dft_rows(stream.bins, L).adjoint();
        code_h_ = stream.code.topRows(rows_used).adjoint();
        code_full_h_ = stream.code.adjoint();
    }
    VecC ramp_conj(double tau) const {
        VecC d(omega_.size());
        for (Eigen::Index i = 0; i < omega_.size(); ++i) d[i] = std::polar(1.0, omega_[i] * tau);
        return d;
    }
    double metric2(double tau) const { return (spectrum_ * ramp_conj(tau).asDiagonal() * code_h_).squaredNorm(); }
    /// R_l X^H(t - tau) with every stream row.
    MatC correlate(double tau) const { return spectrum_ * ramp_conj(tau).asDiagonal() * code_full_h_; }

private:
    int L_;
    double fs_;
    VecR omega_;
    MatC spectrum_;
    MatC code_h_;
    MatC code_full_h_;
};

struct DelayEstimate {
    int l = 0;
    int k = 0;
    double tau_hat = 0.0;      // cascade delay, BS-to-IRS delay removed (seconds)
    double total_delay = 0.0;  // lag of the peak including the BS-to-IRS segment (seconds)
    double peak_metric = 0.0;
    int grid_index = 0;        // integer lag of the peak (samples)
    bool refined = false;
    double refine_shift = 0.0;  // samples
};

struct MatchedFilterOptions {
    bool refine = false;
    int oversample = 8;
    std::vector<double>* metric_dump = nullptr;  // metric per lag of the window, when set
};

namespace detail {

template <class F>
double golden_max(F&& f, double a, double b, double tol) {
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > tol) {
        if (fc >= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

}  // namespace detail

inline DelayEstimate matched_filter_delay(const StreamCorrelator& corr, double fs, double tau_b2i, const SearchWindow& w,
                                          const MatchedFilterOptions& opt = {}) {
    int best = w.first;
    double best_v = -1.0;
    if (opt.metric_dump) opt.metric_dump->clear();
    for (int n = w.first; n <= w.last; ++n) {
        const double v = corr.metric2(n / fs);
        if (opt.metric_dump) opt.metric_dump->push_back(std::sqrt(v));
        if (v > best_v) {
            best_v = v;
            best = n;
        }
    }
    if (best == w.first || best == w.last) throw WindowError("matched-filter peak on the search window boundary");
    DelayEstimate e;
    e.grid_index = best;
    e.peak_metric = std::sqrt(best_v);
    double lag = best;
    if (opt.refine) {
        // Band-limited metric on a fine grid, parabola through the fine maximum, then a golden-section polish
        // inside the parabola's bracket.
        const int q = std::max(2, opt.oversample);
        std::vector<double> fine(2 * q + 1);
        for (int i = 0; i <= 2 * q; ++i) fine[i] = corr.metric2((best + double(i - q) / q) / fs);
        int j = static_cast<int>(std::max_element(fine.begin() + 1, fine.end() - 1) - fine.begin());
        const double y0 = fine[j - 1], y1 = fine[j], y2 = fine[j + 1];
        const double den = y0 - 2.0 * y1 + y2;
        double center = double(j - q) / q;
        if (den < 0.0) center += 0.5 * (y0 - y2) / den / q;
        const double half = 1.0 / q;
        const double shift = detail::golden_max([&](double x) { return corr.metric2((best + x) / fs); },
                                                center - half, center + half, 1e-9);
        e.refine_shift = std::clamp(shift, -0.5, 0.5);
        e.refined = true;
        lag += e.refine_shift;
        e.peak_metric = std::sqrt(corr.metric2(lag / fs));
    }
    e.total_delay = lag / fs;
    e.tau_hat = std::max(0.0, e.total_delay - tau_b2i);
    return e;
}

struct CascadeObservation {
    int l = 0;
    int k = 0;
    MatC r;       // M x rows, R_l X_k^H at the estimated delay
    MatC s;       // N x rows, effective signal S_k
    RankClass rank_class = RankClass::RankOne;
    int rank = 0;
    double energy = 0.0;      // ||r||_F^2
    double noise_floor = 0.0; // expected energy from noise alone
    double tau_hat = 0.0;
};

inline CascadeObservation extract_observation(const StreamCorrelator& corr, const DelayEstimate& d,
                                              const EffectiveSignal& eff, double noise_power) {
    CascadeObservation o;
    o.l = d.l;
    o.k = d.k;
    o.r = corr.correlate(d.total_delay);
    o.s = eff.s;
    o.rank_class = eff.rank_class;
    o.rank = eff.rank;
    o.energy = o.r.squaredNorm();
    o.noise_floor = static_cast<double>(o.r.rows() * o.r.cols()) * noise_power;
    o.tau_hat = d.tau_hat;
    return o;
}

struct DelayStageResult {
    std::vector<DelayEstimate> delays;            // K^2, lexicographic (l,k)
    std::vector<CascadeObservation> observations; // K^2, lexicographic (l,k)
    std::vector<EffectiveSignal> signals;
};

/// Matched filtering of every (l,k) pair and extraction of the observation matrices.
inline DelayStageResult estimate_delays(const SceneConfig& scene, const SensingStreams& st, const ReceivedSignal& rx,
                                        const MatchedFilterOptions& opt = {}) {
    const int K = scene.num_irs();
    DelayStageResult out;
    for (int k = 0; k < K; ++k) out.signals.push_back(effective_signal(scene, k, st));
    for (int l = 0; l < K; ++l)
        for (int k = 0; k < K; ++k) {
            const StreamCorrelator corr(rx.samples[l], st.streams[k], st.frame_length, st.sample_rate, st.excited[k]);
            const double tb = (scene.irs[k].position - scene.bs_position).norm() / speed_of_light;
            DelayEstimate d = matched_filter_delay(corr, st.sample_rate, tb, search_window(scene, k), opt);
            d.l = l;
            d.k = k;
            out.observations.push_back(extract_observation(corr, d, out.signals[k], scene.sensor_noise(l)));
            out.delays.push_back(d);
        }
    return out;
}

}  // namespace irsloc
