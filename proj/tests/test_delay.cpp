// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <random>

#include "irsloc/delay.hpp"
#include "irsloc/fisher.hpp"

using namespace irsloc;

namespace {

// One IRS at (20, 0); the BS -> IRS -> target -> IRS path spans `samples` sample periods.
SceneConfig lag_scene(double samples, bool fractional) {
    SceneConfig s = table_one_scene(4, 8, 8);
    s.irs.resize(1);
    s.irs[0].position = {20.0, 0.0};
    s.n_tx = 8;
    s.frame_length = 64;
    s.fractional_delay = fractional;
    s.noise_power = 0.0;
    const double d = 0.5 * (samples * speed_of_light / s.sample_rate() - 20.0);
    s.target_position = s.irs[0].position + d * Vec2(std::cos(0.4), std::sin(0.4));
    return s;
}

DelayEstimate single_delay(const SceneConfig& s, const SensingStreams& st, const ReceivedSignal& rx, bool refine) {
    MatchedFilterOptions opt;
    opt.refine = refine;
    return estimate_delays(s, st, rx, opt).delays.front();
}

double mean_signal_power(const ReceivedSignal& rx) {
    return rx.samples[0].squaredNorm() / static_cast<double>(rx.samples[0].size());
}

}  // namespace

TEST(MatchedFilter, OnGridDelayIsExact) {
    const SceneConfig s = lag_scene(10.0, false);
    const SensingStreams st = make_orthogonal_streams(s);
    const ReceivedSignal rx = synthesize_received(s, st);
    EXPECT_FALSE(rx.off_grid);
    const DelayEstimate e = single_delay(s, st, rx, false);
    EXPECT_EQ(e.grid_index, 10);
    EXPECT_NEAR(e.total_delay * s.sample_rate(), 10.0, 1e-9);
    const double tb = 20.0 / speed_of_light;
    EXPECT_NEAR(e.tau_hat, 10.0 / s.sample_rate() - tb, 1e-15);
    const DelayEstimate r = single_delay(s, st, rx, true);
    EXPECT_EQ(r.grid_index, 10);
    EXPECT_LT(std::abs(r.refine_shift), 1e-6);
}

TEST(MatchedFilter, OffGridDelayWithInterpolation) {
    SceneConfig s = lag_scene(10.3, true);
    const SensingStreams st = make_orthogonal_streams(s);
    const double p = mean_signal_power(synthesize_received(s, st));
    s.noise_power = p / 100.0;  // 20 dB
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const ReceivedSignal rx = synthesize_received(s, st, geometry_params(s), seed);
        const DelayEstimate e = single_delay(s, st, rx, true);
        EXPECT_LT(std::abs(e.total_delay * s.sample_rate() - 10.3), 0.1) << "seed " << seed;
    }
}

TEST(MatchedFilter, GlobalPhaseInvariance) {
    SceneConfig s = lag_scene(9.0, false);
    const SensingStreams st = make_orthogonal_streams(s);
    s.noise_power = mean_signal_power(synthesize_received(s, st)) / 10.0;
    ReceivedSignal rx = synthesize_received(s, st, geometry_params(s), 9);
    const DelayEstimate a = single_delay(s, st, rx, true);
    rx.samples[0] *= std::polar(1.0, 1.234);
    const DelayEstimate b = single_delay(s, st, rx, true);
    EXPECT_EQ(a.grid_index, b.grid_index);
    EXPECT_NEAR(a.total_delay, b.total_delay, 1e-15);
    EXPECT_NEAR(a.peak_metric, b.peak_metric, 1e-12 * a.peak_metric);
}

TEST(MatchedFilter, PureNoisePeakNearNoiseFloor) {
    SceneConfig s = lag_scene(10.0, false);
    s.noise_power = 1e-6;
    s.tx_power = 1e-40;
    const SensingStreams st = make_orthogonal_streams(s);
    std::vector<double> peaks;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const ReceivedSignal rx = synthesize_received(s, st, geometry_params(s), seed);
        try {
            peaks.push_back(single_delay(s, st, rx, false).peak_metric);
        } catch (const WindowError&) {
            // a noise maximum on the window edge is a valid outcome
        }
    }
    ASSERT_FALSE(peaks.empty());
    // Each lag's metric^2 is a sum of M * rows noise terms of variance sigma^2; the maximum over a short window
    // stays within a small factor of that level.
    const double floor = std::sqrt(8.0 * st.excited[0] * s.noise_power);
    for (double p : peaks) {
        EXPECT_GT(p, 0.5 * floor);
        EXPECT_LT(p, 2.0 * floor);
    }
}

TEST(Extraction, OtherStreamsAreRejected) {
    SceneConfig s = table_one_scene(2);
    s.irs.resize(2);
    s.n_tx = 4;
    s.frame_length = 16;
    const SensingStreams st = make_orthogonal_streams(s);
    std::mt19937_64 rng(1);
    MatC a = MatC::Random(6, st.rows);
    const MatC y = a * st.time_matrix(1, 3.0 / s.sample_rate());
    const StreamCorrelator corr(y, st.streams[0], st.frame_length, st.sample_rate, st.excited[0]);
    for (double lag : {0.0, 2.5, 3.0, 7.0}) EXPECT_LT(corr.correlate(lag / s.sample_rate()).norm(), 1e-9 * y.norm());
    const StreamCorrelator own(y, st.streams[1], st.frame_length, st.sample_rate, st.excited[1]);
    EXPECT_NEAR(own.correlate(3.0 / s.sample_rate()).norm(), a.norm(), 1e-9 * a.norm());
}

TEST(Extraction, NoiselessObservationIsRankOneAfterPseudoInverse) {
    SceneConfig s = lag_scene(10.0, false);
    std::mt19937_64 rng(3);
    add_random_scatterers(s, 0, 12, -3.0, rng);
    const SensingStreams st = make_orthogonal_streams(s);
    const DelayStageResult d = estimate_delays(s, st, synthesize_received(s, st));
    const CascadeObservation& o = d.observations.front();
    EXPECT_EQ(o.rank_class, RankClass::Full);
    const MatC z = o.r * o.s.completeOrthogonalDecomposition().pseudoInverse();
    EXPECT_EQ(numerical_rank(z, 1e-8), 1);
}

TEST(Extraction, NoiseEnergyMatchesFloor) {
    SceneConfig s = lag_scene(10.0, false);
    s.noise_power = 1e-6;
    s.tx_power = 1e-40;
    const SensingStreams st = make_orthogonal_streams(s);
    const double tau = 10.0 / s.sample_rate();
    double sum = 0.0, floor = 0.0;
    const int trials = 1000;
    const EffectiveSignal eff = effective_signal(s, 0, st);
    for (int t = 0; t < trials; ++t) {
        const ReceivedSignal rx = synthesize_received(s, st, geometry_params(s), static_cast<std::uint64_t>(t));
        const StreamCorrelator corr(rx.samples[0], st.streams[0], st.frame_length, st.sample_rate, st.excited[0]);
        DelayEstimate e;
        e.total_delay = tau;
        const CascadeObservation o = extract_observation(corr, e, eff, s.noise_power);
        sum += o.energy;
        floor = o.noise_floor;
    }
    EXPECT_NEAR(floor, 8.0 * st.rows * s.noise_power, 1e-18);
    EXPECT_NEAR(sum / trials / floor, 1.0, 0.05);
}

TEST(DelayStage, CascadeDelaysNearlySymmetric) {
    SceneConfig s = table_one_scene(8);
    s.target_position = {4.0, 6.0};
    const SensingStreams st = make_orthogonal_streams(s);
    const double step = 1.0 / s.sample_rate();
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const DelayStageResult d = estimate_delays(s, st, synthesize_received(s, st, geometry_params(s), seed));
        for (int l = 0; l < 3; ++l)
            for (int k = l + 1; k < 3; ++k)
                EXPECT_LE(std::abs(d.delays[l * 3 + k].tau_hat - d.delays[k * 3 + l].tau_hat), 2.0 * step + 1e-15);
    }
}

TEST(DelayStage, HighSnrVarianceTracksFisherInformation) {
    SceneConfig s = table_one_scene(8);
    s.fractional_delay = true;
    s.tx_power = dbm_to_watt(60.0);
    const SensingStreams st = make_orthogonal_streams(s);
    const Geometry g = geometry_params(s);
    const MatR fim = fim_delay(s, st);
    const int trials = 1000;
    VecR sq = VecR::Zero(9);
    MatchedFilterOptions opt;
    opt.refine = true;
    for (int t = 0; t < trials; ++t) {
        const DelayStageResult d = estimate_delays(s, st, synthesize_received(s, st, g, static_cast<std::uint64_t>(t)), opt);
        for (int i = 0; i < 9; ++i) {
            const double e = d.delays[i].tau_hat - g.cascade_delay(i / 3, i % 3);
            sq(i) += e * e;
        }
    }
    for (int i = 0; i < 9; ++i) {
        const double ratio = sq(i) / trials * fim(i, i);
        EXPECT_GT(ratio, 0.5) << "pair " << i;
        EXPECT_LT(ratio, 2.0) << "pair " << i;
    }
}
