// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <random>

#include "irsloc/delay.hpp"
#include "irsloc/fisher.hpp"

using namespace irsloc;

namespace {

void expect_psd(const MatR& f) {
    ASSERT_LT((f - f.transpose()).norm(), 1e-12 * (1.0 + f.norm()));
    Eigen::SelfAdjointEigenSolver<MatR> es(0.5 * (f + f.transpose()));
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-10 * f.norm());
}

PathInformation info_of(const SceneConfig& s) {
    const SensingStreams st = make_orthogonal_streams(s);
    return path_information(s, geometry_params(s), signal_model(s, st));
}

std::vector<Vec2> positions(const SceneConfig& s) {
    std::vector<Vec2> p;
    for (const auto& d : s.irs) p.push_back(d.position);
    return p;
}

}  // namespace

TEST(FimDelay, ZeroGainsGiveZeroInformation) {
    const SceneConfig s = table_one_scene(1);
    const SensingStreams st = make_orthogonal_streams(s);
    Geometry g = geometry_params(s);
    g.cascade_gain.setZero();
    const PathInformation p = path_information(s, g, signal_model(s, st));
    EXPECT_EQ(fim_delay(p).norm(), 0.0);
    EXPECT_EQ(fim_angles(p).aoa.norm(), 0.0);
    EXPECT_EQ(fim_angles(p).aod.norm(), 0.0);
}

TEST(FimDelay, NoiseScalingActsOnReceiverRows) {
    SceneConfig s = table_one_scene(1);
    const SensingStreams st = make_orthogonal_streams(s);
    const MatR f = fim_delay(s, st);
    s.irs[1].noise_power = 4.0 * s.noise_power;
    const MatR f4 = fim_delay(s, st);
    for (int l = 0; l < 3; ++l)
        for (int k = 0; k < 3; ++k) {
            const int i = l * 3 + k;
            EXPECT_NEAR(f4(i, i), (l == 1 ? 0.25 : 1.0) * f(i, i), 1e-12 * f(i, i));
        }
}

TEST(FimDelay, PositiveDiagonalAndPsd) {
    SceneConfig s = table_one_scene(5);
    for (Vec2 t : {Vec2(5, 5), Vec2(1, 9), Vec2(9.5, 0.5)}) {
        s.target_position = t;
        const CrbReport r = scheme_crb(s, Scheme::Collaborative);
        expect_psd(r.fim_delay);
        expect_psd(r.fim_angle.aoa);
        expect_psd(r.fim_angle.aod);
        expect_psd(r.fim_location);
        EXPECT_GT(r.fim_delay.diagonal().minCoeff(), 0.0);
    }
}

TEST(FimAngles, BroadsideSingleIrsIsPositive) {
    SceneConfig s = table_one_scene(2);
    s.irs.resize(1);
    s.irs[0].position = {20.0, 5.0};
    s.target_position = {5.0, 5.0};
    const SensingStreams st = make_orthogonal_streams(s);
    const FimAngle f = fim_angles(s, st);
    EXPECT_GT(f.aoa(0, 0), 0.0);
    EXPECT_GT(f.aod(0, 0), 0.0);
}

TEST(FimAngles, DoublingSensorsGivesCubicGrowth) {
    SceneConfig s = table_one_scene(2, 10, 10);
    const double a10 = fim_angles(s, make_orthogonal_streams(s)).aoa(0, 0);
    for (auto& d : s.irs) d.n_sensors = 20;
    const double a20 = fim_angles(s, make_orthogonal_streams(s)).aoa(0, 0);
    EXPECT_GT(a20 / a10, 7.0);
    EXPECT_LT(a20 / a10, 9.0);
}

TEST(FimAngles, CollaborativeEntryIsSumOfPathTerms) {
    const SceneConfig s = table_one_scene(6);
    const PathInformation p = info_of(s);
    const FimAngle f = fim_angles(p);
    for (int l = 0; l < 3; ++l) {
        EXPECT_NEAR(f.aoa(l, l), p.aoa.row(l).sum(), 1e-12 * f.aoa(l, l));
        for (int k = 0; k < 3; ++k) EXPECT_GE(f.aoa(l, l), p.aoa(l, k));
    }
    for (int k = 0; k < 3; ++k) {
        EXPECT_NEAR(f.aod(k, k), p.aod.col(k).sum(), 1e-12 * f.aod(k, k));
        for (int l = 0; l < 3; ++l) EXPECT_GE(f.aod(k, k), p.aod(l, k));
    }
}

TEST(Jacobian, AlignedTargetHasHorizontalDelayColumns) {
    SceneConfig s = table_one_scene(0);
    s.irs[0].position = {-10.0, 0.0};
    s.irs[1].position = {-20.0, 0.0};
    s.irs[2].position = {-30.0, 0.0};
    s.target_position = {5.0, 0.0};
    const Geometry g = geometry_params(s);
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(g.angle[k], 0.0, 1e-15);
    const MatR j = location_jacobian(s, g);
    for (int i = 0; i < 9; ++i) {
        EXPECT_NEAR(j(0, i), 2.0 / speed_of_light, 1e-24);
        EXPECT_NEAR(j(1, i), 0.0, 1e-24);
    }
}

TEST(Jacobian, MatchesFiniteDifferences) {
    SceneConfig s = table_one_scene(0);
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.5, 9.5);
    const double h = 1e-6;
    for (int trial = 0; trial < 20; ++trial) {
        s.target_position = {u(rng), u(rng)};
        const Geometry g = geometry_params(s);
        const MatR j = location_jacobian(s, g);
        for (int axis = 0; axis < 2; ++axis) {
            SceneConfig p = s, m = s;
            p.target_position[axis] += h;
            m.target_position[axis] -= h;
            const Geometry gp = geometry_params(p), gm = geometry_params(m);
            for (int l = 0; l < 3; ++l)
                for (int k = 0; k < 3; ++k) {
                    const double fd = (gp.cascade_delay(l, k) - gm.cascade_delay(l, k)) / (2 * h);
                    EXPECT_NEAR(fd, j(axis, l * 3 + k), 1e-5 * j.col(l * 3 + k).norm());
                }
            for (int k = 0; k < 3; ++k) {
                const double fd = (gp.angle[k] - gm.angle[k]) / (2 * h);
                EXPECT_NEAR(fd, j(axis, 9 + k), 1e-5 * j.col(9 + k).norm());
            }
        }
        for (int l = 0; l < 3; ++l)
            for (int k = 0; k < 3; ++k) EXPECT_EQ(j.col(l * 3 + k), j.col(k * 3 + l));
    }
}

TEST(FimLocation, SingleRangeIsSingular) {
    SceneConfig s = table_one_scene(3);
    s.irs.resize(1);
    try {
        scheme_crb(s, Scheme::DelayOnly);
        FAIL() << "expected a singular FIM";
    } catch (const SingularFimError& e) {
        // The unobservable direction is tangential to the range circle around the IRS.
        const Vec2 radial = (s.target_position - s.irs[0].position).normalized();
        EXPECT_NEAR(std::abs(e.null_direction.dot(radial)), 0.0, 1e-6);
    }
    const CrbReport hybrid = scheme_crb(s, Scheme::Collaborative);
    EXPECT_GT(hybrid.fim_location.determinant(), 0.0);
    EXPECT_TRUE(std::isfinite(hybrid.crb_location));
}

TEST(FimLocation, MorePathTermsNeverHurt) {
    SceneConfig s = table_one_scene(7);
    IrsDescriptor extra = s.irs[0];
    extra.position = {-30.0, 20.0};
    s.irs.push_back(extra);
    const Geometry g = geometry_params(s);
    const PathInformation p4 = info_of(s);
    const double crb4 = fim_location(location_jacobian(g, positions(s), s.target_position), fim_delay(p4), fim_angles(p4)).crb;
    PathInformation p3{p4.delay.topLeftCorner(3, 3), p4.aoa.topLeftCorner(3, 3), p4.aod.topLeftCorner(3, 3)};
    SceneConfig s3 = s;
    s3.irs.resize(3);
    const Geometry g3 = geometry_params(s3);
    const double crb3 =
        fim_location(location_jacobian(g3, positions(s3), s3.target_position), fim_delay(p3), fim_angles(p3)).crb;
    EXPECT_LE(crb4, crb3);
}

TEST(FimLocation, CrbDecreasesWhenAnyDiagonalGrows) {
    const SceneConfig s = table_one_scene(9);
    const CrbReport r = scheme_crb(s, Scheme::Collaborative);
    const double base = r.crb_location;
    for (int i = 0; i < 9; ++i) {
        MatR fd = r.fim_delay;
        fd(i, i) *= 1.5;
        EXPECT_LT(fim_location(r.jacobian, fd, r.fim_angle).crb, base);
    }
    for (int k = 0; k < 3; ++k) {
        FimAngle fa = r.fim_angle;
        fa.aoa(k, k) *= 1.5;
        EXPECT_LT(fim_location(r.jacobian, r.fim_delay, fa).crb, base);
    }
}

TEST(Schemes, CollaborationNeverWorse) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        SceneConfig s = table_one_scene(seed);
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> u(0.0, 10.0);
        s.target_position = {u(rng), u(rng)};
        EXPECT_LE(scheme_crb(s, Scheme::Collaborative).crb_location, scheme_crb(s, Scheme::NoCollaboration).crb_location);
        EXPECT_LE(scheme_crb(s, Scheme::Collaborative).crb_location, scheme_crb(s, Scheme::DelayOnly).crb_location);
    }
}

TEST(Schemes, NamesRoundTrip) {
    for (Scheme sc : {Scheme::Collaborative, Scheme::AngleOnly, Scheme::DelayOnly, Scheme::NoCollaboration, Scheme::SingleIrs})
        EXPECT_EQ(scheme_from_string(to_string(sc)), sc);
    EXPECT_THROW(scheme_from_string("bogus"), ConfigError);
    EXPECT_STREQ(to_string(Scheme::NoCollaboration), "no-collab");
}

TEST(Schemes, SingleIrsMergesArrays) {
    const SceneConfig s = table_one_scene(3, 10, 12);
    const SceneConfig m = single_irs_scene(s);
    ASSERT_EQ(m.num_irs(), 1);
    EXPECT_EQ(m.irs[0].n_elements, 30);
    EXPECT_EQ(m.irs[0].n_sensors, 36);
    EXPECT_EQ(m.irs[0].position, s.irs[0].position);
}

TEST(Schemes, AngleInformationOvertakesDelayForLargeArrays) {
    SceneConfig small = table_one_scene(1, 4, 4);
    EXPECT_LT(scheme_crb(small, Scheme::DelayOnly).crb_location, scheme_crb(small, Scheme::AngleOnly).crb_location);
    SceneConfig large = table_one_scene(1, 128, 128);
    EXPECT_GT(scheme_crb(large, Scheme::DelayOnly).crb_location, scheme_crb(large, Scheme::AngleOnly).crb_location);
}

TEST(AverageCrb, SingleTrialAtPointEqualsSchemeCrb) {
    SceneConfig s = table_one_scene(2);
    s.target_position = {3.0, 4.0};
    const CrbContext ctx = make_crb_context(s, Scheme::Collaborative);
    const AverageCrb a = average_crb(ctx, Region::point({3.0, 4.0}), 1, 77);
    EXPECT_NEAR(a.mean, scheme_crb(s, Scheme::Collaborative).crb_location, 1e-15);
}

TEST(AverageCrb, PrefixReproducible) {
    const SceneConfig s = table_one_scene(2);
    const CrbContext ctx = make_crb_context(s, Scheme::Collaborative);
    const Region r = Region::rectangle({0, 0}, {10, 10});
    for (bool redraw : {false, true}) {
        AverageOptions opt;
        opt.redraw_phases = redraw;
        const AverageCrb a = average_crb(ctx, r, 50, 123, opt);
        const AverageCrb b = average_crb(ctx, r, 100, 123, opt);
        for (int t = 0; t < 50; ++t) EXPECT_EQ(*a.per_trial[t], *b.per_trial[t]);
        opt.threads = 3;
        const AverageCrb c = average_crb(ctx, r, 100, 123, opt);
        EXPECT_EQ(b.mean, c.mean);
    }
}

TEST(AverageCrb, HundredTrialsNearConvergedValue) {
    const SceneConfig s = table_one_scene(2);
    const CrbContext ctx = make_crb_context(s, Scheme::Collaborative);
    const Region r = Region::rectangle({0, 0}, {10, 10});
    const double small = average_crb(ctx, r, 100, 5).mean;
    const double big = average_crb(ctx, r, 10000, 6).mean;
    EXPECT_NEAR(db10(small), db10(big), 1.0);
}

TEST(AverageCrb, RegionSamplingStaysInside) {
    std::mt19937_64 rng(1);
    const Region d = Region::disc({10, 50}, 20.0);
    const Region q = Region::rectangle({0, 0}, {10, 10});
    for (int i = 0; i < 1000; ++i) {
        EXPECT_LE((d.sample(rng) - Vec2(10, 50)).norm(), 20.0);
        const Vec2 p = q.sample(rng);
        EXPECT_TRUE(p.x() >= 0 && p.x() <= 10 && p.y() >= 0 && p.y() <= 10);
    }
}

// Sample variance of the refined matched-filter delay of path (0,0) against the delay CRB.
TEST(DelayCrb, MatchedFilterVarianceNearBound) {
    SceneConfig s = table_one_scene(8);
    s.fractional_delay = true;
    const SensingStreams st = make_orthogonal_streams(s);
    const Geometry g = geometry_params(s);
    const double crb = 1.0 / fim_delay(s, st)(0, 0);
    const int trials = 10000;
    MatchedFilterOptions opt;
    opt.refine = true;
    const SearchWindow w = search_window(s, 0);
    double sq = 0.0;
    for (int t = 0; t < trials; ++t) {
        const ReceivedSignal rx = synthesize_received(s, st, g, static_cast<std::uint64_t>(t));
        const StreamCorrelator corr(rx.samples[0], st.streams[0], st.frame_length, st.sample_rate, st.excited[0]);
        const DelayEstimate e = matched_filter_delay(corr, st.sample_rate, g.bs_delay[0], w, opt);
        const double err = e.tau_hat - g.cascade_delay(0, 0);
        sq += err * err;
    }
    const double ratio = sq / trials / crb;
    EXPECT_GT(ratio, 1.0 / 1.5);
    EXPECT_LT(ratio, 1.5);
}
