// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <random>

#include <json.hpp>

#include "irsloc/anm/pipeline.hpp"
#include "irsloc/delay.hpp"

using namespace irsloc;

namespace {

std::mt19937_64& rng() {
    static std::mt19937_64 g(20240611);
    return g;
}

MatC random_hermitian(Eigen::Index n) {
    const MatC a = MatC::Random(n, n);
    return 0.5 * (a + a.adjoint());
}

VecC random_toeplitz_param(Eigen::Index n) {
    VecC u = VecC::Random(n);
    u[0] = u[0].real();
    return u;
}

double inner(const MatC& a, const MatC& b) { return (a.adjoint() * b).trace().real(); }

// u with T(u) = a a^H for a = a(theta, n): u[d] = conj(a[d]).
VecC atom_param(double theta, int n) { return steering_vector(theta, n).conjugate(); }

// Observation R = alpha a(theta, M) a(phi, N)^H S with the given effective signal.
CascadeObservation make_obs(double theta, double phi, int m, const MatC& s, RankClass rc, int rank, cplx alpha = {0.7, 0.2}) {
    CascadeObservation o;
    o.s = s;
    o.r = alpha * steering_vector(theta, m) * steering_vector(phi, static_cast<int>(s.rows())).adjoint() * s;
    o.rank_class = rc;
    o.rank = rank;
    o.energy = o.r.squaredNorm();
    return o;
}

// N x rows effective signal built from `paths` plane waves with random row signatures.
MatC multipath_signal(int n, int rows, int paths) {
    MatC s = MatC::Zero(n, rows);
    std::uniform_real_distribution<double> ang(-1.2, 1.2);
    for (int p = 0; p < paths; ++p) s += steering_vector(ang(rng()), n) * VecC::Random(rows).transpose();
    return s;
}

double fused_error(const std::vector<AnglePairEstimate>& est, const Geometry& g) {
    double worst = 0.0;
    for (const auto& e : est) worst = std::max(worst, std::abs(e.theta_fused - g.angle[e.irs]));
    return worst;
}

struct Pipeline {
    SceneConfig scene;
    DelayStageResult delays;
};

Pipeline noiseless_run(SceneConfig s) {
    s.noise_power = 0.0;
    const SensingStreams st = make_orthogonal_streams(s);
    MatchedFilterOptions mf;
    mf.refine = true;
    return {s, estimate_delays(s, st, synthesize_received(s, st), mf)};
}

SceneConfig full_rank_table_one() {
    SceneConfig s = table_one_scene(3);
    std::mt19937_64 g(11);
    for (int k = 0; k < s.num_irs(); ++k) {
        add_random_scatterers(s, k, 20, -3.0, g);
        const Vec2 d = Vec2(5.0, 5.0) - s.irs[k].position;
        s.irs[k].orientation = std::atan2(d.y(), d.x());
    }
    return s;
}

}  // namespace

TEST(Toeplitz, UnitFirstEntryGivesIdentity) {
    VecC u = VecC::Zero(3);
    u[0] = 1.0;
    EXPECT_LT((toeplitz(u) - MatC::Identity(3, 3)).norm(), 1e-15);
    u[0] = 2.5;
    EXPECT_LT((toeplitz(u) - 2.5 * MatC::Identity(3, 3)).norm(), 1e-15);
}

TEST(Toeplitz, RejectsComplexLeadingEntry) {
    VecC u = VecC::Zero(3);
    u[0] = cplx(1.0, 1e-6);
    EXPECT_THROW(toeplitz(u), DomainError);
    EXPECT_THROW(toeplitz_adjoint(MatC::Zero(2, 3)), DomainError);
}

TEST(Toeplitz, AdjointIdentityOnRandomHermitianMatrices) {
    for (int trial = 0; trial < 100; ++trial) {
        const Eigen::Index n = 2 + trial % 15;
        const VecC u = random_toeplitz_param(n);
        const MatC x = random_hermitian(n);
        const double lhs = inner(toeplitz(u), x);
        const double rhs = u.dot(toeplitz_adjoint(x)).real();
        EXPECT_NEAR(lhs, rhs, 1e-10 * std::max(1.0, std::abs(lhs))) << "n = " << n;
    }
}

TEST(Toeplitz, AdjointExamples) {
    const VecC id = toeplitz_adjoint(MatC::Identity(5, 5));
    VecC want = VecC::Zero(5);
    want[0] = 5.0;
    EXPECT_LT((id - want).norm(), 1e-15);
    const VecC ones = toeplitz_adjoint(MatC::Ones(3, 3));
    EXPECT_LT((ones - Eigen::Vector3cd(3.0, 4.0, 2.0)).norm(), 1e-15);
}

TEST(Toeplitz, RoundTripIsGramWeighted) {
    for (Eigen::Index n : {1, 2, 5, 9}) {
        const VecC u = random_toeplitz_param(n);
        const VecC back = toeplitz_adjoint(toeplitz(u));
        // g_0 = n, g_d = 2 (n - d)
        for (Eigen::Index d = 0; d < n; ++d) {
            const double g = d == 0 ? static_cast<double>(n) : 2.0 * static_cast<double>(n - d);
            EXPECT_NEAR(std::abs(back[d] - g * u[d]), 0.0, 1e-12);
        }
    }
}

TEST(Psd, ClampsNegativeEigenvalues) {
    MatC x = MatC::Zero(2, 2);
    x(0, 0) = 2.0;
    x(1, 1) = -1.0;
    MatC want = MatC::Zero(2, 2);
    want(0, 0) = 2.0;
    EXPECT_LT((psd_project(x) - want).norm(), 1e-14);
}

TEST(Psd, IdempotentAndDistanceIsNegativePart) {
    for (int trial = 0; trial < 50; ++trial) {
        const Eigen::Index n = 2 + trial % 7;
        const MatC x = random_hermitian(n);
        const MatC p = psd_project(x);
        EXPECT_LT((psd_project(p) - p).norm(), 1e-10);
        Eigen::SelfAdjointEigenSolver<MatC> es(x);
        double neg = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) neg += std::pow(std::min(es.eigenvalues()(i), 0.0), 2);
        EXPECT_NEAR((p - x).norm(), std::sqrt(neg), 1e-10);
        EXPECT_GE(Eigen::SelfAdjointEigenSolver<MatC>(p).eigenvalues()(0), -1e-12 * std::max(1.0, p.norm()));
    }
}

TEST(AdmmFullRank, NoiselessSingleSourceWithIdentitySignals) {
    const double theta = 0.42;
    std::vector<CascadeObservation> obs;
    for (double phi : {-0.5, 0.1, 0.9}) obs.push_back(make_obs(theta, phi, 8, 1.7 * MatC::Identity(8, 8), RankClass::Full, 8));
    const AdmmResult r = admm_joint_full_rank(obs);
    EXPECT_TRUE(r.converged);
    EXPECT_NEAR(angle_from_toeplitz(r.v).theta, theta, 1e-3);
    // dominant eigenvector of T(v) collinear with a(theta, M)
    Eigen::SelfAdjointEigenSolver<MatC> es(toeplitz(r.v));
    const VecC w = es.eigenvectors().col(7);
    const VecC a = steering_vector(theta, 8);
    EXPECT_GT(std::abs(a.dot(w)) / a.norm(), 1.0 - 1e-4);
}

TEST(AdmmFullRank, RejectsOtherRankClasses) {
    std::vector<CascadeObservation> obs{make_obs(0.1, 0.2, 4, MatC::Identity(4, 4), RankClass::Intermediate, 4)};
    EXPECT_THROW(admm_joint_full_rank(obs), DomainError);
    EXPECT_THROW(admm_joint_full_rank({}), DomainError);
}

TEST(AdmmFullRank, IllConditionedSignalIsReported) {
    MatC s = MatC::Identity(4, 4);
    s(3, 3) = 1e-7;
    std::vector<CascadeObservation> obs{make_obs(0.1, 0.2, 4, s, RankClass::Full, 4)};
    EXPECT_THROW(admm_joint_full_rank(obs), IllConditionedError);
}

TEST(AdmmFullRank, NonConvergenceCarriesResiduals) {
    std::vector<CascadeObservation> obs{make_obs(0.1, 0.2, 4, MatC::Identity(4, 4), RankClass::Full, 4)};
    AdmmHyper h;
    h.max_iter = 3;
    try {
        admm_joint_full_rank(obs, h);
        FAIL() << "expected a convergence error";
    } catch (const ConvergenceError& e) {
        EXPECT_EQ(e.iterations, 3);
    }
}

TEST(AdmmFullRank, DuplicateObservationEqualsDoubledWeight) {
    const MatC y = make_obs(0.3, -0.2, 4, MatC::Identity(4, 4), RankClass::Full, 4).r;
    const MatC z = make_obs(-0.6, 0.5, 4, MatC::Identity(4, 4), RankClass::Full, 4).r + 0.05 * MatC::Random(4, 4);
    const MatC yn = y / y.norm(), zn = z / z.norm();
    // Fixed penalty: residual balancing sees the duplicated block twice and would pick a different rho path.
    AdmmHyper h;
    h.adaptive_rho = false;
    const std::vector<AdmmTerm> dup{{yn, 1.0, RightBlock::Toeplitz, std::nullopt, std::nullopt},
                                    {yn, 1.0, RightBlock::Toeplitz, std::nullopt, std::nullopt},
                                    {zn, 1.0, RightBlock::Toeplitz, std::nullopt, std::nullopt}};
    const std::vector<AdmmTerm> once{{yn, 2.0, RightBlock::Toeplitz, std::nullopt, std::nullopt},
                                     {zn, 1.0, RightBlock::Toeplitz, std::nullopt, std::nullopt}};
    AdmmSolver a(dup, h), b(once, h);
    for (int it = 0; it < 3000; ++it) {
        a.step();
        b.step();
    }
    EXPECT_LT((a.toeplitz_vector() - b.toeplitz_vector()).norm(), 1e-10 * b.toeplitz_vector().norm());
    EXPECT_NEAR(a.objective(), b.objective(), 1e-10 * std::abs(b.objective()));
}

TEST(AdmmFullRank, ZBlocksPsdAfterEveryIteration) {
    std::vector<AdmmTerm> terms;
    for (int k = 0; k < 3; ++k) {
        const MatC y = MatC::Random(6, 5);
        terms.push_back({y / y.norm(), 1.0 + k, k == 1 ? RightBlock::Dense : RightBlock::Toeplitz, std::nullopt, std::nullopt});
    }
    AdmmSolver solver(terms, AdmmHyper{});
    for (int it = 0; it < 300; ++it) {
        solver.step();
        for (std::size_t k = 0; k < solver.size(); ++k) {
            const MatC& z = solver.psd_block(k);
            const double lo = Eigen::SelfAdjointEigenSolver<MatC>(z).eigenvalues()(0);
            ASSERT_GE(lo, -1e-8 * std::max(z.norm(), 1e-300)) << "iteration " << it << " block " << k;
        }
    }
}

TEST(AdmmFullRank, PrimalResidualSmallWithinTwoThousandIterations) {
    std::vector<AdmmTerm> terms;
    for (double phi : {-0.4, 0.3}) {
        const MatC y = steering_vector(0.25, 8) * steering_vector(phi, 8).adjoint();
        terms.push_back({y / y.norm(), 1.0, RightBlock::Toeplitz, std::nullopt, std::nullopt});
    }
    AdmmHyper h;
    h.rho = 1.0;
    AdmmSolver solver(terms, h);
    double best = std::numeric_limits<double>::infinity();
    for (int it = 0; it < 2000 && best >= 1e-6; ++it) best = std::min(best, solver.step().primal_residual);
    EXPECT_LT(best, 1e-6);
}

TEST(AdmmSdpOracle, ObjectiveMatchesInteriorPoint) {
    std::ifstream in(std::string(IRSLOC_TEST_DATA) + "/sdp_oracle.json");
    ASSERT_TRUE(in.good());
    const nlohmann::json doc = nlohmann::json::parse(in);
    AdmmHyper h;
    h.lambda_fit = doc.at("lambda_fit").get<double>();
    h.eps_primal = 1e-9;
    h.eps_x = h.eps_z = 1e-14;
    h.max_iter = 200000;
    int count = 0;
    for (const auto& inst : doc.at("instances")) {
        std::vector<AdmmTerm> terms;
        double wsum = 0.0;
        for (const auto& t : inst.at("terms")) {
            const auto re = t.at("re").get<std::vector<std::vector<double>>>();
            const auto im = t.at("im").get<std::vector<std::vector<double>>>();
            MatC y(static_cast<Eigen::Index>(re.size()), static_cast<Eigen::Index>(re.front().size()));
            for (Eigen::Index i = 0; i < y.rows(); ++i)
                for (Eigen::Index j = 0; j < y.cols(); ++j) y(i, j) = cplx(re[i][j], im[i][j]);
            const double w = t.at("weight").get<double>();
            wsum += w;
            terms.push_back({y, w, t.at("right") == "toeplitz" ? RightBlock::Toeplitz : RightBlock::Dense, std::nullopt,
                             std::nullopt});
        }
        const AdmmResult r = run_admm(terms, h);
        const double want = inst.at("objective").get<double>();
        // AdmmResult::objective is normalized by the weight sum
        EXPECT_NEAR(r.objective * wsum, want, 1e-3 * std::abs(want)) << "instance " << count;
        ++count;
    }
    EXPECT_EQ(count, 20);
}

TEST(AdmmReducedRank, NoiselessRankThreeSignals) {
    const double theta = -0.37;
    std::vector<CascadeObservation> obs;
    for (double phi : {0.2, -0.8, 0.5}) {
        const MatC s = multipath_signal(8, 12, 3);
        obs.push_back(make_obs(theta, phi, 8, s, RankClass::Intermediate, numerical_rank(s, 1e-10)));
        ASSERT_EQ(obs.back().rank, 3);
    }
    const AdmmResult r = admm_joint_reduced_rank(obs);
    EXPECT_NEAR(angle_from_toeplitz(r.v).theta, theta, 1e-3);
    for (const auto& p : r.right) {
        EXPECT_EQ(p.rows(), 3);
        EXPECT_GE(p.trace().real(), 0.0);
    }
}

TEST(AdmmReducedRank, FullWidthMatchesFullRankPath) {
    const double theta = 0.61;
    std::vector<CascadeObservation> full, reduced;
    for (double phi : {0.0, 0.7}) {
        const MatC s = MatC::Random(6, 9);
        full.push_back(make_obs(theta, phi, 6, s, RankClass::Full, 6));
        reduced.push_back(make_obs(theta, phi, 6, s, RankClass::Intermediate, 6));
    }
    const double a = angle_from_toeplitz(admm_joint_full_rank(full).v).theta;
    const double b = angle_from_toeplitz(admm_joint_reduced_rank(reduced).v).theta;
    EXPECT_NEAR(a, theta, 1e-3);
    EXPECT_NEAR(a, b, 1e-4);
}

TEST(AdmmRankOne, NoiselessAoaAndNonNegativeScalarBlocks) {
    const double theta = 0.83;
    std::vector<CascadeObservation> obs;
    for (double phi : {0.3, -0.3, 1.0}) obs.push_back(make_obs(theta, phi, 10, multipath_signal(10, 16, 1), RankClass::RankOne, 1));
    const AdmmResult r = admm_rank1(obs);
    EXPECT_NEAR(angle_from_toeplitz(r.v).theta, theta, 1e-3);
    for (const auto& p : r.right) {
        ASSERT_EQ(p.rows(), 1);
        EXPECT_GE(p(0, 0).real(), 0.0);
    }
}

TEST(TrustRegion, RecoversInjectedAngle) {
    for (int trial = 0; trial < 20; ++trial) {
        std::uniform_real_distribution<double> ang(-1.2, 1.2), off(-0.05, 0.05);
        const double theta = ang(rng());
        const MatC a = MatC::Random(12, 8);
        const cplx alpha(0.4, -1.1);
        const VecC r = alpha * a * steering_vector(theta, 8);
        TrustRegionOptions opt;
        opt.gain = GainModel::Complex;
        const TrustRegionResult res = trust_region_aod(a, r, opt, theta + off(rng()));
        EXPECT_NEAR(res.theta, theta, 1e-4);
        EXPECT_LT(std::abs(res.alpha - alpha), 1e-4 * std::abs(alpha));
    }
}

TEST(TrustRegion, AcceptedObjectivesNeverIncrease) {
    for (int trial = 0; trial < 50; ++trial) {
        const MatC a = MatC::Random(10, 8);
        const VecC r = a * steering_vector(0.2, 8) + 0.3 * VecC::Random(10);
        const TrustRegionResult res = trust_region_aod(a, r, {}, std::uniform_real_distribution<double>(-1.3, 1.3)(rng()));
        for (std::size_t i = 1; i < res.accepted_objectives.size(); ++i)
            EXPECT_LE(res.accepted_objectives[i], res.accepted_objectives[i - 1]);
    }
}

TEST(TrustRegion, GradientMatchesFiniteDifferences) {
    std::uniform_real_distribution<double> ang(-1.3, 1.3), gain(-2.0, 2.0);
    for (GainModel model : {GainModel::Real, GainModel::Complex}) {
        for (int trial = 0; trial < 100; ++trial) {
            const MatC a = MatC::Random(9, 6);
            const VecC r = VecC::Random(9);
            const AodObjective h(a, r, 0.1, 0.5, model);
            const Vec2 y(gain(rng()), ang(rng()));
            const Vec2 g = h.gradient(y);
            Vec2 fd;
            for (int i = 0; i < 2; ++i) {
                const double step = 1e-6;
                Vec2 p = y, m = y;
                p[i] += step;
                m[i] -= step;
                fd[i] = (h.value(p) - h.value(m)) / (2.0 * step);
            }
            EXPECT_LT((g - fd).norm(), 1e-5 * std::max(1.0, g.norm())) << "trial " << trial;
        }
    }
}

TEST(TrustRegion, VanishingResponseIsDegenerate) {
    const MatC a = MatC::Zero(4, 4);
    EXPECT_THROW(AodObjective(a, VecC::Ones(4), 0.0), DegenerateGeometryError);
    EXPECT_THROW(AodObjective(MatC::Identity(4, 4), VecC::Zero(4), 0.0), ZeroSignalError);
}

TEST(AngleReadout, ExactAtom) {
    const ToeplitzAngle t = angle_from_toeplitz(atom_param(0.3, 10));
    EXPECT_NEAR(t.theta, 0.3, 1e-6);
    EXPECT_FALSE(t.low_confidence);
}

TEST(AngleReadout, InvariantToPositiveScalingAndEigenvectorPhase) {
    const VecC v = atom_param(-0.7, 8) + 0.3 * atom_param(0.4, 8);
    const double base = angle_from_toeplitz(v).theta;
    // equal up to the 1e-8 rad golden-section resolution
    for (double c : {1e-3, 0.5, 7.0, 1e4}) EXPECT_NEAR(angle_from_toeplitz(c * v).theta, base, 1e-8) << c;
    const VecC w = steering_vector(-0.7, 8) + 0.1 * VecC::Random(8);
    EXPECT_NEAR(correlation_peak(std::polar(1.0, 2.1) * w), correlation_peak(w), 1e-8);
}

TEST(AngleReadout, TwoNearlyEqualSourcesFlagged) {
    // sin(theta) differs by 12/16, so the two atoms are orthogonal for M = 16
    const double t1 = std::asin(0.5), t2 = std::asin(-0.25);
    const VecC v = atom_param(t1, 16) + 0.995 * atom_param(t2, 16);
    const ToeplitzAngle t = angle_from_toeplitz(v);
    EXPECT_NEAR(t.theta, t1, 1e-6);
    EXPECT_TRUE(t.low_confidence);
    EXPECT_LT(t.gap_ratio, 1.01);
}

TEST(AngleReadout, ZeroToeplitzIsRejected) { EXPECT_THROW(angle_from_toeplitz(VecC::Zero(4)), ZeroSignalError); }

TEST(Fusion, EqualInformationAverages) {
    EXPECT_NEAR(fuse_angles(0.30, 0.32, 5.0, 5.0).theta_fused, 0.31, 1e-15);
}

TEST(Fusion, MissingAodPassesAoaThrough) {
    const AnglePairEstimate e = fuse_angles(0.42, std::nullopt, 3.0, 0.0);
    EXPECT_EQ(e.theta_fused, 0.42);
    EXPECT_EQ(e.w_aoa, 1.0);
}

TEST(Fusion, MonteCarloVarianceBelowComponents) {
    const double theta = 0.2, sa = 0.01, sd = 0.015;
    std::normal_distribution<double> na(0.0, sa), nd(0.0, sd);
    std::mt19937_64 g(5);
    double va = 0.0, vd = 0.0, vf = 0.0;
    const int trials = 1000;
    for (int t = 0; t < trials; ++t) {
        const double a = theta + na(g), d = theta + nd(g);
        const double f = fuse_angles(a, d, 1.0 / (sa * sa), 1.0 / (sd * sd)).theta_fused;
        va += (a - theta) * (a - theta);
        vd += (d - theta) * (d - theta);
        vf += (f - theta) * (f - theta);
    }
    EXPECT_LE(vf / trials, 1.1 * std::min(va, vd) / trials);
}

TEST(AnglePipeline, NoiselessFullRankTableOne) {
    const Pipeline p = noiseless_run(full_rank_table_one());
    for (const auto& o : p.delays.observations) ASSERT_EQ(o.rank_class, RankClass::Full);
    const auto est = estimate_all_angles(p.delays.observations, p.scene);
    ASSERT_EQ(est.size(), 3u);
    for (const auto& e : est) EXPECT_EQ(e.status, AngleStatus::Ok) << e.message;
    EXPECT_LT(fused_error(est, geometry_params(p.scene)), 1e-3);
}

TEST(AnglePipeline, DispatchFollowsRankClasses) {
    SceneConfig s = table_one_scene(4);
    std::mt19937_64 g(2);
    add_random_scatterers(s, 0, 20, -3.0, g);
    add_random_scatterers(s, 1, 2, -3.0, g);
    const Pipeline p = noiseless_run(s);
    const auto est = estimate_all_angles(p.delays.observations, p.scene);
    const int K = s.num_irs();
    std::vector<RankClass> cls(K);
    for (const auto& o : p.delays.observations) cls[o.k] = o.rank_class;
    EXPECT_EQ(cls[0], RankClass::Full);
    EXPECT_EQ(cls[1], RankClass::Intermediate);
    EXPECT_EQ(cls[2], RankClass::RankOne);
    for (const auto& e : est) {
        ASSERT_EQ(static_cast<int>(e.aoa_dispatch.size()), K);
        for (int k = 0; k < K; ++k) EXPECT_EQ(e.aoa_dispatch[k], cls[k]) << "irs " << e.irs << " k " << k;
    }
    EXPECT_EQ(est[2].aod_method, AodMethod::Unavailable);
    EXPECT_FALSE(est[2].theta_aod.has_value());
    EXPECT_EQ(est[2].theta_fused, est[2].theta_aoa);
    EXPECT_LT(fused_error(est, geometry_params(s)), 1e-3);
}

TEST(AnglePipeline, InvariantToObservationOrder) {
    SceneConfig s = full_rank_table_one();
    s.noise_power = 1e-13;
    const SensingStreams st = make_orthogonal_streams(s);
    const DelayStageResult d = estimate_delays(s, st, synthesize_received(s, st, geometry_params(s), 7));
    std::vector<CascadeObservation> shuffled = d.observations;
    std::reverse(shuffled.begin(), shuffled.end());
    std::swap(shuffled[1], shuffled[4]);
    const auto a = estimate_all_angles(d.observations, s), b = estimate_all_angles(shuffled, s);
    for (int i = 0; i < 3; ++i) {
        EXPECT_EQ(a[i].theta_fused, b[i].theta_fused);
        EXPECT_EQ(a[i].theta_aoa, b[i].theta_aoa);
    }
}

TEST(AnglePipeline, DeterministicAcrossThreadCounts) {
    SceneConfig s = full_rank_table_one();
    s.noise_power = 1e-13;
    const SensingStreams st = make_orthogonal_streams(s);
    const DelayStageResult d = estimate_delays(s, st, synthesize_received(s, st, geometry_params(s), 8));
    AngleOptions one, three;
    one.threads = 1;
    three.threads = 3;
    const auto a = estimate_all_angles(d.observations, s, one), b = estimate_all_angles(d.observations, s, three);
    for (int i = 0; i < 3; ++i) {
        EXPECT_EQ(a[i].theta_fused, b[i].theta_fused);
        EXPECT_EQ(a[i].aoa_iterations, b[i].aoa_iterations);
    }
}

TEST(AnglePipeline, IncompleteObservationSetIsRejected) {
    const Pipeline p = noiseless_run(full_rank_table_one());
    std::vector<CascadeObservation> part(p.delays.observations.begin(), p.delays.observations.end() - 1);
    EXPECT_THROW(estimate_all_angles(part, p.scene), DomainError);
}
