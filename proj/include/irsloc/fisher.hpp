// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "irsloc/channel.hpp"
#include "irsloc/parallel.hpp"
#include "irsloc/received.hpp"
#include "irsloc/streams.hpp"

namespace irsloc {

enum class Scheme { Collaborative, AngleOnly, DelayOnly, NoCollaboration, SingleIrs };

inline const char* to_string(Scheme s) {
    switch (s) {
        case Scheme::Collaborative: return "collaborative";
        case Scheme::AngleOnly: return "angle-only";
        case Scheme::DelayOnly: return "delay-only";
        case Scheme::NoCollaboration: return "no-collab";
        case Scheme::SingleIrs: return "single-irs";
    }
    return "?";
}

inline Scheme scheme_from_string(const std::string& s) {
    for (Scheme v : {Scheme::Collaborative, Scheme::AngleOnly, Scheme::DelayOnly, Scheme::NoCollaboration, Scheme::SingleIrs})
        if (s == to_string(v)) return v;
    throw ConfigError("unknown scheme: " + s);
}

/// Target-independent parts of the Fisher information: effective signals and their stream spectra.
struct SignalModel {
    std::vector<MatC> effective;     // S_k, N x rows
    std::vector<MatC> spectrum;      // S_k * code_k, N x |B_k|
    std::vector<VecR> omega;         // 2 pi f per bin
};

inline SignalModel signal_model(const SceneConfig& scene, const SensingStreams& st) {
    SignalModel m;
    for (int k = 0; k < scene.num_irs(); ++k) {
        MatC s = reflection_vector(scene.irs[k]).asDiagonal() * make_bs_irs_channel(scene, k) * st.beamformers[k];
        m.spectrum.push_back(s * st.streams[k].code);
        m.effective.push_back(std::move(s));
        m.omega.push_back(st.streams[k].angular_frequencies(st.frame_length, st.sample_rate));
    }
    return m;
}

/// Per-path information terms; entry (l,k) concerns the path IRS k -> target -> IRS l.
struct PathInformation {
    MatR delay;  // for tau_{l,k}
    MatR aoa;    // contribution of path (l,k) to the AOA information of IRS l
    MatR aod;    // contribution of path (l,k) to the AOD information of IRS k
};

inline PathInformation path_information(const SceneConfig& scene, const Geometry& g, const SignalModel& m) {
    const int K = scene.num_irs();
    const double sr = scene.element_spacing_ratio;
    PathInformation p{MatR::Zero(K, K), MatR::Zero(K, K), MatR::Zero(K, K)};
    std::vector<double> beam(K), beam_dot(K), delay_energy(K);
    for (int k = 0; k < K; ++k) {
        const int N = scene.irs[k].n_elements;
        const Eigen::RowVectorXcd y = steering_vector(g.angle[k], N, sr).adjoint() * m.spectrum[k];
        const Eigen::RowVectorXcd yd = steering_derivative(g.angle[k], N, sr).adjoint() * m.spectrum[k];
        beam[k] = y.squaredNorm();
        beam_dot[k] = yd.squaredNorm();
        delay_energy[k] = (y.cwiseAbs2().transpose().array() * m.omega[k].array().square()).sum();
    }
    for (int l = 0; l < K; ++l) {
        const double sigma2 = scene.sensor_noise(l);
        if (!(sigma2 > 0.0)) throw DomainError("Fisher information needs positive noise power");
        const int M = scene.irs[l].n_sensors;
        const double ad = steering_derivative_norm2(g.angle[l], M, sr);
        for (int k = 0; k < K; ++k) {
            const double w = 2.0 * g.cascade_gain(l, k) * g.cascade_gain(l, k) / sigma2;
            p.delay(l, k) = w * M * delay_energy[k];
            p.aoa(l, k) = w * ad * beam[k];
            p.aod(l, k) = w * M * beam_dot[k];
        }
    }
    return p;
}

/// K^2 x K^2 diagonal, lexicographic (l,k).
inline MatR fim_delay(const PathInformation& p) {
    const int K = static_cast<int>(p.delay.rows());
    MatR f = MatR::Zero(K * K, K * K);
    for (int l = 0; l < K; ++l)
        for (int k = 0; k < K; ++k) f(l * K + k, l * K + k) = p.delay(l, k);
    return f;
}

struct FimAngle {
    MatR aoa;
    MatR aod;
};

inline FimAngle fim_angles(const PathInformation& p) {
    return {p.aoa.rowwise().sum().asDiagonal(), p.aod.colwise().sum().transpose().asDiagonal()};
}

inline MatR fim_delay(const SceneConfig& scene, const SensingStreams& st) {
    return fim_delay(path_information(scene, geometry_params(scene), signal_model(scene, st)));
}

inline FimAngle fim_angles(const SceneConfig& scene, const SensingStreams& st) {
    return fim_angles(path_information(scene, geometry_params(scene), signal_model(scene, st)));
}

/// d[tau; theta]/d[x; y]: K^2 delay columns (lexicographic) followed by K angle columns.
inline MatR location_jacobian(const Geometry& g, const std::vector<Vec2>& irs_positions, const Vec2& target) {
    const int K = g.K;
    MatR j(2, K * K + K);
    std::vector<Vec2> unit(K);
    for (int k = 0; k < K; ++k) {
        if (g.distance[k] == 0.0) throw DegenerateGeometryError("target coincides with an IRS");
        unit[k] = (target - irs_positions[k]) / g.distance[k];
    }
    for (int l = 0; l < K; ++l)
        for (int k = 0; k < K; ++k) j.col(l * K + k) = (unit[l] + unit[k]) / speed_of_light;
    for (int k = 0; k < K; ++k) {
        const Vec2 d = target - irs_positions[k];
        j.col(K * K + k) = Vec2(-d.y(), d.x()) / (g.distance[k] * g.distance[k]);
    }
    return j;
}

inline MatR location_jacobian(const SceneConfig& scene, const Geometry& g) {
    std::vector<Vec2> pos;
    for (const auto& d : scene.irs) pos.push_back(d.position);
    return location_jacobian(g, pos, scene.target_position);
}

struct LocationBound {
    Mat2 fim;
    double crb = 0.0;
};

/// F = J blockdiag(F_tau, F_aoa + F_aod) J^T and trace(F^-1); singular F raises with its null direction.
inline LocationBound fim_location(const MatR& jac, const MatR& f_delay, const FimAngle& f_angle) {
    const Eigen::Index nd = f_delay.rows();
    const Eigen::Index na = f_angle.aoa.rows();
    MatR block = MatR::Zero(nd + na, nd + na);
    block.topLeftCorner(nd, nd) = f_delay;
    block.bottomRightCorner(na, na) = f_angle.aoa + f_angle.aod;
    LocationBound b;
    b.fim = jac * block * jac.transpose();
    b.fim = 0.5 * (b.fim + b.fim.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Mat2> es(b.fim);
    const double lo = es.eigenvalues()(0), hi = es.eigenvalues()(1);
    if (!(hi > 0.0) || lo <= 1e-12 * hi)
        throw SingularFimError("location Fisher information is singular", es.eigenvectors().col(0));
    b.crb = 1.0 / lo + 1.0 / hi;
    return b;
}

struct CrbReport {
    Scheme scheme = Scheme::Collaborative;
    MatR fim_delay;
    FimAngle fim_angle;
    MatR jacobian;
    Mat2 fim_location;
    double crb_location = 0.0;
};

/// Information masks for the benchmark schemes (SingleIrs uses the collaborative mask on a relocated scene).
inline PathInformation apply_scheme(PathInformation p, Scheme s) {
    const Eigen::Index K = p.delay.rows();
    switch (s) {
        case Scheme::AngleOnly: p.delay.setZero(); break;
        case Scheme::DelayOnly:
            p.aoa.setZero();
            p.aod.setZero();
            break;
        case Scheme::NoCollaboration:
            for (Eigen::Index l = 0; l < K; ++l)
                for (Eigen::Index k = 0; k < K; ++k)
                    if (l != k) p.delay(l, k) = p.aoa(l, k) = p.aod(l, k) = 0.0;
            break;
        default: break;
    }
    return p;
}

/// All K IRSs merged into one at IRS-1's position: K*N elements, K*M sensors, phases concatenated.
inline SceneConfig single_irs_scene(const SceneConfig& scene) {
    SceneConfig out = scene;
    IrsDescriptor merged = scene.irs.front();
    merged.n_elements = 0;
    merged.n_sensors = 0;
    merged.phase_profile.clear();
    for (const auto& d : scene.irs) {
        merged.n_elements += d.n_elements;
        merged.n_sensors += d.n_sensors;
        merged.phase_profile.insert(merged.phase_profile.end(), d.phase_profile.begin(), d.phase_profile.end());
    }
    out.irs = {merged};
    return out;
}

/// Precomputed target-independent state for repeated CRB evaluation.
struct CrbContext {
    SceneConfig scene;  // already relocated for SingleIrs
    Scheme scheme = Scheme::Collaborative;
    SensingStreams streams;
    SignalModel signals;
};

inline CrbContext make_crb_context(const SceneConfig& scene, Scheme scheme, const StreamOptions& opt = {}) {
    CrbContext c;
    c.scheme = scheme;
    c.scene = scheme == Scheme::SingleIrs ? single_irs_scene(scene) : scene;
    c.streams = make_orthogonal_streams(c.scene, opt);
    c.signals = signal_model(c.scene, c.streams);
    return c;
}

inline CrbReport scheme_crb(const CrbContext& c, const Vec2& target) {
    SceneConfig s = c.scene;
    s.target_position = target;
    const Geometry g = geometry_params(s);
    const PathInformation p = apply_scheme(path_information(s, g, c.signals), c.scheme);
    CrbReport r;
    r.scheme = c.scheme;
    r.fim_delay = fim_delay(p);
    r.fim_angle = fim_angles(p);
    r.jacobian = location_jacobian(s, g);
    const LocationBound b = fim_location(r.jacobian, r.fim_delay, r.fim_angle);
    r.fim_location = b.fim;
    r.crb_location = b.crb;
    return r;
}

inline CrbReport scheme_crb(const SceneConfig& scene, Scheme scheme) {
    return scheme_crb(make_crb_context(scene, scheme), scene.target_position);
}

struct Region {
    enum class Kind { Rectangle, Disc } kind = Kind::Rectangle;
    Vec2 lower{0.0, 0.0};
    Vec2 upper{10.0, 10.0};
    Vec2 center{0.0, 0.0};
    double radius = 0.0;

    static Region rectangle(Vec2 lo, Vec2 hi) {
        Region r;
        r.lower = lo;
        r.upper = hi;
        return r;
    }
    static Region disc(Vec2 c, double rad) {
        Region r;
        r.kind = Kind::Disc;
        r.center = c;
        r.radius = rad;
        return r;
    }
    static Region point(Vec2 p) { return rectangle(p, p); }

    Vec2 sample(std::mt19937_64& rng) const {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        if (kind == Kind::Rectangle) {
            const double a = u(rng), b = u(rng);
            return {lower.x() + a * (upper.x() - lower.x()), lower.y() + b * (upper.y() - lower.y())};
        }
        const double rr = radius * std::sqrt(u(rng));
        const double ph = 2.0 * pi * u(rng);
        return center + rr * Vec2(std::cos(ph), std::sin(ph));
    }
};

/// Counter-based seed for (master, a, b); independent of evaluation order.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0) {
    return splitmix64(splitmix64(splitmix64(master) ^ a) ^ (b * 0xd1342543de82ef95ULL + 1));
}

struct AverageCrb {
    double mean = 0.0;
    std::vector<std::optional<double>> per_trial;  // empty when the trial FIM was singular
    int singular = 0;
};

struct AverageOptions {
    int threads = 1;
    // Draw a fresh random IRS phase configuration for every trial instead of the template's.
    bool redraw_phases = false;
};

/// Target (and optionally phase) draw of trial t; shared by every scheme so schemes see paired trials.
inline SceneConfig trial_scene(const SceneConfig& base, const Region& region, std::uint64_t seed, int t,
                               bool redraw_phases) {
    SceneConfig s = base;
    std::mt19937_64 rng(derive_seed(seed, 0x746172676574ULL, static_cast<std::uint64_t>(t)));
    s.target_position = region.sample(rng);
    if (redraw_phases) {
        std::mt19937_64 prng(derive_seed(seed, 0x7068617365ULL, static_cast<std::uint64_t>(t)));
        for (auto& d : s.irs) d.phase_profile = random_phase_profile(d.n_elements, prng);
    }
    return s;
}

inline double trial_crb(const CrbContext& ctx, const SceneConfig& s) {
    const Geometry g = geometry_params(s);
    const SignalModel& sig = ctx.signals;
    const PathInformation p = apply_scheme(path_information(s, g, sig), ctx.scheme);
    return fim_location(location_jacobian(s, g), fim_delay(p), fim_angles(p)).crb;
}

inline AverageCrb average_crb(const CrbContext& ctx, const Region& region, int n_trials, std::uint64_t seed,
                              const AverageOptions& opt = {}) {
    if (n_trials < 1) throw ConfigError("n_trials must be at least 1");
    AverageCrb out;
    out.per_trial.resize(n_trials);
    parallel_for(n_trials, opt.threads, [&](int t) {
        try {
            const SceneConfig s = trial_scene(ctx.scene, region, seed, t, opt.redraw_phases);
            if (opt.redraw_phases) {
                CrbContext local{s, ctx.scheme, ctx.streams, signal_model(s, ctx.streams)};
                out.per_trial[t] = trial_crb(local, s);
            } else {
                out.per_trial[t] = trial_crb(ctx, s);
            }
        } catch (const SingularFimError&) {
        } catch (const DegenerateGeometryError&) {
        }
    });
    double sum = 0.0;
    int ok = 0;
    for (const auto& v : out.per_trial) {
        if (v) {
            sum += *v;
            ++ok;
        } else {
            ++out.singular;
        }
    }
    if (ok == 0) throw SingularFimError("every trial produced a singular location FIM", Vec2::Zero());
    out.mean = sum / ok;
    return out;
}

inline AverageCrb average_crb(const SceneConfig& scene, Scheme scheme, const Region& region, int n_trials,
                              std::uint64_t seed, const AverageOptions& opt = {}) {
    return average_crb(make_crb_context(scene, scheme), region, n_trials, seed, opt);
}

}  // namespace irsloc
