// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "irsloc/anm/admm.hpp"
#include "irsloc/anm/angles.hpp"
#include "irsloc/anm/trust_region.hpp"
#include "irsloc/parallel.hpp"

namespace irsloc {

enum class AngleStatus { Ok, AoaFailed, AodFailed, Failed };

inline const char* to_string(AngleStatus s) {
    switch (s) {
        case AngleStatus::Ok: return "ok";
        case AngleStatus::AoaFailed: return "aoa-failed";
        case AngleStatus::AodFailed: return "aod-failed";
        case AngleStatus::Failed: return "failed";
    }
    return "?";
}

/// How an AOD batch was handled.
enum class AodMethod { ToeplitzAdmm, TrustRegion, Unavailable };

inline const char* to_string(AodMethod m) {
    switch (m) {
        case AodMethod::ToeplitzAdmm: return "toeplitz-admm";
        case AodMethod::TrustRegion: return "trust-region";
        case AodMethod::Unavailable: return "unavailable";
    }
    return "?";
}

struct AnglePairEstimate {
    int irs = 0;
    double theta_aoa = std::numeric_limits<double>::quiet_NaN();
    std::optional<double> theta_aod;
    double theta_fused = std::numeric_limits<double>::quiet_NaN();
    double w_aoa = 1.0;
    double w_aod = 0.0;
    double fim_aoa = 0.0;  // estimated Fisher information used for the weights
    double fim_aod = 0.0;
    AngleStatus status = AngleStatus::Ok;
    std::string message;
    AodMethod aod_method = AodMethod::Unavailable;
    bool aod_refined = false;  // trust-region refinement applied to the AOD
    std::vector<RankClass> aoa_dispatch;  // rank class of each AOA term, in the order of k
    bool low_confidence = false;
    int aoa_iterations = 0;
    double aoa_primal_residual = 0.0;
    int aod_iterations = 0;
    double aod_residual = 0.0;  // ADMM primal residual, or the mean trust-region objective
    std::vector<AdmmTraceRow> aoa_trace;  // filled when AdmmHyper::record_trace is set
};

/// Information-weighted mean of the two angle components.  A missing or unusable AOD passes the AOA through.
inline AnglePairEstimate fuse_angles(double theta_aoa, std::optional<double> theta_aod, double fim_aoa, double fim_aod,
                                     double spacing_ratio = 0.5) {
    AnglePairEstimate e;
    e.theta_aoa = theta_aoa;
    e.theta_aod = theta_aod;
    e.fim_aoa = fim_aoa;
    e.fim_aod = fim_aod;
    if (!theta_aod) {
        e.w_aoa = 1.0;
        e.w_aod = 0.0;
    } else {
        const double a = std::isfinite(fim_aoa) ? std::max(fim_aoa, 0.0) : 0.0;
        const double d = std::isfinite(fim_aod) ? std::max(fim_aod, 0.0) : 0.0;
        e.w_aoa = a + d > 0.0 ? a / (a + d) : 0.5;
        e.w_aod = 1.0 - e.w_aoa;
    }
    if (!(e.w_aod > 0.0)) {
        e.theta_fused = theta_aoa;
    } else if (std::abs(theta_aoa - *theta_aod) <= pi / 2 || spacing_ratio < 0.5) {
        e.theta_fused = e.w_aoa * theta_aoa + e.w_aod * *theta_aod;
    } else {
        // Components on opposite sides of endfire: with half-wavelength spacing sin(theta) = +-1 alias, so average
        // the spatial frequencies on their period-2 circle.
        const double ua = std::sin(theta_aoa);
        const double gap = std::remainder(std::sin(*theta_aod) - ua, 2.0);
        const double u = std::remainder(ua + e.w_aod * gap, 2.0);
        e.theta_fused = std::asin(std::clamp(u, -1.0, 1.0));
    }
    return e;
}

/// How observations enter the ADMM fit term.
enum class AngleFit {
    Observation,    // lambda ||X B - R||^2 against the raw observation
    PseudoInverse,  // lambda ||X - R S^dagger||^2 (full rank) or R V Sigma^-1 (reduced)
};

/// ADMM settings for the observation-domain fit: the mixing matrix is scaled to unit mean-squared singular value,
/// which puts the fit weight on a different scale than the pseudo-inverse targets.
inline AdmmHyper observation_fit_hyper() {
    AdmmHyper h;
    h.lambda_fit = 3.0;
    h.eps_primal = 1e-4;
    return h;
}

struct AngleOptions {
    AdmmHyper admm = observation_fit_hyper();
    AngleFit fit = AngleFit::Observation;
    TrustRegionOptions trust_region;
    int threads = 1;
    bool use_aod = true;
    bool refine_aod = true;  // full rank: trust-region polish of the Toeplitz AOD estimate
};

namespace detail {

/// Signal energy of an observation with the expected noise contribution removed, floored at a small fraction.
inline double signal_energy(const CascadeObservation& o) {
    return std::max(o.energy - o.noise_floor, 1e-6 * o.energy);
}

inline std::vector<AdmmTerm> aoa_terms(const std::vector<const CascadeObservation*>& batch, const AdmmHyper& h,
                                       AngleFit fit = AngleFit::PseudoInverse) {
    if (fit == AngleFit::Observation) {
        double total = 0.0;
        for (const auto* o : batch) total += signal_energy(*o);
        std::vector<AdmmTerm> terms;
        for (const auto* o : batch) terms.push_back(observation_aoa_term(*o, signal_energy(*o) / total));
        return terms;
    }
    std::vector<PreparedTarget> t;
    std::vector<double> e;
    for (const auto* o : batch) {
        t.push_back(prepare_aoa_target(*o, h));
        e.push_back(signal_energy(*o));
    }
    return make_terms(t, e);
}

/// Full-rank AOD: the conjugate-transposed targets (R S^dagger)^H ~ a(theta_aod, N) a^H(theta_l, M).
inline std::vector<AdmmTerm> aod_terms(const std::vector<const CascadeObservation*>& batch, const AdmmHyper& h,
                                       AngleFit fit = AngleFit::PseudoInverse) {
    if (fit == AngleFit::Observation) {
        double total = 0.0;
        for (const auto* o : batch) total += signal_energy(*o);
        std::vector<AdmmTerm> terms;
        for (const auto* o : batch) terms.push_back(observation_aod_term(*o, signal_energy(*o) / total));
        return terms;
    }
    std::vector<PreparedTarget> t;
    std::vector<double> e;
    for (const auto* o : batch) {
        t.push_back(prepare_target(full_rank_target(o->r, o->s, h.cond_limit).adjoint(), RightBlock::Toeplitz));
        e.push_back(signal_energy(*o));
    }
    return make_terms(t, e);
}

}  // namespace detail

/// AOA/AOD pairs of all IRSs from the K^2 observations (any order; pairs are matched by their (l, k) fields).
inline std::vector<AnglePairEstimate> estimate_all_angles(const std::vector<CascadeObservation>& obs, const SceneConfig& scene,
                                                          const AngleOptions& opt = {}) {
    const int K = scene.num_irs();
    std::map<std::pair<int, int>, const CascadeObservation*> by_pair;
    for (const auto& o : obs) {
        if (o.l < 0 || o.l >= K || o.k < 0 || o.k >= K) throw DomainError("observation index outside the IRS range");
        by_pair[{o.l, o.k}] = &o;
    }
    if (static_cast<int>(by_pair.size()) != K * K) throw DomainError("estimate_all_angles needs all K^2 observations");
    auto at = [&](int l, int k) { return by_pair.at({l, k}); };
    const double sr = scene.element_spacing_ratio;
    // Only ratios of the information enter the weights; noiseless scenes weigh every sensor equally.
    auto noise = [&](int l) {
        const double v = scene.sensor_noise(l);
        return v > 0.0 ? v : 1.0;
    };

    struct AoaOut {
        bool ok = false;
        double theta = 0.0;
        bool low_confidence = false;
        int iterations = 0;
        double residual = 0.0;
        std::string message;
        std::vector<RankClass> dispatch;
        std::vector<AdmmTraceRow> trace;
    };
    std::vector<AoaOut> aoa(K);
    parallel_for(K, opt.threads, [&](int i) {
        std::vector<const CascadeObservation*> batch;
        for (int k = 0; k < K; ++k) batch.push_back(at(i, k));
        for (const auto* o : batch) aoa[i].dispatch.push_back(o->rank_class);
        try {
            const AdmmResult r = run_admm(detail::aoa_terms(batch, opt.admm, opt.fit), opt.admm);
            const ToeplitzAngle a = angle_from_toeplitz(r.v, sr);
            aoa[i].ok = true;
            aoa[i].theta = a.theta;
            aoa[i].low_confidence = a.low_confidence;
            aoa[i].iterations = r.iterations;
            aoa[i].residual = r.primal_residual;
            aoa[i].trace = r.trace;
        } catch (const Error& e) {
            aoa[i].message = e.what();
        }
    });

    std::vector<AnglePairEstimate> out(K);
    parallel_for(K, opt.threads, [&](int i) {
        const int M = scene.irs[i].n_sensors;
        const int N = scene.irs[i].n_elements;
        std::vector<const CascadeObservation*> batch;
        for (int l = 0; l < K; ++l) batch.push_back(at(l, i));
        const RankClass cls = batch.front()->rank_class;
        TrustRegionOptions tro = opt.trust_region;
        tro.spacing_ratio = sr;

        std::optional<double> aod;
        AodMethod method = AodMethod::Unavailable;
        bool aod_refined = false;
        int aod_it = 0;
        double aod_res = 0.0;
        std::vector<double> explained(K, 1.0);  // fraction of ||r_l||^2 the refined single-path fit accounts for
        std::string aod_msg;
        if (opt.use_aod && cls != RankClass::RankOne) {
            try {
                // r_l = (a^dagger(theta_l) R_{l,i})^H with a^dagger = a^H / M; model r_l ~ alpha S^H a(theta_aod).
                std::vector<AodProjection> proj;
                for (const auto* o : batch) {
                    if (!aoa[o->l].ok) continue;
                    const VecC a_l = steering_vector(aoa[o->l].theta, scene.irs[o->l].n_sensors, sr);
                    proj.push_back({o->s.adjoint(), o->r.adjoint() * a_l / static_cast<double>(a_l.size()),
                                    detail::signal_energy(*o) / noise(o->l), o->l});
                }
                std::optional<double> anm;
                if (cls == RankClass::Full) {
                    method = AodMethod::ToeplitzAdmm;
                    const AdmmResult r = run_admm(detail::aod_terms(batch, opt.admm, opt.fit), opt.admm);
                    anm = angle_from_toeplitz(r.v, sr).theta;
                    aod = anm;
                    aod_it = r.iterations;
                    aod_res = r.primal_residual;
                } else {
                    method = AodMethod::TrustRegion;
                }
                if (proj.empty()) {
                    if (!anm) throw ZeroSignalError("no AOA estimate available to project the AOD observations");
                } else if (cls == RankClass::Intermediate || opt.refine_aod) {
                    double start = joint_aod_scan(proj, tro.coarse_grid, sr, tro.gain);
                    if (anm && joint_aod_fit(proj, *anm, sr, tro.gain) > joint_aod_fit(proj, start, sr, tro.gain)) start = *anm;
                    double num = 0.0, den = 0.0, obj = 0.0;
                    for (const auto& pr : proj) {
                        const TrustRegionResult tr = trust_region_aod(pr.op, pr.r, tro, start);
                        explained[pr.source] = std::clamp(1.0 - tr.objective, 0.0, 1.0);
                        num += pr.weight * explained[pr.source] * tr.theta;
                        den += pr.weight * explained[pr.source];
                        obj += pr.weight * tr.objective;
                        aod_it += tr.iterations;
                    }
                    if (!(den > 0.0)) throw ZeroSignalError("no AOD path fit explains any of its observation");
                    aod = num / den;
                    double wsum = 0.0;
                    for (const auto& pr : proj) wsum += pr.weight;
                    aod_res = obj / wsum;
                    aod_refined = true;
                }
            } catch (const Error& e) {
                aod.reset();
                aod_msg = e.what();
            }
        }

        // Estimated Fisher information with |alpha|^2 M ||a^H S||^2 replaced by the observed signal energy.  The
        // Toeplitz read-out ignores the gain phase, so its information is the part of the derivative orthogonal to
        // the steering vector; the real-gain trust region keeps the full derivative.
        double fa = 0.0, fd = 0.0;
        if (aoa[i].ok) {
            const VecC a = steering_vector(aoa[i].theta, M, sr);
            const VecC da = steering_derivative(aoa[i].theta, M, sr);
            const double d_eff = da.squaredNorm() - std::norm(a.dot(da)) / a.squaredNorm();
            for (int k = 0; k < K; ++k) fa += 2.0 * detail::signal_energy(*at(i, k)) / noise(i) * d_eff / M;
        }
        if (aod) {
            const VecC a = steering_vector(*aod, N, sr);
            const VecC da = steering_derivative(*aod, N, sr);
            for (const auto* o : batch) {
                const Eigen::RowVectorXcd y = a.adjoint() * o->s;
                const Eigen::RowVectorXcd yd = da.adjoint() * o->s;
                const double p = y.squaredNorm();
                if (!(p > 0.0)) continue;
                double d_eff = yd.squaredNorm();
                if (!aod_refined || tro.gain == GainModel::Complex) d_eff -= std::norm(yd.dot(y)) / p;
                fd += 2.0 * explained[o->l] * detail::signal_energy(*o) / noise(o->l) * d_eff / p;
            }
        }

        AnglePairEstimate e;
        if (aoa[i].ok) {
            e = fuse_angles(aoa[i].theta, aod, fa, fd, sr);
        } else if (aod) {
            e.theta_aod = aod;
            e.theta_fused = *aod;
            e.w_aoa = 0.0;
            e.w_aod = 1.0;
            e.fim_aod = fd;
        }
        e.irs = i;
        e.aod_method = aod ? method : AodMethod::Unavailable;
        e.aod_refined = aod && aod_refined;
        e.aoa_dispatch = aoa[i].dispatch;
        e.low_confidence = aoa[i].low_confidence;
        e.aoa_iterations = aoa[i].iterations;
        e.aoa_primal_residual = aoa[i].residual;
        e.aod_iterations = aod_it;
        e.aod_residual = aod_res;
        e.aoa_trace = std::move(aoa[i].trace);
        if (!aoa[i].ok && !aod) {
            e.status = AngleStatus::Failed;
            e.message = aoa[i].message + (aod_msg.empty() ? "" : "; " + aod_msg);
        } else if (!aoa[i].ok) {
            e.status = AngleStatus::AoaFailed;
            e.message = aoa[i].message;
        } else if (!aod_msg.empty()) {
            e.status = AngleStatus::AodFailed;
            e.message = aod_msg;
        }
        out[i] = std::move(e);
    });
    return out;
}

}  // namespace irsloc
