#pragma once

// The assimilation loop. Per observation window the ensemble is pushed
// through K guided Euler-Maruyama steps; weights accumulate either per step
// (incremental mode, with the telescoped reward) or once at the window end
// (whole-step mode). ESS is checked at every internal step when
// resample_every_k is set, otherwise only at window boundaries. Posterior
// read-outs are taken at window ends before any resampling there.

#include "surge/observation.hpp"
#include "surge/propagation.hpp"
#include "surge/resampling.hpp"
#include "surge/surrogate.hpp"
#include "surge/weights.hpp"

#include <optional>
#include <string>
#include <vector>

namespace surge {

enum class FilterMode { incremental, whole_step };

struct FilterConfig {
    int N = 0;
    int K = 1;
    ResamplingConfig resampling;
    GuidancePotential guidance;
    FilterMode mode = FilterMode::incremental;
    bool resample_every_k = true;
    bool unweighted = false;  // comparison arm: propagate with guidance, never weight or resample
    std::uint64_t seed = 0;
    int threads = 1;
    bool record_weight_trace = false;
};

struct EssTraceRow {
    int t = 0;
    int k = 0;
    double ess = 0.0;
    bool did_resample = false;
};

struct FilterOutput {
    std::vector<Ensemble> posteriors;  // weighted ensemble per window end, weights normalized
    std::vector<StateVector> posterior_means;
    std::vector<double> log_normalizers;  // running estimate of log p(y_{1..t+1})
    std::vector<EssTraceRow> ess_trace;
    std::vector<WeightTraceRow> weight_trace;
};

inline double posterior_estimate(const FilterOutput& output, int t,
                                 const std::function<double(const StateVector&)>& phi) {
    const auto& ens = output.posteriors.at(static_cast<std::size_t>(t));
    double acc = 0.0;
    for (int i = 0; i < ens.size(); ++i)
        acc += std::exp(ens.log_weights[i]) * phi(ens.particles[static_cast<std::size_t>(i)]);
    return acc;
}

inline FilterOutput surge_filter(const TransitionSurrogate& surrogate, const ObservationModel& model,
                                 const std::vector<Vec>& observations, const Ensemble& init,
                                 const FilterConfig& config) {
    const int N = config.N;
    const int K = config.K;
    if (N < 1 || K < 1) throw std::invalid_argument("surge_filter: need N >= 1 and K >= 1");
    if (init.size() != N) throw std::invalid_argument("surge_filter: init ensemble size must equal N");
    if (observations.empty()) throw std::invalid_argument("surge_filter: no observations");
    validate(config.resampling);

    const int T = static_cast<int>(observations.size());
    const double ds = 1.0 / K;
    const VarianceSchedule& schedule = surrogate.schedule;

    std::vector<StateVector> xs = init.particles;
    std::vector<StateVector> conds(xs.size());
    Vec log_w = init.log_weights;
    log_w.array() -= log_sum_exp(log_w);  // start from unit total mass
    double log_z_acc = 0.0;

    std::vector<StateVector> staged_x(static_cast<std::size_t>(N));
    std::vector<WeightParts> staged_parts(static_cast<std::size_t>(N));
    Vec staged_girsanov = Vec::Zero(N);
    Vec staged_terminal_r = Vec::Zero(N);
    Vec girsanov_acc = Vec::Zero(N);
    const bool cache_drift = surrogate.constant_drift;
    std::vector<Vec> drift_cache(cache_drift ? static_cast<std::size_t>(N) : 0);

    FilterOutput out;
    out.posteriors.reserve(static_cast<std::size_t>(T));
    out.posterior_means.reserve(static_cast<std::size_t>(T));
    out.log_normalizers.reserve(static_cast<std::size_t>(T));
    out.ess_trace.reserve(static_cast<std::size_t>(T) * K);

    const bool incremental = config.mode == FilterMode::incremental;

    for (int t = 0; t < T; ++t) {
        const Vec& y = observations[static_cast<std::size_t>(t)];
        conds = xs;
        girsanov_acc.setZero();
        for (int k = 0; k < K; ++k) {
            const double s_k = k * ds;
            const bool window_end = (k == K - 1);
            parallel_for(N, config.threads, [&](int lo, int hi) {
                for (int i = lo; i < hi; ++i) {
                    const auto rng = make_stream(config.seed, StreamDomain::noise,
                                                 static_cast<std::uint32_t>(i),
                                                 static_cast<std::uint32_t>(t),
                                                 static_cast<std::uint32_t>(k));
                    if (cache_drift && k == 0)
                        drift_cache[static_cast<std::size_t>(i)] =
                            surrogate.drift(xs[static_cast<std::size_t>(i)], s_k,
                                            conds[static_cast<std::size_t>(i)]);
                    auto rec = em_step(surrogate, config.guidance, xs[static_cast<std::size_t>(i)],
                                       conds[static_cast<std::size_t>(i)], y, s_k, ds, rng,
                                       cache_drift ? &drift_cache[static_cast<std::size_t>(i)] : nullptr);
                    if (!config.unweighted) {
                        if (incremental) {
                            staged_parts[static_cast<std::size_t>(i)] =
                                incremental_log_weight_parts(rec, model, y, schedule);
                        } else {
                            staged_girsanov[i] = girsanov_increment(rec, schedule);
                            if (window_end) staged_terminal_r[i] = log_likelihood(model, y, rec.x_after);
                        }
                    }
                    staged_x[static_cast<std::size_t>(i)] = std::move(rec.x_after);
                }
            });
            xs.swap(staged_x);
            if (!config.unweighted) {
                if (incremental) {
                    for (int i = 0; i < N; ++i) {
                        const auto& p = staged_parts[static_cast<std::size_t>(i)];
                        log_w[i] += p.log_beta;
                        if (config.record_weight_trace)
                            out.weight_trace.push_back({t, k, i, p.log_beta, p.reward_part, p.girsanov_part});
                    }
                } else {
                    girsanov_acc += staged_girsanov;
                    if (window_end) {
                        for (int i = 0; i < N; ++i) {
                            const double lw = staged_terminal_r[i] + girsanov_acc[i];
                            log_w[i] += lw;
                            if (config.record_weight_trace)
                                out.weight_trace.push_back(
                                    {t, k, i, lw, staged_terminal_r[i], girsanov_acc[i]});
                        }
                    }
                }
            }

            Vec w;
            double lz = 0.0;
            try {
                std::tie(w, lz) = normalize_log_weights(log_w);
            } catch (const std::runtime_error&) {
                throw std::runtime_error("total weight collapse at t=" + std::to_string(t) +
                                         ", k=" + std::to_string(k));
            }
            const double ess = effective_sample_size(w);

            if (window_end) {
                Ensemble snap;
                snap.particles = xs;
                snap.log_weights = (log_w.array() - lz).matrix();
                Vec mean = Vec::Zero(surrogate.dim);
                for (int i = 0; i < N; ++i) mean += w[i] * xs[static_cast<std::size_t>(i)];
                out.posteriors.push_back(std::move(snap));
                out.posterior_means.push_back(std::move(mean));
                out.log_normalizers.push_back(log_z_acc + lz);
            }

            const bool check = !config.unweighted && (config.resample_every_k || window_end);
            const bool do_resample = check && ess < config.resampling.threshold_fraction * N;
            out.ess_trace.push_back({t, k, ess, do_resample});
            if (do_resample) {
                const auto idx =
                    resample_indices(w, config.resampling.scheme,
                                     make_stream(config.seed, StreamDomain::resample, 0,
                                                 static_cast<std::uint32_t>(t), static_cast<std::uint32_t>(k)));
                std::vector<StateVector> new_xs(xs.size()), new_conds(conds.size());
                std::vector<Vec> new_drift(drift_cache.size());
                Vec new_girs = Vec::Zero(N);
                for (int i = 0; i < N; ++i) {
                    const auto j = static_cast<std::size_t>(idx[static_cast<std::size_t>(i)]);
                    new_xs[static_cast<std::size_t>(i)] = xs[j];
                    new_conds[static_cast<std::size_t>(i)] = conds[j];
                    if (cache_drift) new_drift[static_cast<std::size_t>(i)] = drift_cache[j];
                    new_girs[i] = girsanov_acc[idx[static_cast<std::size_t>(i)]];
                }
                xs.swap(new_xs);
                conds.swap(new_conds);
                drift_cache.swap(new_drift);
                girsanov_acc.swap(new_girs);
                log_z_acc += lz;
                log_w.setConstant(-std::log(static_cast<double>(N)));
            }
        }
    }
    return out;
}

}  // namespace surge
