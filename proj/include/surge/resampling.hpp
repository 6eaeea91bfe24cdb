#pragma once

// Effective sample size and resampling. Both schemes draw N ancestors with
// replacement proportional to the normalized weights and hand back a uniform
// ensemble; multinomial uses i.i.d. categorical draws, systematic a single
// uniform offset over stratified positions.

#include "surge/core.hpp"
#include "surge/rng.hpp"

#include <algorithm>
#include <vector>

namespace surge {

enum class ResampleScheme { multinomial, systematic };

struct ResamplingConfig {
    ResampleScheme scheme = ResampleScheme::systematic;
    double threshold_fraction = 0.75;  // resample when ESS < threshold_fraction * N
};

inline void validate(const ResamplingConfig& c) {
    if (!(c.threshold_fraction > 0.0) || c.threshold_fraction > 1.0)
        throw std::invalid_argument("resampling threshold_fraction must lie in (0, 1]");
}

inline double effective_sample_size(const Vec& normalized_weights) {
    if (normalized_weights.size() == 0) throw std::invalid_argument("effective_sample_size: empty input");
    if (std::abs(normalized_weights.sum() - 1.0) > 1e-9)
        throw std::invalid_argument("effective_sample_size: weights must be normalized");
    return 1.0 / normalized_weights.squaredNorm();
}

// Ancestor indices for N offspring drawn from the normalized weights.
inline std::vector<int> resample_indices(const Vec& normalized_weights, ResampleScheme scheme,
                                         const RngStream& rng) {
    const int n = static_cast<int>(normalized_weights.size());
    if (n == 0) throw std::invalid_argument("resample_indices: empty input");
    Vec cum(n);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        acc += normalized_weights[i];
        cum[i] = acc;
    }
    cum[n - 1] = 1.0;  // guard the final bin against roundoff
    std::vector<int> idx(static_cast<std::size_t>(n));
    auto locate = [&](double u) {
        return static_cast<int>(std::upper_bound(cum.data(), cum.data() + n, u) - cum.data());
    };
    if (scheme == ResampleScheme::multinomial) {
        const Vec u = uniform_draw(rng, n);
        for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = std::min(n - 1, locate(u[i]));
    } else {
        const double u0 = uniform_draw(rng, 1)[0];
        for (int i = 0; i < n; ++i)
            idx[static_cast<std::size_t>(i)] = std::min(n - 1, locate((i + u0) / n));
    }
    return idx;
}

inline Ensemble resample(const Ensemble& ensemble, ResampleScheme scheme, const RngStream& rng) {
    const auto [w, lz] = normalize_log_weights(ensemble.log_weights);
    (void)lz;
    const auto idx = resample_indices(w, scheme, rng);
    Ensemble out;
    out.particles.reserve(idx.size());
    for (const int j : idx) out.particles.push_back(ensemble.particles[static_cast<std::size_t>(j)]);
    out.log_weights = Vec::Constant(ensemble.size(), -std::log(static_cast<double>(ensemble.size())));
    return out;
}

struct MaybeResampleResult {
    Ensemble ensemble;
    bool did_resample = false;
    double ess = 0.0;  // ESS before any resampling
};

inline MaybeResampleResult maybe_resample(const Ensemble& ensemble, const ResamplingConfig& config,
                                          const RngStream& rng) {
    validate(config);
    const auto [w, lz] = normalize_log_weights(ensemble.log_weights);
    (void)lz;
    MaybeResampleResult r;
    r.ess = effective_sample_size(w);
    if (r.ess < config.threshold_fraction * ensemble.size()) {
        r.ensemble = resample(ensemble, config.scheme, rng);
        r.did_resample = true;
    } else {
        r.ensemble = ensemble;
    }
    return r;
}

}  // namespace surge
