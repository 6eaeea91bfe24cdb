#pragma once

// Euler-Maruyama simulation of the guided transition SDE. Each step keeps the
// noise vector it consumed: the weight update for the same (particle, t, k)
// must see the identical xi, so the record is the only channel between the
// two.

#include "surge/guidance.hpp"
#include "surge/rng.hpp"
#include "surge/surrogate.hpp"

#include <string>
#include <vector>

namespace surge {

struct PathStepRecord {
    StateVector x_before;
    StateVector x_after;
    Vec noise;                     // xi ~ N(0, I) actually used for this step
    double s_k = 0.0;
    double s_k1 = 0.0;
    StateVector grad_G_at_before;  // evaluated at (x_before, s_k)
};

// One step of x' = x + (v + Sigma grad_G) ds + Sigma^{1/2} sqrt(ds) xi.
// drift_override, when given, is used in place of surrogate.drift; callers
// pass it only for constant_drift surrogates, where the value is identical.
inline PathStepRecord em_step(const TransitionSurrogate& surrogate, const GuidancePotential& guidance,
                              const StateVector& x, const StateVector& x_cond, const Vec& y,
                              double s_k, double ds, const RngStream& rng,
                              const Vec* drift_override = nullptr) {
    if (!(ds > 0) || s_k < 0 || s_k + ds > 1.0 + 1e-12)
        throw std::invalid_argument("em_step: need 0 <= s_k < s_k + ds <= 1");
    Vec v_local;
    if (!drift_override) v_local = surrogate.drift(x, s_k, x_cond);
    const Vec& v = drift_override ? *drift_override : v_local;
    const Vec g = guidance.grad_G(x, s_k, y, x_cond);
    if (!all_finite(v) || !all_finite(g))
        throw std::runtime_error("em_step: non-finite drift or guidance at slot " + std::to_string(rng.slot) +
                                 ", t " + std::to_string(rng.t) + ", k " + std::to_string(rng.k));
    PathStepRecord rec;
    rec.x_before = x;
    rec.s_k = s_k;
    rec.s_k1 = s_k + ds;
    rec.grad_G_at_before = g;
    rec.noise = gaussian_draw(rng, surrogate.dim);
    const Mat& sigma = surrogate.schedule.at(s_k);
    const Mat& sigma_sqrt = surrogate.schedule.sqrt_at(s_k);
    rec.x_after = x + (v + sigma * g) * ds + sigma_sqrt * (std::sqrt(ds) * rec.noise);
    return rec;
}

// N independent K-step trajectories over the uniform grid s_k = k/K, one per
// particle, with noise streams keyed (particle, t, k). Safe to parallelize
// over particles; the keying, not the execution order, fixes the draws.
inline std::vector<std::vector<PathStepRecord>> propagate_window(
    const TransitionSurrogate& surrogate, const GuidancePotential& guidance,
    const std::vector<StateVector>& particles, const std::vector<StateVector>& x_cond, const Vec& y,
    int K, std::uint64_t seed, std::uint32_t t, int threads = 1) {
    if (K < 1) throw std::invalid_argument("propagate_window: K must be >= 1");
    if (particles.size() != x_cond.size())
        throw std::invalid_argument("propagate_window: particles and conditioning states must align");
    const int n = static_cast<int>(particles.size());
    const double ds = 1.0 / K;
    std::vector<std::vector<PathStepRecord>> paths(static_cast<std::size_t>(n));
    parallel_for(n, threads, [&](int lo, int hi) {
        for (int i = lo; i < hi; ++i) {
            auto& path = paths[static_cast<std::size_t>(i)];
            path.reserve(static_cast<std::size_t>(K));
            StateVector x = particles[static_cast<std::size_t>(i)];
            for (int k = 0; k < K; ++k) {
                const auto rng = make_stream(seed, StreamDomain::noise, static_cast<std::uint32_t>(i), t,
                                             static_cast<std::uint32_t>(k));
                path.push_back(em_step(surrogate, guidance, x, x_cond[static_cast<std::size_t>(i)], y,
                                       k * ds, ds, rng));
                x = path.back().x_after;
            }
        }
    });
    return paths;
}

}  // namespace surge
