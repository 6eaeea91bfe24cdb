#pragma once

// The path-space importance weight, in two equivalent forms. Per internal
// step the increment is
//
//   log beta_k = [s_{k+1} R(x_{k+1}) - s_k R(x_k)] - u . (sqrt(ds) xi) - 1/2 |u|^2 ds
//
// with u = Sigma^{1/2}(s_k) grad_G(x_k) and R(x) = log p(y|x). The reward
// prefactors use internal time with s_0 = 0 and s_K = 1, so the reward parts
// telescope to R(x_1) exactly over a full window; the remaining terms are the
// exact log density ratio between the unguided and guided Euler-Maruyama
// chains. Summed over k this equals the whole-window weight
// log p(y|x_1) - sum_k u_k . sqrt(ds) xi_k - 1/2 sum_k |u_k|^2 ds.

#include "surge/observation.hpp"
#include "surge/propagation.hpp"

#include <vector>

namespace surge {

struct WeightParts {
    double log_beta = 0.0;
    double reward_part = 0.0;    // s_{k+1} R(x_after) - s_k R(x_before)
    double girsanov_part = 0.0;  // -u . sqrt(ds) xi - 1/2 |u|^2 ds
};

inline double girsanov_increment(const PathStepRecord& rec, const VarianceSchedule& schedule) {
    const double ds = rec.s_k1 - rec.s_k;
    const Vec u = schedule.sqrt_at(rec.s_k) * rec.grad_G_at_before;
    return -u.dot(rec.noise) * std::sqrt(ds) - 0.5 * u.squaredNorm() * ds;
}

inline WeightParts incremental_log_weight_parts(const PathStepRecord& rec, const ObservationModel& model,
                                                const Vec& y, const VarianceSchedule& schedule) {
    WeightParts p;
    p.reward_part = rec.s_k1 * log_likelihood(model, y, rec.x_after) -
                    rec.s_k * log_likelihood(model, y, rec.x_before);
    p.girsanov_part = girsanov_increment(rec, schedule);
    p.log_beta = p.reward_part + p.girsanov_part;
    return p;
}

inline double incremental_log_weight(const PathStepRecord& rec, const ObservationModel& model, const Vec& y,
                                     const VarianceSchedule& schedule) {
    return incremental_log_weight_parts(rec, model, y, schedule).log_beta;
}

// Whole-window form: terminal log-likelihood plus the accumulated density
// ratio. Equal to the sum of incremental_log_weight over the same path up to
// floating-point roundoff.
inline double whole_step_log_weight(const std::vector<PathStepRecord>& path, const ObservationModel& model,
                                    const Vec& y, const VarianceSchedule& schedule) {
    if (path.empty()) throw std::invalid_argument("whole_step_log_weight: empty path");
    if (path.front().s_k != 0.0 || std::abs(path.back().s_k1 - 1.0) > 1e-12)
        throw std::invalid_argument("whole_step_log_weight: path must cover s in [0, 1]");
    double girsanov = 0.0;
    for (const auto& rec : path) girsanov += girsanov_increment(rec, schedule);
    return log_likelihood(model, y, path.back().x_after) + girsanov;
}

// One diagnostics row of the optional weight-trace CSV.
struct WeightTraceRow {
    int t = 0;
    int k = 0;
    int particle = 0;
    double log_beta = 0.0;
    double reward_part = 0.0;
    double girsanov_part = 0.0;
};

// Per-particle log-weight accumulator. Increments land unnormalized; callers
// normalize at read-out points only.
struct WeightLedger {
    Vec log_w;

    explicit WeightLedger(int n) : log_w(Vec::Zero(n)) {}
    explicit WeightLedger(Vec initial) : log_w(std::move(initial)) {}

    void add(int particle, double log_increment) { log_w[particle] += log_increment; }
    void reset_uniform() { log_w.setConstant(-std::log(static_cast<double>(log_w.size()))); }
    int size() const { return static_cast<int>(log_w.size()); }
};

}  // namespace surge
