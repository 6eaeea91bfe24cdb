#pragma once

// Shared numeric types, the weighted-ensemble container, and log-domain
// weight normalization. Everything downstream works in 64-bit floats and
// keeps weights in log space until a read-out point (ESS, resampling,
// posterior estimates) forces normalization.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace surge {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// A system state x in R^D. Kept as a bare Eigen vector; the surrounding
// contracts (finiteness, fixed dimension per run) are enforced where states
// are produced.
using StateVector = Vec;

inline bool all_finite(const Vec& v) {
    return v.allFinite();
}

struct Ensemble {
    std::vector<StateVector> particles;
    Vec log_weights;

    int size() const { return static_cast<int>(particles.size()); }
    int dim() const { return particles.empty() ? 0 : static_cast<int>(particles.front().size()); }
};

inline Ensemble make_uniform_ensemble(std::vector<StateVector> particles) {
    Ensemble e;
    const int n = static_cast<int>(particles.size());
    if (n < 1) throw std::invalid_argument("ensemble needs at least one particle");
    e.particles = std::move(particles);
    e.log_weights = Vec::Constant(n, -std::log(static_cast<double>(n)));
    return e;
}

inline double log_sum_exp(const Vec& log_v) {
    if (log_v.size() == 0) throw std::invalid_argument("log_sum_exp: empty input");
    const double m = log_v.maxCoeff();
    if (std::isinf(m) && m < 0) return -std::numeric_limits<double>::infinity();
    double acc = 0.0;
    for (Eigen::Index i = 0; i < log_v.size(); ++i) acc += std::exp(log_v[i] - m);
    return m + std::log(acc);
}

// Normalize log-weights via log-sum-exp (largest exponent subtracted first).
// Returns the linear-domain weights summing to one and the log of the total
// mass. A vector that is entirely -inf has no usable information left.
inline std::pair<Vec, double> normalize_log_weights(const Vec& log_w) {
    if (log_w.size() == 0) throw std::invalid_argument("normalize_log_weights: empty input");
    for (Eigen::Index i = 0; i < log_w.size(); ++i) {
        if (std::isnan(log_w[i]) || (std::isinf(log_w[i]) && log_w[i] > 0))
            throw std::invalid_argument("normalize_log_weights: non-finite entry");
    }
    const double lz = log_sum_exp(log_w);
    if (std::isinf(lz) && lz < 0) throw std::runtime_error("total weight collapse");
    Vec w(log_w.size());
    for (Eigen::Index i = 0; i < log_w.size(); ++i) w[i] = std::exp(log_w[i] - lz);
    w /= w.sum();  // absorb the last ulp so the sum is 1 to machine precision
    return {w, lz};
}

// Run fn(lo, hi) over a partition of [0, n). Work is assigned by index range,
// so results land in caller-owned slots and the output is independent of the
// number of workers. threads <= 1 runs inline.
template <typename Fn>
void parallel_for(int n, int threads, Fn&& fn) {
    if (n <= 0) return;
    if (threads <= 1 || n == 1) {
        fn(0, n);
        return;
    }
    const int workers = std::min(threads, n);
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers) - 1);
    const int chunk = (n + workers - 1) / workers;
    for (int w = 1; w < workers; ++w) {
        const int lo = w * chunk;
        const int hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] { fn(lo, hi); });
    }
    fn(0, std::min(chunk, n));
    for (auto& th : pool) th.join();
}

}  // namespace surge
