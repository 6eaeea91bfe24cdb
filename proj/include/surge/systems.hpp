#pragma once

// Ground-truth generators: a 1-D linear-Gaussian state-space benchmark and
// the stochastic Lorenz-63 system (RK4 deterministic map plus additive
// Gaussian forcing), with paired noisy observations.

#include "surge/observation.hpp"
#include "surge/rng.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace surge {

struct LorenzParams {
    double sigma = 10.0;      // Prandtl number
    double rho = 28.0;        // Rayleigh number
    double beta = 8.0 / 3.0;  // geometric factor
    double h = 0.05;          // time between states (one assimilation interval)
    double noise_std = 0.05;  // additive forcing applied once per interval
    int substeps = 10;        // RK4 sub-steps per interval
};

inline Vec lorenz_drift(const LorenzParams& p, const Vec& x) {
    Vec d(3);
    d[0] = p.sigma * (x[1] - x[0]);
    d[1] = x[0] * (p.rho - x[2]) - x[1];
    d[2] = x[0] * x[1] - p.beta * x[2];
    return d;
}

// Deterministic flow over one interval h: `substeps` classical RK4 steps.
inline Vec lorenz_rk4_map(const LorenzParams& p, const Vec& x0, double h, int substeps) {
    if (!(h > 0) || substeps < 1) throw std::invalid_argument("lorenz_rk4_map: need h > 0 and substeps >= 1");
    const double dt = h / substeps;
    Vec x = x0;
    for (int i = 0; i < substeps; ++i) {
        const Vec k1 = lorenz_drift(p, x);
        const Vec k2 = lorenz_drift(p, x + 0.5 * dt * k1);
        const Vec k3 = lorenz_drift(p, x + 0.5 * dt * k2);
        const Vec k4 = lorenz_drift(p, x + dt * k3);
        x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return x;
}

// x_{t+1} = RK4(x_t; h) + noise_std * zeta_t. Returns x_0 .. x_T (T+1 states).
// t_offset shifts the noise-stream window index so a caller can continue a
// trajectory (e.g. record after a burn-in) without reusing streams.
inline std::vector<StateVector> simulate_lorenz(const LorenzParams& params, const StateVector& x0,
                                                int T, std::uint64_t seed, std::uint32_t t_offset = 0) {
    if (T < 1) throw std::invalid_argument("simulate_lorenz: T must be >= 1");
    std::vector<StateVector> out;
    out.reserve(static_cast<std::size_t>(T) + 1);
    out.push_back(x0);
    Vec x = x0;
    for (int t = 0; t < T; ++t) {
        x = lorenz_rk4_map(params, x, params.h, params.substeps);
        if (params.noise_std > 0) {
            const Vec zeta = gaussian_draw(make_stream(seed, StreamDomain::scenario, 0, t_offset + t, 0), 3);
            x += params.noise_std * zeta;
        }
        if (!all_finite(x) || x.lpNorm<Eigen::Infinity>() > 1e6)
            throw std::runtime_error("simulate_lorenz: trajectory blew up at step " + std::to_string(t) +
                                     " (integration step too large?)");
        out.push_back(x);
    }
    return out;
}

// Linear-Gaussian state space: x_{t+1} = A x_t + Q^{1/2} zeta, y = H x + eps.
struct LinearGaussianSystem {
    Mat A, Q, H;
    Vec gamma;      // observation noise std per component
    Vec init_mean;
    Mat init_cov;
};

// The 1-D benchmark used throughout the oracle tests.
inline LinearGaussianSystem default_linear_benchmark() {
    LinearGaussianSystem s;
    s.A = Mat::Constant(1, 1, 0.9);
    s.Q = Mat::Constant(1, 1, 0.04);
    s.H = Mat::Constant(1, 1, 1.0);
    s.gamma = Vec::Constant(1, 0.05);
    s.init_mean = Vec::Zero(1);
    s.init_cov = Mat::Identity(1, 1);
    return s;
}

inline Mat matrix_sqrt_psd(const Mat& m) {
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (m + m.transpose()));
    Vec ev = es.eigenvalues();
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (ev[i] < -1e-10) throw std::invalid_argument("matrix_sqrt_psd: matrix is not positive semidefinite");
        ev[i] = std::sqrt(std::max(0.0, ev[i]));
    }
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

// A paired (true trajectory, observations) draw: observations[t] is the noisy
// measurement of truth[t+1], so truth has T+1 states and observations has T.
struct Scenario {
    std::vector<StateVector> truth;
    std::vector<Vec> observations;
    std::string system_label;
    std::uint64_t seed = 0;
};

inline Scenario make_scenario(const LinearGaussianSystem& sys, const ObservationModel& obs, int T,
                              std::uint64_t seed) {
    if (T < 1) throw std::invalid_argument("make_scenario: T must be >= 1");
    const int d = static_cast<int>(sys.A.rows());
    const Mat sqrt_q = matrix_sqrt_psd(sys.Q);
    const Mat sqrt_p0 = matrix_sqrt_psd(sys.init_cov);
    Scenario sc;
    sc.system_label = "linear_gaussian";
    sc.seed = seed;
    Vec x = sys.init_mean + sqrt_p0 * gaussian_draw(make_stream(seed, StreamDomain::scenario, 0, 0, 0), d);
    sc.truth.push_back(x);
    for (int t = 0; t < T; ++t) {
        x = sys.A * x + sqrt_q * gaussian_draw(make_stream(seed, StreamDomain::scenario, 0, t + 1, 0), d);
        sc.truth.push_back(x);
        Vec y = obs.operator_fn(x);
        const Vec eps = gaussian_draw(make_stream(seed, StreamDomain::scenario_obs, 0, t, 0), obs.dim_obs);
        for (int j = 0; j < obs.dim_obs; ++j) y[j] += obs.noise_std[j] * eps[j];
        sc.observations.push_back(y);
    }
    return sc;
}

// Lorenz scenario: burn the transient off so recording starts inside the
// attractor's stationary regime, then record T further steps.
inline Scenario make_scenario(const LorenzParams& params, const ObservationModel& obs, int T,
                              std::uint64_t seed, int burn_in = 1000) {
    if (T < 1) throw std::invalid_argument("make_scenario: T must be >= 1");
    if (burn_in < 0) throw std::invalid_argument("make_scenario: burn_in must be >= 0");
    Vec x0(3);
    x0 << 1.0, 1.0, 1.0;
    if (burn_in > 0) {
        const auto warm = simulate_lorenz(params, x0, burn_in, seed, 0);
        x0 = warm.back();
    }
    const auto traj = simulate_lorenz(params, x0, T, seed, static_cast<std::uint32_t>(burn_in));
    Scenario sc;
    sc.system_label = "lorenz63";
    sc.seed = seed;
    sc.truth = traj;
    for (int t = 0; t < T; ++t) {
        Vec y = obs.operator_fn(traj[static_cast<std::size_t>(t) + 1]);
        const Vec eps = gaussian_draw(make_stream(seed, StreamDomain::scenario_obs, 0, t, 0), obs.dim_obs);
        for (int j = 0; j < obs.dim_obs; ++j) y[j] += obs.noise_std[j] * eps[j];
        sc.observations.push_back(y);
    }
    return sc;
}

}  // namespace surge
