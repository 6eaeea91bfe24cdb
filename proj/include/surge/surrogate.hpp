#pragma once

// The transition model as a diffusion over internal time s in [0,1]:
// dx_s = v(x_s, s | x_t) ds + Sigma^{1/2}(s) dW_s. The shipped surrogates are
// constant-drift Gaussian bridges whose endpoint law is exactly the desired
// one-step kernel N(m(x_t), Q), which keeps every downstream identity testable
// without a learned drift. An arbitrary drift closure can be plugged in.

#include "surge/systems.hpp"

#include <functional>
#include <utility>

namespace surge {

// Diffusion coefficient Sigma(s), constant in s for the shipped surrogates.
// Held with its symmetric PSD square root so simulation and the path-weight
// exponent share one factorization.
struct VarianceSchedule {
    Mat sigma;
    Mat sigma_sqrt;

    const Mat& at(double /*s*/) const { return sigma; }
    const Mat& sqrt_at(double /*s*/) const { return sigma_sqrt; }
    int dim() const { return static_cast<int>(sigma.rows()); }
};

inline VarianceSchedule make_constant_schedule(const Mat& sigma) {
    VarianceSchedule v;
    v.sigma = 0.5 * (sigma + sigma.transpose());
    v.sigma_sqrt = matrix_sqrt_psd(v.sigma);  // throws if not PSD
    return v;
}

inline VarianceSchedule make_isotropic_schedule(double sigma2, int dim) {
    if (sigma2 < 0) throw std::invalid_argument("make_isotropic_schedule: variance must be >= 0");
    return make_constant_schedule(sigma2 * Mat::Identity(dim, dim));
}

struct TransitionSurrogate {
    int dim = 0;
    // v(x, s | x_cond); must be finite for finite input.
    std::function<Vec(const StateVector& x, double s, const StateVector& x_cond)> drift;
    VarianceSchedule schedule;
    // Set when drift depends only on x_cond. Lets the filters evaluate the
    // drift once per (particle, window) instead of once per internal step,
    // which matters when the mean map integrates an ODE.
    bool constant_drift = false;
};

// Constant-drift bridge from x_t: v = m(x_t) - x_t and Sigma = Q, so after
// unit internal time the endpoint is exactly N(m(x_t), Q) for any step count.
struct GaussianBridgeSurrogate {
    int dim = 0;
    std::function<Vec(const StateVector&)> mean_map;
    Mat endpoint_cov;

    TransitionSurrogate transition() const {
        TransitionSurrogate t;
        t.dim = dim;
        auto m = mean_map;
        t.drift = [m](const StateVector&, double, const StateVector& x_cond) -> Vec {
            return m(x_cond) - x_cond;
        };
        t.schedule = make_constant_schedule(endpoint_cov);
        t.constant_drift = true;
        return t;
    }
};

inline GaussianBridgeSurrogate make_linear_gaussian_surrogate(const Mat& A, const Mat& Q) {
    if (!A.allFinite()) throw std::invalid_argument("make_linear_gaussian_surrogate: A must be finite");
    matrix_sqrt_psd(Q);  // reject non-PSD covariances up front
    GaussianBridgeSurrogate s;
    s.dim = static_cast<int>(A.rows());
    s.mean_map = [A](const StateVector& x) -> Vec { return A * x; };
    s.endpoint_cov = Q;
    return s;
}

// Lorenz-63 one-step kernel: deterministic RK4 flow over the interval h with
// isotropic endpoint noise.
inline GaussianBridgeSurrogate make_lorenz_surrogate(const LorenzParams& params, double h, double noise_std) {
    if (!(h > 0)) throw std::invalid_argument("make_lorenz_surrogate: h must be positive");
    if (noise_std < 0) throw std::invalid_argument("make_lorenz_surrogate: noise_std must be >= 0");
    GaussianBridgeSurrogate s;
    s.dim = 3;
    const LorenzParams p = params;
    s.mean_map = [p, h](const StateVector& x) -> Vec { return lorenz_rk4_map(p, x, h, p.substeps); };
    s.endpoint_cov = noise_std * noise_std * Mat::Identity(3, 3);
    return s;
}

}  // namespace surge
