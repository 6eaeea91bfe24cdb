#pragma once

// Guidance potentials: the state-gradient of a control G(x, s | y) added to
// the transition drift as Sigma * grad_G. The filter's path weights correct
// whatever bias the guidance introduces, so any measurable grad_G is legal;
// the choices here range from none, through the usual likelihood-gradient
// heuristic, to the exact conditioning drift for linear-Gaussian bridges.

#include "surge/observation.hpp"
#include "surge/surrogate.hpp"

#include <functional>
#include <string>

namespace surge {

struct GuidancePotential {
    std::string label;
    // grad_G(x, s, y, x_cond). The conditioning state rides along because the
    // shipped potentials predict the endpoint through the remaining drift,
    // which is itself conditioned on x_cond.
    std::function<Vec(const StateVector& x, double s, const Vec& y, const StateVector& x_cond)> grad_G;
};

inline GuidancePotential zero_guidance() {
    GuidancePotential g;
    g.label = "zero";
    g.grad_G = [](const StateVector& x, double, const Vec&, const StateVector&) -> Vec {
        return Vec::Zero(x.size());
    };
    return g;
}

// lambda * d(x_hat1)/dx^T grad log p(y | x_hat1), with the endpoint predicted
// by the remaining deterministic drift: x_hat1 = x + v(x, s | x_cond)(1 - s).
// For constant-drift bridges the predictor's Jacobian is the identity, which
// is what this implements; the factor is exact for every shipped surrogate.
inline GuidancePotential likelihood_gradient_guidance(const ObservationModel& model,
                                                      const TransitionSurrogate& surrogate,
                                                      double lambda) {
    if (lambda < 0) throw std::invalid_argument("likelihood_gradient_guidance: lambda must be >= 0");
    GuidancePotential g;
    g.label = "likelihood_gradient";
    auto drift = surrogate.drift;
    g.grad_G = [model, drift, lambda](const StateVector& x, double s, const Vec& y,
                                      const StateVector& x_cond) -> Vec {
        if (lambda == 0.0) return Vec::Zero(x.size());
        const Vec x_hat1 = x + drift(x, s, x_cond) * (1.0 - s);
        return lambda * grad_log_likelihood(model, y, x_hat1);
    };
    return g;
}

// log E[p(y | X_1) | X_s = x] under the constant-drift bridge with drift
// v = A x_cond - x_cond and Sigma = Q: the remaining motion is Gaussian, so
// the smoothed likelihood is N(y; H(x + v(1-s)), H Q (1-s) H^T + R_cov).
inline double conditional_log_likelihood(const Mat& A, const Mat& Q, const Mat& H, const Mat& R_cov,
                                         const StateVector& x, double s, const Vec& y,
                                         const StateVector& x_cond) {
    const Vec v = A * x_cond - x_cond;
    const Vec mean = H * (x + v * (1.0 - s));
    const Mat S = H * (Q * (1.0 - s)) * H.transpose() + R_cov;
    Eigen::LDLT<Mat> ldlt(S);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
        throw std::runtime_error("conditional_log_likelihood: singular innovation covariance");
    const Vec r = y - mean;
    const double quad = r.dot(ldlt.solve(r));
    double log_det = 0.0;
    for (Eigen::Index i = 0; i < S.rows(); ++i) log_det += std::log(ldlt.vectorD()[i]);
    constexpr double log_two_pi = 1.8378770664093454835606594728112;
    return -0.5 * (quad + log_det + S.rows() * log_two_pi);
}

// Exact conditioning drift for the linear-Gaussian bridge (the gradient of
// the smoothed log-likelihood above):
//   grad_G(x, s) = H^T (H Q (1-s) H^T + R_cov)^{-1} (y - H(x + v(1-s))).
// At s -> 1 this collapses to H^T R_cov^{-1} (y - Hx) = grad log p(y|x).
inline GuidancePotential exact_doob_guidance(const Mat& A, const Mat& Q, const Mat& H, const Mat& R_cov) {
    GuidancePotential g;
    g.label = "exact_doob";
    g.grad_G = [A, Q, H, R_cov](const StateVector& x, double s, const Vec& y,
                                const StateVector& x_cond) -> Vec {
        const Vec v = A * x_cond - x_cond;
        const Mat S = H * (Q * (1.0 - s)) * H.transpose() + R_cov;
        Eigen::LDLT<Mat> ldlt(S);
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
            throw std::runtime_error("exact_doob_guidance: singular innovation covariance");
        const Vec r = y - H * (x + v * (1.0 - s));
        return H.transpose() * ldlt.solve(r);
    };
    return g;
}

}  // namespace surge
