#pragma once

// Observation operators with diagonal Gaussian noise: y = A(x) + eps,
// eps ~ N(0, diag(gamma^2)). Supplies the log-likelihood R(x) = log p(y|x)
// and its analytic state-gradient; the gradient sits inside the guided drift,
// so finite differences are reserved for tests.

#include "surge/core.hpp"

#include <functional>
#include <utility>

namespace surge {

struct ObservationModel {
    std::function<Vec(const StateVector&)> operator_fn;           // A(x), R^D -> R^M
    std::function<Mat(const StateVector&)> jacobian_fn;           // J_A(x), M x D
    Vec noise_std;                                                // gamma, per component, > 0
    int dim_obs = 0;

    Mat noise_cov() const {
        Mat r = Mat::Zero(dim_obs, dim_obs);
        for (int j = 0; j < dim_obs; ++j) r(j, j) = noise_std[j] * noise_std[j];
        return r;
    }
};

inline double log_likelihood(const ObservationModel& model, const Vec& y, const StateVector& x) {
    if (y.size() != model.dim_obs) throw std::invalid_argument("log_likelihood: observation dimension mismatch");
    const Vec ax = model.operator_fn(x);
    if (ax.size() != model.dim_obs) throw std::invalid_argument("log_likelihood: operator output dimension mismatch");
    constexpr double half_log_two_pi = 0.91893853320467274178032973640562;
    double acc = 0.0;
    for (int j = 0; j < model.dim_obs; ++j) {
        const double r = (y[j] - ax[j]) / model.noise_std[j];
        acc += -0.5 * r * r - std::log(model.noise_std[j]) - half_log_two_pi;
    }
    return acc;
}

inline StateVector grad_log_likelihood(const ObservationModel& model, const Vec& y, const StateVector& x) {
    if (y.size() != model.dim_obs) throw std::invalid_argument("grad_log_likelihood: observation dimension mismatch");
    const Vec ax = model.operator_fn(x);
    const Mat jac = model.jacobian_fn(x);
    Vec scaled(model.dim_obs);
    for (int j = 0; j < model.dim_obs; ++j)
        scaled[j] = (y[j] - ax[j]) / (model.noise_std[j] * model.noise_std[j]);
    return jac.transpose() * scaled;
}

// Linear operator y = Hx + eps with per-component noise std gamma.
inline ObservationModel make_linear_model(const Mat& H, const Vec& gamma) {
    if (gamma.size() != H.rows()) throw std::invalid_argument("make_linear_model: gamma length must match rows of H");
    for (Eigen::Index j = 0; j < gamma.size(); ++j)
        if (!(gamma[j] > 0)) throw std::invalid_argument("make_linear_model: noise std must be positive");
    ObservationModel m;
    m.operator_fn = [H](const StateVector& x) -> Vec { return H * x; };
    m.jacobian_fn = [H](const StateVector&) -> Mat { return H; };
    m.noise_std = gamma;
    m.dim_obs = static_cast<int>(H.rows());
    return m;
}

inline ObservationModel make_linear_model(double h, double gamma) {
    Mat H(1, 1);
    H(0, 0) = h;
    Vec g(1);
    g[0] = gamma;
    return make_linear_model(H, g);
}

// Scalar observation of coordinate 1 only, through arctan: y = arctan(x_1) + eps.
inline ObservationModel make_arctan_partial_model(double gamma) {
    if (!(gamma > 0)) throw std::invalid_argument("make_arctan_partial_model: gamma must be positive");
    ObservationModel m;
    m.operator_fn = [](const StateVector& x) -> Vec {
        Vec y(1);
        y[0] = std::atan(x[0]);
        return y;
    };
    m.jacobian_fn = [](const StateVector& x) -> Mat {
        Mat j = Mat::Zero(1, x.size());
        j(0, 0) = 1.0 / (1.0 + x[0] * x[0]);
        return j;
    };
    m.noise_std = Vec::Constant(1, gamma);
    m.dim_obs = 1;
    return m;
}

}  // namespace surge
