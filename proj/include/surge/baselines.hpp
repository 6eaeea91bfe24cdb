#pragma once

// Reference methods: the exact Kalman filter (oracle for linear-Gaussian
// systems), a bootstrap particle filter whose transition draws reuse the same
// K-step bridge simulation and noise streams as the main filter (so the
// zero-guidance reduction is exact, stream for stream), and a stochastic
// (perturbed-observation) ensemble Kalman filter.

#include "surge/filter.hpp"

#include <vector>

namespace surge {

struct KalmanState {
    StateVector mean;
    Mat cov;
};

struct KalmanOutput {
    std::vector<KalmanState> states;      // posterior after each observation
    std::vector<double> step_loglik;      // log p(y_t | y_{1..t-1}), innovation form
};

namespace detail {

// Symmetrize and clamp a nearly-PSD covariance; eigenvalues below -1e-10 are
// treated as genuine failures.
inline Mat repair_cov(const Mat& p) {
    const Mat sym = 0.5 * (p + p.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es(sym);
    Vec ev = es.eigenvalues();
    if (ev.minCoeff() < -1e-10) throw std::runtime_error("covariance lost positive semidefiniteness");
    for (Eigen::Index i = 0; i < ev.size(); ++i) ev[i] = std::max(0.0, ev[i]);
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace detail

inline KalmanOutput kalman_filter(const Mat& A, const Mat& Q, const Mat& H, const Mat& R_cov,
                                  const std::vector<Vec>& observations, const KalmanState& init) {
    const auto d = A.rows();
    if (A.cols() != d || Q.rows() != d || H.cols() != d || init.mean.size() != d)
        throw std::invalid_argument("kalman_filter: inconsistent dimensions");
    constexpr double log_two_pi = 1.8378770664093454835606594728112;
    KalmanOutput out;
    Vec m = init.mean;
    Mat p = init.cov;
    for (const auto& y : observations) {
        const Vec m_pred = A * m;
        const Mat p_pred = detail::repair_cov(A * p * A.transpose() + Q);
        const Mat S = H * p_pred * H.transpose() + R_cov;
        Eigen::LDLT<Mat> ldlt(S);
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
            throw std::runtime_error("kalman_filter: singular innovation covariance");
        const Vec r = y - H * m_pred;
        const Mat gain = ldlt.solve(H * p_pred).transpose();  // P H^T S^{-1}
        m = m_pred + gain * r;
        const Mat ikh = Mat::Identity(d, d) - gain * H;
        p = detail::repair_cov(ikh * p_pred * ikh.transpose() + gain * R_cov * gain.transpose());
        double log_det = 0.0;
        for (Eigen::Index i = 0; i < S.rows(); ++i) log_det += std::log(ldlt.vectorD()[i]);
        out.step_loglik.push_back(-0.5 * (r.dot(ldlt.solve(r)) + log_det + S.rows() * log_two_pi));
        out.states.push_back({m, p});
    }
    return out;
}

// Bootstrap particle filter. Transition endpoints are drawn by simulating the
// same K-step unguided bridge with the same (particle, t, k) noise streams the
// main filter would use, and the window-end resampling draw uses the same
// (t, K-1) stream, so a zero-guidance run of the main filter is reproduced
// draw for draw.
inline FilterOutput bootstrap_pf(const TransitionSurrogate& surrogate, int K, const ObservationModel& model,
                                 const std::vector<Vec>& observations, const Ensemble& init,
                                 const ResamplingConfig& resampling, std::uint64_t seed, int threads = 1) {
    if (K < 1) throw std::invalid_argument("bootstrap_pf: K must be >= 1");
    if (init.size() < 1) throw std::invalid_argument("bootstrap_pf: empty ensemble");
    validate(resampling);
    const int N = init.size();
    const int T = static_cast<int>(observations.size());
    const auto guidance = zero_guidance();
    const double ds = 1.0 / K;

    std::vector<StateVector> xs = init.particles;
    Vec log_w = init.log_weights;
    log_w.array() -= log_sum_exp(log_w);
    double log_z_acc = 0.0;
    Vec step_ll = Vec::Zero(N);

    FilterOutput out;
    for (int t = 0; t < T; ++t) {
        const Vec& y = observations[static_cast<std::size_t>(t)];
        parallel_for(N, threads, [&](int lo, int hi) {
            for (int i = lo; i < hi; ++i) {
                StateVector x = xs[static_cast<std::size_t>(i)];
                const StateVector cond = x;
                Vec drift;
                if (surrogate.constant_drift) drift = surrogate.drift(x, 0.0, cond);
                const Vec* drift_ptr = surrogate.constant_drift ? &drift : nullptr;
                for (int k = 0; k < K; ++k) {
                    const auto rng = make_stream(seed, StreamDomain::noise, static_cast<std::uint32_t>(i),
                                                 static_cast<std::uint32_t>(t), static_cast<std::uint32_t>(k));
                    x = em_step(surrogate, guidance, x, cond, y, k * ds, ds, rng, drift_ptr).x_after;
                }
                xs[static_cast<std::size_t>(i)] = std::move(x);
                step_ll[i] = log_likelihood(model, y, xs[static_cast<std::size_t>(i)]);
            }
        });
        log_w += step_ll;

        Vec w;
        double lz = 0.0;
        try {
            std::tie(w, lz) = normalize_log_weights(log_w);
        } catch (const std::runtime_error&) {
            throw std::runtime_error("total weight collapse at t=" + std::to_string(t) +
                                     ", k=" + std::to_string(K - 1));
        }
        const double ess = effective_sample_size(w);

        Ensemble snap;
        snap.particles = xs;
        snap.log_weights = (log_w.array() - lz).matrix();
        Vec mean = Vec::Zero(surrogate.dim);
        for (int i = 0; i < N; ++i) mean += w[i] * xs[static_cast<std::size_t>(i)];
        out.posteriors.push_back(std::move(snap));
        out.posterior_means.push_back(std::move(mean));
        out.log_normalizers.push_back(log_z_acc + lz);

        const bool do_resample = ess < resampling.threshold_fraction * N;
        out.ess_trace.push_back({t, K - 1, ess, do_resample});
        if (do_resample) {
            const auto idx = resample_indices(w, resampling.scheme,
                                              make_stream(seed, StreamDomain::resample, 0,
                                                          static_cast<std::uint32_t>(t),
                                                          static_cast<std::uint32_t>(K - 1)));
            std::vector<StateVector> new_xs(xs.size());
            for (int i = 0; i < N; ++i)
                new_xs[static_cast<std::size_t>(i)] = xs[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])];
            xs.swap(new_xs);
            log_z_acc += lz;
            log_w.setConstant(-std::log(static_cast<double>(N)));
        }
    }
    return out;
}

// Stochastic EnKF with perturbed observations. Forecasts are exact draws from
// the bridge's endpoint kernel; the analysis step linearizes the observation
// operator at the forecast mean (exact for linear operators, a documented
// approximation for arctan).
inline FilterOutput enkf(const GaussianBridgeSurrogate& surrogate, const ObservationModel& model,
                         const std::vector<Vec>& observations, const Ensemble& init, std::uint64_t seed) {
    const int N = init.size();
    if (N < 2) throw std::invalid_argument("enkf: need at least 2 particles for a sample covariance");
    const int d = surrogate.dim;
    const Mat sqrt_q = matrix_sqrt_psd(surrogate.endpoint_cov);
    const Mat r_cov = model.noise_cov();

    std::vector<StateVector> xs = init.particles;
    FilterOutput out;
    for (int t = 0; t < static_cast<int>(observations.size()); ++t) {
        const Vec& y = observations[static_cast<std::size_t>(t)];
        Vec mean = Vec::Zero(d);
        for (int i = 0; i < N; ++i) {
            const auto rng = make_stream(seed, StreamDomain::noise, static_cast<std::uint32_t>(i),
                                         static_cast<std::uint32_t>(t), 0);
            xs[static_cast<std::size_t>(i)] =
                surrogate.mean_map(xs[static_cast<std::size_t>(i)]) + sqrt_q * gaussian_draw(rng, d);
            mean += xs[static_cast<std::size_t>(i)];
        }
        mean /= N;

        Mat p = Mat::Zero(d, d);
        for (int i = 0; i < N; ++i) {
            const Vec c = xs[static_cast<std::size_t>(i)] - mean;
            p += c * c.transpose();
        }
        p /= (N - 1);

        const Mat h_lin = model.jacobian_fn(mean);
        const Mat S = h_lin * p * h_lin.transpose() + r_cov;
        Eigen::LDLT<Mat> ldlt(S);
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
            throw std::runtime_error("enkf: singular innovation covariance");
        const Mat gain = ldlt.solve(h_lin * p).transpose();  // P H^T S^{-1}

        Vec post_mean = Vec::Zero(d);
        for (int i = 0; i < N; ++i) {
            const auto rng = make_stream(seed, StreamDomain::perturb_obs, static_cast<std::uint32_t>(i),
                                         static_cast<std::uint32_t>(t), 0);
            Vec y_pert = y;
            const Vec eta = gaussian_draw(rng, model.dim_obs);
            for (int j = 0; j < model.dim_obs; ++j) y_pert[j] += model.noise_std[j] * eta[j];
            auto& x = xs[static_cast<std::size_t>(i)];
            x += gain * (y_pert - model.operator_fn(x));
            post_mean += x;
        }
        post_mean /= N;

        Ensemble snap;
        snap.particles = xs;
        snap.log_weights = Vec::Constant(N, -std::log(static_cast<double>(N)));
        out.posteriors.push_back(std::move(snap));
        out.posterior_means.push_back(post_mean);
        out.log_normalizers.push_back(std::numeric_limits<double>::quiet_NaN());
        out.ess_trace.push_back({t, 0, static_cast<double>(N), false});
    }
    return out;
}

}  // namespace surge
