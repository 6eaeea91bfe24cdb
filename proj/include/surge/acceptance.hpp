#pragma once

// The acceptance suite: eleven end-to-end checks with pinned tolerances and
// wall-clock accounting. Each returns a one-line verdict; the dedicated test
// binary asserts all of them and `compare --suite acceptance` prints them.
// Identity checks (1-3, 7, 10, 11) use exact or oracle comparisons; the
// statistical checks (4, 5, 8, 9) use fixed seed sets and Student-t bounds
// whose critical values are pinned below.

#include "surge/experiment.hpp"

#include <array>
#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <iterator>
#include <random>

namespace surge {

struct CriterionResult {
    int id = 0;
    std::string name;
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
};

// Seed sets for the statistical criteria. Fixed so reruns are comparable;
// the oracle-match set doubles as the bias-correction set.
inline constexpr std::array<std::uint64_t, 20> kOracleSeeds = {101, 102, 103, 104, 105, 106, 107,
                                                               108, 109, 110, 111, 112, 113, 114,
                                                               115, 116, 117, 118, 119, 120};
inline constexpr std::array<std::uint64_t, 10> kDoobSeeds = {501, 502, 503, 504, 505,
                                                             506, 507, 508, 509, 510};
inline constexpr std::array<std::uint64_t, 20> kVarianceSeeds = {301, 302, 303, 304, 305, 306, 307,
                                                                 308, 309, 310, 311, 312, 313, 314,
                                                                 315, 316, 317, 318, 319, 320};
inline constexpr std::array<std::uint64_t, 20> kLorenzSeeds = {401, 402, 403, 404, 405, 406, 407,
                                                               408, 409, 410, 411, 412, 413, 414,
                                                               415, 416, 417, 418, 419, 420};

// Student t, 19 degrees of freedom, one-sided 95%.
inline constexpr double kOneSided95T19 = 1.729132811521367;

namespace detail {

class Stopwatch {
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();

  public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }
};

inline double vec_mean(const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x;
    return acc / static_cast<double>(v.size());
}

inline double vec_sample_std(const std::vector<double>& v) {
    const double m = vec_mean(v);
    double acc = 0.0;
    for (double x : v) acc += (x - m) * (x - m);
    return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

inline std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline Ensemble prior_ensemble_linear(const LinearGaussianSystem& lin, int n, std::uint64_t seed) {
    Ensemble ens;
    const Mat sqrt_p0 = matrix_sqrt_psd(lin.init_cov);
    const int d = static_cast<int>(lin.A.rows());
    ens.particles.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        ens.particles.push_back(
            lin.init_mean + sqrt_p0 * gaussian_draw(make_stream(seed, StreamDomain::init,
                                                                static_cast<std::uint32_t>(i), 0, 0),
                                                    d));
    ens.log_weights = Vec::Constant(n, -std::log(static_cast<double>(n)));
    return ens;
}

inline Ensemble point_ensemble(const StateVector& x, int n) {
    Ensemble ens;
    ens.particles.assign(static_cast<std::size_t>(n), x);
    ens.log_weights = Vec::Constant(n, -std::log(static_cast<double>(n)));
    return ens;
}

inline Ensemble lorenz_init_ensemble(const StateVector& x0, double noise_std, int n, std::uint64_t seed) {
    Ensemble ens;
    ens.particles.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        ens.particles.push_back(x0 + noise_std * gaussian_draw(make_stream(seed, StreamDomain::init,
                                                                           static_cast<std::uint32_t>(i), 0, 0),
                                                               3));
    ens.log_weights = Vec::Constant(n, -std::log(static_cast<double>(n)));
    return ens;
}

// Random-path generator shared by the two exact weight identities: a fresh
// 2-D linear-Gaussian surrogate, a random affine guidance drift, and one
// guided window of K steps per case, with K cycling through {1, 2, 7, 64}.
template <typename Callback>
inline void for_each_random_path(int n_paths, Callback&& cb) {
    std::mt19937_64 gen(20250901ULL);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unif(0.3, 1.0);
    const int ks[4] = {1, 2, 7, 64};
    for (int p = 0; p < n_paths; ++p) {
        const int K = ks[p % 4];
        const int d = 2;
        Mat A(d, d), C(d, d), q_root(d, d);
        Mat H(1, d);
        for (int i = 0; i < d; ++i) {
            H(0, i) = normal(gen);
            for (int j = 0; j < d; ++j) {
                A(i, j) = 0.5 * normal(gen);
                C(i, j) = 0.5 * normal(gen);
                q_root(i, j) = 0.3 * normal(gen);
            }
        }
        const Mat Q = q_root * q_root.transpose() + 0.05 * Mat::Identity(d, d);
        const auto model = make_linear_model(H, Vec::Constant(1, unif(gen)));
        const auto surrogate = make_linear_gaussian_surrogate(A, Q).transition();

        GuidancePotential guidance;
        guidance.label = "random_affine";
        Vec b(d);
        b << normal(gen), normal(gen);
        guidance.grad_G = [b, C](const StateVector& x, double, const Vec&, const StateVector&) -> Vec {
            return b + C * x;
        };

        Vec x0(d);
        x0 << normal(gen), normal(gen);
        const Vec y = Vec::Constant(1, normal(gen));
        const auto paths = propagate_window(surrogate, guidance, {x0}, {x0}, y, K,
                                            /*seed=*/977000 + static_cast<std::uint64_t>(p),
                                            static_cast<std::uint32_t>(p), 1);
        cb(surrogate, model, y, paths.front());
    }
}

// Per-(seed, t) difference between a filter-run posterior mean and the exact
// Kalman mean on the 1-D benchmark. Optionally reports the per-(seed, t)
// ensemble standard deviation (for z-scores of the unweighted arm).
inline std::vector<std::vector<double>> oracle_mean_diffs(double lambda, bool unweighted,
                                                          const std::uint64_t* seeds, int n_seeds, int N,
                                                          int K, int T,
                                                          std::vector<std::vector<double>>* ens_stds) {
    const auto lin = default_linear_benchmark();
    const auto model = make_linear_model(lin.H, lin.gamma);
    const auto surrogate = make_linear_gaussian_surrogate(lin.A, lin.Q).transition();
    std::vector<std::vector<double>> diffs(static_cast<std::size_t>(n_seeds),
                                           std::vector<double>(static_cast<std::size_t>(T)));
    if (ens_stds)
        ens_stds->assign(static_cast<std::size_t>(n_seeds), std::vector<double>(static_cast<std::size_t>(T)));
    for (int si = 0; si < n_seeds; ++si) {
        const std::uint64_t seed = seeds[si];
        const auto scenario = make_scenario(lin, model, T, seed);
        const auto kal = kalman_filter(lin.A, lin.Q, lin.H, model.noise_cov(), scenario.observations,
                                       {lin.init_mean, lin.init_cov});
        FilterConfig fc;
        fc.N = N;
        fc.K = K;
        fc.resampling = {ResampleScheme::systematic, 0.5};
        fc.guidance = likelihood_gradient_guidance(model, surrogate, lambda);
        fc.resample_every_k = true;
        fc.unweighted = unweighted;
        fc.seed = seed;
        const auto init = prior_ensemble_linear(lin, N, seed);
        const auto out = surge_filter(surrogate, model, scenario.observations, init, fc);
        for (int t = 0; t < T; ++t) {
            diffs[static_cast<std::size_t>(si)][static_cast<std::size_t>(t)] =
                out.posterior_means[static_cast<std::size_t>(t)][0] -
                kal.states[static_cast<std::size_t>(t)].mean[0];
            if (ens_stds) {
                const auto& ens = out.posteriors[static_cast<std::size_t>(t)];
                const double m = out.posterior_means[static_cast<std::size_t>(t)][0];
                double acc = 0.0;
                for (int i = 0; i < N; ++i) {
                    const double c = ens.particles[static_cast<std::size_t>(i)][0] - m;
                    acc += c * c;
                }
                (*ens_stds)[static_cast<std::size_t>(si)][static_cast<std::size_t>(t)] =
                    std::sqrt(acc / (N - 1));
            }
        }
    }
    return diffs;
}

inline std::string printf_str(const char* fmt, ...) __attribute__((format(printf, 1, 2)));
inline std::string printf_str(const char* fmt, ...) {
    char buf[512];
    va_list args;
    va_start(args, fmt);
    std::vsnprintf(buf, sizeof buf, fmt, args);
    va_end(args);
    return buf;
}

}  // namespace detail

// 1. Accumulated reward prefactor terms telescope to the terminal
//    log-likelihood exactly (to roundoff) on any path, any guidance.
inline CriterionResult run_criterion_telescoping() {
    detail::Stopwatch sw;
    CriterionResult r{1, "reward increments telescope to the terminal log-likelihood", false, "", 0.0};
    double worst = 0.0;
    detail::for_each_random_path(200, [&](const TransitionSurrogate& surrogate, const ObservationModel& model,
                                          const Vec& y, const std::vector<PathStepRecord>& path) {
        double reward_sum = 0.0;
        for (const auto& rec : path)
            reward_sum += incremental_log_weight_parts(rec, model, y, surrogate.schedule).reward_part;
        const double r1 = log_likelihood(model, y, path.back().x_after);
        worst = std::max(worst, std::abs(reward_sum - r1) / std::max(1.0, std::abs(r1)));
    });
    r.pass = worst <= 1e-12;
    r.detail = detail::printf_str("max relative error %.3g over 200 random paths, K in {1,2,7,64} (tol 1e-12)",
                                  worst);
    r.seconds = sw.seconds();
    return r;
}

// 2. The whole-window log-weight equals the sum of the incremental ones.
inline CriterionResult run_criterion_weight_equality() {
    detail::Stopwatch sw;
    CriterionResult r{2, "whole-window log-weight equals the incremental sum", false, "", 0.0};
    double worst = 0.0;
    detail::for_each_random_path(200, [&](const TransitionSurrogate& surrogate, const ObservationModel& model,
                                          const Vec& y, const std::vector<PathStepRecord>& path) {
        double inc_sum = 0.0;
        for (const auto& rec : path) inc_sum += incremental_log_weight(rec, model, y, surrogate.schedule);
        const double whole = whole_step_log_weight(path, model, y, surrogate.schedule);
        worst = std::max(worst, std::abs(inc_sum - whole) / std::max(1.0, std::abs(whole)));
    });
    r.pass = worst <= 1e-12;
    r.detail = detail::printf_str("max relative error %.3g over 200 random paths (tol 1e-12)", worst);
    r.seconds = sw.seconds();
    return r;
}

// 3. With zero guidance and window-end resampling only, the filter reproduces
//    a bootstrap particle filter draw for draw.
inline CriterionResult run_criterion_bootstrap_reduction() {
    detail::Stopwatch sw;
    CriterionResult r{3, "zero guidance reduces to the bootstrap filter", false, "", 0.0};
    const auto lin = default_linear_benchmark();
    const auto model = make_linear_model(lin.H, lin.gamma);
    const auto surrogate = make_linear_gaussian_surrogate(lin.A, lin.Q).transition();
    const std::uint64_t seed = 424242;
    const int N = 64, K = 16, T = 10;
    const auto scenario = make_scenario(lin, model, T, seed);
    const auto init = detail::prior_ensemble_linear(lin, N, seed);
    const ResamplingConfig rc{ResampleScheme::systematic, 0.5};

    FilterConfig fc;
    fc.N = N;
    fc.K = K;
    fc.resampling = rc;
    fc.guidance = likelihood_gradient_guidance(model, surrogate, 0.0);
    fc.resample_every_k = false;
    fc.seed = seed;
    const auto a = surge_filter(surrogate, model, scenario.observations, init, fc);
    const auto b = bootstrap_pf(surrogate, K, model, scenario.observations, init, rc, seed);

    double worst_w = 0.0, worst_x = 0.0;
    for (int t = 0; t < T; ++t) {
        const auto& ea = a.posteriors[static_cast<std::size_t>(t)];
        const auto& eb = b.posteriors[static_cast<std::size_t>(t)];
        for (int i = 0; i < N; ++i) {
            worst_w = std::max(worst_w, std::abs(std::exp(ea.log_weights[i]) - std::exp(eb.log_weights[i])));
            worst_x = std::max(worst_x, (ea.particles[static_cast<std::size_t>(i)] -
                                         eb.particles[static_cast<std::size_t>(i)])
                                            .lpNorm<Eigen::Infinity>());
        }
    }
    r.pass = worst_w <= 1e-12 && worst_x == 0.0;
    r.detail = detail::printf_str(
        "max normalized-weight difference %.3g (tol 1e-12), max particle difference %.3g (exact), T=%d N=%d",
        worst_w, worst_x, T, N);
    r.seconds = sw.seconds();
    return r;
}

// 4. Weighted posterior means match the exact Kalman filter within 3 standard
//    errors of the seed-averaged difference, at every (lambda, t) cell.
inline CriterionResult run_criterion_oracle_match() {
    detail::Stopwatch sw;
    CriterionResult r{4, "posterior means match the exact filter for every guidance strength", false, "", 0.0};
    const double lambdas[4] = {0.0, 0.5, 1.0, 2.0};
    const int T = 20;
    const int n_seeds = static_cast<int>(kOracleSeeds.size());
    double worst = 0.0, worst_lambda = 0.0;
    int worst_t = -1;
    for (const double lam : lambdas) {
        const auto diffs = detail::oracle_mean_diffs(lam, false, kOracleSeeds.data(), n_seeds, 512, 32, T, nullptr);
        for (int t = 0; t < T; ++t) {
            std::vector<double> d(static_cast<std::size_t>(n_seeds));
            for (int si = 0; si < n_seeds; ++si)
                d[static_cast<std::size_t>(si)] = diffs[static_cast<std::size_t>(si)][static_cast<std::size_t>(t)];
            const double se = detail::vec_sample_std(d) / std::sqrt(static_cast<double>(n_seeds));
            const double tstat = std::abs(detail::vec_mean(d)) / se;
            if (tstat > worst) {
                worst = tstat;
                worst_lambda = lam;
                worst_t = t;
            }
        }
    }
    r.pass = worst <= 3.0;
    r.detail = detail::printf_str(
        "max |mean diff|/SE = %.2f at lambda=%g, t=%d over 80 cells (20 seeds each; bound 3)", worst,
        worst_lambda, worst_t);
    r.seconds = sw.seconds();
    return r;
}

// 5. At strong guidance the unweighted ensemble is measurably biased while
//    the weighted one still matches the oracle.
inline CriterionResult run_criterion_bias_correction() {
    detail::Stopwatch sw;
    CriterionResult r{5, "path weights remove the guidance bias", false, "", 0.0};
    const int T = 20, N = 512;
    const int n_seeds = static_cast<int>(kOracleSeeds.size());

    std::vector<std::vector<double>> stds;
    const auto diffs_unw =
        detail::oracle_mean_diffs(2.0, true, kOracleSeeds.data(), n_seeds, N, 32, T, &stds);
    double min_z = std::numeric_limits<double>::infinity();
    for (int si = 0; si < n_seeds; ++si) {
        double zmax = 0.0;
        for (int t = 0; t < T; ++t) {
            const double se = stds[static_cast<std::size_t>(si)][static_cast<std::size_t>(t)] /
                              std::sqrt(static_cast<double>(N));
            zmax = std::max(zmax, std::abs(diffs_unw[static_cast<std::size_t>(si)][static_cast<std::size_t>(t)]) / se);
        }
        min_z = std::min(min_z, zmax);
    }

    const auto diffs_w = detail::oracle_mean_diffs(2.0, false, kOracleSeeds.data(), n_seeds, N, 32, T, nullptr);
    double worst_t = 0.0;
    for (int t = 0; t < T; ++t) {
        std::vector<double> d(static_cast<std::size_t>(n_seeds));
        for (int si = 0; si < n_seeds; ++si)
            d[static_cast<std::size_t>(si)] = diffs_w[static_cast<std::size_t>(si)][static_cast<std::size_t>(t)];
        const double se = detail::vec_sample_std(d) / std::sqrt(static_cast<double>(n_seeds));
        worst_t = std::max(worst_t, std::abs(detail::vec_mean(d)) / se);
    }

    r.pass = min_z > 5.0 && worst_t <= 3.0;
    r.detail = detail::printf_str(
        "unweighted deviation: every seed reaches |z| >= %.1f (need > 5); weighted max |t| = %.2f (bound 3)",
        min_z, worst_t);
    r.seconds = sw.seconds();
    return r;
}

// 6. Near-exact guidance keeps the window-end effective sample size high. The
//    guided Euler-Maruyama chain is not the exact discrete-time conditioning
//    of the unguided one, so some weight spread of order 1/sqrt(K) remains;
//    with the pinned K=256 the measured ESS sits just below the 0.99 N bar,
//    and this criterion reports that honestly rather than loosening the bar.
inline CriterionResult run_criterion_doob_ess() {
    detail::Stopwatch sw;
    CriterionResult r{6, "near-exact guidance keeps window ESS above 0.99 N", false, "", 0.0};
    const auto lin = default_linear_benchmark();
    const auto model = make_linear_model(lin.H, lin.gamma);
    const auto surrogate = make_linear_gaussian_surrogate(lin.A, lin.Q).transition();
    const int N = 64, K = 256;
    double min_frac = std::numeric_limits<double>::infinity(), sum_frac = 0.0;
    for (const std::uint64_t seed : kDoobSeeds) {
        const auto scenario = make_scenario(lin, model, 1, seed);
        const auto init = detail::point_ensemble(scenario.truth.front(), N);
        FilterConfig fc;
        fc.N = N;
        fc.K = K;
        fc.resampling = {ResampleScheme::systematic, 0.5};
        fc.guidance = exact_doob_guidance(lin.A, lin.Q, lin.H, model.noise_cov());
        fc.resample_every_k = false;
        fc.seed = seed;
        const auto out = surge_filter(surrogate, model, scenario.observations, init, fc);
        const double frac = out.ess_trace.back().ess / N;
        min_frac = std::min(min_frac, frac);
        sum_frac += frac;
    }
    const double mean_frac = sum_frac / static_cast<double>(kDoobSeeds.size());
    r.pass = min_frac >= 0.99;
    r.detail = detail::printf_str(
        "window-end ESS/N min %.4f, mean %.4f over 10 windows (need >= 0.99); the Euler-Maruyama "
        "discretization of the guided chain leaves O(K^-1/2) weight spread at K=%d",
        min_frac, mean_frac, K);
    r.seconds = sw.seconds();
    return r;
}

// 7. Both resampling schemes preserve weighted expectations: the mean of the
//    uniform post-resampling estimator over many draws matches the weighted
//    estimate within Monte Carlo error.
inline CriterionResult run_criterion_resampling_unbiased() {
    detail::Stopwatch sw;
    CriterionResult r{7, "resampling preserves weighted expectations", false, "", 0.0};
    const std::vector<double> xs = {-2.0, -0.5, 0.1, 1.3, 2.7};
    Vec w(5);
    w << 0.35, 0.1, 0.05, 0.3, 0.2;
    double target = 0.0;
    for (int i = 0; i < 5; ++i) target += w[i] * xs[static_cast<std::size_t>(i)];

    const int draws = 100000;
    double z_multinomial = 0.0, z_systematic = 0.0;
    for (const auto scheme : {ResampleScheme::multinomial, ResampleScheme::systematic}) {
        std::vector<double> vals(static_cast<std::size_t>(draws));
        for (int d = 0; d < draws; ++d) {
            const auto idx = resample_indices(
                w, scheme, make_stream(7777, StreamDomain::resample, 0, static_cast<std::uint32_t>(d), 0));
            double acc = 0.0;
            for (const int j : idx) acc += xs[static_cast<std::size_t>(j)];
            vals[static_cast<std::size_t>(d)] = acc / 5.0;
        }
        const double se = detail::vec_sample_std(vals) / std::sqrt(static_cast<double>(draws));
        const double z = std::abs(detail::vec_mean(vals) - target) / se;
        (scheme == ResampleScheme::multinomial ? z_multinomial : z_systematic) = z;
    }
    r.pass = z_multinomial <= 4.0 && z_systematic <= 5.0;
    r.detail = detail::printf_str(
        "multinomial error %.2f SE (bound 4), systematic error %.2f SE (bound 5), 1e5 draws", z_multinomial,
        z_systematic);
    r.seconds = sw.seconds();
    return r;
}

// 8. Spreading the likelihood over internal steps (with per-step resampling)
//    keeps window-end weight variance at or below the whole-window variant.
inline CriterionResult run_criterion_incremental_variance() {
    detail::Stopwatch sw;
    CriterionResult r{8, "gradual likelihood incorporation lowers weight variance", false, "", 0.0};
    const LorenzParams lor;
    const auto model = make_arctan_partial_model(0.05);
    const auto surrogate = make_lorenz_surrogate(lor, lor.h, lor.noise_std).transition();
    const int N = 64, K = 64, T = 5;
    double var_inc = 0.0, var_whole = 0.0;
    int cells = 0;
    for (const std::uint64_t seed : kVarianceSeeds) {
        const auto scenario = make_scenario(lor, model, T, seed);
        const auto init = detail::lorenz_init_ensemble(scenario.truth.front(), lor.noise_std, N, seed);
        for (const bool incremental : {true, false}) {
            FilterConfig fc;
            fc.N = N;
            fc.K = K;
            fc.resampling = {ResampleScheme::systematic, 0.75};
            fc.guidance = likelihood_gradient_guidance(model, surrogate, 1.0);
            fc.mode = incremental ? FilterMode::incremental : FilterMode::whole_step;
            fc.resample_every_k = incremental;
            fc.seed = seed;
            const auto out = surge_filter(surrogate, model, scenario.observations, init, fc);
            for (int t = 0; t < T; ++t) {
                const auto& lw = out.posteriors[static_cast<std::size_t>(t)].log_weights;
                const double m = lw.mean();
                const double var = (lw.array() - m).square().sum() / (N - 1);
                (incremental ? var_inc : var_whole) += var;
            }
        }
        cells += T;
    }
    var_inc /= cells;
    var_whole /= cells;
    r.pass = var_inc <= var_whole;
    r.detail = detail::printf_str(
        "mean log-weight variance: incremental %.4g vs whole-step %.4g (ratio %.3g) over %d windows", var_inc,
        var_whole, var_inc / var_whole, cells);
    r.seconds = sw.seconds();
    return r;
}

// 9. On the chaotic benchmark with a tight partial observation, the guided
//    weighted filter must not lose to the bootstrap filter at the same small
//    particle count. Both filters share the exact transition model here, so
//    the guided proposal buys variance reduction at sharp-observation events
//    but carries its own weight-correction noise; the honest expectation is a
//    paired RMSE difference of zero up to Monte Carlo noise, not a strict
//    win. The gate is the one-sided paired t-test at 95%: the criterion fails
//    exactly when the bootstrap filter is significantly better, which is what
//    a sign error in the guidance or a broken path-weight correction would
//    produce (and what overly aggressive guidance does produce).
inline CriterionResult run_criterion_lorenz_ordering() {
    detail::Stopwatch sw;
    CriterionResult r{9, "guided filter matches or beats bootstrap on the chaotic benchmark", false, "", 0.0};
    LorenzParams lor;
    lor.noise_std = 0.25;  // forcing used when generating the chaotic benchmark trajectories
    const auto model = make_arctan_partial_model(0.05);
    const auto surrogate = make_lorenz_surrogate(lor, lor.h, lor.noise_std).transition();
    const int N = 20, K = 600, T = 15;
    // Half-strength guidance: the arctan observation saturates away from the
    // origin, so the full likelihood gradient over-steers exactly where the
    // observation is sharpest and the correction noise swamps the gain.
    const double lambda = 0.5;
    std::vector<double> diffs;
    double rmse_surge_sum = 0.0, rmse_bpf_sum = 0.0;
    for (const std::uint64_t seed : kLorenzSeeds) {
        const auto scenario = make_scenario(lor, model, T, seed);
        const std::vector<Vec> truth_next(scenario.truth.begin() + 1, scenario.truth.end());
        const auto init = detail::lorenz_init_ensemble(scenario.truth.front(), lor.noise_std, N, seed);

        FilterConfig fc;
        fc.N = N;
        fc.K = K;
        fc.resampling = {ResampleScheme::systematic, 0.75};
        fc.guidance = likelihood_gradient_guidance(model, surrogate, lambda);
        fc.resample_every_k = true;
        fc.seed = seed;
        const auto out_surge = surge_filter(surrogate, model, scenario.observations, init, fc);

        // The bootstrap endpoint law is the same for any K, so one step
        // suffices; this is the identical algorithm at 1/K the cost.
        const auto out_bpf = bootstrap_pf(surrogate, 1, model, scenario.observations, init,
                                          {ResampleScheme::systematic, 0.75}, seed);

        const double rs = rmse(out_surge.posterior_means, truth_next);
        const double rb = rmse(out_bpf.posterior_means, truth_next);
        rmse_surge_sum += rs;
        rmse_bpf_sum += rb;
        diffs.push_back(rs - rb);
    }
    const int n = static_cast<int>(diffs.size());
    const double mean_d = detail::vec_mean(diffs);
    const double se = detail::vec_sample_std(diffs) / std::sqrt(static_cast<double>(n));
    r.pass = mean_d <= kOneSided95T19 * se;
    r.detail = detail::printf_str(
        "mean RMSE %.3f (guided) vs %.3f (bootstrap); paired difference %+.4f, t = %.2f vs one-sided 95%% "
        "bar %.2f (fails only if bootstrap is significantly better)",
        rmse_surge_sum / n, rmse_bpf_sum / n, mean_d, se > 0.0 ? mean_d / se : 0.0, kOneSided95T19);
    r.seconds = sw.seconds();
    return r;
}

// 10. Reruns of representative configurations from criteria 3, 4, and 9 give
//     byte-identical CSVs at 1 and 3 threads.
inline CriterionResult run_criterion_determinism() {
    detail::Stopwatch sw;
    CriterionResult r{10, "output files are byte-identical across thread counts", false, "", 0.0};
#if defined(_WIN32)
    _putenv_s("SURGE_OUTPUT_DIR", "");
#else
    ::unsetenv("SURGE_OUTPUT_DIR");  // the comparison must control its own directories
#endif

    std::vector<ExperimentConfig> configs;
    {
        ExperimentConfig c;  // criterion 3 shape, both methods
        c.system = "linear_gaussian";
        c.method = "surge";
        c.n = 64;
        c.k = 16;
        c.t = 10;
        c.seed = 424242;
        c.lambda = 0.0;
        c.threshold = 0.5;
        c.resample_every_k = false;
        configs.push_back(c);
        c.method = "bpf";
        configs.push_back(c);
    }
    for (int si = 0; si < 3; ++si) {  // criterion 4 shape, a sample of its seeds
        ExperimentConfig c;
        c.system = "linear_gaussian";
        c.method = "surge";
        c.n = 512;
        c.k = 32;
        c.t = 20;
        c.seed = kOracleSeeds[static_cast<std::size_t>(si)];
        c.lambda = 1.0;
        c.threshold = 0.5;
        configs.push_back(c);
    }
    {
        ExperimentConfig c;  // criterion 9 shape, both methods
        c.system = "lorenz63";
        c.method = "surge";
        c.n = 20;
        c.k = 600;
        c.t = 15;
        c.seed = kLorenzSeeds[0];
        c.threshold = 0.75;
        configs.push_back(c);
        c.method = "bpf";
        c.k = 1;
        configs.push_back(c);
    }

    const auto base = std::filesystem::temp_directory_path() / "surge-acceptance-determinism";
    std::filesystem::remove_all(base);
    bool all_equal = true;
    int checked = 0;
    for (std::size_t ci = 0; ci < configs.size(); ++ci) {
        auto run_to = [&](int threads) {
            ExperimentConfig c = configs[ci];
            c.threads = threads;
            c.out_dir = (base / (std::to_string(ci) + "-t" + std::to_string(threads))).string();
            const auto res = run_experiment(c);
            std::string all;
            for (const auto& f : res.files_written) all += detail::slurp(f);
            return all;
        };
        if (run_to(1) != run_to(3)) all_equal = false;
        ++checked;
    }
    std::filesystem::remove_all(base);
    r.pass = all_equal;
    r.detail = detail::printf_str("%d configurations rerun at 1 and 3 threads; files %s", checked,
                                  all_equal ? "byte-identical" : "DIFFER");
    r.seconds = sw.seconds();
    return r;
}

// 11. Every shipped analytic gradient matches central finite differences.
inline CriterionResult run_criterion_gradient_checks() {
    detail::Stopwatch sw;
    CriterionResult r{11, "analytic gradients match finite differences", false, "", 0.0};
    std::mt19937_64 gen(11011ULL);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unif01(0.0, 1.0);
    const double h = 1e-6;
    double worst = 0.0;

    auto fd_check = [&](const std::function<double(const Vec&)>& f, const Vec& x, const Vec& analytic) {
        Vec fd(x.size());
        for (Eigen::Index j = 0; j < x.size(); ++j) {
            Vec xp = x, xm = x;
            xp[j] += h;
            xm[j] -= h;
            fd[j] = (f(xp) - f(xm)) / (2.0 * h);
        }
        const double rel = (analytic - fd).lpNorm<Eigen::Infinity>() /
                           std::max(1.0, analytic.lpNorm<Eigen::Infinity>());
        worst = std::max(worst, rel);
    };

    // Linear observation operator, 2-D state, 2-D observation.
    for (int p = 0; p < 100; ++p) {
        Mat H(2, 2);
        H << normal(gen), normal(gen), normal(gen), normal(gen);
        Vec gamma(2);
        gamma << 0.2 + 0.8 * unif01(gen), 0.2 + 0.8 * unif01(gen);
        const auto model = make_linear_model(H, gamma);
        Vec x(2), y(2);
        x << 2.0 * normal(gen), 2.0 * normal(gen);
        y << 2.0 * normal(gen), 2.0 * normal(gen);
        fd_check([&](const Vec& q) { return log_likelihood(model, y, q); }, x,
                 grad_log_likelihood(model, y, x));
    }

    // Partial arctan operator at the benchmark noise level.
    {
        const auto model = make_arctan_partial_model(0.05);
        for (int p = 0; p < 100; ++p) {
            Vec x(3);
            x << 1.5 * normal(gen), 1.5 * normal(gen), 1.5 * normal(gen);
            Vec y = Vec::Constant(1, std::atan(x[0]) + 0.1 * normal(gen));
            fd_check([&](const Vec& q) { return log_likelihood(model, y, q); }, x,
                     grad_log_likelihood(model, y, x));
        }
    }

    // Exact conditioning drift against the smoothed log-likelihood it is the
    // gradient of, on the 1-D benchmark.
    {
        const auto lin = default_linear_benchmark();
        const auto model = make_linear_model(lin.H, lin.gamma);
        const auto doob = exact_doob_guidance(lin.A, lin.Q, lin.H, model.noise_cov());
        for (int p = 0; p < 100; ++p) {
            const double s = unif01(gen);
            Vec x = Vec::Constant(1, normal(gen));
            Vec xc = Vec::Constant(1, normal(gen));
            Vec y = Vec::Constant(1, normal(gen));
            fd_check(
                [&](const Vec& q) {
                    return conditional_log_likelihood(lin.A, lin.Q, lin.H, model.noise_cov(), q, s, y, xc);
                },
                x, doob.grad_G(x, s, y, xc));
        }
    }

    // Likelihood-gradient guidance as the gradient of the scaled endpoint
    // log-likelihood (the endpoint predictor's drift does not depend on x).
    {
        const auto lin = default_linear_benchmark();
        const auto model = make_linear_model(lin.H, lin.gamma);
        const auto surrogate = make_linear_gaussian_surrogate(lin.A, lin.Q).transition();
        const double lambda = 0.7;
        const auto guidance = likelihood_gradient_guidance(model, surrogate, lambda);
        for (int p = 0; p < 100; ++p) {
            const double s = unif01(gen);
            Vec x = Vec::Constant(1, normal(gen));
            Vec xc = Vec::Constant(1, normal(gen));
            Vec y = Vec::Constant(1, normal(gen));
            const Vec v = surrogate.drift(xc, s, xc);
            fd_check(
                [&](const Vec& q) {
                    const Vec x_hat = q + v * (1.0 - s);
                    return lambda * log_likelihood(model, y, x_hat);
                },
                x, guidance.grad_G(x, s, y, xc));
        }
    }

    r.pass = worst <= 1e-5;
    r.detail = detail::printf_str("max relative gradient error %.3g over 400 random points (tol 1e-5)", worst);
    r.seconds = sw.seconds();
    return r;
}

inline std::vector<CriterionResult> run_acceptance_suite() {
    using Fn = CriterionResult (*)();
    const Fn fns[] = {run_criterion_telescoping,          run_criterion_weight_equality,
                      run_criterion_bootstrap_reduction,  run_criterion_oracle_match,
                      run_criterion_bias_correction,      run_criterion_doob_ess,
                      run_criterion_resampling_unbiased,  run_criterion_incremental_variance,
                      run_criterion_lorenz_ordering,      run_criterion_determinism,
                      run_criterion_gradient_checks};
    std::vector<CriterionResult> out;
    out.reserve(std::size(fns));
    for (const auto fn : fns) out.push_back(fn());
    return out;
}

inline std::string format_criterion_line(const CriterionResult& r) {
    return detail::printf_str("[%s] %2d %s (%.1fs): %s", r.pass ? "PASS" : "FAIL", r.id, r.name.c_str(),
                              r.seconds, r.detail.c_str());
}

}  // namespace surge
