#pragma once

// Evaluation metrics: RMSE against a reference trajectory, 1-d Wasserstein-1
// distances (between weighted samples, and from a weighted sample to a point),
// and summary statistics of an effective-sample-size trace.

#include "surge/filter.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

namespace surge {

// Root mean squared error over all time steps and coordinates:
// sqrt( (1/(T*D)) * sum_t ||est_t - ref_t||^2 ).
inline double rmse(const std::vector<Vec>& estimates, const std::vector<Vec>& reference) {
    if (estimates.size() != reference.size() || estimates.empty())
        throw std::invalid_argument("rmse: length mismatch or empty input");
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t t = 0; t < estimates.size(); ++t) {
        if (estimates[t].size() != reference[t].size()) throw std::invalid_argument("rmse: dimension mismatch");
        acc += (estimates[t] - reference[t]).squaredNorm();
        count += static_cast<std::size_t>(estimates[t].size());
    }
    return std::sqrt(acc / static_cast<double>(count));
}

// W1 between two weighted samples on the real line, computed from the quantile
// representation: integrate |F^{-1} - G^{-1}| by merging the two sorted weight
// partitions.
inline double wasserstein1_1d(const std::vector<double>& xs, const Vec& wx,
                              const std::vector<double>& ys, const Vec& wy) {
    if (static_cast<Eigen::Index>(xs.size()) != wx.size() || static_cast<Eigen::Index>(ys.size()) != wy.size())
        throw std::invalid_argument("wasserstein1_1d: sample/weight length mismatch");
    if (xs.empty() || ys.empty()) throw std::invalid_argument("wasserstein1_1d: empty sample");
    if (wx.minCoeff() < 0.0 || wy.minCoeff() < 0.0)
        throw std::invalid_argument("wasserstein1_1d: negative weight");

    std::vector<std::size_t> ix(xs.size()), iy(ys.size());
    std::iota(ix.begin(), ix.end(), 0);
    std::iota(iy.begin(), iy.end(), 0);
    std::sort(ix.begin(), ix.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
    std::sort(iy.begin(), iy.end(), [&](std::size_t a, std::size_t b) { return ys[a] < ys[b]; });

    const double wx_total = wx.sum();
    const double wy_total = wy.sum();
    if (wx_total <= 0.0 || wy_total <= 0.0) throw std::invalid_argument("wasserstein1_1d: zero total weight");

    double dist = 0.0;
    std::size_t a = 0, b = 0;
    double rem_a = wx[static_cast<Eigen::Index>(ix[0])] / wx_total;
    double rem_b = wy[static_cast<Eigen::Index>(iy[0])] / wy_total;
    while (a < xs.size() && b < ys.size()) {
        const double step = std::min(rem_a, rem_b);
        dist += step * std::abs(xs[ix[a]] - ys[iy[b]]);
        rem_a -= step;
        rem_b -= step;
        if (rem_a <= 1e-15) {
            if (++a < xs.size()) rem_a = wx[static_cast<Eigen::Index>(ix[a])] / wx_total;
        }
        if (rem_b <= 1e-15) {
            if (++b < ys.size()) rem_b = wy[static_cast<Eigen::Index>(iy[b])] / wy_total;
        }
    }
    return dist;
}

// Unweighted convenience overload: equal sizes reduce to the mean absolute
// difference of matched order statistics.
inline double wasserstein1_1d(const std::vector<double>& xs, const std::vector<double>& ys) {
    return wasserstein1_1d(xs, Vec::Ones(static_cast<Eigen::Index>(xs.size())),
                           ys, Vec::Ones(static_cast<Eigen::Index>(ys.size())));
}

// W1 from a weighted sample to a point mass: sum_i w_i |x_i - c| with
// normalized weights. This is what the experiment runner reports per
// coordinate against the true state.
inline double w1_to_point(const std::vector<double>& xs, const Vec& weights, double c) {
    if (static_cast<Eigen::Index>(xs.size()) != weights.size() || xs.empty())
        throw std::invalid_argument("w1_to_point: sample/weight length mismatch");
    const double total = weights.sum();
    if (total <= 0.0) throw std::invalid_argument("w1_to_point: zero total weight");
    double acc = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) acc += weights[static_cast<Eigen::Index>(i)] * std::abs(xs[i] - c);
    return acc / total;
}

struct EssStats {
    double mean_fraction = 0.0;  // mean ESS / N over all recorded steps
    double min_fraction = 0.0;   // worst-case ESS / N
};

inline EssStats ess_stats(const std::vector<EssTraceRow>& trace, int n_particles) {
    if (trace.empty() || n_particles < 1) throw std::invalid_argument("ess_stats: empty trace");
    double sum = 0.0, mn = std::numeric_limits<double>::infinity();
    for (const auto& row : trace) {
        sum += row.ess;
        mn = std::min(mn, row.ess);
    }
    return {sum / (static_cast<double>(trace.size()) * n_particles), mn / n_particles};
}

struct MetricReport {
    double rmse = 0.0;
    double w1 = 0.0;        // mean over time and coordinates of W1 to the true state
    double ess_mean = 0.0;  // as fraction of N
    double ess_min = 0.0;
    std::vector<double> w1_series;  // per time step, averaged over coordinates
};

// Summarize a filter run against the true trajectory. estimates/posteriors are
// aligned so that entry t corresponds to truth_next[t], the state the t-th
// observation was generated from.
inline MetricReport evaluate_run(const FilterOutput& output, const std::vector<Vec>& truth_next, int n_particles) {
    if (output.posteriors.size() != truth_next.size() || truth_next.empty())
        throw std::invalid_argument("evaluate_run: length mismatch or empty run");
    MetricReport rep;
    rep.rmse = rmse(output.posterior_means, truth_next);
    for (std::size_t t = 0; t < truth_next.size(); ++t) {
        const auto& ens = output.posteriors[t];
        const Vec w = ens.log_weights.array().exp().matrix();
        const int d = ens.dim();
        double w1_t = 0.0;
        std::vector<double> coord(static_cast<std::size_t>(ens.size()));
        for (int j = 0; j < d; ++j) {
            for (int i = 0; i < ens.size(); ++i) coord[static_cast<std::size_t>(i)] = ens.particles[static_cast<std::size_t>(i)][j];
            w1_t += w1_to_point(coord, w, truth_next[t][j]);
        }
        rep.w1_series.push_back(w1_t / d);
    }
    rep.w1 = std::accumulate(rep.w1_series.begin(), rep.w1_series.end(), 0.0) / static_cast<double>(rep.w1_series.size());
    const auto es = ess_stats(output.ess_trace, n_particles);
    rep.ess_mean = es.mean_fraction;
    rep.ess_min = es.min_fraction;
    return rep;
}

}  // namespace surge
