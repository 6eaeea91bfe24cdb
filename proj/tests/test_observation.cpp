// Observation models: Gaussian log-likelihood values against hand arithmetic,
// analytic gradients against central finite differences, and input checking.

#include <surge/observation.hpp>
#include <surge/rng.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

namespace {
constexpr double kPi = 3.14159265358979323846;
}

using surge::Mat;
using surge::Vec;

TEST_CASE("zero residual scores minus half log two pi per component", "[observation]") {
    const auto m = surge::make_linear_model(1.0, 1.0);
    Vec x(1), y(1);
    x[0] = 0.7;
    y[0] = 0.7;
    CHECK(surge::log_likelihood(m, y, x) == Catch::Approx(-0.9189385332046727).epsilon(1e-14));
}

TEST_CASE("arctan model scores a one-sigma residual as advertised", "[observation]") {
    // x_1 = 0 observes arctan(0) = 0, so y = 0.05 is exactly one noise std away:
    // -1/2 - 1/2 log(2 pi 0.05^2).
    const auto m = surge::make_arctan_partial_model(0.05);
    Vec x(3), y(1);
    x << 0.0, 5.0, -3.0;
    y[0] = 0.05;
    const double expected = -0.5 - 0.5 * std::log(2.0 * kPi * 0.0025);
    CHECK(expected == Catch::Approx(1.5767937403493182).epsilon(1e-14));
    CHECK(surge::log_likelihood(m, y, x) == Catch::Approx(expected).epsilon(1e-13));
}

TEST_CASE("arctan operator only sees coordinate one", "[observation]") {
    const auto m = surge::make_arctan_partial_model(0.05);
    Vec x(3);
    x << 0.0, 5.0, -3.0;
    CHECK(m.operator_fn(x)[0] == 0.0);
    x[0] = 1.0;
    CHECK(m.operator_fn(x)[0] == Catch::Approx(kPi / 4.0).epsilon(1e-15));
}

TEST_CASE("linear gradient is H transpose times the scaled residual", "[observation]") {
    const auto m = surge::make_linear_model(Mat::Identity(2, 2), Vec::Ones(2));
    Vec x = Vec::Zero(2), y(2);
    y << 1.0, 2.0;
    const Vec g = surge::grad_log_likelihood(m, y, x);
    CHECK(g[0] == Catch::Approx(1.0).epsilon(1e-14));
    CHECK(g[1] == Catch::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("arctan gradient matches the closed form at the origin", "[observation]") {
    const auto m = surge::make_arctan_partial_model(0.05);
    Vec x = Vec::Zero(3), y(1);
    y[0] = 0.1;  // residual 0.1 over gamma^2 = 0.0025 gives 40 on coordinate one
    const Vec g = surge::grad_log_likelihood(m, y, x);
    CHECK(g[0] == Catch::Approx(40.0).epsilon(1e-13));
    CHECK(g[1] == 0.0);
    CHECK(g[2] == 0.0);
}

TEST_CASE("analytic gradients match finite differences on random points", "[observation]") {
    std::mt19937_64 gen(90210);
    std::normal_distribution<double> normal(0.0, 1.5);
    const double h = 1e-6;

    Mat H(2, 3);
    H << 0.7, -1.2, 0.3, 0.0, 0.5, 2.0;
    Vec gamma(2);
    gamma << 0.4, 1.1;
    const auto lin = surge::make_linear_model(H, gamma);
    const auto arct = surge::make_arctan_partial_model(0.05);

    for (int rep = 0; rep < 100; ++rep) {
        Vec x(3);
        for (int j = 0; j < 3; ++j) x[j] = normal(gen);

        for (const auto* model : {&lin, &arct}) {
            Vec y(model->dim_obs);
            for (int j = 0; j < model->dim_obs; ++j) y[j] = model->operator_fn(x)[j] + 0.3 * normal(gen);
            const Vec g = surge::grad_log_likelihood(*model, y, x);
            Vec fd(3);
            for (int j = 0; j < 3; ++j) {
                Vec xp = x, xm = x;
                xp[j] += h;
                xm[j] -= h;
                fd[j] = (surge::log_likelihood(*model, y, xp) - surge::log_likelihood(*model, y, xm)) / (2.0 * h);
            }
            const double denom = std::max(1.0, g.lpNorm<Eigen::Infinity>());
            CHECK((g - fd).lpNorm<Eigen::Infinity>() / denom < 1e-5);
        }
    }
}

TEST_CASE("log-likelihood peaks where the operator reproduces the data", "[observation]") {
    const auto m = surge::make_arctan_partial_model(0.05);
    Vec y(1);
    y[0] = std::atan(0.8);
    Vec x_star = Vec::Zero(3);
    x_star[0] = 0.8;
    const double at_peak = surge::log_likelihood(m, y, x_star);
    for (double dx : {-0.2, -0.01, 0.01, 0.2}) {
        Vec x = x_star;
        x[0] += dx;
        CHECK(surge::log_likelihood(m, y, x) < at_peak);
    }
}

TEST_CASE("observation model constructors reject bad noise levels", "[observation]") {
    CHECK_THROWS_AS(surge::make_arctan_partial_model(0.0), std::invalid_argument);
    CHECK_THROWS_AS(surge::make_arctan_partial_model(-0.1), std::invalid_argument);
    CHECK_THROWS_AS(surge::make_linear_model(1.0, 0.0), std::invalid_argument);
    Vec gamma(1);
    gamma << 0.5;
    CHECK_THROWS_AS(surge::make_linear_model(Mat::Identity(2, 2), gamma), std::invalid_argument);
}

TEST_CASE("dimension mismatches are rejected", "[observation]") {
    const auto m = surge::make_linear_model(1.0, 0.5);
    Vec x(1), y2(2);
    x[0] = 0.0;
    y2 << 1.0, 2.0;
    CHECK_THROWS_AS(surge::log_likelihood(m, y2, x), std::invalid_argument);
    CHECK_THROWS_AS(surge::grad_log_likelihood(m, y2, x), std::invalid_argument);
}

TEST_CASE("noise covariance is the squared diagonal", "[observation]") {
    Vec gamma(2);
    gamma << 0.5, 2.0;
    const auto m = surge::make_linear_model(Mat::Identity(2, 2), gamma);
    const Mat r = m.noise_cov();
    CHECK(r(0, 0) == 0.25);
    CHECK(r(1, 1) == 4.0);
    CHECK(r(0, 1) == 0.0);
}
