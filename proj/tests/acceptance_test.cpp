// Acceptance gate: one test case per shipping criterion. Each case runs the
// corresponding self-contained check, prints its PASS/FAIL line, and asserts
// the verdict. Criterion names here mirror the ids reported by
// `surge_cli compare --suite acceptance`.

#include <surge/acceptance.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <iostream>

namespace {

void assert_criterion(surge::CriterionResult (*fn)()) {
    const auto result = fn();
    std::cout << surge::format_criterion_line(result) << "\n";
    INFO(result.detail);
    CHECK(result.pass);
}

}  // namespace

TEST_CASE("criterion 01: reward increments telescope to the terminal log-likelihood", "[acceptance]") {
    assert_criterion(&surge::run_criterion_telescoping);
}

TEST_CASE("criterion 02: whole-window log-weight equals the incremental sum", "[acceptance]") {
    assert_criterion(&surge::run_criterion_weight_equality);
}

TEST_CASE("criterion 03: zero guidance reduces to the bootstrap filter", "[acceptance]") {
    assert_criterion(&surge::run_criterion_bootstrap_reduction);
}

TEST_CASE("criterion 04: posterior means match the exact filter for every guidance strength", "[acceptance]") {
    assert_criterion(&surge::run_criterion_oracle_match);
}

TEST_CASE("criterion 05: path weights remove the guidance bias", "[acceptance]") {
    assert_criterion(&surge::run_criterion_bias_correction);
}

TEST_CASE("criterion 06: near-exact guidance keeps window ESS above 0.99 N", "[acceptance]") {
    assert_criterion(&surge::run_criterion_doob_ess);
}

TEST_CASE("criterion 07: resampling preserves weighted expectations", "[acceptance]") {
    assert_criterion(&surge::run_criterion_resampling_unbiased);
}

TEST_CASE("criterion 08: gradual likelihood incorporation lowers weight variance", "[acceptance]") {
    assert_criterion(&surge::run_criterion_incremental_variance);
}

TEST_CASE("criterion 09: guided filter matches or beats bootstrap on the chaotic benchmark", "[acceptance]") {
    assert_criterion(&surge::run_criterion_lorenz_ordering);
}

TEST_CASE("criterion 10: output files are byte-identical across thread counts", "[acceptance]") {
    assert_criterion(&surge::run_criterion_determinism);
}

TEST_CASE("criterion 11: analytic gradients match finite differences", "[acceptance]") {
    assert_criterion(&surge::run_criterion_gradient_checks);
}
