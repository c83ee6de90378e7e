#include <cmath>

#include "approxsense/sensitivity.hpp"
#include "helpers.hpp"

using namespace approxsense;
using approxsense::test::error_code_of;
using approxsense::test::rows;
using approxsense::test::vec;

namespace {

const FeatureMap kId1 = FeatureMap::identity(1);

}  // namespace

TEST_SUITE("sensitivity") {
  TEST_CASE("empirical sensitivity by hand") {
    const ApproxOperator q = ApproxOperator::uniform_quantizer(0.5, 1.0);
    const UnlabelledSample s(rows({{1.0}, {-2.0}}), "s");
    const Hypothesis h(vec({0.6}), kId1);
    CHECK(empirical_sensitivity(h, q, s, 1.0).value == doctest::Approx(0.15).epsilon(1e-12));
    CHECK(empirical_sensitivity(h, q, s, 2.0).value == doctest::Approx(std::sqrt(0.025)).epsilon(1e-12));
    for (double p : {1.0, 2.0, 3.5}) CHECK(empirical_sensitivity(Hypothesis(vec({0.5}), kId1), q, s, p).value == 0.0);
    CHECK(error_code_of([&] { empirical_sensitivity(h, q, s, 0.5); }) == ErrorCode::kInvalidArgument);
    CHECK(error_code_of([&] { empirical_sensitivity(h, ApproxOperator::stochastic_rounder(1, 1), s); }) ==
          ErrorCode::kStochasticOperator);
  }

  TEST_CASE("Jensen monotonicity in p") {
    Rng rng(17);
    std::normal_distribution<double> n(0.0, 1.0);
    const FeatureMap id3 = FeatureMap::identity(3);
    const ApproxOperator q = ApproxOperator::uniform_quantizer(0.3, 2.0);
    for (int i = 0; i < 100; ++i) {
      Matrix x(20, 3);
      for (int a = 0; a < 20; ++a)
        for (int b = 0; b < 3; ++b) x(a, b) = n(rng);
      const UnlabelledSample s(x, "s");
      const Hypothesis h(vec({n(rng), n(rng), n(rng)}), id3);
      const double d1 = empirical_sensitivity(h, q, s, 1).value;
      const double d2 = empirical_sensitivity(h, q, s, 2).value;
      const double d4 = empirical_sensitivity(h, q, s, 4).value;
      CHECK(d1 <= d2 + 1e-12);
      CHECK(d2 <= d4 + 1e-12);
    }
  }

  TEST_CASE("true sensitivity against the analytic integral") {
    const ApproxOperator q = ApproxOperator::uniform_quantizer(0.5, 1.0);
    const SyntheticTask task{Hypothesis(vec({0.0}), kId1), InputLaw::uniform_box(0.0, 1.0), 0.0, 1};
    const Hypothesis h(vec({0.6}), kId1);
    const SensitivityEstimate d1 = true_sensitivity_mc(h, q, task, 1.0, 100000, 4);
    CHECK(std::abs(d1.value - 0.05) <= 3.0 * d1.standard_error);
    const SensitivityEstimate d2 = true_sensitivity_mc(h, q, task, 2.0, 100000, 4);
    CHECK(std::abs(d2.value - 0.1 * std::sqrt(1.0 / 3.0)) <= 3.0 * d2.standard_error);
    CHECK(true_sensitivity_mc(Hypothesis(vec({0.5}), kId1), q, task, 1.0, 1000, 4).value == 0.0);
    CHECK(true_sensitivity_mc(h, q, task, 1.0, 5000, 9).value == true_sensitivity_mc(h, q, task, 1.0, 5000, 9).value);
  }

  TEST_CASE("sensitivity deviation bound") {
    const DeviationBound b = sensitivity_deviation_bound(0.0, 1.0, 50, 0.05);
    CHECK(b.epsilon_u == doctest::Approx(3.0 * std::sqrt(std::log(40.0) / 100.0)));
    CHECK(b.epsilon_u == doctest::Approx(0.5761937).epsilon(1e-6));
    CHECK(sensitivity_deviation_bound(0.1, 1.0, 1000000000000LL, 0.05).epsilon_u == doctest::Approx(0.2).epsilon(1e-4));
    CHECK(error_code_of([] { sensitivity_deviation_bound(0.1, 1.0, 50, 2.0); }) == ErrorCode::kInvalidArgument);
    double total = 0.0;
    for (const auto& [label, v] : b.components) total += v;
    CHECK(total == doctest::Approx(b.epsilon_u));
  }

  TEST_CASE("fast-rate deviation bound") {
    const double v = fast_rate_deviation_bound(0.05, 0.1, 1.0, 100, 0.1).epsilon_u;
    CHECK(v == doctest::Approx(0.459614).epsilon(1e-6));
    const double t0 = fast_rate_deviation_bound(0.05, 0.0, 1.0, 100, 0.1).epsilon_u;
    CHECK(t0 == doctest::Approx(0.3 + 6.0 * std::log(10.0) / 100.0));
    const double m1 = fast_rate_deviation_bound(0.0, 0.0, 1.0, 1000, 0.1).epsilon_u;
    const double m2 = fast_rate_deviation_bound(0.0, 0.0, 1.0, 2000, 0.1).epsilon_u;
    CHECK(m1 == doctest::Approx(2.0 * m2));
  }

  TEST_CASE("analytic upper bound") {
    const ApproxOperator q = ApproxOperator::uniform_quantizer(1.0, 5.0);
    CHECK(analytic_sensitivity_upper(Hypothesis(vec({1.0}), kId1), q, 3.0).value == 0.0);
    // Q(2.5) = 2 (even index), so |w - Q(w)| = 0.5.
    CHECK(analytic_sensitivity_upper(Hypothesis(vec({2.5}), kId1), q, 2.0).value == 1.0);

    Rng rng(23);
    std::normal_distribution<double> n(0.0, 1.0);
    const FeatureMap id3 = FeatureMap::identity(3);
    const ApproxOperator q3 = ApproxOperator::uniform_quantizer(0.4, 1.0);
    for (int i = 0; i < 100; ++i) {
      Matrix x(30, 3);
      for (int a = 0; a < 30; ++a) {
        Vector r = vec({n(rng), n(rng), n(rng)});
        x.row(a) = (r / r.norm() * std::uniform_real_distribution<double>(0.0, 1.0)(rng)).transpose();
      }
      const Hypothesis h(vec({n(rng), n(rng), n(rng)}), id3);
      const double upper = analytic_sensitivity_upper(h, q3, 1.0).value;
      CHECK(upper >= empirical_sensitivity(h, q3, UnlabelledSample(x, "ball"), 1.0).value);
    }
  }

  TEST_CASE("uniform sensitivity constant bounds every disagreement") {
    Rng rng(29);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const FeatureMap id2 = FeatureMap::identity(2);
    const ApproxOperator q = ApproxOperator::uniform_quantizer(0.3, 1.0);
    Matrix x(40, 2);
    for (int a = 0; a < 40; ++a) x.row(a) << 2.0 * u(rng), u(rng);
    std::vector<Vector> candidates;
    for (int i = 0; i < 200; ++i) candidates.push_back(vec({u(rng), u(rng)}));
    const double C = uniform_sensitivity_constant(q, candidates, max_feature_norm(id2, x));
    for (const Vector& w : candidates) CHECK(((x * (w - q.transform(w))).cwiseAbs().maxCoeff()) <= C + 1e-15);
  }

  TEST_CASE("expected sensitivity of the stochastic rounder") {
    const ApproxOperator s = ApproxOperator::stochastic_rounder(1.0, 10.0);
    const UnlabelledSample one(rows({{1.0}}), "x=1");
    const Hypothesis h(vec({0.3}), kId1);
    const SensitivityEstimate e = expected_sensitivity(h, s, one, 1.0, 20000, 8);
    CHECK(std::abs(e.value - 0.42) <= 3.0 * e.standard_error);
    CHECK(e.kind == SensitivityEstimate::Kind::kExpectedStochastic);
    CHECK(expected_sensitivity(h, s, one, 1.0, 200, 8).value == expected_sensitivity(h, s, one, 1.0, 200, 8).value);
    const ApproxOperator fine = ApproxOperator::stochastic_rounder(1e-9, 10.0);
    CHECK(expected_sensitivity(h, fine, one, 1.0, 200, 8).value < 1e-8);
    CHECK(error_code_of([&] {
            expected_sensitivity(h, ApproxOperator::uniform_quantizer(1, 1), one, 1.0, 10, 1);
          }) == ErrorCode::kDeterministicOperator);
  }

  TEST_CASE("variance condition") {
    const ApproxOperator s = ApproxOperator::stochastic_rounder(1.0, 10.0);
    const UnlabelledSample one(rows({{1.0}}), "x=1");
    const std::vector<Hypothesis> hs{Hypothesis(vec({0.3}), kId1)};
    const auto e = variance_condition_check(s, hs, one, 1.0, CapacityFn::kConstantOne, 20000, 3).front();
    CHECK(std::abs(e.lhs - 0.21) <= 3.0 * e.standard_error);
    CHECK(e.holds);
    CHECK_FALSE(variance_condition_check(s, hs, one, 0.0, CapacityFn::kConstantOne, 200, 3).front().holds);
    const std::vector<Hypothesis> on_grid{Hypothesis(vec({2.0}), kId1)};
    const auto g = variance_condition_check(s, on_grid, one, 1e-6, CapacityFn::kWeightNorm, 200, 3).front();
    CHECK(g.lhs == 0.0);
    CHECK(g.holds);
  }
}
