#include <cmath>

#include "approxsense/model.hpp"
#include "helpers.hpp"

using namespace approxsense;
using approxsense::test::error_code_of;
using approxsense::test::rows;
using approxsense::test::vec;

TEST_SUITE("model") {
  TEST_CASE("predict with the identity map") {
    const FeatureMap id2 = FeatureMap::identity(2);
    CHECK(predict(Hypothesis(vec({0, 0}), id2), vec({5, -7})) == 0.0);
    CHECK(predict(Hypothesis(vec({1, 2}), id2), vec({3, 4})) == 11.0);
    CHECK(predict(Hypothesis(vec({1}), FeatureMap::identity(1)), vec({-2})) == -2.0);
    CHECK(error_code_of([&] { predict(Hypothesis(vec({1, 2}), id2), vec({1})); }) ==
          ErrorCode::kDimensionMismatch);
    CHECK(error_code_of([&] { Hypothesis(vec({1}), id2); }) == ErrorCode::kDimensionMismatch);
  }

  TEST_CASE("polynomial and radial basis maps") {
    const FeatureMap poly = FeatureMap::polynomial(2, 2);
    CHECK(poly.feature_dim() == 5);
    const Vector phi = poly.apply(vec({2, -3}));
    CHECK(phi == vec({1, 2, -3, 4, 9}));
    const FeatureMap rbf = FeatureMap::radial_basis(rows({{0, 0}, {1, 0}}), 1.0);
    const Vector r = rbf.apply(vec({1, 0}));
    CHECK(r(0) == doctest::Approx(std::exp(-0.5)));
    CHECK(r(1) == 1.0);
  }

  TEST_CASE("uniform quantizer") {
    const ApproxOperator q = ApproxOperator::uniform_quantizer(0.25, 1.0);
    CHECK(q.transform(vec({0.37}))(0) == 0.25);
    // Midpoints go to the even grid index.
    CHECK(q.transform(vec({0.125}))(0) == 0.0);
    CHECK(q.transform(vec({0.375}))(0) == 0.5);
    CHECK(q.transform(vec({-0.375}))(0) == -0.5);
    // Out-of-range weights are clamped first.
    CHECK(q.transform(vec({5.0}))(0) == 1.0);
    CHECK(q.transform(vec({-3.0}))(0) == -1.0);
  }

  TEST_CASE("quantizer contraction and idempotence") {
    Rng rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (double step : {0.1, 0.25, 0.3, 0.5}) {
      const ApproxOperator q = ApproxOperator::uniform_quantizer(step, 1.0);
      for (int i = 0; i < 1000; ++i) {
        const Vector w = vec({u(rng), u(rng), u(rng)});
        const Vector qw = q.transform(w);
        CHECK((w - qw).lpNorm<Eigen::Infinity>() <= step / 2.0 + 1e-15);
        CHECK(q.transform(qw) == qw);
      }
    }
  }

  TEST_CASE("uniform_levels spans the clamp range") {
    const ApproxOperator q = ApproxOperator::uniform_levels(4, 1.0);
    CHECK(q.transform(vec({-1.0}))(0) == doctest::Approx(-1.0));
    CHECK(q.transform(vec({-0.6}))(0) == doctest::Approx(-1.0 / 3.0));
    CHECK(q.transform(vec({0.2}))(0) == doctest::Approx(1.0 / 3.0));
    CHECK(q.transform(vec({0.9}))(0) == doctest::Approx(1.0));
    const ApproxOperator three = ApproxOperator::uniform_levels(3, 1.0);
    CHECK(three.transform(vec({0.4}))(0) == 0.0);
    CHECK(three.transform(vec({0.6}))(0) == 1.0);
  }

  TEST_CASE("magnitude pruner") {
    const ApproxOperator p = ApproxOperator::magnitude_pruner(1);
    CHECK(p.transform(vec({0.1, -0.9})) == vec({0.0, -0.9}));
    // Equal magnitudes: the lower index is kept.
    CHECK(p.transform(vec({0.5, -0.5})) == vec({0.5, 0.0}));
    CHECK(ApproxOperator::magnitude_pruner(0).transform(vec({1, 2})) == vec({0, 0}));
  }

  TEST_CASE("stochastic rounder") {
    const ApproxOperator s = ApproxOperator::stochastic_rounder(1.0, 10.0);
    const Hypothesis h(vec({0.3}), FeatureMap::identity(1));
    CHECK(error_code_of([&] { apply_operator(s, h); }) == ErrorCode::kMissingSeed);
    int ups = 0;
    constexpr int n = 100000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      const double q = apply_operator(s, h, derive_seed(11, static_cast<std::uint64_t>(i))).weights(0);
      CHECK((q == 0.0 || q == 1.0));
      ups += q == 1.0;
      sum += q;
    }
    CHECK(std::abs(sum / n - 0.3) <= 3.0 * std::sqrt(0.21 / n));
    CHECK(apply_operator(s, h, 5).weights == apply_operator(s, h, 5).weights);
  }

  TEST_CASE("clipped losses") {
    const LossSpec abs;
    CHECK(loss_value(abs, 0.3, 0.3) == 0.0);
    CHECK(loss_value(abs, 5.0, 0.0) == 1.0 - LossSpec::kClipMargin);
    CHECK(loss_value(abs, 0.4, 0.1) == doctest::Approx(0.3));
    CHECK(LossSpec::kClipMargin == std::ldexp(1.0, -20));
    CHECK(error_code_of([] { LossSpec(LossSpec::Kind::kClippedHinge, 0.0); }) == ErrorCode::kInvalidArgument);
  }

  TEST_CASE("losses are bounded and rho-Lipschitz") {
    Rng rng(3);
    std::uniform_real_distribution<double> u(-4.0, 4.0);
    for (auto kind : {LossSpec::Kind::kClippedAbsolute, LossSpec::Kind::kClippedHinge,
                      LossSpec::Kind::kClippedSquared}) {
      for (double rho : {0.5, 1.0, 2.0}) {
        const LossSpec spec(kind, rho);
        for (int i = 0; i < 10000; ++i) {
          const double a = u(rng), b = u(rng), y = u(rng);
          const double la = loss_value(spec, a, y), lb = loss_value(spec, b, y);
          CHECK(la >= 0.0);
          CHECK(la < 1.0);
          CHECK(std::abs(la - lb) <= rho * std::abs(a - b) * (1.0 + 1e-12));
        }
      }
    }
  }

  TEST_CASE("empirical error") {
    const LossSpec abs;
    const LabelledSample one(rows({{1.0}}), vec({0.0}), "one");
    CHECK(empirical_error(Hypothesis(vec({0.5}), FeatureMap::identity(1)), one, abs) == 0.5);

    const SyntheticTask task{Hypothesis(vec({0.5, -0.25}), FeatureMap::identity(2)),
                             InputLaw::uniform_box(-1, 1), 0.0, 9};
    const LabelledSample s = generate_labelled(task, 200);
    CHECK(empirical_error(task.teacher, s, abs) == 0.0);
    CHECK(s.targets == predict_rows(task.teacher, s.inputs));
    const double e = empirical_error(Hypothesis(vec({3, 3}), FeatureMap::identity(2)), s, abs);
    CHECK(e >= 0.0);
    CHECK(e < 1.0);
  }

  TEST_CASE("sample generation is seeded") {
    const SyntheticTask task{Hypothesis(vec({1.0}), FeatureMap::identity(1)), InputLaw::isotropic_gaussian(1.0),
                             0.3, 42};
    const LabelledSample a = generate_labelled(task, 50);
    const LabelledSample b = generate_labelled(task, 50);
    CHECK(a.inputs == b.inputs);
    CHECK(a.targets == b.targets);
    CHECK(generate_unlabelled(task, 50).inputs != a.inputs);
    CHECK(generate_labelled(task.with_seed(43), 50).inputs != a.inputs);
  }

  TEST_CASE("gaussian input mean") {
    constexpr int m = 100000;
    const SyntheticTask task{Hypothesis(vec({1.0}), FeatureMap::identity(1)), InputLaw::isotropic_gaussian(1.0),
                             0.0, 5};
    const UnlabelledSample u = generate_unlabelled(task, m);
    CHECK(std::abs(u.inputs.mean()) <= 4.0 / std::sqrt(static_cast<double>(m)));
  }

  TEST_CASE("true error by Monte Carlo") {
    const LossSpec abs;
    const SyntheticTask task{Hypothesis(vec({0.0}), FeatureMap::identity(1)), InputLaw::uniform_box(0.0, 1.0), 0.0,
                             1};
    const McEstimate self = true_error_mc(task.teacher, task, abs, 1000, 2);
    CHECK(self.value == 0.0);
    CHECK(self.standard_error == 0.0);
    // err(w = 0.5) = E|0.5 x| = 0.25 for x ~ U[0, 1].
    const Hypothesis h(vec({0.5}), FeatureMap::identity(1));
    const McEstimate est = true_error_mc(h, task, abs, 100000, 3);
    CHECK(std::abs(est.value - 0.25) <= 3.0 * est.standard_error);
    CHECK(true_error_mc(h, task, abs, 100000, 3).value == est.value);
  }

  TEST_CASE("sample validation") {
    CHECK(error_code_of([] { LabelledSample(rows({{1.0}, {2.0}}), vec({1.0}), "x"); }) ==
          ErrorCode::kDimensionMismatch);
    CHECK(error_code_of([] { UnlabelledSample(rows({{NAN}}), "x"); }) == ErrorCode::kInvalidArgument);
  }
}
