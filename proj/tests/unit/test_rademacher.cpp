#include <cmath>

#include <Eigen/QR>

#include "approxsense/geometry.hpp"
#include "approxsense/rademacher.hpp"
#include "helpers.hpp"

using namespace approxsense;
using approxsense::test::error_code_of;
using approxsense::test::rows;
using approxsense::test::vec;

namespace {

Matrix random_rows(Rng& rng, int n, int m, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix x(n, m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) x(i, j) = u(rng);
  return x;
}

// Plain average over all 2^m sign vectors.
double brute_force(const Matrix& pts) {
  const int m = static_cast<int>(pts.cols());
  double total = 0.0;
  for (long s = 0; s < (1L << m); ++s) {
    double best = -INFINITY;
    for (int i = 0; i < pts.rows(); ++i) {
      double v = 0.0;
      for (int k = 0; k < m; ++k) v += ((s >> k) & 1 ? -1.0 : 1.0) * pts(i, k);
      best = std::max(best, v);
    }
    total += best;
  }
  return total / static_cast<double>(1L << m) / m;
}

Matrix rotation(double angle) {
  Matrix V(2, 2);
  V << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  return V;
}

}  // namespace

TEST_SUITE("rademacher") {
  TEST_CASE("sensitivity point set") {
    const ApproxOperator q = ApproxOperator::uniform_quantizer(0.5, 1.0);
    const FeatureMap id = FeatureMap::identity(1);
    const UnlabelledSample s(rows({{1.0}, {-2.0}}), "s");
    const SensitivityPointSet ps = sensitivity_pointset({Hypothesis(vec({0.6}), id)}, q, s);
    CHECK(ps.points(0, 0) == doctest::Approx(0.1));
    CHECK(ps.points(0, 1) == doctest::Approx(0.2));
    const SensitivityPointSet zero =
        sensitivity_pointset({Hypothesis(vec({0.5}), id), Hypothesis(vec({-1.0}), id)}, q, s);
    CHECK(zero.points.isZero(0));
    const SensitivityPointSet swapped =
        sensitivity_pointset({Hypothesis(vec({-0.9}), id), Hypothesis(vec({0.6}), id)}, q, s);
    const SensitivityPointSet ordered =
        sensitivity_pointset({Hypothesis(vec({0.6}), id), Hypothesis(vec({-0.9}), id)}, q, s);
    CHECK(swapped.points.row(0) == ordered.points.row(1));
    CHECK(swapped.points.row(1) == ordered.points.row(0));
    CHECK(error_code_of([] { SensitivityPointSet(rows({{-0.1}})); }) == ErrorCode::kInvalidArgument);
  }

  TEST_CASE("exact enumeration") {
    CHECK(exact_rademacher_pointset(SensitivityPointSet(rows({{1, 1}}))).value == 0.0);
    CHECK(exact_rademacher_pointset(SensitivityPointSet(rows({{1, 1}, {0, 0}}))).value == 0.25);
    CHECK(exact_rademacher_pointset(SensitivityPointSet(rows({{1, 0}, {0, 1}}))).value == 0.25);
    CHECK(exact_rademacher_pointset(SensitivityPointSet(Matrix::Zero(3, 5))).value == 0.0);
    Rng rng(1);
    for (int i = 0; i < 30; ++i) {
      const Matrix pts = random_rows(rng, 1 + i % 5, 1 + i % 9, 0.0, 2.0);
      const double v = exact_rademacher_pointset(SensitivityPointSet(pts)).value;
      CHECK(v == doctest::Approx(brute_force(pts)).epsilon(1e-12));
      Matrix doubled(2 * pts.rows(), pts.cols());
      doubled << pts, pts;
      CHECK(exact_rademacher_pointset(SensitivityPointSet(doubled)).value == v);
    }
    CHECK(exact_rademacher_pointset(SensitivityPointSet(Matrix::Zero(1, 22))).value == 0.0);
    CHECK(error_code_of([] { exact_rademacher_pointset(SensitivityPointSet(Matrix::Zero(1, 23))); }) ==
          ErrorCode::kEnumerationCap);
  }

  TEST_CASE("Monte Carlo agrees with enumeration") {
    CHECK(mc_rademacher_pointset(SensitivityPointSet(Matrix::Zero(2, 4)), 500, 1).value == 0.0);
    CHECK(mc_rademacher_pointset(SensitivityPointSet(Matrix::Zero(2, 4)), 500, 1).standard_error == 0.0);
    Rng rng(2);
    int outside = 0;
    for (int i = 0; i < 50; ++i) {
      const SensitivityPointSet ps(random_rows(rng, 2 + i % 6, 2 + i % 10, 0.0, 1.0));
      const RadEstimate mc = mc_rademacher_pointset(ps, 4000, static_cast<std::uint64_t>(i));
      CHECK(mc.method == RadEstimate::Method::kMonteCarlo);
      CHECK_FALSE(mc.certified());
      outside += std::abs(mc.value - exact_rademacher_pointset(ps).value) > 4.0 * mc.standard_error;
      CHECK(mc_rademacher_pointset(ps, 4000, static_cast<std::uint64_t>(i)).value == mc.value);
    }
    CHECK(outside == 0);
  }

  TEST_CASE("row-matrix Monte Carlo matches the support-function form") {
    Rng rng(3);
    const Matrix pts = random_rows(rng, 7, 9, -1.0, 1.0);
    const RadEstimate rows_mc = mc_rademacher_rows(pts, 3000, 77);
    const RadEstimate support_mc = mc_rademacher_support(
        9, [&](const Vector& s) { return (pts * s).maxCoeff(); }, 3000, 77);
    CHECK(rows_mc.value == doctest::Approx(support_mc.value).epsilon(1e-12));
  }

  TEST_CASE("ellipse closed form") {
    CHECK(ellipse_rademacher(vec({3, 4}), 2.0, 2).value == 2.5);
    CHECK(ellipse_rademacher(vec({1, 1, 1, 1}), 2.0, 4).value == 0.5);
    CHECK(ellipse_rademacher(vec({3, 4}), 1.0, 2).value == 2.0);
    CHECK(ellipse_rademacher(vec({3, 4}), 2.0, 2).method == RadEstimate::Method::kClosedForm);
  }

  TEST_CASE("axis-aligned union") {
    CHECK(union_ellipse_bound({vec({3, 4})}, 2.0, 2).value == ellipse_rademacher(vec({3, 4}), 2.0, 2).value);
    CHECK(union_ellipse_bound({vec({3, 4}), vec({5, 1})}, 2.0, 2).value ==
          doctest::Approx(std::sqrt(26.0) / 2.0));
    CHECK(union_ellipse_bound({vec({3, 4}), vec({5, 1}), vec({1, 1})}, 2.0, 2).value ==
          union_ellipse_bound({vec({3, 4}), vec({5, 1})}, 2.0, 2).value);
  }

  TEST_CASE("rotated union") {
    const RadEstimate r = rotated_union_bound({{rotation(M_PI / 4), vec({2, 1})}}, 1.0, 2);
    CHECK(r.value == doctest::Approx(std::sqrt(2.0)));
    CHECK(r.method == RadEstimate::Method::kClosedForm);
    Rng rng(4);
    std::uniform_real_distribution<double> u(0.1, 3.0);
    for (double p : {1.0, 1.5, 2.0, 3.0}) {
      const std::vector<Vector> mus{vec({u(rng), u(rng), u(rng)}), vec({u(rng), u(rng), u(rng)})};
      std::vector<RotatedEllipse> comps;
      for (const auto& mu : mus) comps.push_back({Matrix::Identity(3, 3), mu});
      CHECK(rotated_union_bound(comps, p, 3).value == doctest::Approx(union_ellipse_bound(mus, p, 3).value));
    }
    CHECK(error_code_of([] { rotated_union_bound({{rows({{1, 1}, {0, 1}}), vec({1, 1})}}, 2.0, 2); }) ==
          ErrorCode::kNonOrthogonal);
  }

  TEST_CASE("certified operator norm dominates the numeric maximizer") {
    Rng rng(5);
    std::normal_distribution<double> n(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.1, 2.0);
    for (int i = 0; i < 50; ++i) {
      const int m = 2 + i % 4;
      Matrix G(m, m);
      for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) G(a, b) = n(rng);
      const Matrix V = Eigen::HouseholderQR<Matrix>(G).householderQ();
      Vector mu(m);
      for (int k = 0; k < m; ++k) mu(k) = u(rng);
      const double p = 1.0 + (i % 3);
      const double certified = operator_norm_p_to_1(V, mu, p);
      const double lower = operator_norm_p_to_1_lower(V * mu.asDiagonal(), p, 8, static_cast<std::uint64_t>(i));
      CHECK(certified >= lower - 1e-9);
    }
  }

  TEST_CASE("clustered sets") {
    const Matrix I = Matrix::Identity(2, 2);
    const RadEstimate single = cluster_bound({{vec({0, 0}), I, vec({1, 2})}}, 2.0, 2);
    CHECK(single.value == ellipse_rademacher(vec({1, 2}), 2.0, 2).value);
    const RadEstimate two = cluster_bound({{vec({0, 0}), I, vec({1, 1})}, {vec({1, 1}), I, vec({1, 1})}}, 2.0, 2);
    CHECK(two.value == doctest::Approx(1.539661).epsilon(1e-6));
    CHECK(two.method == RadEstimate::Method::kCertifiedUpper);
    // A common shift only moves the Massart term.
    const RadEstimate shifted =
        cluster_bound({{vec({1, 0}), I, vec({1, 1})}, {vec({2, 1}), I, vec({1, 1})}}, 2.0, 2);
    const double massart_two = std::sqrt(2.0) * std::sqrt(2.0 * std::log(2.0)) / 2.0;
    const double massart_shifted = std::sqrt(5.0) * std::sqrt(2.0 * std::log(2.0)) / 2.0;
    CHECK(shifted.value - massart_shifted == doctest::Approx(two.value - massart_two));
  }

  TEST_CASE("monotone in mu") {
    Rng rng(6);
    std::uniform_real_distribution<double> u(0.1, 2.0);
    for (int i = 0; i < 50; ++i) {
      const double p = 1.0 + 0.5 * (i % 5);
      Vector mu = vec({u(rng), u(rng), u(rng)});
      Vector bigger = mu;
      bigger(i % 3) += u(rng);
      const Matrix I = Matrix::Identity(3, 3);
      CHECK(ellipse_rademacher(bigger, p, 3).value >= ellipse_rademacher(mu, p, 3).value);
      CHECK(union_ellipse_bound({bigger, vec({1, 1, 1})}, p, 3).value >=
            union_ellipse_bound({mu, vec({1, 1, 1})}, p, 3).value);
      CHECK(cluster_bound({{vec({0.5, 0, 0}), I, bigger}}, p, 3).value >=
            cluster_bound({{vec({0.5, 0, 0}), I, mu}}, p, 3).value);
    }
  }

  TEST_CASE("crude bounds and the positive orthant ball") {
    const auto [lo2, hi2] = crude_bounds(1.0, 2.0);
    CHECK(lo2 == doctest::Approx(0.353553).epsilon(1e-6));
    CHECK(hi2 == 1.0);
    const auto [lo1, hi1] = crude_bounds(1.0, 1.0);
    CHECK(lo1 == 0.25);
    CHECK(hi1 == 1.0);
    const auto [lo0, hi0] = crude_bounds(0.0, 2.0);
    CHECK(lo0 == 0.0);
    CHECK(hi0 == 0.0);
    CHECK(positive_orthant_ball_sup(vec({1, -1}), 1.0, 2.0) == 1.0);
    CHECK(positive_orthant_ball_sup(vec({-1, -1, -1}), 3.0, 2.0) == 0.0);
    CHECK(positive_orthant_ball_sup(vec({1, 1}), std::sqrt(2.0), 2.0) == doctest::Approx(2.0));
    const GeometryModel ball = GeometryModel::pball(1.0, 2.0, 2);
    const double exact =
        exact_rademacher_support(2, [&](const Vector& s) { return support_function(ball, s); }).value;
    CHECK(exact == doctest::Approx((2.0 + 2.0 * std::sqrt(2.0)) / 8.0).epsilon(1e-14));
  }

  TEST_CASE("Massart") {
    CHECK(massart_bound(rows({{1, 2, 3}})) == 0.0);
    CHECK(massart_bound(rows({{1, 1}, {-1, 1}})) == doctest::Approx(0.832554).epsilon(1e-6));
    Rng rng(7);
    for (int i = 0; i < 100; ++i) {
      const Matrix pts = random_rows(rng, 2 + i % 7, 2 + i % 8, -1.0, 1.0);
      CHECK(exact_rademacher_rows(pts).value <= massart_bound(pts) + 1e-12);
    }
  }

  TEST_CASE("kernel sensitivity bound") {
    CHECK(kernel_sensitivity_class_bound(0.0, vec({3, 4, 5})).value == 0.0);
    const RadEstimate k = kernel_sensitivity_class_bound(0.5, vec({1, 1}));
    CHECK(k.value == doctest::Approx(0.5 * std::sqrt(2.0) / 2.0));
    CHECK(k.method == RadEstimate::Method::kCertifiedUpper);
    CHECK_FALSE(k.notes.empty());
  }

  TEST_CASE("crude decomposition") {
    CHECK(crude_decomposition_bound(0.0, 0.0).value == 0.0);
    CHECK(crude_decomposition_bound(0.2, 0.05).value == doctest::Approx(0.25));
    CHECK(crude_decomposition_bound(0.2, 0.0, true).equality_case);
    CHECK_FALSE(crude_decomposition_bound(0.2, 0.05).equality_case);

    // Matched grids: R(H) + R(H_A) dominates the exact sensitivity-class value.
    Rng rng(8);
    const ApproxOperator q = ApproxOperator::uniform_quantizer(0.5, 1.0);
    const FeatureMap id2 = FeatureMap::identity(2);
    for (int i = 0; i < 20; ++i) {
      const UnlabelledSample s(random_rows(rng, 8, 2, -1.0, 1.0), "s");
      std::vector<Hypothesis> hs;
      Matrix f(9, 8), af(9, 8);
      for (int a = 0; a < 9; ++a) {
        const Vector w = vec({-1.0 + 0.25 * a, 1.0 - 0.2 * a});
        hs.emplace_back(w, id2);
        f.row(a) = (s.inputs * w).transpose();
        af.row(a) = (s.inputs * q.transform(w)).transpose();
      }
      const double sens = exact_rademacher_pointset(sensitivity_pointset(hs, q, s)).value;
      CHECK(crude_decomposition_bound(exact_rademacher_rows(f).value, exact_rademacher_rows(af).value).value >=
            sens - 1e-12);
    }
  }

  TEST_CASE("norm helpers") {
    CHECK(std::isinf(conjugate_exponent(1.0)));
    CHECK(conjugate_exponent(2.0) == 2.0);
    CHECK(conjugate_exponent(3.0) == doctest::Approx(1.5));
    CHECK(lp_norm(vec({3, -4}), 2.0) == doctest::Approx(5.0));
    CHECK(lp_norm(vec({3, -4}), INFINITY) == 4.0);
    const Vector z = holder_maximizer(vec({1, -3, 3}), 1.0);
    CHECK(z == vec({0, -1, 0}));
    const Vector z2 = holder_maximizer(vec({3, 4}), 2.0);
    CHECK(z2.dot(vec({3, 4})) == doctest::Approx(5.0));
  }
}

TEST_SUITE("geometry") {
  TEST_CASE("JSON round trip and closed forms") {
    const nlohmann::json j = {{"variant", "ellipse"}, {"p", 2.0}, {"mu", {3.0, 4.0}}};
    const GeometryModel g = geometry_from_json(j);
    CHECK(rademacher_of(g).value == 2.5);
    const GeometryModel back = geometry_from_json(to_json(g));
    CHECK(rademacher_of(back).value == 2.5);
    CHECK(error_code_of([] {
            geometry_from_json({{"variant", "ellipse"}, {"p", 2.0}, {"mu", {1.0}}, {"extra", 1}});
          }) == ErrorCode::kConfig);
    CHECK(error_code_of([] { geometry_from_json({{"variant", "cone"}, {"p", 2.0}}); }) == ErrorCode::kConfig);

    const GeometryModel ball = geometry_from_json({{"variant", "pball"}, {"p", 2.0}, {"m", 2}, {"radius", 1.0}});
    const RadEstimate rb = rademacher_of(ball);
    CHECK(rb.value == 1.0);
    CHECK(rb.method == RadEstimate::Method::kCertifiedUpper);
  }

  TEST_CASE("support points lie on the component and attain the support") {
    Rng rng(9);
    std::normal_distribution<double> n(0.0, 1.0);
    for (double p : {1.0, 1.5, 2.0, 3.0}) {
      Matrix G(3, 3);
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) G(a, b) = n(rng);
      const ClusterComponent c{vec({0.5, -0.2, 0.1}), Eigen::HouseholderQR<Matrix>(G).householderQ(),
                               vec({1.0, 0.5, 2.0})};
      const Vector d = vec({n(rng), n(rng), n(rng)});
      const Vector x = support_point(c, p, d);
      const Vector z = (c.V.transpose() * (x - c.center)).cwiseQuotient(c.mu);
      CHECK(lp_norm(z, p) == doctest::Approx(1.0));
      for (int i = 0; i < 200; ++i) {
        const Vector y = sample_inside(c, p, rng);
        CHECK(d.dot(y) <= d.dot(x) + 1e-12);
      }
    }
  }
}
