#include "approxsense/rademacher.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "approxsense/error.hpp"

namespace approxsense {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kOrthogonalityTol = 1e-10;

void check_p(double p) {
  require(p >= 1.0 && std::isfinite(p), ErrorCode::kInvalidArgument,
          "norm order p must be a finite value >= 1");
}

void check_semi_axes(const Vector& mu, int m, const char* what) {
  require(mu.size() == m, ErrorCode::kDimensionMismatch,
          std::string(what) + ": semi-axis vector has length " + std::to_string(mu.size()) +
              ", expected m = " + std::to_string(m));
  require((mu.array() > 0.0).all() && mu.allFinite(), ErrorCode::kInvalidArgument,
          std::string(what) + ": semi-axes must be positive and finite");
}

void check_orthogonal(const Matrix& V, int m) {
  require(V.rows() == m && V.cols() == m, ErrorCode::kDimensionMismatch,
          "rotation must be " + std::to_string(m) + " x " + std::to_string(m));
  const double err = (V.transpose() * V - Matrix::Identity(m, m)).cwiseAbs().maxCoeff();
  require(err <= kOrthogonalityTol, ErrorCode::kNonOrthogonal,
          "rotation is not orthogonal: max |V^T V - I| = " + std::to_string(err));
}

void fill_signs(std::uint64_t pattern, Vector& sigma) {
  for (Eigen::Index k = 0; k < sigma.size(); ++k) sigma(k) = ((pattern >> k) & 1U) ? -1.0 : 1.0;
}

}  // namespace

std::string to_string(RadEstimate::Method method) {
  switch (method) {
    case RadEstimate::Method::kExactEnumeration: return "exact_enumeration";
    case RadEstimate::Method::kMonteCarlo: return "monte_carlo";
    case RadEstimate::Method::kClosedForm: return "closed_form";
    case RadEstimate::Method::kCertifiedUpper: return "certified_upper";
  }
  return "unknown";
}

double conjugate_exponent(double p) {
  check_p(p);
  return p == 1.0 ? kInf : p / (p - 1.0);
}

double lp_norm(const Vector& v, double q) {
  if (v.size() == 0) return 0.0;
  const double scale = v.cwiseAbs().maxCoeff();
  if (std::isinf(q) || scale == 0.0) return scale;
  if (q == 1.0) return v.cwiseAbs().sum();
  if (q == 2.0) return v.norm();
  return scale * std::pow((v.cwiseAbs() / scale).array().pow(q).sum(), 1.0 / q);
}

Vector holder_maximizer(const Vector& g, double p) {
  check_p(p);
  Vector z = Vector::Zero(g.size());
  if (g.size() == 0) return z;
  const double scale = g.cwiseAbs().maxCoeff();
  if (scale == 0.0) {
    z(0) = 1.0;
    return z;
  }
  if (p == 1.0) {
    Eigen::Index k = 0;
    g.cwiseAbs().maxCoeff(&k);
    z(k) = g(k) >= 0.0 ? 1.0 : -1.0;
    return z;
  }
  // z_k = sign(g_k) |g_k|^(p'-1) / |g|_{p'}^(p'-1), computed on g / max|g|.
  const double q = p / (p - 1.0);
  const Vector a = g.cwiseAbs() / scale;
  const Vector mag = a.array().pow(q - 1.0).matrix();
  const double norm_q = lp_norm(a, q);
  for (Eigen::Index k = 0; k < g.size(); ++k) {
    z(k) = (g(k) >= 0.0 ? 1.0 : -1.0) * mag(k) / std::pow(norm_q, q - 1.0);
  }
  return z;
}

SensitivityPointSet::SensitivityPointSet(Matrix pts) : points(std::move(pts)) {
  require(points.rows() >= 1 && points.cols() >= 1, ErrorCode::kInvalidArgument,
          "sensitivity point set must be nonempty");
  require(points.allFinite() && (points.array() >= 0.0).all(), ErrorCode::kInvalidArgument,
          "sensitivity point set entries must be finite and nonnegative");
}

SensitivityPointSet sensitivity_pointset(const std::vector<Hypothesis>& hypotheses,
                                         const ApproxOperator& op, const UnlabelledSample& s) {
  require(!hypotheses.empty(), ErrorCode::kInvalidArgument, "hypothesis list is empty");
  require(op.deterministic(), ErrorCode::kStochasticOperator,
          "sensitivity point sets need a deterministic operator");
  Matrix pts(static_cast<Eigen::Index>(hypotheses.size()), s.size());
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    const Hypothesis& h = hypotheses[i];
    const Vector r = h.weights - op.transform(h.weights);
    pts.row(static_cast<Eigen::Index>(i)) = (h.feature_map.apply_rows(s.inputs) * r).cwiseAbs().transpose();
  }
  return SensitivityPointSet(std::move(pts));
}

RadEstimate exact_rademacher_support(int m, const SupportFn& support) {
  require(m >= 1, ErrorCode::kInvalidArgument, "m must be >= 1");
  require(m <= kMaxEnumerationSize, ErrorCode::kEnumerationCap,
          "exact enumeration is capped at m = " + std::to_string(kMaxEnumerationSize) +
              " (got m = " + std::to_string(m) + "); use the Monte Carlo estimator");
  const std::uint64_t total = std::uint64_t{1} << m;
  constexpr std::uint64_t kBlock = 4096;
  Vector sigma(m);
  double sum = 0.0;
  for (std::uint64_t start = 0; start < total; start += kBlock) {
    double block = 0.0;
    const std::uint64_t end = std::min(total, start + kBlock);
    for (std::uint64_t pattern = start; pattern < end; ++pattern) {
      fill_signs(pattern, sigma);
      block += support(sigma);
    }
    sum += block;
  }
  RadEstimate est;
  est.value = sum / static_cast<double>(total) / static_cast<double>(m);
  est.method = RadEstimate::Method::kExactEnumeration;
  est.m = m;
  return est;
}

RadEstimate exact_rademacher_pointset(const SensitivityPointSet& ps) {
  return exact_rademacher_rows(ps.points);
}

RadEstimate exact_rademacher_rows(const Matrix& a) {
  require(a.rows() >= 1 && a.cols() >= 1, ErrorCode::kInvalidArgument, "point set is empty");
  const int m = static_cast<int>(a.cols());
  require(m <= kMaxEnumerationSize, ErrorCode::kEnumerationCap,
          "exact enumeration is capped at m = " + std::to_string(kMaxEnumerationSize) +
              " (got m = " + std::to_string(m) + "); use the Monte Carlo estimator");
  // Gray-code walk inside fixed blocks: each block recomputes the row dot
  // products from scratch, then flips one sign per step.
  const int low_bits = std::min(m, 12);
  const std::uint64_t block_size = std::uint64_t{1} << low_bits;
  const std::uint64_t blocks = std::uint64_t{1} << (m - low_bits);
  Vector sigma(m);
  Vector dots(a.rows());
  double sum = 0.0;
  for (std::uint64_t b = 0; b < blocks; ++b) {
    fill_signs(b << low_bits, sigma);
    dots.noalias() = a * sigma;
    double block = dots.maxCoeff();
    for (std::uint64_t j = 1; j < block_size; ++j) {
      const int k = std::countr_zero(j);
      // Flip sigma_k: dot changes by -2 sigma_k a_k.
      dots.noalias() -= (2.0 * sigma(k)) * a.col(k);
      sigma(k) = -sigma(k);
      block += dots.maxCoeff();
    }
    sum += block;
  }
  RadEstimate est;
  est.value = sum / static_cast<double>(blocks * block_size) / static_cast<double>(m);
  est.method = RadEstimate::Method::kExactEnumeration;
  est.m = m;
  return est;
}

RadEstimate mc_rademacher_support(int m, const SupportFn& support, std::int64_t n_sigma,
                                  std::uint64_t seed) {
  require(m >= 1, ErrorCode::kInvalidArgument, "m must be >= 1");
  require(n_sigma >= 1, ErrorCode::kInvalidArgument, "n_sigma must be >= 1");
  Rng rng = make_rng(seed);
  std::bernoulli_distribution coin(0.5);
  Vector sigma(m);
  Vector draws(n_sigma);
  for (std::int64_t i = 0; i < n_sigma; ++i) {
    for (int k = 0; k < m; ++k) sigma(k) = coin(rng) ? -1.0 : 1.0;
    draws(i) = support(sigma);
  }
  const McEstimate mc = mean_and_standard_error(draws);
  RadEstimate est;
  est.value = mc.value / m;
  est.standard_error = mc.standard_error / m;
  est.method = RadEstimate::Method::kMonteCarlo;
  est.m = m;
  est.n_sigma = n_sigma;
  est.seed = seed;
  return est;
}

RadEstimate mc_rademacher_pointset(const SensitivityPointSet& ps, std::int64_t n_sigma,
                                   std::uint64_t seed) {
  return mc_rademacher_rows(ps.points, n_sigma, seed);
}

RadEstimate mc_rademacher_rows(const Matrix& rows, std::int64_t n_sigma, std::uint64_t seed) {
  require(rows.rows() >= 1 && rows.cols() >= 1, ErrorCode::kInvalidArgument, "point set is empty");
  require(n_sigma >= 1, ErrorCode::kInvalidArgument, "n_sigma must be >= 1");
  const Eigen::Index m = rows.cols();
  constexpr std::int64_t kBlock = 256;
  Rng rng = make_rng(seed);
  std::bernoulli_distribution coin(0.5);
  Vector draws(n_sigma);
  Matrix signs(m, kBlock);
  for (std::int64_t start = 0; start < n_sigma; start += kBlock) {
    const Eigen::Index count = static_cast<Eigen::Index>(std::min(kBlock, n_sigma - start));
    for (Eigen::Index j = 0; j < count; ++j)
      for (Eigen::Index k = 0; k < m; ++k) signs(k, j) = coin(rng) ? -1.0 : 1.0;
    const Matrix dots = rows * signs.leftCols(count);
    draws.segment(start, count) = dots.colwise().maxCoeff().transpose();
  }
  const McEstimate mc = mean_and_standard_error(draws);
  RadEstimate est;
  est.value = mc.value / static_cast<double>(m);
  est.standard_error = mc.standard_error / static_cast<double>(m);
  est.method = RadEstimate::Method::kMonteCarlo;
  est.m = static_cast<int>(m);
  est.n_sigma = n_sigma;
  est.seed = seed;
  return est;
}

RadEstimate ellipse_rademacher(const Vector& mu, double p, int m) {
  check_p(p);
  check_semi_axes(mu, m, "ellipse");
  RadEstimate est;
  est.value = lp_norm(mu, conjugate_exponent(p)) / m;
  est.method = RadEstimate::Method::kClosedForm;
  est.m = m;
  return est;
}

RadEstimate union_ellipse_bound(const std::vector<Vector>& mus, double p, int m) {
  require(!mus.empty(), ErrorCode::kInvalidArgument, "ellipse union is empty");
  RadEstimate est = ellipse_rademacher(mus.front(), p, m);
  for (std::size_t i = 1; i < mus.size(); ++i) {
    est.value = std::max(est.value, ellipse_rademacher(mus[i], p, m).value);
  }
  return est;
}

double operator_norm_p_to_1(const Matrix& V, const Vector& mu, double p, bool* exact) {
  check_p(p);
  const Vector col_l1 = V.cwiseAbs().colwise().sum().transpose();
  const bool identity = V.rows() == V.cols() && V == Matrix::Identity(V.rows(), V.cols());
  if (exact) *exact = identity || p == 1.0;
  if (identity) return lp_norm(mu, conjugate_exponent(p));
  // |V L u|_1 <= sum_k |u_k| mu_k |V_k|_1 <= |u|_p |(mu_k |V_k|_1)_k|_{p'};
  // for p = 1 this is the exact max column norm.
  return lp_norm(mu.cwiseProduct(col_l1), conjugate_exponent(p));
}

double operator_norm_p_to_1_lower(const Matrix& M, double p, int starts, std::uint64_t seed) {
  check_p(p);
  require(starts >= 1, ErrorCode::kInvalidArgument, "need at least one start");
  Rng rng = make_rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  double best = 0.0;
  for (int s = 0; s < starts; ++s) {
    Vector u(M.cols());
    for (Eigen::Index k = 0; k < u.size(); ++k) u(k) = gauss(rng);
    u /= lp_norm(u, p);
    double value = (M * u).cwiseAbs().sum();
    for (int iter = 0; iter < 200; ++iter) {
      const Vector signs = (M * u).unaryExpr([](double v) { return v >= 0.0 ? 1.0 : -1.0; });
      const Vector next = holder_maximizer(M.transpose() * signs, p);
      const double next_value = (M * next).cwiseAbs().sum();
      if (next_value <= value * (1.0 + 1e-14)) break;
      u = next;
      value = next_value;
    }
    best = std::max(best, value);
  }
  return best;
}

RadEstimate rotated_union_bound(const std::vector<RotatedEllipse>& components, double p, int m) {
  check_p(p);
  require(!components.empty(), ErrorCode::kInvalidArgument, "rotated ellipse union is empty");
  RadEstimate est;
  est.m = m;
  bool all_exact = true;
  double largest = 0.0;
  for (const auto& c : components) {
    check_semi_axes(c.mu, m, "rotated ellipse");
    check_orthogonal(c.V, m);
    bool exact = false;
    largest = std::max(largest, operator_norm_p_to_1(c.V, c.mu, p, &exact));
    all_exact = all_exact && exact;
  }
  est.value = largest / m;
  est.method = all_exact ? RadEstimate::Method::kClosedForm : RadEstimate::Method::kCertifiedUpper;
  if (!all_exact) est.notes.emplace_back("holder over-estimate of the p->1 operator norm");
  return est;
}

RadEstimate cluster_bound(const std::vector<ClusterComponent>& components, double p, int m) {
  require(!components.empty(), ErrorCode::kInvalidArgument, "cluster model is empty");
  std::vector<RotatedEllipse> shapes;
  double max_center = 0.0;
  for (const auto& c : components) {
    require(c.center.size() == m, ErrorCode::kDimensionMismatch,
            "cluster center has length " + std::to_string(c.center.size()) + ", expected m = " +
                std::to_string(m));
    shapes.push_back({c.V, c.mu});
    max_center = std::max(max_center, c.center.norm());
  }
  RadEstimate est = rotated_union_bound(shapes, p, m);
  const double l = static_cast<double>(components.size());
  est.value += max_center * std::sqrt(2.0 * std::log(l)) / m;
  est.method = RadEstimate::Method::kCertifiedUpper;
  return est;
}

std::pair<double, double> crude_bounds(double R_p, double p) {
  check_p(p);
  require(R_p >= 0.0 && std::isfinite(R_p), ErrorCode::kInvalidArgument,
          "R_p must be finite and nonnegative");
  return {R_p / (2.0 * std::pow(2.0, 1.0 / p)), R_p};
}

double positive_orthant_ball_sup(const Vector& sigma, double radius, double p) {
  require(radius >= 0.0, ErrorCode::kInvalidArgument, "radius must be nonnegative");
  return radius * lp_norm(sigma.cwiseMax(0.0), conjugate_exponent(p));
}

double massart_bound(const Matrix& rows) {
  require(rows.rows() >= 1 && rows.cols() >= 1, ErrorCode::kInvalidArgument,
          "Massart bound needs a nonempty set of vectors");
  const double n = static_cast<double>(rows.rows());
  return rows.rowwise().norm().maxCoeff() * std::sqrt(2.0 * std::log(n)) /
         static_cast<double>(rows.cols());
}

RadEstimate kernel_sensitivity_class_bound(double sup_weight_sensitivity, const Vector& gram_diagonal) {
  require(sup_weight_sensitivity >= 0.0, ErrorCode::kInvalidArgument,
          "weight sensitivity must be nonnegative");
  require(gram_diagonal.size() >= 1, ErrorCode::kInvalidArgument, "Gram diagonal is empty");
  require((gram_diagonal.array() >= 0.0).all(), ErrorCode::kInvalidArgument,
          "Gram diagonal entries must be nonnegative");
  const double m = static_cast<double>(gram_diagonal.size());
  const double root_trace = std::sqrt(gram_diagonal.sum());
  RadEstimate est;
  est.m = static_cast<int>(gram_diagonal.size());
  est.value = sup_weight_sensitivity * root_trace / m;
  est.method = RadEstimate::Method::kCertifiedUpper;
  est.notes.push_back("1/m normalization (tighter than the 1/sqrt(m) display; value there: " +
                      std::to_string(sup_weight_sensitivity * root_trace / std::sqrt(m)) + ")");
  return est;
}

CrudeDecomposition crude_decomposition_bound(double rad_H, double rad_HA, bool approx_class_singleton) {
  require(rad_H >= 0.0 && rad_HA >= 0.0, ErrorCode::kInvalidArgument,
          "Rademacher complexities must be nonnegative");
  return {rad_H + rad_HA, approx_class_singleton};
}

}  // namespace approxsense
