#include "approxsense/sensitivity.hpp"

#include <algorithm>
#include <cmath>

#include "approxsense/error.hpp"

namespace approxsense {

namespace {

void check_p(double p) {
  require(p >= 1.0 && std::isfinite(p), ErrorCode::kInvalidArgument,
          "sensitivity order p must be a finite value >= 1");
}

void check_delta(double delta) {
  require(delta > 0.0 && delta < 1.0, ErrorCode::kInvalidArgument,
          "confidence delta must lie in (0, 1)");
}

Vector residual_weights(const ApproxOperator& op, const Hypothesis& h) {
  require(op.deterministic(), ErrorCode::kStochasticOperator,
          "empirical sensitivity is undefined for a stochastic operator; use "
          "expected_sensitivity with an explicit seed");
  return h.weights - op.transform(h.weights);
}

}  // namespace

std::string to_string(SensitivityEstimate::Kind kind) {
  switch (kind) {
    case SensitivityEstimate::Kind::kEmpirical: return "empirical";
    case SensitivityEstimate::Kind::kMonteCarloTrue: return "monte_carlo_true";
    case SensitivityEstimate::Kind::kAnalyticUpper: return "analytic_upper";
    case SensitivityEstimate::Kind::kExpectedStochastic: return "expected_stochastic";
  }
  return "unknown";
}

double power_mean_abs(const Vector& values, double p) {
  const Eigen::Index n = values.size();
  if (n == 0) return 0.0;
  double total = 0.0;
  if (p == 1.0) {
    for (Eigen::Index i = 0; i < n; ++i) total += std::abs(values(i));
    return total / static_cast<double>(n);
  }
  if (p == 2.0) {
    for (Eigen::Index i = 0; i < n; ++i) total += values(i) * values(i);
    return std::sqrt(total / static_cast<double>(n));
  }
  double scale = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) scale = std::max(scale, std::abs(values(i)));
  if (scale == 0.0) return 0.0;
  // Scaled to keep |v|^p away from overflow for large p.
  for (Eigen::Index i = 0; i < n; ++i) total += std::pow(std::abs(values(i)) / scale, p);
  return scale * std::pow(total / static_cast<double>(n), 1.0 / p);
}

double empirical_sensitivity_value(const Matrix& features, const Vector& residual, double p) {
  require(features.cols() == residual.size(), ErrorCode::kDimensionMismatch,
          "feature matrix and residual weights disagree in dimension");
  return power_mean_abs(features * residual, p);
}

SensitivityEstimate empirical_sensitivity(const Hypothesis& h, const ApproxOperator& op,
                                          const UnlabelledSample& s, double p) {
  check_p(p);
  const Vector r = residual_weights(op, h);
  SensitivityEstimate est;
  est.p = p;
  est.kind = SensitivityEstimate::Kind::kEmpirical;
  est.value = empirical_sensitivity_value(h.feature_map.apply_rows(s.inputs), r, p);
  est.provenance = s.source_id;
  est.draws = s.size();
  return est;
}

SensitivityEstimate true_sensitivity_mc(const Hypothesis& h, const ApproxOperator& op,
                                        const SyntheticTask& task, double p, std::int64_t n_mc,
                                        std::uint64_t seed) {
  check_p(p);
  require(n_mc >= 1, ErrorCode::kInvalidArgument, "n_mc must be >= 1");
  const Vector r = residual_weights(op, h);
  constexpr std::int64_t kChunk = 1 << 16;
  Vector powered(n_mc);
  for (std::int64_t start = 0, chunk = 0; start < n_mc; start += kChunk, ++chunk) {
    const int count = static_cast<int>(std::min(kChunk, n_mc - start));
    Rng rng = make_rng(derive_seed(seed, static_cast<std::uint64_t>(chunk)));
    const Matrix x = task.input_law.sample(count, task.input_dim(), rng);
    const Vector diff = h.feature_map.apply_rows(x) * r;
    powered.segment(start, count) = diff.cwiseAbs().array().pow(p).matrix();
  }
  const McEstimate moment = mean_and_standard_error(powered);
  SensitivityEstimate est;
  est.p = p;
  est.kind = SensitivityEstimate::Kind::kMonteCarloTrue;
  est.value = std::pow(moment.value, 1.0 / p);
  // d/dm m^(1/p) = (1/p) m^(1/p - 1); zero moment gives zero error.
  est.standard_error = moment.value > 0.0
                           ? moment.standard_error * std::pow(moment.value, 1.0 / p - 1.0) / p
                           : 0.0;
  est.draws = n_mc;
  est.provenance = "mc-seed:" + std::to_string(seed);
  return est;
}

SensitivityEstimate analytic_sensitivity_upper(const Hypothesis& h, const ApproxOperator& op,
                                               double input_norm_budget) {
  require(input_norm_budget >= 0.0 && std::isfinite(input_norm_budget),
          ErrorCode::kInvalidArgument, "input norm budget must be finite and nonnegative");
  SensitivityEstimate est;
  est.p = 1.0;
  est.kind = SensitivityEstimate::Kind::kAnalyticUpper;
  est.value = residual_weights(op, h).norm() * input_norm_budget;
  est.provenance = "cauchy-schwarz";
  return est;
}

SensitivityEstimate expected_sensitivity(const Hypothesis& h, const ApproxOperator& op,
                                         const UnlabelledSample& s, double p, int n_omega,
                                         std::uint64_t seed) {
  check_p(p);
  require(!op.deterministic(), ErrorCode::kDeterministicOperator,
          "expected_sensitivity needs a stochastic operator; use empirical_sensitivity");
  require(n_omega >= 1, ErrorCode::kInvalidArgument, "n_omega must be >= 1");
  const Matrix features = h.feature_map.apply_rows(s.inputs);
  Vector per_draw(n_omega);
  for (int omega = 0; omega < n_omega; ++omega) {
    Rng rng = make_rng(derive_seed(seed, static_cast<std::uint64_t>(omega)));
    const Vector r = h.weights - op.transform(h.weights, rng);
    per_draw(omega) = empirical_sensitivity_value(features, r, p);
  }
  const McEstimate mc = mean_and_standard_error(per_draw);
  SensitivityEstimate est;
  est.p = p;
  est.kind = SensitivityEstimate::Kind::kExpectedStochastic;
  est.value = mc.value;
  est.standard_error = mc.standard_error;
  est.draws = n_omega;
  est.provenance = s.source_id + ";omega-seed:" + std::to_string(seed);
  return est;
}

DeviationBound sensitivity_deviation_bound(double rad, double C, std::int64_t m, double delta) {
  require(rad >= 0.0, ErrorCode::kInvalidArgument, "Rademacher term must be nonnegative");
  require(C > 0.0, ErrorCode::kInvalidArgument, "uniform sensitivity bound C must be positive");
  require(m >= 1, ErrorCode::kInvalidArgument, "sample size must be >= 1");
  check_delta(delta);
  DeviationBound b;
  b.delta = delta;
  b.C = C;
  b.m = m;
  const double rademacher_term = 2.0 * rad;
  const double confidence_term =
      3.0 * C * std::sqrt(std::log(2.0 / delta) / (2.0 * static_cast<double>(m)));
  b.components = {{"rademacher_term", rademacher_term}, {"confidence_term", confidence_term}};
  b.epsilon_u = rademacher_term + confidence_term;
  return b;
}

DeviationBound fast_rate_deviation_bound(double rad, double t, double C, std::int64_t m,
                                         double delta) {
  require(rad >= 0.0, ErrorCode::kInvalidArgument, "Rademacher term must be nonnegative");
  require(t >= 0.0, ErrorCode::kInvalidArgument, "uniform D^2 bound t must be nonnegative");
  require(C > 0.0, ErrorCode::kInvalidArgument, "uniform sensitivity bound C must be positive");
  require(m >= 1, ErrorCode::kInvalidArgument, "sample size must be >= 1");
  check_delta(delta);
  const double md = static_cast<double>(m);
  const double log_term = std::log(1.0 / delta);
  DeviationBound b;
  b.delta = delta;
  b.C = C;
  b.m = m;
  const double rademacher_term = 6.0 * rad;
  const double variance_term = t * std::sqrt(2.0 * log_term / md);
  const double range_term = 6.0 * C * log_term / md;
  b.components = {{"rademacher_term", rademacher_term},
                  {"variance_term", variance_term},
                  {"range_term", range_term}};
  b.epsilon_u = rademacher_term + variance_term + range_term;
  return b;
}

double max_feature_norm(const FeatureMap& map, const Matrix& inputs) {
  return map.apply_rows(inputs).rowwise().norm().maxCoeff();
}

double uniform_sensitivity_constant(const ApproxOperator& op, const std::vector<Vector>& candidates,
                                    double feature_norm) {
  require(op.deterministic(), ErrorCode::kStochasticOperator,
          "uniform sensitivity constant needs a deterministic operator");
  double sup = 0.0;
  for (const Vector& w : candidates) sup = std::max(sup, (w - op.transform(w)).norm());
  return sup * feature_norm;
}

std::string to_string(CapacityFn fn) {
  return fn == CapacityFn::kConstantOne ? "constant_one" : "weight_norm";
}

std::vector<VarianceConditionEntry> variance_condition_check(
    const ApproxOperator& op, const std::vector<Hypothesis>& hypotheses, const UnlabelledSample& s,
    double alpha, CapacityFn capacity, int n_omega, std::uint64_t seed) {
  require(alpha >= 0.0, ErrorCode::kInvalidArgument, "alpha must be nonnegative");
  require(n_omega >= 1, ErrorCode::kInvalidArgument, "n_omega must be >= 1");
  std::vector<VarianceConditionEntry> report;
  report.reserve(hypotheses.size());
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    const Hypothesis& h = hypotheses[i];
    const Matrix features = h.feature_map.apply_rows(s.inputs);
    const int draws = op.deterministic() ? 1 : n_omega;
    Vector sq(draws);
    for (int omega = 0; omega < draws; ++omega) {
      Rng rng = make_rng(derive_seed(derive_seed(seed, i), static_cast<std::uint64_t>(omega)));
      const Vector r = op.transform(h.weights, rng) - h.weights;
      sq(omega) = (features * r).squaredNorm() / static_cast<double>(s.size());
    }
    const McEstimate mc = mean_and_standard_error(sq);
    VarianceConditionEntry entry;
    entry.lhs = mc.value;
    entry.standard_error = mc.standard_error;
    entry.capacity = capacity == CapacityFn::kConstantOne ? 1.0 : h.weights.norm();
    entry.rhs = (alpha * entry.capacity) * (alpha * entry.capacity);
    entry.holds = entry.lhs <= entry.rhs;
    report.push_back(entry);
  }
  return report;
}

}  // namespace approxsense
