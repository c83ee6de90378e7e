#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "approxsense/model.hpp"

namespace approxsense {

// D^p(f) = E|f(x) - Af(x)|^p)^(1/p) and its estimates.
struct SensitivityEstimate {
  enum class Kind { kEmpirical, kMonteCarloTrue, kAnalyticUpper, kExpectedStochastic };

  double p = 1.0;
  double value = 0.0;
  Kind kind = Kind::kEmpirical;
  std::string provenance;
  double standard_error = 0.0;
  std::int64_t draws = 0;
};

std::string to_string(SensitivityEstimate::Kind kind);

// ((1/m) sum_k |<r, phi_k>|^p)^(1/p) for residual weights r = w - Q(w) and a
// precomputed m x D feature matrix.
double power_mean_abs(const Vector& values, double p);
double empirical_sensitivity_value(const Matrix& features, const Vector& residual, double p);

SensitivityEstimate empirical_sensitivity(const Hypothesis& h, const ApproxOperator& op,
                                          const UnlabelledSample& s, double p = 1.0);

// Monte Carlo estimate of D^p over fresh draws from the task's input law.
// The standard error is that of the mean of |f - Af|^p, propagated through
// the 1/p power by the delta method.
SensitivityEstimate true_sensitivity_mc(const Hypothesis& h, const ApproxOperator& op,
                                        const SyntheticTask& task, double p, std::int64_t n_mc,
                                        std::uint64_t seed);

// Certified over-estimate of D^1 via Cauchy-Schwarz:
// |w - Q(w)|_2 * input_norm_budget, where the budget bounds E|Phi(x)|_2.
SensitivityEstimate analytic_sensitivity_upper(const Hypothesis& h, const ApproxOperator& op,
                                               double input_norm_budget);

// Mean over n_omega operator draws of the empirical sensitivity of A_omega.
SensitivityEstimate expected_sensitivity(const Hypothesis& h, const ApproxOperator& op,
                                         const UnlabelledSample& s, double p, int n_omega,
                                         std::uint64_t seed);

struct DeviationBound {
  double epsilon_u = 0.0;
  std::vector<std::pair<std::string, double>> components;
  double delta = 0.0;
  double C = 0.0;
  std::int64_t m = 0;
};

// 2 rad + 3 C sqrt(ln(2/delta) / 2m)
DeviationBound sensitivity_deviation_bound(double rad, double C, std::int64_t m, double delta);

// 6 rad + t sqrt(2 ln(1/delta) / m) + 6 C ln(1/delta) / m, valid when every
// hypothesis has D^2 <= t.
DeviationBound fast_rate_deviation_bound(double rad, double t, double C, std::int64_t m,
                                         double delta);

// sup_x |Phi(x)|_2 over the rows of `inputs`.
double max_feature_norm(const FeatureMap& map, const Matrix& inputs);

// C = sup over `candidates` of |w - Q(w)|_2 times `feature_norm`; realizes the
// uniform bound |f - Af|_inf <= C over the searched hypotheses.
double uniform_sensitivity_constant(const ApproxOperator& op, const std::vector<Vector>& candidates,
                                    double feature_norm);

enum class CapacityFn { kConstantOne, kWeightNorm };

std::string to_string(CapacityFn fn);

struct VarianceConditionEntry {
  double lhs = 0.0;  // E_omega |A_omega f - f|^2 in empirical L2
  double standard_error = 0.0;
  double capacity = 0.0;
  double rhs = 0.0;  // (alpha * capacity)^2
  bool holds = false;
};

std::vector<VarianceConditionEntry> variance_condition_check(
    const ApproxOperator& op, const std::vector<Hypothesis>& hypotheses, const UnlabelledSample& s,
    double alpha, CapacityFn capacity, int n_omega, std::uint64_t seed);

}  // namespace approxsense
