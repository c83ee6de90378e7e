#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "approxsense/model.hpp"
#include "approxsense/rademacher.hpp"

namespace approxsense {

// Weight box [-bound, bound]^D over the feature space of `feature_map`, and
// how to search it.
//
//   grid                points_per_axis values per axis, exhaustive
//   random              n_samples uniform draws
//   coordinate_descent  `restarts` random starts, each refined by `iterations`
//                       sweeps of an axis-wise line search over line_points values
struct SearchDomain {
  enum class Mode { kGrid, kRandom, kCoordinateDescent };

  FeatureMap feature_map = FeatureMap::identity(1);
  double bound = 1.0;
  Mode mode = Mode::kGrid;
  int points_per_axis = 11;
  int n_samples = 1000;
  int restarts = 4;
  int iterations = 20;
  int line_points = 41;
  std::uint64_t seed = 0;

  static constexpr std::int64_t kMaxGridPoints = 1000000;

  static SearchDomain grid(FeatureMap map, double bound, int points_per_axis);
  static SearchDomain random(FeatureMap map, double bound, int n_samples, std::uint64_t seed);
  static SearchDomain coordinate_descent(FeatureMap map, double bound, int restarts, int iterations,
                                         int line_points, std::uint64_t seed);

  int dim() const { return feature_map.feature_dim(); }
  void validate() const;

  double axis_value(int i, int count) const;
  std::int64_t grid_size() const;
  // Enumeration order: the last coordinate varies fastest.
  Vector grid_point(std::int64_t index) const;
  // Grid points in grid mode, the seeded random draws otherwise.
  std::vector<Vector> candidate_points() const;
};

std::string to_string(SearchDomain::Mode mode);

using Objective = std::function<double(const Vector& w)>;
using Feasibility = std::function<bool(const Vector& w)>;

struct OptimizeResult {
  Vector weights;
  double value = 0.0;
  // Values at each strict improvement, in visiting order.
  std::vector<double> trace;
  std::int64_t evaluations = 0;
};

// Grid mode returns the exact feasible minimizer, lowest enumeration index on
// ties. Other modes return the best point visited. Throws InfeasibleError when
// nothing visited is feasible.
OptimizeResult optimize(const Objective& objective, const SearchDomain& domain,
                        const Feasibility& feasible = {});

struct ThresholdSchedule {
  std::vector<double> thresholds;  // t_1 < t_2 < ... < t_K
  std::vector<double> weights;     // w_k, sum <= 1

  // w_k = 2^-k.
  static ThresholdSchedule with_default_weights(std::vector<double> thresholds);
  void validate() const;
  int size() const { return static_cast<int>(thresholds.size()); }
};

struct LambdaCandidate {
  double lambda = 0.0;
  double weight = 0.0;
  Vector weights;
  double empirical_error = 0.0;  // err_hat(A f_lambda)
  double penalty = 0.0;          // 3 sqrt(ln(1/w_k) / 2m)
  double score = 0.0;
};

struct LearnerOutput {
  LearnerOutput(std::string algorithm, Hypothesis hypothesis, Hypothesis approx_hypothesis)
      : algorithm(std::move(algorithm)),
        hypothesis(std::move(hypothesis)),
        approx_hypothesis(std::move(approx_hypothesis)) {}

  std::string algorithm;
  Hypothesis hypothesis;
  Hypothesis approx_hypothesis;
  std::vector<double> objective_trace;
  double objective_value = 0.0;
  std::optional<int> chosen_k;  // 1-based
  std::optional<double> chosen_t;
  std::optional<double> lambda;
  bool feasible = true;
  std::string sensitivity_variant;
  // SRM: candidates with D_hat exactly on a threshold t_k + eps_u, and
  // whether the chosen hypothesis exceeded the last threshold.
  std::int64_t boundary_hits = 0;
  bool clamped = false;
  std::vector<LambdaCandidate> candidates;
};

// Evaluation helpers shared by the learners and their oracles. Features are
// computed once per sample.
class ObjectiveTerms {
 public:
  ObjectiveTerms(const LabelledSample& labelled, const std::optional<UnlabelledSample>& unlabelled,
                 const ApproxOperator& op, const LossSpec& spec, const FeatureMap& map, double p = 1.0);

  const ApproxOperator& op() const { return op_; }
  const LossSpec& spec() const { return spec_; }
  int m() const { return static_cast<int>(targets_.size()); }
  const Matrix& labelled_features() const { return labelled_features_; }

  double error(const Vector& w) const;         // err_hat(f)
  double approx_error(const Vector& w) const;  // err_hat(Af)
  double empirical_sensitivity(const Vector& w) const;

 private:
  Matrix labelled_features_;
  Vector targets_;
  std::optional<Matrix> unlabelled_features_;
  ApproxOperator op_;
  LossSpec spec_;
  double p_;
};

// Sensitivity functional used by sensitivity_regularized_erm: D (Monte Carlo
// true), D_hat (empirical) or the analytic upper bound.
struct SensitivityFn {
  std::string variant;
  std::function<double(const Vector& w)> evaluate;

  static SensitivityFn true_mc(const ApproxOperator& op, const SyntheticTask& task, double p,
                               std::int64_t n_mc, std::uint64_t seed);
  static SensitivityFn empirical(const ApproxOperator& op, const UnlabelledSample& s,
                                 const FeatureMap& map, double p);
  static SensitivityFn analytic(const ApproxOperator& op, double input_norm_budget);
};

// Maps a threshold tau to an estimate of R_hat_m(H_hat_tau).
using RadEstimator = std::function<RadEstimate(double threshold)>;

// Monte Carlo Rademacher complexity, on the labelled inputs, of the domain's
// candidate points whose empirical sensitivity is <= threshold. An empty
// subset has complexity 0.
RadEstimator grid_rad_estimator(const LabelledSample& labelled, const UnlabelledSample& unlabelled,
                                const ApproxOperator& op, const SearchDomain& domain, double p,
                                std::int64_t n_sigma, std::uint64_t seed);

// argmin err_hat(Af) subject to D_hat(f) < t; t may be infinite.
LearnerOutput constrained_erm(const LabelledSample& labelled, const UnlabelledSample& unlabelled,
                              const ApproxOperator& op, double t, double p, const LossSpec& spec,
                              const SearchDomain& domain);

// argmin err_hat(f) + 2 rho R_hat(H_hat_{t_k + eps_u}) + 3 sqrt(ln(1/w_k) / 2m)
// with k = k_hat(f) = min{k : D_hat(f) <= t_k + eps_u}, clamped to K.
LearnerOutput srm_learner(const LabelledSample& labelled, const UnlabelledSample& unlabelled,
                          const ApproxOperator& op, const ThresholdSchedule& schedule,
                          double epsilon_u, const RadEstimator& rad_estimator, const LossSpec& spec,
                          const SearchDomain& domain, double p = 1.0);

// argmin err_hat(Af) + rho * sensitivity(f), rho taken from the loss.
LearnerOutput sensitivity_regularized_erm(const LabelledSample& labelled, const ApproxOperator& op,
                                          const SensitivityFn& sensitivity, const LossSpec& spec,
                                          const SearchDomain& domain);

// argmin err_hat(Af) + lambda D_hat(f)
LearnerOutput lambda_erm(const LabelledSample& labelled, const UnlabelledSample& unlabelled,
                         const ApproxOperator& op, double lambda, double p, const LossSpec& spec,
                         const SearchDomain& domain);

// argmin err_hat(Af) + lambda * overline_D(f), overline_D = |w - Q(w)|_2 * budget.
LearnerOutput analytic_lambda_erm(const LabelledSample& labelled, const ApproxOperator& op,
                                  double lambda, double input_norm_budget, const LossSpec& spec,
                                  const SearchDomain& domain);

// Runs lambda_erm for every lambda_k and keeps the one minimizing
// err_hat(A f_k) + 3 sqrt(ln(1/w_k) / 2m); lowest index on ties.
LearnerOutput lambda_grid_srm(const LabelledSample& labelled, const UnlabelledSample& unlabelled,
                              const ApproxOperator& op, const std::vector<double>& lambdas,
                              const std::vector<double>& weights, double p, const LossSpec& spec,
                              const SearchDomain& domain);

}  // namespace approxsense
