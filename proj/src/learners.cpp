#include "approxsense/learners.hpp"

#include <cmath>
#include <limits>
#include <memory>

#include "approxsense/error.hpp"
#include "approxsense/sensitivity.hpp"

namespace approxsense {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double weight_penalty(double w_k, int m) {
  return 3.0 * std::sqrt(std::log(1.0 / w_k) / (2.0 * static_cast<double>(m)));
}

LearnerOutput make_output(std::string algorithm, const OptimizeResult& r, const ApproxOperator& op,
                          const SearchDomain& domain) {
  Hypothesis h(r.weights, domain.feature_map);
  LearnerOutput out(std::move(algorithm), h, apply_operator(op, h));
  out.objective_trace = r.trace;
  out.objective_value = r.value;
  return out;
}

Vector random_point(const SearchDomain& domain, Rng& rng) {
  std::uniform_real_distribution<double> coord(-domain.bound, domain.bound);
  Vector w(domain.dim());
  for (Eigen::Index k = 0; k < w.size(); ++k) w(k) = coord(rng);
  return w;
}

struct Incumbent {
  OptimizeResult result;
  bool found = false;

  void offer(const Vector& w, double value) {
    ++result.evaluations;
    if (!found || value < result.value) {
      found = true;
      result.weights = w;
      result.value = value;
      result.trace.push_back(value);
    }
  }
};

}  // namespace

std::string to_string(SearchDomain::Mode mode) {
  switch (mode) {
    case SearchDomain::Mode::kGrid: return "grid";
    case SearchDomain::Mode::kRandom: return "random";
    case SearchDomain::Mode::kCoordinateDescent: return "coordinate_descent";
  }
  return "unknown";
}

SearchDomain SearchDomain::grid(FeatureMap map, double bound, int points_per_axis) {
  SearchDomain d;
  d.feature_map = std::move(map);
  d.bound = bound;
  d.mode = Mode::kGrid;
  d.points_per_axis = points_per_axis;
  d.validate();
  return d;
}

SearchDomain SearchDomain::random(FeatureMap map, double bound, int n_samples, std::uint64_t seed) {
  SearchDomain d;
  d.feature_map = std::move(map);
  d.bound = bound;
  d.mode = Mode::kRandom;
  d.n_samples = n_samples;
  d.seed = seed;
  d.validate();
  return d;
}

SearchDomain SearchDomain::coordinate_descent(FeatureMap map, double bound, int restarts,
                                              int iterations, int line_points, std::uint64_t seed) {
  SearchDomain d;
  d.feature_map = std::move(map);
  d.bound = bound;
  d.mode = Mode::kCoordinateDescent;
  d.restarts = restarts;
  d.iterations = iterations;
  d.line_points = line_points;
  d.seed = seed;
  d.validate();
  return d;
}

void SearchDomain::validate() const {
  require(bound > 0.0 && std::isfinite(bound), ErrorCode::kInvalidArgument,
          "search bound W must be positive");
  switch (mode) {
    case Mode::kGrid:
      require(points_per_axis >= 1, ErrorCode::kInvalidArgument, "points_per_axis must be >= 1");
      require(grid_size() <= kMaxGridPoints, ErrorCode::kInvalidArgument,
              "grid has more than 10^6 points; use random or coordinate_descent search");
      break;
    case Mode::kRandom:
      require(n_samples >= 1, ErrorCode::kInvalidArgument, "n_samples must be >= 1");
      break;
    case Mode::kCoordinateDescent:
      require(restarts >= 1 && iterations >= 1 && line_points >= 2, ErrorCode::kInvalidArgument,
              "coordinate descent needs restarts >= 1, iterations >= 1, line_points >= 2");
      break;
  }
}

double SearchDomain::axis_value(int i, int count) const {
  if (count == 1) return 0.0;
  return -bound + (2.0 * bound * i) / (count - 1);
}

std::int64_t SearchDomain::grid_size() const {
  std::int64_t n = 1;
  for (int k = 0; k < dim(); ++k) {
    n *= points_per_axis;
    if (n > kMaxGridPoints) return kMaxGridPoints + 1;
  }
  return n;
}

Vector SearchDomain::grid_point(std::int64_t index) const {
  Vector w(dim());
  for (int k = dim() - 1; k >= 0; --k) {
    w(k) = axis_value(static_cast<int>(index % points_per_axis), points_per_axis);
    index /= points_per_axis;
  }
  return w;
}

std::vector<Vector> SearchDomain::candidate_points() const {
  std::vector<Vector> points;
  if (mode == Mode::kGrid) {
    const std::int64_t n = grid_size();
    points.reserve(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) points.push_back(grid_point(i));
    return points;
  }
  Rng rng = make_rng(derive_seed(seed, Stream::kSearch));
  const int n = mode == Mode::kRandom ? n_samples : restarts;
  for (int i = 0; i < n; ++i) points.push_back(random_point(*this, rng));
  return points;
}

OptimizeResult optimize(const Objective& objective, const SearchDomain& domain,
                        const Feasibility& feasible) {
  domain.validate();
  Incumbent best;
  std::int64_t visited = 0;
  auto consider = [&](const Vector& w) {
    ++visited;
    if (feasible && !feasible(w)) return;
    best.offer(w, objective(w));
  };

  if (domain.mode == SearchDomain::Mode::kCoordinateDescent) {
    for (const Vector& start : domain.candidate_points()) {
      if (feasible && !feasible(start)) {
        ++visited;
        continue;
      }
      Vector w = start;
      double value = objective(w);
      best.offer(w, value);
      for (int it = 0; it < domain.iterations; ++it) {
        bool moved = false;
        for (int k = 0; k < domain.dim(); ++k) {
          for (int i = 0; i < domain.line_points; ++i) {
            Vector trial = w;
            trial(k) = domain.axis_value(i, domain.line_points);
            ++visited;
            if (feasible && !feasible(trial)) continue;
            const double v = objective(trial);
            if (v < value) {
              w = trial;
              value = v;
              moved = true;
              best.offer(w, value);
            }
          }
        }
        if (!moved) break;
      }
    }
  } else {
    for (const Vector& w : domain.candidate_points()) consider(w);
  }

  if (!best.found) {
    throw InfeasibleError("no feasible point among " + std::to_string(visited) + " candidates",
                          std::numeric_limits<double>::quiet_NaN());
  }
  return best.result;
}

ThresholdSchedule ThresholdSchedule::with_default_weights(std::vector<double> thresholds) {
  ThresholdSchedule s;
  s.thresholds = std::move(thresholds);
  for (std::size_t k = 1; k <= s.thresholds.size(); ++k) s.weights.push_back(std::ldexp(1.0, -static_cast<int>(k)));
  s.validate();
  return s;
}

void ThresholdSchedule::validate() const {
  require(!thresholds.empty(), ErrorCode::kInvalidArgument, "threshold schedule is empty");
  require(weights.size() == thresholds.size(), ErrorCode::kInvalidArgument,
          "schedule needs one weight per threshold");
  double total = 0.0;
  for (std::size_t k = 0; k < thresholds.size(); ++k) {
    require(thresholds[k] > 0.0, ErrorCode::kInvalidArgument, "thresholds must be positive");
    require(k == 0 || thresholds[k] > thresholds[k - 1], ErrorCode::kInvalidArgument,
            "thresholds must be strictly increasing");
    require(weights[k] > 0.0 && weights[k] <= 1.0, ErrorCode::kInvalidArgument,
            "schedule weights must lie in (0, 1]");
    total += weights[k];
  }
  require(total <= 1.0 + 1e-12, ErrorCode::kInvalidArgument, "schedule weights sum to more than 1");
}

ObjectiveTerms::ObjectiveTerms(const LabelledSample& labelled,
                               const std::optional<UnlabelledSample>& unlabelled,
                               const ApproxOperator& op, const LossSpec& spec, const FeatureMap& map,
                               double p)
    : labelled_features_(map.apply_rows(labelled.inputs)),
      targets_(labelled.targets),
      op_(op),
      spec_(spec),
      p_(p) {
  require(op.deterministic(), ErrorCode::kStochasticOperator,
          "learners need a deterministic approximation operator");
  require(p >= 1.0, ErrorCode::kInvalidArgument, "sensitivity order p must be >= 1");
  if (unlabelled) unlabelled_features_ = map.apply_rows(unlabelled->inputs);
}

double ObjectiveTerms::error(const Vector& w) const {
  return approxsense::empirical_error(labelled_features_ * w, targets_, spec_);
}

double ObjectiveTerms::approx_error(const Vector& w) const {
  return approxsense::empirical_error(labelled_features_ * op_.transform(w), targets_, spec_);
}

double ObjectiveTerms::empirical_sensitivity(const Vector& w) const {
  require(unlabelled_features_.has_value(), ErrorCode::kInvalidArgument,
          "empirical sensitivity needs an unlabelled sample");
  return empirical_sensitivity_value(*unlabelled_features_, w - op_.transform(w), p_);
}

SensitivityFn SensitivityFn::true_mc(const ApproxOperator& op, const SyntheticTask& task, double p,
                                     std::int64_t n_mc, std::uint64_t seed) {
  return {"true_mc", [op, task, p, n_mc, seed](const Vector& w) {
            return true_sensitivity_mc(Hypothesis(w, task.teacher.feature_map), op, task, p, n_mc, seed)
                .value;
          }};
}

SensitivityFn SensitivityFn::empirical(const ApproxOperator& op, const UnlabelledSample& s,
                                       const FeatureMap& map, double p) {
  require(op.deterministic(), ErrorCode::kStochasticOperator,
          "empirical sensitivity is undefined for a stochastic operator; use expected_sensitivity");
  auto features = std::make_shared<const Matrix>(map.apply_rows(s.inputs));
  return {"empirical", [op, features, p](const Vector& w) {
            return empirical_sensitivity_value(*features, w - op.transform(w), p);
          }};
}

SensitivityFn SensitivityFn::analytic(const ApproxOperator& op, double input_norm_budget) {
  require(input_norm_budget >= 0.0, ErrorCode::kInvalidArgument, "input norm budget must be nonnegative");
  return {"analytic", [op, input_norm_budget](const Vector& w) {
            return (w - op.transform(w)).norm() * input_norm_budget;
          }};
}

RadEstimator grid_rad_estimator(const LabelledSample& labelled, const UnlabelledSample& unlabelled,
                                const ApproxOperator& op, const SearchDomain& domain, double p,
                                std::int64_t n_sigma, std::uint64_t seed) {
  const std::vector<Vector> points = domain.candidate_points();
  const Matrix lab = domain.feature_map.apply_rows(labelled.inputs);
  const Matrix unl = domain.feature_map.apply_rows(unlabelled.inputs);
  auto sens = std::make_shared<std::vector<double>>();
  auto preds = std::make_shared<Matrix>(static_cast<Eigen::Index>(points.size()), lab.rows());
  for (std::size_t i = 0; i < points.size(); ++i) {
    sens->push_back(empirical_sensitivity_value(unl, points[i] - op.transform(points[i]), p));
    preds->row(static_cast<Eigen::Index>(i)) = (lab * points[i]).transpose();
  }
  const int m = static_cast<int>(lab.rows());
  return [sens, preds, m, n_sigma, seed](double threshold) {
    std::vector<Eigen::Index> rows;
    for (std::size_t i = 0; i < sens->size(); ++i)
      if ((*sens)[i] <= threshold) rows.push_back(static_cast<Eigen::Index>(i));
    if (rows.empty()) {
      RadEstimate empty;
      empty.m = m;
      empty.method = RadEstimate::Method::kMonteCarlo;
      empty.n_sigma = n_sigma;
      empty.seed = seed;
      empty.notes.emplace_back("empty class");
      return empty;
    }
    return mc_rademacher_rows((*preds)(rows, Eigen::all), n_sigma, seed);
  };
}

LearnerOutput constrained_erm(const LabelledSample& labelled, const UnlabelledSample& unlabelled,
                              const ApproxOperator& op, double t, double p, const LossSpec& spec,
                              const SearchDomain& domain) {
  require(t > 0.0, ErrorCode::kInvalidArgument, "threshold t must be positive");
  const ObjectiveTerms terms(labelled, unlabelled, op, spec, domain.feature_map, p);
  double min_sensitivity = kInf;
  auto feasible = [&](const Vector& w) {
    const double d = terms.empirical_sensitivity(w);
    min_sensitivity = std::min(min_sensitivity, d);
    return d < t;
  };
  OptimizeResult r;
  try {
    r = optimize([&](const Vector& w) { return terms.approx_error(w); }, domain, feasible);
  } catch (const InfeasibleError&) {
    throw InfeasibleError("no hypothesis with empirical sensitivity below t = " + std::to_string(t) +
                              "; smallest achievable is " + std::to_string(min_sensitivity),
                          min_sensitivity);
  }
  LearnerOutput out = make_output("constrained_erm", r, op, domain);
  out.chosen_t = t;
  out.sensitivity_variant = "empirical";
  return out;
}

LearnerOutput srm_learner(const LabelledSample& labelled, const UnlabelledSample& unlabelled,
                          const ApproxOperator& op, const ThresholdSchedule& schedule,
                          double epsilon_u, const RadEstimator& rad_estimator, const LossSpec& spec,
                          const SearchDomain& domain, double p) {
  schedule.validate();
  require(epsilon_u >= 0.0, ErrorCode::kInvalidArgument, "epsilon_u must be nonnegative");
  const ObjectiveTerms terms(labelled, unlabelled, op, spec, domain.feature_map, p);
  const int K = schedule.size();
  std::vector<double> penalty(K);
  for (int k = 0; k < K; ++k) {
    const double rad = rad_estimator(schedule.thresholds[k] + epsilon_u).value;
    penalty[k] = 2.0 * spec.rho() * rad + weight_penalty(schedule.weights[k], terms.m());
  }
  std::int64_t boundary_hits = 0;
  auto k_hat = [&](const Vector& w, bool* clamped) {
    const double d = terms.empirical_sensitivity(w);
    for (int k = 0; k < K; ++k) {
      const double level = schedule.thresholds[k] + epsilon_u;
      if (d == level) ++boundary_hits;
      if (d <= level) {
        if (clamped) *clamped = false;
        return k;
      }
    }
    if (clamped) *clamped = true;
    return K - 1;
  };
  const OptimizeResult r = optimize(
      [&](const Vector& w) { return terms.error(w) + penalty[k_hat(w, nullptr)]; }, domain);
  LearnerOutput out = make_output("srm", r, op, domain);
  bool clamped = false;
  const std::int64_t hits = boundary_hits;
  out.chosen_k = k_hat(r.weights, &clamped) + 1;
  out.boundary_hits = hits;
  out.clamped = clamped;
  out.chosen_t = schedule.thresholds[*out.chosen_k - 1];
  out.sensitivity_variant = "empirical";
  return out;
}

LearnerOutput sensitivity_regularized_erm(const LabelledSample& labelled, const ApproxOperator& op,
                                          const SensitivityFn& sensitivity, const LossSpec& spec,
                                          const SearchDomain& domain) {
  const ObjectiveTerms terms(labelled, std::nullopt, op, spec, domain.feature_map);
  const double rho = spec.rho();
  const OptimizeResult r = optimize(
      [&](const Vector& w) { return terms.approx_error(w) + rho * sensitivity.evaluate(w); }, domain);
  LearnerOutput out = make_output("sensitivity_regularized_erm", r, op, domain);
  out.lambda = rho;
  out.sensitivity_variant = sensitivity.variant;
  return out;
}

LearnerOutput lambda_erm(const LabelledSample& labelled, const UnlabelledSample& unlabelled,
                         const ApproxOperator& op, double lambda, double p, const LossSpec& spec,
                         const SearchDomain& domain) {
  require(lambda >= 0.0, ErrorCode::kInvalidArgument, "lambda must be nonnegative");
  const ObjectiveTerms terms(labelled, unlabelled, op, spec, domain.feature_map, p);
  const OptimizeResult r = optimize(
      [&](const Vector& w) { return terms.approx_error(w) + lambda * terms.empirical_sensitivity(w); },
      domain);
  LearnerOutput out = make_output("lambda_erm", r, op, domain);
  out.lambda = lambda;
  out.sensitivity_variant = "empirical";
  return out;
}

LearnerOutput analytic_lambda_erm(const LabelledSample& labelled, const ApproxOperator& op,
                                  double lambda, double input_norm_budget, const LossSpec& spec,
                                  const SearchDomain& domain) {
  require(lambda >= 0.0, ErrorCode::kInvalidArgument, "lambda must be nonnegative");
  const ObjectiveTerms terms(labelled, std::nullopt, op, spec, domain.feature_map);
  const SensitivityFn overline = SensitivityFn::analytic(op, input_norm_budget);
  const OptimizeResult r = optimize(
      [&](const Vector& w) { return terms.approx_error(w) + lambda * overline.evaluate(w); }, domain);
  LearnerOutput out = make_output("analytic_lambda_erm", r, op, domain);
  out.lambda = lambda;
  out.sensitivity_variant = overline.variant;
  return out;
}

LearnerOutput lambda_grid_srm(const LabelledSample& labelled, const UnlabelledSample& unlabelled,
                              const ApproxOperator& op, const std::vector<double>& lambdas,
                              const std::vector<double>& weights, double p, const LossSpec& spec,
                              const SearchDomain& domain) {
  require(!lambdas.empty(), ErrorCode::kInvalidArgument, "lambda list is empty");
  require(weights.size() == lambdas.size(), ErrorCode::kInvalidArgument,
          "need one prior weight per lambda");
  double total = 0.0;
  for (double w : weights) {
    require(w > 0.0 && w <= 1.0, ErrorCode::kInvalidArgument, "prior weights must lie in (0, 1]");
    total += w;
  }
  require(total <= 1.0 + 1e-12, ErrorCode::kInvalidArgument, "prior weights sum to more than 1");
  const ObjectiveTerms terms(labelled, unlabelled, op, spec, domain.feature_map, p);
  std::vector<LambdaCandidate> candidates;
  std::size_t best = 0;
  std::optional<LearnerOutput> chosen;
  for (std::size_t k = 0; k < lambdas.size(); ++k) {
    LearnerOutput run = lambda_erm(labelled, unlabelled, op, lambdas[k], p, spec, domain);
    LambdaCandidate c;
    c.lambda = lambdas[k];
    c.weight = weights[k];
    c.weights = run.hypothesis.weights;
    c.empirical_error = terms.approx_error(c.weights);
    c.penalty = weight_penalty(weights[k], terms.m());
    c.score = c.empirical_error + c.penalty;
    candidates.push_back(c);
    if (!chosen || c.score < candidates[best].score) {
      best = k;
      chosen = std::move(run);
    }
  }
  LearnerOutput out = std::move(*chosen);
  out.algorithm = "lambda_grid_srm";
  out.chosen_k = static_cast<int>(best) + 1;
  out.objective_value = candidates[best].score;
  out.candidates = std::move(candidates);
  return out;
}

}  // namespace approxsense
