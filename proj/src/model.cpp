#include "approxsense/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "approxsense/error.hpp"

namespace approxsense {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kDimensionMismatch: return "dimension_mismatch";
    case ErrorCode::kStochasticOperator: return "stochastic_operator";
    case ErrorCode::kDeterministicOperator: return "deterministic_operator";
    case ErrorCode::kMissingSeed: return "missing_seed";
    case ErrorCode::kInfeasible: return "infeasible";
    case ErrorCode::kEnumerationCap: return "enumeration_cap";
    case ErrorCode::kNonOrthogonal: return "non_orthogonal";
    case ErrorCode::kIngestion: return "ingestion";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kMissingConstituent: return "missing_constituent";
    case ErrorCode::kUnknownSuite: return "unknown_suite";
    case ErrorCode::kCorruptReport: return "corrupt_report";
  }
  return "unknown";
}

namespace {

bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace

LabelledSample::LabelledSample(Matrix in, Vector t, std::string id)
    : inputs(std::move(in)), targets(std::move(t)), source_id(std::move(id)) {
  require(inputs.rows() == targets.size(), ErrorCode::kDimensionMismatch,
          "labelled sample: " + std::to_string(inputs.rows()) + " input rows but " +
              std::to_string(targets.size()) + " targets");
  require(inputs.rows() >= 1, ErrorCode::kInvalidArgument, "labelled sample is empty");
  require(all_finite(inputs) && targets.allFinite(), ErrorCode::kInvalidArgument,
          "labelled sample contains non-finite entries");
}

UnlabelledSample::UnlabelledSample(Matrix in, std::string id)
    : inputs(std::move(in)), source_id(std::move(id)) {
  require(inputs.rows() >= 1, ErrorCode::kInvalidArgument, "unlabelled sample is empty");
  require(all_finite(inputs), ErrorCode::kInvalidArgument,
          "unlabelled sample contains non-finite entries");
}

// ---------------------------------------------------------------------------
// FeatureMap

FeatureMap FeatureMap::identity(int input_dim) {
  require(input_dim >= 1, ErrorCode::kInvalidArgument, "identity map needs input_dim >= 1");
  return FeatureMap(Kind::kIdentity, input_dim);
}

FeatureMap FeatureMap::polynomial(int input_dim, int degree) {
  require(input_dim >= 1, ErrorCode::kInvalidArgument, "polynomial map needs input_dim >= 1");
  require(degree >= 1, ErrorCode::kInvalidArgument, "polynomial degree must be >= 1");
  FeatureMap map(Kind::kPolynomial, input_dim);
  map.degree_ = degree;
  return map;
}

FeatureMap FeatureMap::radial_basis(Matrix centers, double width) {
  require(centers.rows() >= 1 && centers.cols() >= 1, ErrorCode::kInvalidArgument,
          "radial basis map needs at least one center");
  require(width > 0.0 && std::isfinite(width), ErrorCode::kInvalidArgument,
          "radial basis width must be positive");
  FeatureMap map(Kind::kRadialBasis, static_cast<int>(centers.cols()));
  map.centers_ = std::move(centers);
  map.width_ = width;
  return map;
}

int FeatureMap::feature_dim() const {
  switch (kind_) {
    case Kind::kIdentity: return input_dim_;
    case Kind::kPolynomial: return 1 + input_dim_ * degree_;
    case Kind::kRadialBasis: return static_cast<int>(centers_.rows());
  }
  return 0;
}

Vector FeatureMap::apply(const Eigen::Ref<const Vector>& x) const {
  require(x.size() == input_dim_, ErrorCode::kDimensionMismatch,
          "feature map expects input of dimension " + std::to_string(input_dim_) + ", got " +
              std::to_string(x.size()));
  switch (kind_) {
    case Kind::kIdentity: return x;
    case Kind::kPolynomial: {
      Vector phi(feature_dim());
      phi(0) = 1.0;
      Vector power = x;
      for (int g = 0; g < degree_; ++g) {
        phi.segment(1 + g * input_dim_, input_dim_) = power;
        power = power.cwiseProduct(x);
      }
      return phi;
    }
    case Kind::kRadialBasis: {
      Vector phi(centers_.rows());
      const double scale = 1.0 / (2.0 * width_ * width_);
      for (Eigen::Index j = 0; j < centers_.rows(); ++j) {
        phi(j) = std::exp(-(centers_.row(j).transpose() - x).squaredNorm() * scale);
      }
      return phi;
    }
  }
  return {};
}

Matrix FeatureMap::apply_rows(const Matrix& inputs) const {
  require(inputs.cols() == input_dim_, ErrorCode::kDimensionMismatch,
          "feature map expects inputs with " + std::to_string(input_dim_) + " columns, got " +
              std::to_string(inputs.cols()));
  if (kind_ == Kind::kIdentity) return inputs;
  Matrix out(inputs.rows(), feature_dim());
  for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
    out.row(i) = apply(inputs.row(i).transpose()).transpose();
  }
  return out;
}

std::string to_string(FeatureMap::Kind kind) {
  switch (kind) {
    case FeatureMap::Kind::kIdentity: return "identity";
    case FeatureMap::Kind::kPolynomial: return "polynomial";
    case FeatureMap::Kind::kRadialBasis: return "radial_basis";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Hypothesis

Hypothesis::Hypothesis(Vector w, FeatureMap map) : weights(std::move(w)), feature_map(std::move(map)) {
  require(weights.size() == feature_map.feature_dim(), ErrorCode::kDimensionMismatch,
          "hypothesis has " + std::to_string(weights.size()) +
              " weights but the feature space has dimension " +
              std::to_string(feature_map.feature_dim()));
  require(weights.allFinite(), ErrorCode::kInvalidArgument, "hypothesis weights must be finite");
}

double predict(const Hypothesis& h, const Eigen::Ref<const Vector>& x) {
  return h.weights.dot(h.feature_map.apply(x));
}

Vector predict_rows(const Hypothesis& h, const Matrix& inputs) {
  return h.feature_map.apply_rows(inputs) * h.weights;
}

// ---------------------------------------------------------------------------
// ApproxOperator

ApproxOperator ApproxOperator::uniform_quantizer(double step, double clamp, double offset) {
  require(step > 0.0 && std::isfinite(step), ErrorCode::kInvalidArgument,
          "quantizer step must be positive");
  require(clamp > 0.0 && std::isfinite(clamp), ErrorCode::kInvalidArgument,
          "quantizer clamp range must be positive");
  require(std::isfinite(offset), ErrorCode::kInvalidArgument, "quantizer offset must be finite");
  ApproxOperator op(Kind::kUniformQuantizer);
  op.step_ = step;
  op.clamp_ = clamp;
  op.offset_ = offset;
  return op;
}

ApproxOperator ApproxOperator::uniform_levels(int levels, double clamp) {
  require(levels >= 1, ErrorCode::kInvalidArgument, "level count must be >= 1");
  if (levels == 1) return uniform_quantizer(2.0 * clamp, clamp);
  const double step = 2.0 * clamp / (levels - 1);
  return uniform_quantizer(step, clamp, levels % 2 == 0 ? step / 2.0 : 0.0);
}

ApproxOperator ApproxOperator::magnitude_pruner(int keep) {
  require(keep >= 0, ErrorCode::kInvalidArgument, "pruner keep-count must be >= 0");
  ApproxOperator op(Kind::kMagnitudePruner);
  op.keep_ = keep;
  return op;
}

ApproxOperator ApproxOperator::stochastic_rounder(double step, double clamp, double offset) {
  ApproxOperator op = uniform_quantizer(step, clamp, offset);
  op.kind_ = Kind::kStochasticRounder;
  return op;
}

double ApproxOperator::grid_index(double w) const {
  return (std::clamp(w, -clamp_, clamp_) - offset_) / step_;
}

Vector ApproxOperator::transform(const Vector& w) const {
  switch (kind_) {
    case Kind::kUniformQuantizer: {
      Vector q(w.size());
      // nearbyint honours the default round-to-nearest-even mode.
      for (Eigen::Index i = 0; i < w.size(); ++i) {
        q(i) = offset_ + std::nearbyint(grid_index(w(i))) * step_;
      }
      return q;
    }
    case Kind::kMagnitudePruner: {
      require(keep_ <= w.size(), ErrorCode::kInvalidArgument,
              "pruner keep-count " + std::to_string(keep_) + " exceeds weight dimension " +
                  std::to_string(w.size()));
      std::vector<Eigen::Index> order(static_cast<std::size_t>(w.size()));
      std::iota(order.begin(), order.end(), Eigen::Index{0});
      std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        return std::abs(w(a)) > std::abs(w(b));
      });
      Vector q = Vector::Zero(w.size());
      for (int i = 0; i < keep_; ++i) q(order[static_cast<std::size_t>(i)]) = w(order[static_cast<std::size_t>(i)]);
      return q;
    }
    case Kind::kStochasticRounder:
      throw Error(ErrorCode::kMissingSeed, "stochastic rounder requires a noise seed");
  }
  return w;
}

Vector ApproxOperator::transform(const Vector& w, Rng& rng) const {
  if (deterministic()) return transform(w);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  Vector q(w.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    const double y = grid_index(w(i));
    const double lower = std::floor(y);
    const double up = uniform(rng) < (y - lower) ? 1.0 : 0.0;
    q(i) = offset_ + (lower + up) * step_;
  }
  return q;
}

std::string to_string(ApproxOperator::Kind kind) {
  switch (kind) {
    case ApproxOperator::Kind::kUniformQuantizer: return "uniform_quantizer";
    case ApproxOperator::Kind::kMagnitudePruner: return "magnitude_pruner";
    case ApproxOperator::Kind::kStochasticRounder: return "stochastic_rounder";
  }
  return "unknown";
}

Hypothesis apply_operator(const ApproxOperator& op, const Hypothesis& h,
                          std::optional<std::uint64_t> noise_seed) {
  if (op.deterministic()) return Hypothesis(op.transform(h.weights), h.feature_map);
  require(noise_seed.has_value(), ErrorCode::kMissingSeed,
          "stochastic operator '" + to_string(op.kind()) + "' requires a noise seed");
  Rng rng = make_rng(*noise_seed);
  return Hypothesis(op.transform(h.weights, rng), h.feature_map);
}

// ---------------------------------------------------------------------------
// Loss

LossSpec::LossSpec(Kind k, double rho) : kind(k), lipschitz(rho) {
  require(rho > 0.0 && std::isfinite(rho), ErrorCode::kInvalidArgument,
          "loss Lipschitz constant must be positive");
}

std::string to_string(LossSpec::Kind kind) {
  switch (kind) {
    case LossSpec::Kind::kClippedAbsolute: return "clipped_absolute";
    case LossSpec::Kind::kClippedHinge: return "clipped_hinge";
    case LossSpec::Kind::kClippedSquared: return "clipped_squared";
  }
  return "unknown";
}

double loss_value(const LossSpec& spec, double prediction, double target) {
  const double rho = spec.lipschitz;
  double raw = 0.0;
  switch (spec.kind) {
    case LossSpec::Kind::kClippedAbsolute:
      raw = rho * std::abs(prediction - target);
      break;
    case LossSpec::Kind::kClippedHinge: {
      const double sign = target >= 0.0 ? 1.0 : -1.0;
      raw = rho * std::max(0.0, 1.0 - sign * prediction);
      break;
    }
    case LossSpec::Kind::kClippedSquared: {
      // (rho/2)^2 r^2 clipped below 1 has slope at most rho.
      const double r = prediction - target;
      raw = 0.25 * rho * rho * r * r;
      break;
    }
  }
  return std::min(raw, LossSpec::kCeiling);
}

double empirical_error(const Vector& predictions, const Vector& targets, const LossSpec& spec) {
  require(predictions.size() == targets.size(), ErrorCode::kDimensionMismatch,
          "prediction and target counts differ");
  double total = 0.0;
  for (Eigen::Index i = 0; i < predictions.size(); ++i) {
    total += loss_value(spec, predictions(i), targets(i));
  }
  return total / static_cast<double>(predictions.size());
}

double empirical_error(const Hypothesis& h, const LabelledSample& s, const LossSpec& spec) {
  return empirical_error(predict_rows(h, s.inputs), s.targets, spec);
}

// ---------------------------------------------------------------------------
// Input laws and synthetic tasks

InputLaw InputLaw::uniform_box(double low, double high) {
  require(low < high && std::isfinite(low) && std::isfinite(high), ErrorCode::kInvalidArgument,
          "uniform box needs finite low < high");
  InputLaw law(Kind::kUniformBox);
  law.low_ = low;
  law.high_ = high;
  return law;
}

InputLaw InputLaw::isotropic_gaussian(double sd) {
  require(sd > 0.0 && std::isfinite(sd), ErrorCode::kInvalidArgument,
          "gaussian sd must be positive");
  InputLaw law(Kind::kIsotropicGaussian);
  law.sd_ = sd;
  return law;
}

InputLaw InputLaw::gaussian_mixture(Matrix means, double sd) {
  require(means.rows() >= 1, ErrorCode::kInvalidArgument, "mixture needs at least one component");
  require(sd > 0.0 && std::isfinite(sd), ErrorCode::kInvalidArgument,
          "mixture sd must be positive");
  InputLaw law(Kind::kGaussianMixture);
  law.means_ = std::move(means);
  law.sd_ = sd;
  return law;
}

Matrix InputLaw::sample(int m, int dim, Rng& rng) const {
  require(m >= 1, ErrorCode::kInvalidArgument, "sample size must be >= 1");
  Matrix x(m, dim);
  switch (kind_) {
    case Kind::kUniformBox: {
      std::uniform_real_distribution<double> u(low_, high_);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < dim; ++j) x(i, j) = u(rng);
      break;
    }
    case Kind::kIsotropicGaussian: {
      std::normal_distribution<double> g(0.0, sd_);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < dim; ++j) x(i, j) = g(rng);
      break;
    }
    case Kind::kGaussianMixture: {
      require(means_.cols() == dim, ErrorCode::kDimensionMismatch,
              "mixture means have " + std::to_string(means_.cols()) + " columns, task has " +
                  std::to_string(dim));
      std::uniform_int_distribution<Eigen::Index> pick(0, means_.rows() - 1);
      std::normal_distribution<double> g(0.0, sd_);
      for (int i = 0; i < m; ++i) {
        const Eigen::Index c = pick(rng);
        for (int j = 0; j < dim; ++j) x(i, j) = means_(c, j) + g(rng);
      }
      break;
    }
  }
  return x;
}

std::optional<double> InputLaw::support_radius(int dim) const {
  if (kind_ != Kind::kUniformBox) return std::nullopt;
  return std::sqrt(static_cast<double>(dim)) * std::max(std::abs(low_), std::abs(high_));
}

std::string to_string(InputLaw::Kind kind) {
  switch (kind) {
    case InputLaw::Kind::kUniformBox: return "uniform_box";
    case InputLaw::Kind::kIsotropicGaussian: return "isotropic_gaussian";
    case InputLaw::Kind::kGaussianMixture: return "gaussian_mixture";
  }
  return "unknown";
}

SyntheticTask SyntheticTask::with_seed(std::uint64_t s) const {
  SyntheticTask copy = *this;
  copy.seed = s;
  return copy;
}

LabelledSample draw_labelled(const SyntheticTask& task, int m, std::uint64_t seed) {
  require(task.label_noise_sd >= 0.0, ErrorCode::kInvalidArgument,
          "label noise sd must be nonnegative");
  Rng rng = make_rng(seed);
  Matrix x = task.input_law.sample(m, task.input_dim(), rng);
  Vector y = predict_rows(task.teacher, x);
  if (task.label_noise_sd > 0.0) {
    std::normal_distribution<double> noise(0.0, task.label_noise_sd);
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) += noise(rng);
  }
  return LabelledSample(std::move(x), std::move(y), "synthetic:" + std::to_string(seed));
}

LabelledSample generate_labelled(const SyntheticTask& task, int m) {
  return draw_labelled(task, m, derive_seed(task.seed, Stream::kLabelled));
}

UnlabelledSample generate_unlabelled(const SyntheticTask& task, int m) {
  const std::uint64_t seed = derive_seed(task.seed, Stream::kUnlabelled);
  Rng rng = make_rng(seed);
  return UnlabelledSample(task.input_law.sample(m, task.input_dim(), rng),
                          "synthetic-unlabelled:" + std::to_string(seed));
}

McEstimate mean_and_standard_error(const Vector& values) {
  McEstimate est;
  est.draws = values.size();
  if (values.size() == 0) return est;
  est.value = values.mean();
  if (values.size() > 1) {
    const double var = (values.array() - est.value).square().sum() / (values.size() - 1.0);
    est.standard_error = std::sqrt(var / static_cast<double>(values.size()));
  }
  return est;
}

McEstimate true_error_mc(const Hypothesis& h, const SyntheticTask& task, const LossSpec& spec,
                         std::int64_t n_mc, std::uint64_t seed) {
  require(n_mc >= 1, ErrorCode::kInvalidArgument, "n_mc must be >= 1");
  constexpr std::int64_t kChunk = 1 << 16;
  Vector losses(n_mc);
  for (std::int64_t start = 0, chunk = 0; start < n_mc; start += kChunk, ++chunk) {
    const int count = static_cast<int>(std::min(kChunk, n_mc - start));
    LabelledSample draw = draw_labelled(task, count, derive_seed(seed, static_cast<std::uint64_t>(chunk)));
    Vector pred = predict_rows(h, draw.inputs);
    for (int i = 0; i < count; ++i) losses(start + i) = loss_value(spec, pred(i), draw.targets(i));
  }
  return mean_and_standard_error(losses);
}

}  // namespace approxsense
