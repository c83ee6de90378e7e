#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "approxsense/rng.hpp"

namespace approxsense {

using Vector = Eigen::VectorXd;
// Samples are stored one observation per row.
using Matrix = Eigen::MatrixXd;

struct LabelledSample {
  Matrix inputs;
  Vector targets;
  std::string source_id;

  LabelledSample(Matrix inputs, Vector targets, std::string source_id);

  int size() const { return static_cast<int>(inputs.rows()); }
  int dim() const { return static_cast<int>(inputs.cols()); }
};

struct UnlabelledSample {
  Matrix inputs;
  std::string source_id;

  UnlabelledSample(Matrix inputs, std::string source_id);

  int size() const { return static_cast<int>(inputs.rows()); }
  int dim() const { return static_cast<int>(inputs.cols()); }
};

// Explicit finite-dimensional feature map x -> Phi(x).
//
//   identity       Phi(x) = x
//   polynomial     Phi(x) = (1, x, x.^2, ..., x.^degree), coordinate-wise powers
//   radial_basis   Phi(x)_j = exp(-|x - c_j|^2 / (2 width^2))
class FeatureMap {
 public:
  enum class Kind { kIdentity, kPolynomial, kRadialBasis };

  static FeatureMap identity(int input_dim);
  static FeatureMap polynomial(int input_dim, int degree);
  static FeatureMap radial_basis(Matrix centers, double width);

  Kind kind() const { return kind_; }
  int input_dim() const { return input_dim_; }
  int feature_dim() const;
  int degree() const { return degree_; }
  const Matrix& centers() const { return centers_; }
  double width() const { return width_; }

  Vector apply(const Eigen::Ref<const Vector>& x) const;
  // Row-wise map of a sample: m x input_dim -> m x feature_dim.
  Matrix apply_rows(const Matrix& inputs) const;

 private:
  FeatureMap(Kind kind, int input_dim) : kind_(kind), input_dim_(input_dim) {}

  Kind kind_;
  int input_dim_;
  int degree_ = 1;
  Matrix centers_;
  double width_ = 1.0;
};

std::string to_string(FeatureMap::Kind kind);

// Generalized linear predictor f_w(x) = <w, Phi(x)>.
struct Hypothesis {
  Vector weights;
  FeatureMap feature_map;

  Hypothesis(Vector weights, FeatureMap feature_map);
};

double predict(const Hypothesis& h, const Eigen::Ref<const Vector>& x);
Vector predict_rows(const Hypothesis& h, const Matrix& inputs);

// Weight transform Q applied coordinate-wise (quantizers) or globally (pruner).
//
// Quantizer grid: offset + step * Z, after clamping the weight to [-clamp, clamp].
// Midpoints round to the even grid index. A non-zero offset gives mid-rise
// grids; `uniform_levels` builds those from a level count.
class ApproxOperator {
 public:
  enum class Kind { kUniformQuantizer, kMagnitudePruner, kStochasticRounder };

  static ApproxOperator uniform_quantizer(double step, double clamp, double offset = 0.0);
  // `levels` equally spaced grid points spanning [-clamp, clamp].
  static ApproxOperator uniform_levels(int levels, double clamp);
  static ApproxOperator magnitude_pruner(int keep);
  static ApproxOperator stochastic_rounder(double step, double clamp, double offset = 0.0);

  Kind kind() const { return kind_; }
  bool deterministic() const { return kind_ != Kind::kStochasticRounder; }
  double step() const { return step_; }
  double clamp() const { return clamp_; }
  double offset() const { return offset_; }
  int keep() const { return keep_; }

  // Deterministic kinds only.
  Vector transform(const Vector& w) const;
  // Stochastic kinds draw one uniform per coordinate from `rng`; deterministic
  // kinds ignore it.
  Vector transform(const Vector& w, Rng& rng) const;

 private:
  ApproxOperator(Kind kind) : kind_(kind) {}

  double grid_index(double w) const;

  Kind kind_;
  double step_ = 1.0;
  double clamp_ = 1.0;
  double offset_ = 0.0;
  int keep_ = 0;
};

std::string to_string(ApproxOperator::Kind kind);

Hypothesis apply_operator(const ApproxOperator& op, const Hypothesis& h,
                          std::optional<std::uint64_t> noise_seed = std::nullopt);

// Bounded rho-Lipschitz loss with bound B = 1. Values are clipped to
// 1 - kClipMargin so the bound is strict.
struct LossSpec {
  enum class Kind { kClippedAbsolute, kClippedHinge, kClippedSquared };

  static constexpr double kClipMargin = 1.0 / 1048576.0;  // 2^-20
  static constexpr double kCeiling = 1.0 - kClipMargin;

  Kind kind = Kind::kClippedAbsolute;
  double lipschitz = 1.0;

  LossSpec() = default;
  LossSpec(Kind kind, double lipschitz);

  double rho() const { return lipschitz; }
};

std::string to_string(LossSpec::Kind kind);

double loss_value(const LossSpec& spec, double prediction, double target);

double empirical_error(const Hypothesis& h, const LabelledSample& s, const LossSpec& spec);
// Same quantity from precomputed predictions.
double empirical_error(const Vector& predictions, const Vector& targets, const LossSpec& spec);

struct McEstimate {
  double value = 0.0;
  double standard_error = 0.0;
  std::int64_t draws = 0;
};

class InputLaw {
 public:
  enum class Kind { kUniformBox, kIsotropicGaussian, kGaussianMixture };

  static InputLaw uniform_box(double low, double high);
  static InputLaw isotropic_gaussian(double sd);
  // Equal-weight mixture; one component mean per row.
  static InputLaw gaussian_mixture(Matrix means, double sd);

  Kind kind() const { return kind_; }
  double low() const { return low_; }
  double high() const { return high_; }
  double sd() const { return sd_; }
  const Matrix& means() const { return means_; }

  Matrix sample(int m, int dim, Rng& rng) const;
  // sup |x|_2 over the support, when the support is bounded.
  std::optional<double> support_radius(int dim) const;

 private:
  InputLaw(Kind kind) : kind_(kind) {}

  Kind kind_;
  double low_ = 0.0;
  double high_ = 1.0;
  double sd_ = 1.0;
  Matrix means_;
};

std::string to_string(InputLaw::Kind kind);

struct SyntheticTask {
  Hypothesis teacher;
  InputLaw input_law;
  double label_noise_sd = 0.0;
  std::uint64_t seed = 0;

  int input_dim() const { return teacher.feature_map.input_dim(); }
  SyntheticTask with_seed(std::uint64_t s) const;
};

LabelledSample generate_labelled(const SyntheticTask& task, int m);
UnlabelledSample generate_unlabelled(const SyntheticTask& task, int m);

// Draws (inputs, targets) from the task law with an explicit seed; used by
// the Monte Carlo estimators.
LabelledSample draw_labelled(const SyntheticTask& task, int m, std::uint64_t seed);

McEstimate true_error_mc(const Hypothesis& h, const SyntheticTask& task, const LossSpec& spec,
                         std::int64_t n_mc, std::uint64_t seed);

McEstimate mean_and_standard_error(const Vector& values);

}  // namespace approxsense
