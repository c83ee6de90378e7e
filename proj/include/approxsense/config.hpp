#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "approxsense/learners.hpp"
#include "approxsense/model.hpp"
#include "json.hpp"

namespace approxsense {

inline constexpr int kConfigSchemaVersion = 1;

struct LearnerSpec {
  // constrained_erm | srm | sensitivity_regularized_erm | lambda_erm |
  // analytic_lambda_erm | lambda_grid_srm
  std::string algorithm;
  double p = 1.0;
  double t = std::numeric_limits<double>::infinity();
  double lambda = 0.0;
  std::vector<double> thresholds;
  std::vector<double> weights;
  std::vector<double> lambdas;
  double epsilon_u = 0.0;
  std::string sensitivity = "empirical";  // empirical | analytic | true_mc
  double input_norm_budget = 1.0;
  std::int64_t n_sigma = 1000;
  std::int64_t n_mc = 100000;
  SearchDomain domain;
};

struct ExperimentConfig {
  int schema_version = kConfigSchemaVersion;
  std::uint64_t seed = 0;
  // Either a synthetic task or CSV inputs.
  std::optional<SyntheticTask> task;
  int m = 50;
  int m_unlabelled = 50;
  std::optional<std::filesystem::path> labelled_csv;
  std::optional<std::filesystem::path> unlabelled_csv;
  std::optional<ApproxOperator> op;
  LossSpec loss;
  std::optional<LearnerSpec> learner;
  std::vector<std::string> bounds;
  double delta = 0.05;
  int trials = 0;
  std::string output_dir;

  const ApproxOperator& approx_operator() const;
  // Labelled and unlabelled samples: generated from the task with the
  // top-level seed, or read from the CSV paths.
  LabelledSample labelled_sample() const;
  std::optional<UnlabelledSample> unlabelled_sample() const;
};

// Relative CSV paths resolve against `base_dir`.
ExperimentConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
ExperimentConfig parse_config_text(const std::string& text, const std::string& origin,
                                   const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

FeatureMap feature_map_from_json(const nlohmann::json& j, const std::string& path = "feature_map");
nlohmann::json to_json(const FeatureMap& map);
ApproxOperator operator_from_json(const nlohmann::json& j, const std::string& path = "operator");
nlohmann::json to_json(const ApproxOperator& op);
LossSpec loss_from_json(const nlohmann::json& j, const std::string& path = "loss");

}  // namespace approxsense
