#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace approxsense {

struct ValidationOptions {
  int trials = 0;  // 0 selects the suite default
  std::uint64_t seed = 20240917;
  int threads = 1;
};

struct SuiteCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Frequency with which one "with probability >= 1 - delta" inequality (or an
// exact identity, for the oracle suites) held across seeded trials.
struct CoverageReport {
  std::string suite;
  std::string bound;
  int trials = 0;
  int violations = 0;
  double coverage = 0.0;
  double target = 1.0;     // 1 - delta, or 1 for exact suites
  double threshold = 1.0;  // coverage needed to pass
  double mean_slack = 0.0;
  bool passed = false;
  std::vector<SuiteCheck> checks;
  nlohmann::json parameters = nlohmann::json::object();
};

nlohmann::json to_json(const CoverageReport& report);

const std::vector<std::string>& suite_names();
std::string suite_description(const std::string& name);

// Throws Error(kUnknownSuite) for names outside suite_names().
CoverageReport run_suite(const std::string& name, const ValidationOptions& options);

// --threads value, else APPROX_SENSE_THREADS, else the hardware concurrency.
int resolve_threads(std::optional<int> requested);

struct TrialOutcome {
  bool violated = false;
  double slack = 0.0;
  // Secondary inequalities checked on the same trial.
  std::vector<bool> extra_violations;
};

// Runs trial(i) for i in [0, n) on `threads` workers. Results are stored by
// index, so the output does not depend on scheduling.
std::vector<TrialOutcome> run_trials(int n, int threads, const std::function<TrialOutcome(int)>& trial);

}  // namespace approxsense
