#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "approxsense/rademacher.hpp"
#include "approxsense/sensitivity.hpp"
#include "json.hpp"

namespace approxsense {

struct BoundTerm {
  std::string label;
  double value = 0.0;
};

// Fully itemized right-hand side of one guarantee; value is the sum of terms.
struct BoundReport {
  std::string name;
  double value = 0.0;
  std::vector<BoundTerm> terms;
  double delta = 0.0;
  std::string inputs_digest;
  bool certified = true;
  nlohmann::json metadata = nlohmann::json::object();

  double term(const std::string& label) const;
};

nlohmann::json to_json(const BoundReport& report);
// Rejects reports whose terms do not sum to the value within 1e-12.
BoundReport bound_report_from_json(const nlohmann::json& j);

// Appends one row (name, value, delta, certified, inputs_digest, terms) to a
// results table, writing the header when the file is new.
void append_csv_row(const std::filesystem::path& path, const BoundReport& report);

// 16 hex digits of FNV-1a over the canonical JSON text of `inputs`.
std::string inputs_digest(const nlohmann::json& inputs);

// A numeric constituent of a bound with its provenance. Plain numbers are
// treated as exact; Monte Carlo values carry a standard error and are not
// certified.
struct Constituent {
  double value = 0.0;
  bool certified = true;
  double standard_error = 0.0;

  Constituent(double v) : value(v) {}  // NOLINT(google-explicit-constructor)
  Constituent(double v, bool cert, double se) : value(v), certified(cert), standard_error(se) {}
  Constituent(const RadEstimate& r)  // NOLINT(google-explicit-constructor)
      : value(r.value), certified(r.certified()), standard_error(r.standard_error) {}
  Constituent(const SensitivityEstimate& s)  // NOLINT(google-explicit-constructor)
      : value(s.value),
        certified(s.kind != SensitivityEstimate::Kind::kMonteCarloTrue &&
                  s.kind != SensitivityEstimate::Kind::kExpectedStochastic),
        standard_error(s.standard_error) {}
};

// c sqrt(ln(arg) / 2m); arg >= 1.
double hoeffding_term(double c, double arg, std::int64_t m);

// err_hat(f) + 2 rho R(H_t) + 3 sqrt(ln(2/delta) / 2m)
BoundReport uniform_restricted_bound(double emp_err, const Constituent& rad_Ht, double rho,
                                     std::int64_t m, double delta);

// err_hat(f) + 2 rho R(H_{t_k}) + 3 sqrt(ln(1/w_k) / 2m) + 3 sqrt(ln(4/delta) / 2m)
BoundReport srm_uniform_bound(double emp_err, const Constituent& rad_Ht_k, double w_k, double rho,
                              std::int64_t m, double delta);

// inf_k {err(f_k*) + 2 rho R(H_{t_k + eps_u}) + 3 sqrt(ln(1/w_k) / 2m)} + 4 sqrt(ln(6/delta) / 2m)
BoundReport balcan_guarantee_bound(const std::vector<double>& err_star_k,
                                   const std::vector<Constituent>& rad_Ht_k,
                                   const std::vector<double>& w_k, double rho, std::int64_t m,
                                   double delta);

struct JointErrors {
  double min_af_g = 0.0;  // min{err(A f_t*), err(g_t*)}
  double err_f_star = 0.0;  // err(f_t*)
};

struct JointBounds {
  BoundReport af_ag;  // min{...} + 2 rho R(H_A) + 4 sqrt(ln(9/delta) / 2m)
  BoundReport af;     // err(f_t*) + rho t + 2 rho R(H_A) + 4 sqrt(ln(9/delta) / 2m)
  BoundReport f;      // err(f_t*) + 2 rho t + 2 rho R(H_A) + 4 sqrt(ln(9/delta) / 2m)
};

JointBounds joint_bounds(const JointErrors& errors, const Constituent& rad_HA, double rho, double t,
                         std::int64_t m, double delta);

// inf over the supplied t-grid of err(f_t*) + 2 rho t, plus 2 rho R(H_A) and
// 4 sqrt(ln(8/delta) / 2m). With epsilon_u the corollary form applies:
// (4 + rho) sqrt(ln(16/delta) / 2m) + rho eps_u.
BoundReport regularized_bound(const std::vector<double>& err_star_t, const std::vector<double>& ts,
                              double rho, const Constituent& rad_HA, std::int64_t m, double delta,
                              std::optional<double> epsilon_u = std::nullopt);

// 4 rho R(H_A) + 6 sqrt(ln(8/delta) / 2m) + 2 lambda eps_u; without eps_u the
// analytic-sensitivity form drops the last term.
BoundReport lambda_equivalence_bound(double rho, const Constituent& rad_HA, std::int64_t m,
                                     double delta, double lambda,
                                     std::optional<double> epsilon_u = std::nullopt);

// E err_hat(A_w f) + rho E D_w(f) + 2 rho E R(H_w) + sqrt(ln(1/delta) / 2m)
BoundReport stochastic_bound(const Constituent& exp_emp_err, const Constituent& exp_sensitivity,
                             const Constituent& exp_rad, double rho, std::int64_t m, double delta);

// Fixed-omega form: err_hat(A_w f) + rho D_w(f) + 2 rho R(H_w) + 3 sqrt(ln(2/delta) / 2m)
BoundReport stochastic_fixed_bound(const Constituent& emp_err, const Constituent& sensitivity,
                                   const Constituent& rad, double rho, std::int64_t m, double delta);

// Sensitivity deviation bounds as reports.
BoundReport deviation_report(const std::string& name, const DeviationBound& bound, bool certified);

}  // namespace approxsense
