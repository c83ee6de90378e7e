#include "approxsense/bounds.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "approxsense/csv.hpp"
#include "approxsense/error.hpp"

namespace approxsense {

namespace {

using nlohmann::json;

void check_common(double rho, std::int64_t m, double delta) {
  require(rho >= 0.0, ErrorCode::kInvalidArgument, "rho must be nonnegative");
  require(m >= 1, ErrorCode::kInvalidArgument, "sample size m must be >= 1");
  require(delta > 0.0 && delta < 1.0, ErrorCode::kInvalidArgument,
          "confidence delta must lie in (0, 1)");
}

json constituent_json(const Constituent& c) {
  return json{{"value", c.value}, {"certified", c.certified}, {"standard_error", c.standard_error}};
}

class ReportBuilder {
 public:
  ReportBuilder(std::string name, double delta) {
    report_.name = std::move(name);
    report_.delta = delta;
  }

  ReportBuilder& term(std::string label, double value) {
    report_.terms.push_back({std::move(label), value});
    return *this;
  }
  ReportBuilder& input(const std::string& key, const json& value) {
    inputs_[key] = value;
    return *this;
  }
  ReportBuilder& constituent(const std::string& key, const Constituent& c) {
    inputs_[key] = constituent_json(c);
    certified_ = certified_ && c.certified && c.standard_error == 0.0;
    return *this;
  }
  ReportBuilder& meta(const std::string& key, const json& value) {
    report_.metadata[key] = value;
    return *this;
  }

  BoundReport build() {
    double sum = 0.0;
    for (const auto& t : report_.terms) sum += t.value;
    report_.value = sum;
    report_.certified = certified_;
    inputs_["delta"] = report_.delta;
    report_.inputs_digest = inputs_digest(inputs_);
    return report_;
  }

 private:
  BoundReport report_;
  json inputs_ = json::object();
  bool certified_ = true;
};

}  // namespace

double BoundReport::term(const std::string& label) const {
  for (const auto& t : terms)
    if (t.label == label) return t.value;
  throw Error(ErrorCode::kMissingConstituent, "report '" + name + "' has no term '" + label + "'");
}

std::string inputs_digest(const json& inputs) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : inputs.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json to_json(const BoundReport& report) {
  json j;
  j["name"] = report.name;
  j["value"] = report.value;
  j["terms"] = json::array();
  for (const auto& t : report.terms) j["terms"].push_back(json{{"label", t.label}, {"value", t.value}});
  j["delta"] = report.delta;
  j["certified"] = report.certified;
  j["inputs_digest"] = report.inputs_digest;
  if (!report.metadata.empty()) j["metadata"] = report.metadata;
  return j;
}

BoundReport bound_report_from_json(const json& j) {
  try {
    BoundReport r;
    r.name = j.at("name").get<std::string>();
    r.value = j.at("value").get<double>();
    r.delta = j.at("delta").get<double>();
    r.certified = j.at("certified").get<bool>();
    r.inputs_digest = j.at("inputs_digest").get<std::string>();
    if (j.contains("metadata")) r.metadata = j.at("metadata");
    double sum = 0.0;
    for (const auto& t : j.at("terms")) {
      r.terms.push_back({t.at("label").get<std::string>(), t.at("value").get<double>()});
      sum += r.terms.back().value;
    }
    require(std::abs(sum - r.value) <= 1e-12, ErrorCode::kCorruptReport,
            "report '" + r.name + "': terms sum to " + csv::format_double(sum) + " but value is " +
                csv::format_double(r.value));
    require(r.delta > 0.0 && r.delta < 1.0, ErrorCode::kCorruptReport,
            "report '" + r.name + "': delta outside (0, 1)");
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kCorruptReport, std::string("malformed bound report: ") + e.what());
  }
}

void append_csv_row(const std::filesystem::path& path, const BoundReport& report) {
  const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  std::ofstream out(path, std::ios::app | std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::kIngestion, "cannot append to '" + path.string() + "'");
  if (fresh) out << "name,value,delta,certified,inputs_digest,terms\n";
  std::string terms;
  for (const auto& t : report.terms) {
    if (!terms.empty()) terms += ';';
    terms += t.label + "=" + csv::format_double(t.value);
  }
  out << report.name << ',' << csv::format_double(report.value) << ','
      << csv::format_double(report.delta) << ',' << (report.certified ? "true" : "false") << ','
      << report.inputs_digest << ',' << terms << '\n';
}

double hoeffding_term(double c, double arg, std::int64_t m) {
  require(arg >= 1.0, ErrorCode::kInvalidArgument, "log argument must be >= 1");
  require(m >= 1, ErrorCode::kInvalidArgument, "sample size m must be >= 1");
  require(c >= 0.0, ErrorCode::kInvalidArgument, "multiplier must be nonnegative");
  return c * std::sqrt(std::log(arg) / (2.0 * static_cast<double>(m)));
}

BoundReport uniform_restricted_bound(double emp_err, const Constituent& rad_Ht, double rho,
                                     std::int64_t m, double delta) {
  check_common(rho, m, delta);
  return ReportBuilder("uniform_restricted", delta)
      .term("empirical_error", emp_err)
      .term("rademacher_term", 2.0 * rho * rad_Ht.value)
      .term("confidence_term", hoeffding_term(3.0, 2.0 / delta, m))
      .input("emp_err", emp_err)
      .constituent("rad_Ht", rad_Ht)
      .input("rho", rho)
      .input("m", m)
      .build();
}

BoundReport srm_uniform_bound(double emp_err, const Constituent& rad_Ht_k, double w_k, double rho,
                              std::int64_t m, double delta) {
  check_common(rho, m, delta);
  require(w_k > 0.0 && w_k <= 1.0, ErrorCode::kInvalidArgument, "w_k must lie in (0, 1]");
  return ReportBuilder("srm_uniform", delta)
      .term("empirical_error", emp_err)
      .term("rademacher_term", 2.0 * rho * rad_Ht_k.value)
      .term("weight_term", hoeffding_term(3.0, 1.0 / w_k, m))
      .term("confidence_term", hoeffding_term(3.0, 4.0 / delta, m))
      .input("emp_err", emp_err)
      .constituent("rad_Ht_k", rad_Ht_k)
      .input("w_k", w_k)
      .input("rho", rho)
      .input("m", m)
      .build();
}

BoundReport balcan_guarantee_bound(const std::vector<double>& err_star_k,
                                   const std::vector<Constituent>& rad_Ht_k,
                                   const std::vector<double>& w_k, double rho, std::int64_t m,
                                   double delta) {
  check_common(rho, m, delta);
  require(!err_star_k.empty(), ErrorCode::kInvalidArgument, "no thresholds supplied");
  require(rad_Ht_k.size() == err_star_k.size() && w_k.size() == err_star_k.size(),
          ErrorCode::kDimensionMismatch, "per-threshold lists differ in length");
  std::size_t best = 0;
  double best_inner = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < err_star_k.size(); ++k) {
    require(w_k[k] > 0.0 && w_k[k] <= 1.0, ErrorCode::kInvalidArgument, "w_k must lie in (0, 1]");
    const double inner =
        err_star_k[k] + 2.0 * rho * rad_Ht_k[k].value + hoeffding_term(3.0, 1.0 / w_k[k], m);
    if (inner < best_inner) {
      best_inner = inner;
      best = k;
    }
  }
  ReportBuilder b("srm_guarantee", delta);
  b.term("err_star", err_star_k[best])
      .term("rademacher_term", 2.0 * rho * rad_Ht_k[best].value)
      .term("weight_term", hoeffding_term(3.0, 1.0 / w_k[best], m))
      .term("confidence_term", hoeffding_term(4.0, 6.0 / delta, m))
      .meta("argmin_k", static_cast<int>(best) + 1);
  for (std::size_t k = 0; k < rad_Ht_k.size(); ++k) b.constituent("rad_Ht_" + std::to_string(k + 1), rad_Ht_k[k]);
  return b.input("err_star_k", err_star_k).input("w_k", w_k).input("rho", rho).input("m", m).build();
}

JointBounds joint_bounds(const JointErrors& errors, const Constituent& rad_HA, double rho, double t,
                         std::int64_t m, double delta) {
  check_common(rho, m, delta);
  require(t >= 0.0, ErrorCode::kInvalidArgument, "threshold t must be nonnegative");
  const double rad_term = 2.0 * rho * rad_HA.value;
  const double conf = hoeffding_term(4.0, 9.0 / delta, m);
  auto builder = [&](const char* name) {
    ReportBuilder b(name, delta);
    b.input("min_af_g", errors.min_af_g)
        .input("err_f_star", errors.err_f_star)
        .constituent("rad_HA", rad_HA)
        .input("rho", rho)
        .input("t", t)
        .input("m", m);
    return b;
  };
  JointBounds out;
  out.af_ag = builder("joint_af_ag")
                  .term("min_err_star", errors.min_af_g)
                  .term("rademacher_term", rad_term)
                  .term("confidence_term", conf)
                  .build();
  out.af = builder("joint_af")
               .term("err_star", errors.err_f_star)
               .term("deployment_term", rho * t)
               .term("rademacher_term", rad_term)
               .term("confidence_term", conf)
               .build();
  out.f = builder("joint_f")
              .term("err_star", errors.err_f_star)
              .term("deployment_term", 2.0 * rho * t)
              .term("rademacher_term", rad_term)
              .term("confidence_term", conf)
              .build();
  return out;
}

BoundReport regularized_bound(const std::vector<double>& err_star_t, const std::vector<double>& ts,
                              double rho, const Constituent& rad_HA, std::int64_t m, double delta,
                              std::optional<double> epsilon_u) {
  check_common(rho, m, delta);
  require(!ts.empty(), ErrorCode::kInvalidArgument, "threshold grid is empty");
  require(err_star_t.size() == ts.size(), ErrorCode::kDimensionMismatch,
          "need one err(f_t*) per threshold");
  std::size_t best = 0;
  for (std::size_t i = 1; i < ts.size(); ++i) {
    if (err_star_t[i] + 2.0 * rho * ts[i] < err_star_t[best] + 2.0 * rho * ts[best]) best = i;
  }
  ReportBuilder b(epsilon_u ? "regularized_estimated" : "regularized", delta);
  b.term("err_star", err_star_t[best]).term("sensitivity_term", 2.0 * rho * ts[best]);
  b.term("rademacher_term", 2.0 * rho * rad_HA.value);
  if (epsilon_u) {
    require(*epsilon_u >= 0.0, ErrorCode::kInvalidArgument, "epsilon_u must be nonnegative");
    b.term("confidence_term", hoeffding_term(4.0 + rho, 16.0 / delta, m));
    b.term("epsilon_term", rho * *epsilon_u);
    b.input("epsilon_u", *epsilon_u);
  } else {
    b.term("confidence_term", hoeffding_term(4.0, 8.0 / delta, m));
  }
  return b.meta("argmin_t", ts[best])
      .input("err_star_t", err_star_t)
      .input("ts", ts)
      .constituent("rad_HA", rad_HA)
      .input("rho", rho)
      .input("m", m)
      .build();
}

BoundReport lambda_equivalence_bound(double rho, const Constituent& rad_HA, std::int64_t m,
                                     double delta, double lambda, std::optional<double> epsilon_u) {
  check_common(rho, m, delta);
  require(lambda >= 0.0, ErrorCode::kInvalidArgument, "lambda must be nonnegative");
  ReportBuilder b(epsilon_u ? "lambda_equivalence" : "lambda_equivalence_analytic", delta);
  b.term("rademacher_term", 4.0 * rho * rad_HA.value)
      .term("confidence_term", hoeffding_term(6.0, 8.0 / delta, m));
  if (epsilon_u) {
    require(*epsilon_u >= 0.0, ErrorCode::kInvalidArgument, "epsilon_u must be nonnegative");
    b.term("epsilon_term", 2.0 * lambda * *epsilon_u).input("epsilon_u", *epsilon_u);
  }
  return b.constituent("rad_HA", rad_HA).input("rho", rho).input("m", m).input("lambda", lambda).build();
}

BoundReport stochastic_bound(const Constituent& exp_emp_err, const Constituent& exp_sensitivity,
                             const Constituent& exp_rad, double rho, std::int64_t m, double delta) {
  check_common(rho, m, delta);
  return ReportBuilder("stochastic", delta)
      .term("empirical_error", exp_emp_err.value)
      .term("sensitivity_term", rho * exp_sensitivity.value)
      .term("rademacher_term", 2.0 * rho * exp_rad.value)
      .term("confidence_term", hoeffding_term(1.0, 1.0 / delta, m))
      .constituent("exp_emp_err", exp_emp_err)
      .constituent("exp_sensitivity", exp_sensitivity)
      .constituent("exp_rad", exp_rad)
      .input("rho", rho)
      .input("m", m)
      .build();
}

BoundReport stochastic_fixed_bound(const Constituent& emp_err, const Constituent& sensitivity,
                                   const Constituent& rad, double rho, std::int64_t m, double delta) {
  check_common(rho, m, delta);
  return ReportBuilder("stochastic_fixed", delta)
      .term("empirical_error", emp_err.value)
      .term("sensitivity_term", rho * sensitivity.value)
      .term("rademacher_term", 2.0 * rho * rad.value)
      .term("confidence_term", hoeffding_term(3.0, 2.0 / delta, m))
      .constituent("emp_err", emp_err)
      .constituent("sensitivity", sensitivity)
      .constituent("rad", rad)
      .input("rho", rho)
      .input("m", m)
      .build();
}

BoundReport deviation_report(const std::string& name, const DeviationBound& bound, bool certified) {
  ReportBuilder b(name, bound.delta);
  for (const auto& [label, value] : bound.components) b.term(label, value).input(label, value);
  b.input("C", bound.C).input("m", bound.m);
  b.constituent("rad", Constituent(0.0, certified, 0.0));
  return b.build();
}

}  // namespace approxsense
