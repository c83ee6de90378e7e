#include "approxsense/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "approxsense/csv.hpp"
#include "approxsense/error.hpp"

namespace approxsense {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& message) {
  throw Error(ErrorCode::kConfig, "config." + path + ": " + message);
}

// Typed field access on one JSON object; every key must be consumed or
// explicitly allowed, otherwise it is reported as unknown.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) fail(path_, "expected an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  const json& raw(const std::string& key) {
    if (!has(key)) fail(path_, "missing required key '" + key + "'");
    return j_.at(key);
  }

  double number(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_number()) fail(at(key), "expected a number");
    return v.get<double>();
  }
  double number(const std::string& key, double fallback) { return has(key) ? number(key) : fallback; }

  std::int64_t integer(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_number_integer()) fail(at(key), "expected an integer");
    return v.get<std::int64_t>();
  }
  std::int64_t integer(const std::string& key, std::int64_t fallback) {
    return has(key) ? integer(key) : fallback;
  }

  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
      fail(at(key), "expected a nonnegative integer");
    return v.get<std::uint64_t>();
  }

  std::string text(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_string()) fail(at(key), "expected a string");
    return v.get<std::string>();
  }
  std::string text(const std::string& key, const std::string& fallback) {
    return has(key) ? text(key) : fallback;
  }

  std::vector<double> numbers(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_array()) fail(at(key), "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) fail(at(key) + "[" + std::to_string(i) + "]", "expected a number");
      out.push_back(v[i].get<double>());
    }
    return out;
  }

  std::string at(const std::string& key) const { return path_ + "." + key; }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key)) fail(at(key), "unknown key");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Matrix rows_from_json(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) fail(path, "expected a nonempty list of rows");
  Matrix out;
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array()) fail(path, "expected a list of rows");
    if (r == 0) out.resize(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(j[0].size()));
    if (j[r].size() != static_cast<std::size_t>(out.cols())) fail(path, "rows differ in length");
    for (std::size_t c = 0; c < j[r].size(); ++c) {
      if (!j[r][c].is_number()) fail(path, "expected numbers");
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
    }
  }
  return out;
}

// Library argument errors inside a config block are reported against the
// block's path.
template <typename F>
auto at_path(const std::string& path, F&& build) {
  try {
    return build();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kConfig) throw;
    fail(path, e.what());
  }
}

InputLaw input_law_from_json(const json& j, const std::string& path) {
  Fields f(j, path);
  const std::string kind = f.text("kind");
  InputLaw law = at_path(path, [&] {
    if (kind == "uniform_box") return InputLaw::uniform_box(f.number("low", -1.0), f.number("high", 1.0));
    if (kind == "isotropic_gaussian") return InputLaw::isotropic_gaussian(f.number("sd", 1.0));
    if (kind == "gaussian_mixture")
      return InputLaw::gaussian_mixture(rows_from_json(f.raw("means"), f.at("means")), f.number("sd", 1.0));
    fail(f.at("kind"), "unknown input law '" + kind + "'");
  });
  f.finish();
  return law;
}

SearchDomain domain_from_json(const json& j, const std::string& path, const FeatureMap& fallback_map) {
  Fields f(j, path);
  const FeatureMap map = f.has("feature_map") ? feature_map_from_json(j.at("feature_map"), f.at("feature_map"))
                                              : fallback_map;
  const std::string mode = f.text("mode", "grid");
  const double bound = f.number("bound", 1.0);
  SearchDomain d = at_path(path, [&] {
    if (mode == "grid") return SearchDomain::grid(map, bound, static_cast<int>(f.integer("points_per_axis", 11)));
    if (mode == "random")
      return SearchDomain::random(map, bound, static_cast<int>(f.integer("n_samples", 1000)),
                                  f.unsigned_integer("seed", 0));
    if (mode == "coordinate_descent")
      return SearchDomain::coordinate_descent(
          map, bound, static_cast<int>(f.integer("restarts", 4)), static_cast<int>(f.integer("iterations", 20)),
          static_cast<int>(f.integer("line_points", 41)), f.unsigned_integer("seed", 0));
    fail(f.at("mode"), "unknown search mode '" + mode + "'");
  });
  f.finish();
  return d;
}

LearnerSpec learner_from_json(const json& j, const std::string& path, const FeatureMap& fallback_map) {
  Fields f(j, path);
  LearnerSpec s;
  s.algorithm = f.text("algorithm");
  static const std::set<std::string> known = {"constrained_erm", "srm", "sensitivity_regularized_erm",
                                              "lambda_erm", "analytic_lambda_erm", "lambda_grid_srm"};
  if (!known.count(s.algorithm)) fail(f.at("algorithm"), "unknown algorithm '" + s.algorithm + "'");
  s.p = f.number("p", 1.0);
  if (f.has("t")) {
    const json& t = j.at("t");
    if (t.is_string() && t.get<std::string>() == "inf") s.t = std::numeric_limits<double>::infinity();
    else s.t = f.number("t");
  }
  s.lambda = f.number("lambda", 0.0);
  if (f.has("thresholds")) s.thresholds = f.numbers("thresholds");
  if (f.has("weights")) s.weights = f.numbers("weights");
  if (f.has("lambdas")) s.lambdas = f.numbers("lambdas");
  s.epsilon_u = f.number("epsilon_u", 0.0);
  s.sensitivity = f.text("sensitivity", "empirical");
  if (s.sensitivity != "empirical" && s.sensitivity != "analytic" && s.sensitivity != "true_mc")
    fail(f.at("sensitivity"), "expected one of empirical, analytic, true_mc");
  s.input_norm_budget = f.number("input_norm_budget", 1.0);
  s.n_sigma = f.integer("n_sigma", 1000);
  s.n_mc = f.integer("n_mc", 100000);
  if (!f.has("domain")) fail(path, "missing required key 'domain'");
  s.domain = domain_from_json(j.at("domain"), f.at("domain"), fallback_map);
  f.finish();
  return s;
}

std::string with_line_info(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t column = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return std::to_string(line) + ":" + std::to_string(column);
}

}  // namespace

FeatureMap feature_map_from_json(const json& j, const std::string& path) {
  Fields f(j, path);
  const std::string kind = f.text("kind");
  FeatureMap map = at_path(path, [&] {
    if (kind == "identity") return FeatureMap::identity(static_cast<int>(f.integer("input_dim")));
    if (kind == "polynomial")
      return FeatureMap::polynomial(static_cast<int>(f.integer("input_dim")), static_cast<int>(f.integer("degree")));
    if (kind == "radial_basis")
      return FeatureMap::radial_basis(rows_from_json(f.raw("centers"), f.at("centers")), f.number("width"));
    fail(f.at("kind"), "unknown feature map '" + kind + "'");
  });
  f.finish();
  return map;
}

json to_json(const FeatureMap& map) {
  json j;
  j["kind"] = to_string(map.kind());
  switch (map.kind()) {
    case FeatureMap::Kind::kIdentity:
      j["input_dim"] = map.input_dim();
      break;
    case FeatureMap::Kind::kPolynomial:
      j["input_dim"] = map.input_dim();
      j["degree"] = map.degree();
      break;
    case FeatureMap::Kind::kRadialBasis: {
      json rows = json::array();
      for (Eigen::Index r = 0; r < map.centers().rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < map.centers().cols(); ++c) row.push_back(map.centers()(r, c));
        rows.push_back(row);
      }
      j["centers"] = rows;
      j["width"] = map.width();
      break;
    }
  }
  return j;
}

ApproxOperator operator_from_json(const json& j, const std::string& path) {
  Fields f(j, path);
  const std::string kind = f.text("kind");
  ApproxOperator op = at_path(path, [&] {
    if (kind == "uniform_quantizer")
      return ApproxOperator::uniform_quantizer(f.number("step"), f.number("clamp"), f.number("offset", 0.0));
    if (kind == "uniform_levels")
      return ApproxOperator::uniform_levels(static_cast<int>(f.integer("levels")), f.number("clamp"));
    if (kind == "magnitude_pruner") return ApproxOperator::magnitude_pruner(static_cast<int>(f.integer("keep")));
    if (kind == "stochastic_rounder")
      return ApproxOperator::stochastic_rounder(f.number("step"), f.number("clamp"), f.number("offset", 0.0));
    fail(f.at("kind"), "unknown operator '" + kind + "'");
  });
  f.finish();
  return op;
}

json to_json(const ApproxOperator& op) {
  json j;
  j["kind"] = to_string(op.kind());
  if (op.kind() == ApproxOperator::Kind::kMagnitudePruner) {
    j["keep"] = op.keep();
  } else {
    j["step"] = op.step();
    j["clamp"] = op.clamp();
    j["offset"] = op.offset();
  }
  return j;
}

LossSpec loss_from_json(const json& j, const std::string& path) {
  Fields f(j, path);
  const std::string kind = f.text("kind", "clipped_absolute");
  const double rho = f.number("rho", 1.0);
  LossSpec spec = at_path(path, [&] {
    if (kind == "clipped_absolute") return LossSpec(LossSpec::Kind::kClippedAbsolute, rho);
    if (kind == "clipped_hinge") return LossSpec(LossSpec::Kind::kClippedHinge, rho);
    if (kind == "clipped_squared") return LossSpec(LossSpec::Kind::kClippedSquared, rho);
    fail(f.at("kind"), "unknown loss '" + kind + "'");
  });
  f.finish();
  return spec;
}

ExperimentConfig parse_config(const json& j, const std::filesystem::path& base_dir) {
  Fields f(j, "root");
  ExperimentConfig c;
  const std::int64_t version = f.integer("schema_version");
  if (version != kConfigSchemaVersion)
    fail("schema_version", "unsupported version " + std::to_string(version) + " (expected " +
                               std::to_string(kConfigSchemaVersion) + ")");
  c.schema_version = static_cast<int>(version);
  c.seed = f.unsigned_integer("seed", 0);

  FeatureMap default_map = FeatureMap::identity(1);
  const bool has_task = f.has("task");
  const bool has_data = f.has("data");
  if (has_task == has_data) fail("root", "exactly one of 'task' and 'data' is required");
  if (has_task) {
    Fields t(j.at("task"), "task");
    Fields teacher(t.raw("teacher"), "task.teacher");
    const FeatureMap map = feature_map_from_json(teacher.raw("feature_map"), "task.teacher.feature_map");
    const Vector w = to_vector(teacher.numbers("weights"));
    teacher.finish();
    Hypothesis h = at_path("task.teacher", [&] { return Hypothesis(w, map); });
    const InputLaw law = input_law_from_json(t.raw("input_law"), "task.input_law");
    const double noise = t.number("label_noise_sd", 0.0);
    if (noise < 0.0) fail("task.label_noise_sd", "must be nonnegative");
    c.m = static_cast<int>(t.integer("m", 50));
    c.m_unlabelled = static_cast<int>(t.integer("m_unlabelled", 50));
    if (c.m < 1 || c.m_unlabelled < 1) fail("task", "sample sizes must be >= 1");
    t.finish();
    c.task = SyntheticTask{h, law, noise, c.seed};
    default_map = map;
  } else {
    Fields d(j.at("data"), "data");
    c.labelled_csv = base_dir / d.text("labelled");
    if (d.has("unlabelled")) c.unlabelled_csv = base_dir / d.text("unlabelled");
    d.finish();
  }
  c.op = operator_from_json(f.raw("operator"));
  if (f.has("loss")) c.loss = loss_from_json(j.at("loss"));
  if (f.has("learner")) {
    if (!has_task && !j.at("learner").contains("domain")) fail("learner", "missing required key 'domain'");
    FeatureMap fallback = default_map;
    if (!has_task) {
      // Identity map over the CSV feature columns.
      fallback = FeatureMap::identity(csv::read_labelled(*c.labelled_csv).dim());
    }
    c.learner = learner_from_json(j.at("learner"), "learner", fallback);
  }
  if (f.has("bounds")) {
    const json& b = j.at("bounds");
    if (!b.is_array()) fail("bounds", "expected an array of names");
    for (const auto& name : b) {
      if (!name.is_string()) fail("bounds", "expected an array of names");
      c.bounds.push_back(name.get<std::string>());
    }
  }
  c.delta = f.number("delta", 0.05);
  if (!(c.delta > 0.0 && c.delta < 1.0)) fail("delta", "must lie in (0, 1)");
  c.trials = static_cast<int>(f.integer("trials", 0));
  c.output_dir = f.text("output_dir", "");
  f.finish();
  return c;
}

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin,
                                   const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kConfig, origin + ":" + with_line_info(text, e.byte == 0 ? 0 : e.byte - 1) +
                                        ": invalid JSON: " + e.what());
  }
  return parse_config(j, base_dir);
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kConfig, "cannot open config file '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str(), path.string(), path.parent_path());
}

const ApproxOperator& ExperimentConfig::approx_operator() const {
  require(op.has_value(), ErrorCode::kConfig, "config.operator: missing");
  return *op;
}

LabelledSample ExperimentConfig::labelled_sample() const {
  if (task) return generate_labelled(*task, m);
  return csv::read_labelled(*labelled_csv);
}

std::optional<UnlabelledSample> ExperimentConfig::unlabelled_sample() const {
  if (task) return generate_unlabelled(*task, m_unlabelled);
  if (unlabelled_csv) return csv::read_unlabelled(*unlabelled_csv);
  return std::nullopt;
}

}  // namespace approxsense
