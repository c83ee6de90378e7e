#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "approxsense/bounds.hpp"
#include "approxsense/config.hpp"
#include "approxsense/csv.hpp"
#include "approxsense/error.hpp"
#include "approxsense/geometry.hpp"
#include "approxsense/learners.hpp"
#include "approxsense/rademacher.hpp"
#include "approxsense/sensitivity.hpp"
#include "approxsense/validation.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace approxsense;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<int> threads;
};

json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json read_json(const fs::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::kIngestion, "cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kIngestion, path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::kIngestion, "cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

ExperimentConfig config_with_seed(const std::string& path, const Globals& g) {
  ExperimentConfig cfg = load_config(path);
  if (g.seed) {
    cfg.seed = *g.seed;
    if (cfg.task) cfg.task->seed = *g.seed;
  }
  return cfg;
}

fs::path out_dir(const Globals& g, const ExperimentConfig* cfg = nullptr) {
  if (!g.out.empty()) return g.out;
  if (cfg && !cfg->output_dir.empty()) return cfg->output_dir;
  return ".";
}

// ---------------------------------------------------------------------------

int cmd_generate(const Globals& g, const std::string& config_path) {
  const ExperimentConfig cfg = config_with_seed(config_path, g);
  require(cfg.task.has_value(), ErrorCode::kConfig, "config.task: generate needs a synthetic task");
  const fs::path dir = out_dir(g, &cfg);
  fs::create_directories(dir);
  csv::write_labelled(dir / "labelled.csv", cfg.labelled_sample());
  csv::write_unlabelled(dir / "unlabelled.csv", *cfg.unlabelled_sample());
  std::cout << (dir / "labelled.csv").string() << '\n' << (dir / "unlabelled.csv").string() << '\n';
  return 0;
}

LearnerOutput run_learner(const ExperimentConfig& cfg) {
  require(cfg.learner.has_value(), ErrorCode::kConfig, "config.learner: missing learner block");
  const LearnerSpec& L = *cfg.learner;
  const LabelledSample lab = cfg.labelled_sample();
  const std::optional<UnlabelledSample> unl = cfg.unlabelled_sample();
  const ApproxOperator& op = cfg.approx_operator();
  auto need_unlabelled = [&]() -> const UnlabelledSample& {
    require(unl.has_value(), ErrorCode::kConfig, "config: learner '" + L.algorithm + "' needs an unlabelled sample");
    return *unl;
  };
  const std::uint64_t seed = cfg.seed;
  if (L.algorithm == "constrained_erm") return constrained_erm(lab, need_unlabelled(), op, L.t, L.p, cfg.loss, L.domain);
  if (L.algorithm == "srm") {
    ThresholdSchedule schedule = L.weights.empty() ? ThresholdSchedule::with_default_weights(L.thresholds)
                                                   : ThresholdSchedule{L.thresholds, L.weights};
    const RadEstimator rad = grid_rad_estimator(lab, need_unlabelled(), op, L.domain, L.p, L.n_sigma,
                                                derive_seed(seed, Stream::kRademacher));
    return srm_learner(lab, need_unlabelled(), op, schedule, L.epsilon_u, rad, cfg.loss, L.domain, L.p);
  }
  if (L.algorithm == "sensitivity_regularized_erm") {
    SensitivityFn fn = [&] {
      if (L.sensitivity == "analytic") return SensitivityFn::analytic(op, L.input_norm_budget);
      if (L.sensitivity == "true_mc") {
        require(cfg.task.has_value(), ErrorCode::kConfig, "config.learner.sensitivity: true_mc needs a synthetic task");
        return SensitivityFn::true_mc(op, *cfg.task, L.p, L.n_mc, derive_seed(seed, Stream::kTrueSensitivity));
      }
      return SensitivityFn::empirical(op, need_unlabelled(), L.domain.feature_map, L.p);
    }();
    return sensitivity_regularized_erm(lab, op, fn, cfg.loss, L.domain);
  }
  if (L.algorithm == "lambda_erm") return lambda_erm(lab, need_unlabelled(), op, L.lambda, L.p, cfg.loss, L.domain);
  if (L.algorithm == "analytic_lambda_erm")
    return analytic_lambda_erm(lab, op, L.lambda, L.input_norm_budget, cfg.loss, L.domain);
  std::vector<double> weights = L.weights;
  if (weights.empty())
    for (std::size_t k = 1; k <= L.lambdas.size(); ++k) weights.push_back(std::ldexp(1.0, -static_cast<int>(k)));
  return lambda_grid_srm(lab, need_unlabelled(), op, L.lambdas, weights, L.p, cfg.loss, L.domain);
}

json learner_json(const LearnerOutput& out) {
  json j = {{"algorithm", out.algorithm},
            {"weights", vec_json(out.hypothesis.weights)},
            {"approx_weights", vec_json(out.approx_hypothesis.weights)},
            {"objective_value", out.objective_value},
            {"objective_trace", out.objective_trace},
            {"feasible", out.feasible},
            {"sensitivity_variant", out.sensitivity_variant}};
  if (out.chosen_k) j["chosen_k"] = *out.chosen_k;
  if (out.chosen_t) j["chosen_t"] = std::isfinite(*out.chosen_t) ? json(*out.chosen_t) : json("inf");
  if (out.lambda) j["lambda"] = *out.lambda;
  if (out.algorithm == "srm") {
    j["boundary_hits"] = out.boundary_hits;
    j["clamped"] = out.clamped;
  }
  if (!out.candidates.empty()) {
    json c = json::array();
    for (const auto& k : out.candidates)
      c.push_back({{"lambda", k.lambda},
                   {"weight", k.weight},
                   {"weights", vec_json(k.weights)},
                   {"empirical_error", k.empirical_error},
                   {"penalty", k.penalty},
                   {"score", k.score}});
    j["candidates"] = c;
  }
  return j;
}

int cmd_train(const Globals& g, const std::string& config_path) {
  const ExperimentConfig cfg = config_with_seed(config_path, g);
  json j = learner_json(run_learner(cfg));
  j["seed"] = cfg.seed;
  const fs::path path = out_dir(g, &cfg) / "train.json";
  write_json(path, j);
  std::cout << path.string() << '\n';
  return 0;
}

json sensitivity_json(const SensitivityEstimate& e) {
  json j = {{"kind", to_string(e.kind)}, {"p", e.p}, {"value", e.value}, {"provenance", e.provenance}};
  if (e.standard_error > 0.0 || e.kind == SensitivityEstimate::Kind::kMonteCarloTrue ||
      e.kind == SensitivityEstimate::Kind::kExpectedStochastic)
    j["standard_error"] = e.standard_error;
  if (e.draws) j["draws"] = e.draws;
  return j;
}

Vector parse_weights(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      require(used == item.size(), ErrorCode::kInvalidArgument, "");
    } catch (...) {
      throw Error(ErrorCode::kInvalidArgument, "--weights: cannot parse '" + item + "'");
    }
  }
  require(!v.empty(), ErrorCode::kInvalidArgument, "--weights is empty");
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

int cmd_sensitivity(const Globals& g, const std::string& config_path, const std::string& weights_text,
                    const std::string& from, int n_omega) {
  const ExperimentConfig cfg = config_with_seed(config_path, g);
  require(cfg.learner.has_value() || !weights_text.empty() || !from.empty(), ErrorCode::kConfig,
          "sensitivity needs --weights, --from or a learner block");
  Vector w;
  if (!weights_text.empty()) w = parse_weights(weights_text);
  else if (!from.empty()) {
    const json t = read_json(from);
    require(t.contains("weights"), ErrorCode::kIngestion, from + ": no 'weights' field");
    const auto v = t.at("weights").get<std::vector<double>>();
    w = Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
  } else {
    w = run_learner(cfg).hypothesis.weights;
  }
  const FeatureMap map = cfg.learner ? cfg.learner->domain.feature_map
                                     : (cfg.task ? cfg.task->teacher.feature_map : FeatureMap::identity(static_cast<int>(w.size())));
  require(map.feature_dim() == w.size(), ErrorCode::kDimensionMismatch,
          "weights have " + std::to_string(w.size()) + " entries, feature map expects " +
              std::to_string(map.feature_dim()));
  const Hypothesis h(w, map);
  const ApproxOperator& op = cfg.approx_operator();
  const double p = cfg.learner ? cfg.learner->p : 1.0;
  const std::optional<UnlabelledSample> unl = cfg.unlabelled_sample();
  json j = {{"weights", vec_json(w)}, {"operator", to_json(op)}, {"seed", cfg.seed}};
  json estimates = json::array();
  if (op.deterministic()) {
    j["approx_weights"] = vec_json(op.transform(w));
    if (unl) estimates.push_back(sensitivity_json(empirical_sensitivity(h, op, *unl, p)));
    if (cfg.learner) estimates.push_back(sensitivity_json(analytic_sensitivity_upper(h, op, cfg.learner->input_norm_budget)));
  } else if (unl) {
    estimates.push_back(sensitivity_json(expected_sensitivity(h, op, *unl, p, n_omega, derive_seed(cfg.seed, Stream::kOperatorNoise))));
  }
  if (cfg.task) {
    const std::int64_t n_mc = cfg.learner ? cfg.learner->n_mc : 100000;
    if (op.deterministic())
      estimates.push_back(sensitivity_json(
          true_sensitivity_mc(h, op, *cfg.task, p, n_mc, derive_seed(cfg.seed, Stream::kTrueSensitivity))));
  }
  j["estimates"] = estimates;
  const fs::path path = out_dir(g, &cfg) / "sensitivity.json";
  write_json(path, j);
  std::cout << path.string() << '\n';
  return 0;
}

json rad_json(const RadEstimate& r) {
  json j = {{"value", r.value}, {"method", to_string(r.method)}, {"m", r.m}, {"certified", r.certified()}};
  if (r.method == RadEstimate::Method::kMonteCarlo) {
    j["n_sigma"] = r.n_sigma;
    j["seed"] = r.seed;
    j["standard_error"] = r.standard_error;
  }
  if (!r.notes.empty()) j["notes"] = r.notes;
  return j;
}

int cmd_rademacher(const Globals& g, const std::string& geometry, const std::string& pointset,
                   const std::string& method, std::int64_t n_sigma) {
  require(geometry.empty() != pointset.empty(), ErrorCode::kInvalidArgument,
          "give exactly one of --geometry or --pointset");
  const std::uint64_t seed = derive_seed(g.seed.value_or(0), Stream::kRademacher);
  RadEstimate r;
  if (!geometry.empty()) {
    const GeometryModel model = geometry_from_json(read_json(geometry));
    const int m = model.variant == GeometryModel::Variant::kPBall ? model.m
                                                                   : static_cast<int>(model.components.front().mu.size());
    auto support = [&](const Vector& s) { return support_function(model, s); };
    if (method == "closed_form" || method == "auto") r = rademacher_of(model);
    else if (method == "exact") r = exact_rademacher_support(m, support);
    else r = mc_rademacher_support(m, support, n_sigma, seed);
  } else {
    const SensitivityPointSet ps(csv::read_table(pointset).values);
    if (method == "closed_form") throw Error(ErrorCode::kInvalidArgument, "closed_form needs a --geometry model");
    if (method == "exact" || (method == "auto" && ps.m() <= kMaxEnumerationSize)) r = exact_rademacher_pointset(ps);
    else r = mc_rademacher_pointset(ps, n_sigma, seed);
  }
  const json j = rad_json(r);
  const fs::path path = out_dir(g) / "rademacher.json";
  write_json(path, j);
  std::cout << j.dump(2) << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// bound

class Inputs {
 public:
  Inputs(json constituents, const ExperimentConfig* cfg) : c_(std::move(constituents)), cfg_(cfg) {}

  Constituent constituent(const std::string& key) const {
    const json& v = at(key);
    if (v.is_number()) return v.get<double>();
    require(v.is_object() && v.contains("value") && v.at("value").is_number(), ErrorCode::kIngestion,
            "constituent '" + key + "' must be a number or an object with a numeric 'value'");
    bool certified = v.value("certified", true);
    if (v.contains("method")) certified = certified && v.at("method") != "monte_carlo";
    return Constituent(v.at("value").get<double>(), certified, v.value("standard_error", 0.0));
  }
  std::vector<Constituent> constituents(const std::string& key) const {
    const json& v = at(key);
    require(v.is_array(), ErrorCode::kIngestion, "constituent '" + key + "' must be an array");
    std::vector<Constituent> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      Inputs item(json{{key, v[i]}}, nullptr);
      out.push_back(item.constituent(key));
    }
    return out;
  }
  double number(const std::string& key) const {
    const Constituent c = constituent(key);
    return c.value;
  }
  std::vector<double> numbers(const std::string& key) const {
    std::vector<double> out;
    for (const auto& c : constituents(key)) out.push_back(c.value);
    return out;
  }
  bool has(const std::string& key) const { return c_.contains(key); }

  double rho() const {
    if (has("rho")) return number("rho");
    if (cfg_) return cfg_->loss.rho();
    return number("rho");
  }
  std::int64_t m() const {
    if (has("m")) return static_cast<std::int64_t>(number("m"));
    if (cfg_) return cfg_->m;
    return static_cast<std::int64_t>(number("m"));
  }
  double delta() const {
    if (has("delta")) return number("delta");
    if (cfg_) return cfg_->delta;
    return number("delta");
  }

 private:
  const json& at(const std::string& key) const {
    if (!c_.contains(key)) throw Error(ErrorCode::kMissingConstituent, "missing constituent '" + key + "'");
    return c_.at(key);
  }
  json c_;
  const ExperimentConfig* cfg_;
};

const std::vector<std::string>& bound_names() {
  static const std::vector<std::string> names{
      "uniform_restricted", "srm_uniform",        "srm_guarantee",       "joint_af_ag",
      "joint_af",           "joint_f",            "regularized",         "regularized_estimated",
      "lambda_equivalence", "lambda_equivalence_analytic",               "stochastic",
      "stochastic_fixed",   "sensitivity_deviation",                     "fast_rate_deviation"};
  return names;
}

BoundReport compute_bound(const std::string& name, const Inputs& in) {
  if (name == "uniform_restricted")
    return uniform_restricted_bound(in.number("emp_err"), in.constituent("rad_Ht"), in.rho(), in.m(), in.delta());
  if (name == "srm_uniform")
    return srm_uniform_bound(in.number("emp_err"), in.constituent("rad_Ht_k"), in.number("w_k"), in.rho(), in.m(),
                             in.delta());
  if (name == "srm_guarantee")
    return balcan_guarantee_bound(in.numbers("err_star_k"), in.constituents("rad_Ht_k"), in.numbers("w_k"), in.rho(),
                                  in.m(), in.delta());
  if (name == "joint_af_ag" || name == "joint_af" || name == "joint_f") {
    const JointBounds b = joint_bounds({in.number("min_af_g"), in.number("err_f_star")}, in.constituent("rad_HA"),
                                       in.rho(), in.number("t"), in.m(), in.delta());
    return name == "joint_af_ag" ? b.af_ag : name == "joint_af" ? b.af : b.f;
  }
  if (name == "regularized")
    return regularized_bound(in.numbers("err_star_t"), in.numbers("ts"), in.rho(), in.constituent("rad_HA"), in.m(),
                             in.delta());
  if (name == "regularized_estimated")
    return regularized_bound(in.numbers("err_star_t"), in.numbers("ts"), in.rho(), in.constituent("rad_HA"), in.m(),
                             in.delta(), in.number("epsilon_u"));
  if (name == "lambda_equivalence")
    return lambda_equivalence_bound(in.rho(), in.constituent("rad_HA"), in.m(), in.delta(), in.number("lambda"),
                                    in.number("epsilon_u"));
  if (name == "lambda_equivalence_analytic")
    return lambda_equivalence_bound(in.rho(), in.constituent("rad_HA"), in.m(), in.delta(), in.number("lambda"));
  if (name == "stochastic")
    return stochastic_bound(in.constituent("exp_emp_err"), in.constituent("exp_sensitivity"),
                            in.constituent("exp_rad"), in.rho(), in.m(), in.delta());
  if (name == "stochastic_fixed")
    return stochastic_fixed_bound(in.constituent("emp_err"), in.constituent("sensitivity"), in.constituent("rad"),
                                  in.rho(), in.m(), in.delta());
  if (name == "sensitivity_deviation" || name == "fast_rate_deviation") {
    const Constituent rad = in.constituent("rad");
    const DeviationBound b =
        name == "sensitivity_deviation"
            ? sensitivity_deviation_bound(rad.value, in.number("C"), in.m(), in.delta())
            : fast_rate_deviation_bound(rad.value, in.number("t"), in.number("C"), in.m(), in.delta());
    return deviation_report(name, b, rad.certified && rad.standard_error == 0.0);
  }
  std::string known;
  for (const auto& n : bound_names()) known += (known.empty() ? "" : ", ") + n;
  throw Error(ErrorCode::kInvalidArgument, "unknown bound '" + name + "'; known bounds: " + known);
}

int cmd_bound(const Globals& g, const std::string& config_path, const std::string& constituents_path,
              const std::string& name, const std::string& check_path) {
  if (!check_path.empty()) {
    const BoundReport r = bound_report_from_json(read_json(check_path));
    std::cout << "ok " << r.name << ' ' << csv::format_double(r.value) << '\n';
    return 0;
  }
  require(!name.empty(), ErrorCode::kInvalidArgument, "--name is required");
  require(!constituents_path.empty(), ErrorCode::kMissingConstituent, "--constituents file is required");
  std::optional<ExperimentConfig> cfg;
  if (!config_path.empty()) cfg = config_with_seed(config_path, g);
  const json c = read_json(constituents_path);
  require(c.is_object(), ErrorCode::kIngestion, constituents_path + ": expected a JSON object");
  const BoundReport report = compute_bound(name, Inputs(c, cfg ? &*cfg : nullptr));
  const fs::path dir = out_dir(g, cfg ? &*cfg : nullptr);
  write_json(dir / (name + ".json"), to_json(report));
  append_csv_row(dir / "results.csv", report);
  std::cout << to_json(report).dump(2) << '\n';
  return 0;
}

int cmd_validate(const Globals& g, const std::string& suite, int trials) {
  ValidationOptions opts;
  opts.trials = trials;
  if (g.seed) opts.seed = *g.seed;
  opts.threads = resolve_threads(g.threads);
  const CoverageReport r = run_suite(suite, opts);
  const json j = to_json(r);
  const fs::path path = out_dir(g) / ("validate_" + suite + ".json");
  write_json(path, j);
  std::cout << (r.passed ? "PASS " : "FAIL ") << r.suite << " violations=" << r.violations << "/" << r.trials
            << " coverage=" << r.coverage << '\n';
  return r.passed ? 0 : 1;
}

int report_error(const std::string& code, const std::string& message) {
  std::cerr << json{{"error", {{"code", code}, {"message", message}}}}.dump() << '\n';
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"approx_sense: approximation-sensitivity learning toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Top-level seed");
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--threads", g.threads, "Worker threads (default: APPROX_SENSE_THREADS or all cores)");

  std::string config, weights, from, geometry, pointset, method = "auto", constituents, name, check, suite;
  int n_omega = 64, trials = 0;
  std::int64_t n_sigma = 10000;

  auto* gen = app.add_subcommand("generate", "Write labelled and unlabelled CSV samples from a synthetic task");
  gen->add_option("--config", config, "Experiment config")->required();

  auto* train = app.add_subcommand("train", "Run the configured learner and write train.json");
  train->add_option("--config", config, "Experiment config")->required();

  auto* sens = app.add_subcommand("sensitivity", "Sensitivity estimates for one hypothesis");
  sens->add_option("--config", config, "Experiment config")->required();
  sens->add_option("--weights", weights, "Comma-separated weights");
  sens->add_option("--from", from, "train.json to take weights from");
  sens->add_option("--n-omega", n_omega, "Operator draws for stochastic operators");

  auto* rad = app.add_subcommand("rademacher", "Rademacher complexity of a geometry model or point set");
  rad->add_option("--geometry", geometry, "Geometry JSON");
  rad->add_option("--pointset", pointset, "Point set CSV, one point per row");
  rad->add_option("--method", method, "auto | closed_form | exact | mc")
      ->check(CLI::IsMember({"auto", "closed_form", "exact", "mc"}));
  rad->add_option("--n-sigma", n_sigma, "Monte Carlo sign draws");

  auto* bound = app.add_subcommand("bound", "Compute an itemized bound report");
  bound->add_option("--config", config, "Experiment config supplying rho, m and delta");
  bound->add_option("--constituents", constituents, "Constituent values JSON");
  bound->add_option("--name", name, "Bound name");
  bound->add_option("--check", check, "Validate an existing report and exit");

  auto* val = app.add_subcommand("validate", "Run a coverage or oracle validation suite");
  val->add_option("--suite", suite, "Suite name")->required();
  val->add_option("--trials", trials, "Trial count (0 = suite default)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return report_error("invalid_argument", e.what());
  }

  try {
    if (*gen) return cmd_generate(g, config);
    if (*train) return cmd_train(g, config);
    if (*sens) return cmd_sensitivity(g, config, weights, from, n_omega);
    if (*rad) return cmd_rademacher(g, geometry, pointset, method, n_sigma);
    if (*bound) return cmd_bound(g, config, constituents, name, check);
    if (*val) return cmd_validate(g, suite, trials);
  } catch (const Error& e) {
    return report_error(std::string(to_string(e.code())), e.what());
  } catch (const std::exception& e) {
    return report_error("internal", e.what());
  }
  return 0;
}
