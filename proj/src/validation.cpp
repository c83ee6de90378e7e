#include "approxsense/validation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <map>
#include <sstream>
#include <thread>

#include <Eigen/QR>

#include "approxsense/bounds.hpp"
#include "approxsense/error.hpp"
#include "approxsense/geometry.hpp"
#include "approxsense/learners.hpp"
#include "approxsense/rademacher.hpp"
#include "approxsense/sensitivity.hpp"

namespace approxsense {

namespace {

using json = nlohmann::json;

constexpr double kExactTolerance = 1e-9;
constexpr double kPs[] = {1.0, 1.5, 2.0, 3.0};

std::uint64_t trial_seed(std::uint64_t seed, int i) {
  return derive_seed(derive_seed(seed, Stream::kTrial), static_cast<std::uint64_t>(i));
}

double uniform(Rng& rng, double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); }
int uniform_int(Rng& rng, int a, int b) { return std::uniform_int_distribution<int>(a, b)(rng); }
double normal(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

int count_violations(const std::vector<TrialOutcome>& outcomes, std::size_t extra) {
  int v = 0;
  for (const auto& o : outcomes)
    if (extra < o.extra_violations.size() && o.extra_violations[extra]) ++v;
  return v;
}

bool meets(int trials, int violations, double threshold) {
  return static_cast<double>(trials - violations) >= std::ceil(threshold * trials - 1e-9);
}

CoverageReport summarize(std::string suite, std::string bound, const std::vector<TrialOutcome>& outcomes,
                         double target, double threshold) {
  CoverageReport r;
  r.suite = std::move(suite);
  r.bound = std::move(bound);
  r.trials = static_cast<int>(outcomes.size());
  double slack = 0.0;
  for (const auto& o : outcomes) {
    if (o.violated) ++r.violations;
    slack += o.slack;
  }
  r.coverage = r.trials ? 1.0 - static_cast<double>(r.violations) / r.trials : 0.0;
  r.mean_slack = r.trials ? slack / r.trials : 0.0;
  r.target = target;
  r.threshold = threshold;
  return r;
}

void add_coverage_check(CoverageReport& r, const std::vector<TrialOutcome>& outcomes, std::size_t extra,
                        const std::string& name, double threshold, bool gating = true) {
  const int v = count_violations(outcomes, extra);
  const int n = static_cast<int>(outcomes.size());
  SuiteCheck c;
  c.name = name;
  c.passed = meets(n, v, threshold) || !gating;
  c.detail = std::to_string(n - v) + "/" + std::to_string(n) + " covered (needs " + fmt(threshold) + ")";
  if (!gating) c.detail += (meets(n, v, threshold) ? "; " : "; below threshold; ") + std::string("informational");
  r.checks.push_back(std::move(c));
}

void finish(CoverageReport& r) {
  r.passed = meets(r.trials, r.violations, r.threshold);
  for (const auto& c : r.checks) r.passed = r.passed && c.passed;
}

int default_trials(const ValidationOptions& o, int fallback) { return o.trials > 0 ? o.trials : fallback; }

std::int64_t grid_index(const SearchDomain& d, const Vector& w) {
  const int n = d.points_per_axis;
  std::int64_t index = 0;
  for (Eigen::Index k = 0; k < w.size(); ++k) {
    const auto a = std::llround((w(k) + d.bound) * (n - 1) / (2.0 * d.bound));
    index = index * n + a;
  }
  return index;
}

// Population quantities of every grid hypothesis from one large reference
// sample, evaluated in chunks.
struct GridReference {
  std::vector<Vector> points;
  Matrix weights;   // D x N
  Matrix residual;  // D x N, w - Q(w)
  Matrix approx;    // D x U, distinct Q(w)
  std::vector<int> approx_of;  // N -> U
  Vector d1, d2;
  Vector err_f, err_af;  // err_af indexed by grid point
  Vector err_approx;     // indexed by distinct approximation
};

GridReference grid_reference(const SearchDomain& domain, const ApproxOperator& op, const SyntheticTask& task,
                             const LossSpec& spec, std::int64_t n_ref, std::uint64_t seed, bool errors) {
  GridReference g;
  g.points = domain.candidate_points();
  const auto N = static_cast<Eigen::Index>(g.points.size());
  const int D = domain.dim();
  g.weights.resize(D, N);
  g.residual.resize(D, N);
  std::map<std::vector<double>, int> distinct;
  std::vector<Vector> approx;
  for (Eigen::Index i = 0; i < N; ++i) {
    const Vector q = op.transform(g.points[i]);
    g.weights.col(i) = g.points[i];
    g.residual.col(i) = g.points[i] - q;
    std::vector<double> key(q.data(), q.data() + q.size());
    auto [it, inserted] = distinct.emplace(key, static_cast<int>(approx.size()));
    if (inserted) approx.push_back(q);
    g.approx_of.push_back(it->second);
  }
  const auto U = static_cast<Eigen::Index>(approx.size());
  g.approx.resize(D, U);
  for (Eigen::Index u = 0; u < U; ++u) g.approx.col(u) = approx[u];

  g.d1 = Vector::Zero(N);
  g.d2 = Vector::Zero(N);
  Vector ef = Vector::Zero(N);
  Vector ea = Vector::Zero(U);
  const std::int64_t chunk = std::clamp<std::int64_t>(4000000 / std::max<Eigen::Index>(N, 1), 256, 65536);
  std::uint64_t c = 0;
  for (std::int64_t start = 0; start < n_ref; start += chunk, ++c) {
    const int count = static_cast<int>(std::min(chunk, n_ref - start));
    const LabelledSample s = draw_labelled(task, count, derive_seed(seed, c));
    const Matrix F = domain.feature_map.apply_rows(s.inputs);
    const Matrix diff = F * g.residual;
    g.d1 += diff.cwiseAbs().colwise().sum().transpose();
    g.d2 += diff.array().square().matrix().colwise().sum().transpose();
    if (!errors) continue;
    const Matrix pf = F * g.weights;
    const Matrix pa = F * g.approx;
    for (Eigen::Index j = 0; j < N; ++j) {
      double t = 0.0;
      for (int i = 0; i < count; ++i) t += loss_value(spec, pf(i, j), s.targets(i));
      ef(j) += t;
    }
    for (Eigen::Index j = 0; j < U; ++j) {
      double t = 0.0;
      for (int i = 0; i < count; ++i) t += loss_value(spec, pa(i, j), s.targets(i));
      ea(j) += t;
    }
  }
  const auto n = static_cast<double>(n_ref);
  g.d1 /= n;
  g.d2 = (g.d2 / n).cwiseSqrt();
  if (errors) {
    g.err_f = ef / n;
    g.err_approx = ea / n;
    g.err_af.resize(N);
    for (Eigen::Index i = 0; i < N; ++i) g.err_af(i) = g.err_approx(g.approx_of[i]);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Exact geometry suites

double enumerate(const GeometryModel& g, int m) {
  return exact_rademacher_support(m, [&](const Vector& s) { return support_function(g, s); }).value;
}

CoverageReport ellipse_exact(const ValidationOptions& o) {
  const int n = default_trials(o, 100);
  auto outcomes = run_trials(n, o.threads, [&](int i) {
    Rng rng(trial_seed(o.seed, i));
    const int m = uniform_int(rng, 1, 12);
    const double p = kPs[uniform_int(rng, 0, 3)];
    Vector mu(m);
    for (int k = 0; k < m; ++k) mu(k) = uniform(rng, 0.05, 3.0);
    const double exact = enumerate(GeometryModel::ellipse(mu, p), m);
    const double err = std::abs(exact - ellipse_rademacher(mu, p, m).value);
    return TrialOutcome{err > kExactTolerance, -err, {}};
  });
  auto r = summarize("ellipse_exact", "ellipse_closed_form", outcomes, 1.0, 1.0);
  r.parameters = {{"tolerance", kExactTolerance}, {"max_m", 12}, {"p", {1.0, 1.5, 2.0, 3.0}}};
  finish(r);
  return r;
}

CoverageReport union_exact(const ValidationOptions& o) {
  const int n = default_trials(o, 100);
  auto outcomes = run_trials(n, o.threads, [&](int i) {
    Rng rng(trial_seed(o.seed, i));
    const int m = uniform_int(rng, 1, 12);
    const double p = kPs[uniform_int(rng, 0, 3)];
    const int l = uniform_int(rng, 1, 5);
    std::vector<Vector> mus;
    for (int j = 0; j < l; ++j) {
      Vector mu(m);
      for (int k = 0; k < m; ++k) mu(k) = uniform(rng, 0.05, 3.0);
      mus.push_back(mu);
    }
    const double exact = enumerate(GeometryModel::axis_union(mus, p), m);
    const double err = std::abs(exact - union_ellipse_bound(mus, p, m).value);
    return TrialOutcome{err > kExactTolerance, -err, {}};
  });
  auto r = summarize("union_exact", "axis_union_max", outcomes, 1.0, 1.0);
  r.parameters = {{"tolerance", kExactTolerance}, {"max_m", 12}, {"max_components", 5}};
  finish(r);
  return r;
}

CoverageReport crude_sandwich(const ValidationOptions& o) {
  const int n = default_trials(o, 100);
  auto outcomes = run_trials(n, o.threads, [&](int i) {
    Rng rng(trial_seed(o.seed, i));
    const double p = uniform_int(rng, 0, 1) == 0 ? 1.0 : 2.0;
    const int m = uniform_int(rng, 1, 10);
    const double R = uniform(rng, 0.1, 3.0);
    const double exact = enumerate(GeometryModel::pball(R, p, m), m);
    const auto [lo, hi] = crude_bounds(R, p);
    const double slack = std::min(exact - lo, hi - exact);
    return TrialOutcome{slack < -1e-12, slack, {}};
  });
  auto r = summarize("crude_sandwich", "crude_sandwich", outcomes, 1.0, 1.0);
  const double anchor = enumerate(GeometryModel::pball(1.0, 2.0, 2), 2);
  const double expected = (2.0 + 2.0 * std::sqrt(2.0)) / 8.0;
  r.checks.push_back({"anchor_p2_m2", std::abs(anchor - expected) <= 1e-12,
                      "enumerated " + fmt(anchor) + ", expected (2 + 2 sqrt 2) / 8"});
  r.parameters = {{"p", {1.0, 2.0}}, {"max_m", 10}, {"anchor", anchor}};
  finish(r);
  return r;
}

Matrix random_orthogonal(int m, Rng& rng) {
  Matrix G(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) G(i, j) = normal(rng);
  Eigen::HouseholderQR<Matrix> qr(G);
  return qr.householderQ();
}

CoverageReport cluster_dominance(const ValidationOptions& o) {
  const int n = default_trials(o, 200);
  auto outcomes = run_trials(n, o.threads, [&](int i) {
    Rng rng(trial_seed(o.seed, i));
    const int m = uniform_int(rng, 2, 10);
    const int l = uniform_int(rng, 1, 4);
    const double p = kPs[uniform_int(rng, 0, 3)];
    std::vector<ClusterComponent> parts;
    for (int j = 0; j < l; ++j) {
      ClusterComponent c;
      c.V = random_orthogonal(m, rng);
      c.mu.resize(m);
      for (int k = 0; k < m; ++k) c.mu(k) = uniform(rng, 0.05, 2.0);
      const double scale = uniform(rng, 0.0, 1.5);
      c.center.resize(m);
      for (int k = 0; k < m; ++k) c.center(k) = scale * normal(rng);
      parts.push_back(std::move(c));
    }
    const int count = uniform_int(rng, 2, 20);
    Matrix points(count, m);
    for (int a = 0; a < count; ++a) {
      const auto& part = parts[static_cast<std::size_t>(uniform_int(rng, 0, l - 1))];
      points.row(a) = sample_inside(part, p, rng).transpose();
    }
    const double exact = exact_rademacher_rows(points).value;
    const double bound = cluster_bound(parts, p, m).value;

    std::vector<RotatedEllipse> rotated;
    for (auto& part : parts) {
      part.center.setZero();
      rotated.push_back({part.V, part.mu});
    }
    const bool reduces = cluster_bound(parts, p, m).value == rotated_union_bound(rotated, p, m).value;
    return TrialOutcome{exact > bound + 1e-12, bound - exact, {!reduces}};
  });
  auto r = summarize("cluster_dominance", "cluster_bound", outcomes, 1.0, 1.0);
  add_coverage_check(r, outcomes, 0, "zero_centers_reduce_to_union", 1.0);
  r.parameters = {{"max_m", 10}, {"max_components", 4}, {"max_points", 20}};
  finish(r);
  return r;
}

CoverageReport kernel_dominance(const ValidationOptions& o) {
  const int n = default_trials(o, 100);
  constexpr std::int64_t kSigmas = 2000;
  auto outcomes = run_trials(n, o.threads, [&](int i) {
    const std::uint64_t ts = trial_seed(o.seed, i);
    Rng rng(ts);
    const int d = uniform_int(rng, 1, 5);
    const int m = uniform_int(rng, 5, 50);
    const double step = uniform(rng, 0.1, 0.6);
    const double sd = uniform(rng, 0.5, 2.0);
    Matrix X(m, d);
    for (int k = 0; k < m; ++k)
      for (int j = 0; j < d; ++j) X(k, j) = sd * normal(rng);
    const ApproxOperator op = ApproxOperator::uniform_quantizer(step, 1.0);
    // Midpoints of the quantization cells realize the largest residual.
    const Vector w = Vector::Constant(d, step / 2.0);
    const double sup_residual = (w - op.transform(w)).norm();
    const Vector gram = X.rowwise().squaredNorm();
    const double bound = kernel_sensitivity_class_bound(sup_residual, gram).value;

    const double half = step / 2.0;
    const RadEstimate linear = mc_rademacher_support(
        m, [&](const Vector& s) { return half * (X.transpose() * s).lpNorm<1>(); }, kSigmas,
        derive_seed(ts, Stream::kRademacher));
    // Residual-box vertices with the absolute value kept: a subset of the
    // literal sensitivity set.
    Matrix vertices(1 << d, m);
    for (int v = 0; v < (1 << d); ++v) {
      Vector r(d);
      for (int j = 0; j < d; ++j) r(j) = (v >> j & 1) ? -half : half;
      vertices.row(v) = (X * r).cwiseAbs().transpose();
    }
    const RadEstimate absolute = mc_rademacher_rows(vertices, kSigmas, derive_seed(ts, Stream::kRademacher));
    const bool violated = linear.value - 4.0 * linear.standard_error > bound;
    const bool abs_violated = absolute.value - 4.0 * absolute.standard_error > bound;
    return TrialOutcome{violated, bound - linear.value, {abs_violated}};
  });
  auto r = summarize("kernel_dominance", "kernel_sensitivity_class_bound", outcomes, 1.0, 1.0);
  add_coverage_check(r, outcomes, 0, "absolute_value_vertex_set", 1.0, false);
  r.parameters = {{"n_sigma", kSigmas}, {"max_d", 5}, {"max_m", 50}, {"standard_errors", 4}};
  finish(r);
  return r;
}

// ---------------------------------------------------------------------------
// Sensitivity deviation suites

struct DeviationSetup {
  SearchDomain domain;
  ApproxOperator op;
  SyntheticTask task;
  GridReference ref;
  double C = 0.0;
};

DeviationSetup deviation_setup(int points_per_axis, double step, std::uint64_t seed) {
  const FeatureMap map = FeatureMap::identity(2);
  SearchDomain domain = SearchDomain::grid(map, 1.0, points_per_axis);
  const ApproxOperator op = ApproxOperator::uniform_quantizer(step, 1.0);
  SyntheticTask task{Hypothesis(Vector::Zero(2), map), InputLaw::uniform_box(-1.0, 1.0), 0.0, seed};
  GridReference ref = grid_reference(domain, op, task, LossSpec(), 1000000,
                                     derive_seed(seed, Stream::kReference), false);
  const double radius = *task.input_law.support_radius(2);
  const double C = uniform_sensitivity_constant(op, ref.points, radius);
  return {domain, op, task, std::move(ref), C};
}

struct DeviationTrial {
  double deviation = 0.0;
  RadEstimate rad;
  double massart = 0.0;
};

DeviationTrial deviation_trial(const DeviationSetup& s, int m, std::int64_t n_sigma, std::uint64_t ts) {
  const UnlabelledSample u = generate_unlabelled(s.task.with_seed(ts), m);
  const Matrix rows = (u.inputs * s.ref.residual).cwiseAbs().transpose();
  const Vector d_hat = rows.rowwise().mean();
  DeviationTrial t;
  t.deviation = (d_hat - s.ref.d1).cwiseAbs().maxCoeff();
  t.rad = mc_rademacher_rows(rows, n_sigma, derive_seed(ts, Stream::kRademacher));
  t.massart = massart_bound(rows);
  return t;
}

CoverageReport lemma1(const ValidationOptions& o) {
  const int n = default_trials(o, 500);
  constexpr int m = 100;
  constexpr double delta = 0.1;
  constexpr std::int64_t kSigmas = 1000;
  const DeviationSetup s = deviation_setup(11, 0.5, o.seed);
  const double t_fast = s.ref.d2.maxCoeff();
  auto outcomes = run_trials(n, o.threads, [&](int i) {
    const DeviationTrial t = deviation_trial(s, m, kSigmas, trial_seed(o.seed, i));
    const double eps = sensitivity_deviation_bound(t.rad.value, s.C, m, delta).epsilon_u;
    const double eps_massart = sensitivity_deviation_bound(t.massart, s.C, m, delta).epsilon_u;
    const double eps_fast = fast_rate_deviation_bound(t.rad.value, t_fast, s.C, m, delta).epsilon_u;
    return TrialOutcome{t.deviation > eps, eps - t.deviation,
                        {t.deviation > eps_massart, t.deviation > eps_fast}};
  });
  auto r = summarize("lemma1", "sensitivity_deviation_bound", outcomes, 1.0 - delta, 1.0 - delta);
  add_coverage_check(r, outcomes, 0, "massart_rademacher", 1.0 - delta);
  add_coverage_check(r, outcomes, 1, "fast_rate_at_max_d2", 1.0 - delta);
  r.parameters = {{"grid", "11x11 on [-1,1]^2"}, {"quantizer_step", 0.5}, {"m", m}, {"delta", delta},
                  {"n_sigma", kSigmas}, {"reference_draws", 1000000}, {"C", s.C}, {"t_fast", t_fast}};
  finish(r);
  return r;
}

CoverageReport prop10(const ValidationOptions& o) {
  const int n = default_trials(o, 300);
  constexpr int m = 100;
  constexpr double delta = 0.1;
  constexpr double t = 0.1;
  constexpr std::int64_t kSigmas = 1000;
  const DeviationSetup s = deviation_setup(21, 0.2, o.seed);
  const double max_d2 = s.ref.d2.maxCoeff();
  auto outcomes = run_trials(n, o.threads, [&](int i) {
    const DeviationTrial tr = deviation_trial(s, m, kSigmas, trial_seed(o.seed, i));
    const double eps = fast_rate_deviation_bound(tr.rad.value, t, s.C, m, delta).epsilon_u;
    return TrialOutcome{tr.deviation > eps, eps - tr.deviation, {}};
  });
  auto r = summarize("prop10", "fast_rate_deviation_bound", outcomes, 1.0 - delta, 1.0 - delta);
  r.checks.push_back({"uniform_d2_condition", max_d2 <= t, "max D^2 over the grid = " + fmt(max_d2)});
  r.parameters = {{"grid", "21x21 on [-1,1]^2"}, {"quantizer_step", 0.2}, {"m", m}, {"delta", delta},
                  {"t", t}, {"n_sigma", kSigmas}, {"reference_draws", 1000000}, {"C", s.C}};
  finish(r);
  return r;
}

// ---------------------------------------------------------------------------
// Learning-guarantee suites

struct LearningSetup {
  SearchDomain domain;
  ApproxOperator op;
  SyntheticTask task;
  LossSpec spec;
  GridReference ref;
};

LearningSetup prop23_setup(std::uint64_t seed) {
  const FeatureMap map = FeatureMap::identity(5);
  Vector teacher(5);
  teacher << 0.45, -0.3, 0.2, -0.7, 0.55;
  SyntheticTask task{Hypothesis(teacher, map), InputLaw::uniform_box(-1.0, 1.0), 0.1, seed};
  SearchDomain domain = SearchDomain::grid(map, 1.0, 6);
  const ApproxOperator op = ApproxOperator::uniform_levels(4, 1.0);
  const LossSpec spec(LossSpec::Kind::kClippedAbsolute, 1.0);
  GridReference ref = grid_reference(domain, op, task, spec, 100000, derive_seed(seed, Stream::kReference), true);
  return {domain, op, task, spec, std::move(ref)};
}

RadEstimate approx_class_rad(const GridReference& ref, const Matrix& features, std::int64_t n_sigma,
                             std::uint64_t seed) {
  return mc_rademacher_rows((features * ref.approx).transpose(), n_sigma, seed);
}

double median(Vector v) {
  std::sort(v.data(), v.data() + v.size());
  return v(v.size() / 2);
}

CoverageReport prop2(const ValidationOptions& o) {
  const int n = default_trials(o, 200);
  constexpr int m = 50;
  constexpr double delta = 0.05;
  constexpr std::int64_t kSigmas = 500;
  const LearningSetup s = prop23_setup(o.seed);
  const GridReference& ref = s.ref;
  const double t = median(ref.d1);
  const double rho = s.spec.rho();
  double err_f_star = std::numeric_limits<double>::infinity();
  double err_g_star = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < ref.d1.size(); ++i) {
    if (ref.d1(i) > t) continue;
    err_f_star = std::min(err_f_star, ref.err_f(i));
    err_g_star = std::min(err_g_star, ref.err_af(i));
  }
  auto outcomes = run_trials(n, o.threads, [&](int i) {
    const std::uint64_t ts = trial_seed(o.seed, i);
    const LabelledSample sample = generate_labelled(s.task.with_seed(ts), m);
    const ObjectiveTerms terms(sample, std::nullopt, s.op, s.spec, s.domain.feature_map);
    const OptimizeResult fit = optimize([&](const Vector& w) { return terms.approx_error(w); }, s.domain,
                                        [&](const Vector& w) { return ref.d1(grid_index(s.domain, w)) <= t; });
    const std::int64_t chosen = grid_index(s.domain, fit.weights);
    const RadEstimate rad = approx_class_rad(ref, terms.labelled_features(), kSigmas,
                                             derive_seed(ts, Stream::kRademacher));
    const JointBounds b = joint_bounds({std::min(err_g_star, err_f_star), err_f_star}, rad, rho, t, m, delta);
    const double lhs_af = ref.err_af(chosen);
    const double lhs_f = ref.err_f(chosen);
    return TrialOutcome{lhs_af > b.af.value, b.af.value - lhs_af,
                        {lhs_af > b.af_ag.value, lhs_f > b.f.value}};
  });
  auto r = summarize("prop2", "joint_af", outcomes, 1.0 - delta, 0.9);
  add_coverage_check(r, outcomes, 0, "joint_af_ag", 0.9, false);
  add_coverage_check(r, outcomes, 1, "joint_f", 0.9, false);
  r.parameters = {{"d", 5}, {"grid_points", ref.points.size()}, {"levels", 4}, {"m", m}, {"delta", delta},
                  {"t", t}, {"n_sigma", kSigmas}, {"reference_draws", 100000},
                  {"approx_class_size", ref.approx.cols()}};
  finish(r);
  return r;
}

CoverageReport prop3(const ValidationOptions& o) {
  const int n = default_trials(o, 200);
  constexpr int m = 50;
  constexpr double delta = 0.05;
  constexpr std::int64_t kSigmas = 500;
  const LearningSetup s = prop23_setup(o.seed);
  const GridReference& ref = s.ref;
  const double rho = s.spec.rho();
  // inf_t {err(f_t*) + 2 rho t} over the sensitivity levels that occur.
  std::vector<std::pair<double, double>> by_d;
  for (Eigen::Index i = 0; i < ref.d1.size(); ++i) by_d.emplace_back(ref.d1(i), ref.err_f(i));
  std::sort(by_d.begin(), by_d.end());
  std::vector<double> ts, err_star;
  double running = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < by_d.size(); ++i) {
    running = std::min(running, by_d[i].second);
    if (i + 1 < by_d.size() && by_d[i + 1].first == by_d[i].first) continue;
    ts.push_back(by_d[i].first);
    err_star.push_back(running);
  }
  const SensitivityFn true_d{"reference", [&](const Vector& w) { return ref.d1(grid_index(s.domain, w)); }};
  auto outcomes = run_trials(n, o.threads, [&](int i) {
    const std::uint64_t ts_i = trial_seed(o.seed, i);
    const LabelledSample sample = generate_labelled(s.task.with_seed(ts_i), m);
    const LearnerOutput fit = sensitivity_regularized_erm(sample, s.op, true_d, s.spec, s.domain);
    const double lhs = ref.err_af(grid_index(s.domain, fit.hypothesis.weights));
    const Matrix features = s.domain.feature_map.apply_rows(sample.inputs);
    const RadEstimate rad = approx_class_rad(ref, features, kSigmas, derive_seed(ts_i, Stream::kRademacher));
    const double rhs = regularized_bound(err_star, ts, rho, rad, m, delta).value;
    return TrialOutcome{lhs > rhs, rhs - lhs, {}};
  });
  auto r = summarize("prop3", "regularized", outcomes, 1.0 - delta, 0.9);
  r.parameters = {{"d", 5}, {"grid_points", ref.points.size()}, {"levels", 4}, {"m", m}, {"delta", delta},
                  {"n_sigma", kSigmas}, {"reference_draws", 100000}, {"sensitivity_levels", ts.size()}};
  finish(r);
  return r;
}

CoverageReport prop4(const ValidationOptions& o) {
  const int n = default_trials(o, 200);
  constexpr int m = 50;
  constexpr double delta = 0.05;
  constexpr double lambda = 1.0;
  constexpr std::int64_t kSigmas = 500;
  const FeatureMap map = FeatureMap::identity(2);
  Vector teacher(2);
  teacher << 0.62, -0.37;
  const SyntheticTask task{Hypothesis(teacher, map), InputLaw::uniform_box(-1.0, 1.0), 0.1, o.seed};
  const SearchDomain domain = SearchDomain::grid(map, 1.0, 21);
  const ApproxOperator op = ApproxOperator::uniform_quantizer(0.5, 1.0);
  const LossSpec spec(LossSpec::Kind::kClippedAbsolute, 1.0);
  const GridReference ref =
      grid_reference(domain, op, task, spec, 100000, derive_seed(o.seed, Stream::kReference), true);
  const double radius = *task.input_law.support_radius(2);
  const double C = uniform_sensitivity_constant(op, ref.points, radius);
  const double rho = spec.rho();
  auto outcomes = run_trials(n, o.threads, [&](int i) {
    const std::uint64_t ts = trial_seed(o.seed, i);
    const SyntheticTask trial_task = task.with_seed(ts);
    const LabelledSample sample = generate_labelled(trial_task, m);
    const UnlabelledSample unlabelled = generate_unlabelled(trial_task, m);
    const ObjectiveTerms terms(sample, std::nullopt, op, spec, map);
    auto approx_error = [&](const Vector& w) { return terms.approx_error(w); };

    const LearnerOutput tilde = lambda_erm(sample, unlabelled, op, lambda, 1.0, spec, domain);
    const double t = ref.d1(grid_index(domain, tilde.hypothesis.weights));
    const OptimizeResult hat =
        optimize(approx_error, domain, [&](const Vector& w) { return ref.d1(grid_index(domain, w)) <= t; });

    const Matrix sens_rows = (unlabelled.inputs * ref.residual).cwiseAbs().transpose();
    const RadEstimate sens_rad = mc_rademacher_rows(sens_rows, kSigmas, derive_seed(ts, Stream::kRademacher));
    const double eps_u = sensitivity_deviation_bound(sens_rad.value, C, m, delta / 4.0).epsilon_u;
    const RadEstimate rad = approx_class_rad(ref, terms.labelled_features(), kSigmas,
                                             derive_seed(derive_seed(ts, Stream::kRademacher), 1));
    const double rhs = lambda_equivalence_bound(rho, rad, m, delta, lambda, eps_u).value;
    const double lhs = ref.err_af(grid_index(domain, tilde.hypothesis.weights)) -
                       ref.err_af(grid_index(domain, hat.weights));

    // Analytic variant: overline D is computable, so no eps_u appears.
    const LearnerOutput bar = analytic_lambda_erm(sample, op, lambda, radius, spec, domain);
    const SensitivityFn overline = SensitivityFn::analytic(op, radius);
    const double t_bar = overline.evaluate(bar.hypothesis.weights);
    const OptimizeResult bar_hat =
        optimize(approx_error, domain, [&](const Vector& w) { return overline.evaluate(w) <= t_bar; });
    const double rhs_bar = lambda_equivalence_bound(rho, rad, m, delta, lambda).value;
    const double lhs_bar = ref.err_af(grid_index(domain, bar.hypothesis.weights)) -
                           ref.err_af(grid_index(domain, bar_hat.weights));
    return TrialOutcome{lhs > rhs, rhs - lhs, {lhs_bar > rhs_bar}};
  });
  auto r = summarize("prop4", "lambda_equivalence", outcomes, 1.0 - delta, 0.95);
  add_coverage_check(r, outcomes, 0, "lambda_equivalence_analytic", 0.95);
  r.parameters = {{"grid", "21x21 on [-1,1]^2"}, {"quantizer_step", 0.5}, {"m", m}, {"m_unlabelled", m},
                  {"lambda", lambda}, {"delta", delta}, {"n_sigma", kSigmas}, {"reference_draws", 100000},
                  {"C", C}};
  finish(r);
  return r;
}

// ---------------------------------------------------------------------------
// Stochastic operators

CoverageReport stochastic_unbiased(const ValidationOptions& o) {
  constexpr int kDraws = 100000;
  constexpr double w0 = 0.3;
  const ApproxOperator rounder = ApproxOperator::stochastic_rounder(1.0, 10.0);
  Rng rng = make_rng(derive_seed(o.seed, Stream::kOperatorNoise));
  const Vector w = Vector::Constant(1, w0);
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < kDraws; ++i) {
    const double q = rounder.transform(w, rng)(0);
    sum += q;
    sq += (q - w0) * (q - w0);
  }
  const double mean = sum / kDraws;
  const double second = sq / kDraws;
  const double tolerance = 3.0 * std::sqrt(0.21 / kDraws);
  const double gap = std::abs(mean - w0);

  CoverageReport r;
  r.suite = "stochastic_unbiased";
  r.bound = "stochastic_rounder_mean";
  r.trials = 1;
  r.violations = gap > tolerance ? 1 : 0;
  r.coverage = 1.0 - r.violations;
  r.mean_slack = tolerance - gap;

  // A deterministic operator is the singleton-Omega case: the expected
  // quantities coincide with their fixed values, and the two reports must
  // agree term by term except for the confidence term.
  const FeatureMap map = FeatureMap::identity(2);
  Vector teacher(2);
  teacher << 0.4, -0.8;
  const SyntheticTask task{Hypothesis(teacher, map), InputLaw::uniform_box(-1.0, 1.0), 0.1,
                           derive_seed(o.seed, Stream::kLabelled)};
  const LabelledSample s = generate_labelled(task, 12);
  const UnlabelledSample u = generate_unlabelled(task, 12);
  const ApproxOperator q = ApproxOperator::uniform_quantizer(0.25, 1.0);
  const LossSpec spec;
  Vector wf(2);
  wf << 0.33, -0.61;
  const Hypothesis h(wf, map);
  const double err = empirical_error(apply_operator(q, h), s, spec);
  const SensitivityEstimate d = empirical_sensitivity(h, q, u);
  const SearchDomain domain = SearchDomain::grid(map, 1.0, 5);
  Matrix approx_preds(domain.grid_size(), s.size());
  for (std::int64_t i = 0; i < domain.grid_size(); ++i)
    approx_preds.row(i) = (s.inputs * q.transform(domain.grid_point(i))).transpose();
  const RadEstimate rad = exact_rademacher_rows(approx_preds);
  const BoundReport avg = stochastic_bound(err, d, rad, spec.rho(), s.size(), 0.1);
  const BoundReport fixed = stochastic_fixed_bound(err, d, rad, spec.rho(), s.size(), 0.1);
  bool same = avg.terms.size() == fixed.terms.size() && avg.terms.size() >= 3;
  for (std::size_t k = 0; same && k < 3; ++k) same = avg.terms[k].value == fixed.terms[k].value;
  r.checks.push_back({"singleton_omega_reduction", same,
                      "first three terms of the averaged and fixed-operator reports compared exactly"});
  // A rounder evaluated at on-grid weights never moves them.
  Vector on_grid(2);
  on_grid << 0.25, -0.5;
  const Hypothesis hg(on_grid, map);
  const ApproxOperator grid_rounder = ApproxOperator::stochastic_rounder(0.25, 1.0);
  const double det_err = empirical_error(apply_operator(q, hg), s, spec);
  bool degenerate = expected_sensitivity(hg, grid_rounder, u, 1.0, 16, o.seed).value == 0.0;
  for (std::uint64_t j = 0; j < 16; ++j)
    degenerate = degenerate && empirical_error(apply_operator(grid_rounder, hg, derive_seed(o.seed, j)), s, spec) == det_err;
  r.checks.push_back({"on_grid_rounder_is_deterministic", degenerate,
                      "16 operator draws at on-grid weights match the deterministic quantizer"});
  r.checks.push_back({"second_moment", std::abs(second - 0.21) <= 3.0 * std::sqrt(0.21 * 0.79 / kDraws),
                      "E (Q(w) - w)^2 = " + fmt(second) + ", expected 0.21"});
  r.target = 1.0;
  r.threshold = 1.0;
  r.parameters = {{"w", w0}, {"step", 1.0}, {"draws", kDraws}, {"mean", mean}, {"tolerance", tolerance}};
  finish(r);
  return r;
}

// ---------------------------------------------------------------------------
// Learner oracle: every learner against an exhaustive minimization written
// out with plain loops.

struct Oracle {
  const Matrix& xl;
  const Vector& y;
  const Matrix& xu;
  const ApproxOperator& op;
  const LossSpec& spec;
  double p;

  static double dot(const Matrix& x, int i, const Vector& w) { return x(i, 0) * w(0) + x(i, 1) * w(1); }

  double error(const Vector& w) const {
    double total = 0.0;
    for (int i = 0; i < xl.rows(); ++i) total += loss_value(spec, dot(xl, i, w), y(i));
    return total / static_cast<double>(xl.rows());
  }
  double approx_error(const Vector& w) const { return error(op.transform(w)); }
  double sensitivity(const Vector& w) const {
    const Vector q = op.transform(w);
    const Vector r{{w(0) - q(0), w(1) - q(1)}};
    double total = 0.0;
    for (int i = 0; i < xu.rows(); ++i) {
      const double v = std::abs(dot(xu, i, r));
      total += p == 1.0 ? v : v * v;
    }
    const double mean = total / static_cast<double>(xu.rows());
    return p == 1.0 ? mean : std::sqrt(mean);
  }
  double analytic(const Vector& w, double budget) const {
    const Vector q = op.transform(w);
    const double a = w(0) - q(0), b = w(1) - q(1);
    return std::sqrt(a * a + b * b) * budget;
  }
};

std::vector<Vector> oracle_grid(int n, double W) {
  std::vector<Vector> pts;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      pts.push_back(Vector{{-W + (2.0 * W * a) / (n - 1), -W + (2.0 * W * b) / (n - 1)}});
  return pts;
}

template <class F, class G>
std::pair<Vector, double> exhaustive(const std::vector<Vector>& pts, F objective, G feasible) {
  Vector best;
  double value = 0.0;
  bool found = false;
  for (const Vector& w : pts) {
    if (!feasible(w)) continue;
    const double v = objective(w);
    if (!found || v < value) {
      found = true;
      best = w;
      value = v;
    }
  }
  return {best, value};
}

const auto kAll = [](const Vector&) { return true; };

CoverageReport learner_oracle(const ValidationOptions& o) {
  const int n = default_trials(o, 50);
  static const char* kNames[] = {"constrained_erm",      "srm",         "regularized_empirical",
                                 "regularized_analytic", "lambda_erm",  "analytic_lambda_erm",
                                 "lambda_grid_srm"};
  constexpr int kLearners = 7;
  auto outcomes = run_trials(n, o.threads, [&](int i) {
    const std::uint64_t ts = trial_seed(o.seed, i);
    Rng rng(ts);
    const int sizes[] = {11, 15, 21};
    const int ppa = sizes[uniform_int(rng, 0, 2)];
    const double W = uniform_int(rng, 0, 1) == 0 ? 1.0 : 1.5;
    const double step = uniform_int(rng, 0, 1) == 0 ? 0.25 : 0.5;
    const LossSpec::Kind kinds[] = {LossSpec::Kind::kClippedAbsolute, LossSpec::Kind::kClippedHinge,
                                    LossSpec::Kind::kClippedSquared};
    const LossSpec spec(kinds[uniform_int(rng, 0, 2)], std::vector<double>{0.5, 1.0, 2.0}[uniform_int(rng, 0, 2)]);
    const double p = uniform_int(rng, 0, 1) == 0 ? 1.0 : 2.0;
    const int m = uniform_int(rng, 20, 60);
    const int mu = uniform_int(rng, 20, 60);
    Vector teacher(2);
    teacher << uniform(rng, -1.0, 1.0), uniform(rng, -1.0, 1.0);
    const FeatureMap map = FeatureMap::identity(2);
    const SyntheticTask task{Hypothesis(teacher, map), InputLaw::uniform_box(-1.0, 1.0), 0.1, ts};
    const LabelledSample lab = generate_labelled(task, m);
    const UnlabelledSample unl = generate_unlabelled(task, mu);
    const ApproxOperator op = ApproxOperator::uniform_quantizer(step, W);
    const SearchDomain domain = SearchDomain::grid(map, W, ppa);
    const Oracle oracle{lab.inputs, lab.targets, unl.inputs, op, spec, p};
    const std::vector<Vector> pts = oracle_grid(ppa, W);
    const double rho = spec.rho();
    const double budget = std::sqrt(2.0);

    std::vector<double> levels;
    for (const Vector& w : pts) {
      const double d = oracle.sensitivity(w);
      if (d > 0.0) levels.push_back(d);
    }
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    std::vector<double> thresholds{0.05, 0.1, 0.2};
    double t = 0.1;
    if (levels.size() >= 4) {
      const std::size_t L = levels.size();
      thresholds = {levels[L / 4], levels[L / 2], levels[3 * L / 4]};
      t = levels[static_cast<std::size_t>(uniform_int(rng, 1, static_cast<int>(L) - 1))];
    }
    const double eps_u = uniform_int(rng, 0, 1) == 0 ? 0.0 : 0.01;
    const double lambda = std::vector<double>{0.0, 0.5, 1.0, 2.0}[uniform_int(rng, 0, 3)];
    const ThresholdSchedule schedule = ThresholdSchedule::with_default_weights(thresholds);
    const RadEstimator rad = grid_rad_estimator(lab, unl, op, domain, p, 200, derive_seed(ts, Stream::kRademacher));

    std::vector<bool> mismatch(kLearners, false);
    auto compare = [&](int k, const LearnerOutput& out, const std::pair<Vector, double>& want) {
      mismatch[k] = !(out.hypothesis.weights == want.first) || out.objective_value != want.second;
    };

    compare(0, constrained_erm(lab, unl, op, t, p, spec, domain),
            exhaustive(pts, [&](const Vector& w) { return oracle.approx_error(w); },
                       [&](const Vector& w) { return oracle.sensitivity(w) < t; }));

    std::vector<double> penalty;
    for (int k = 0; k < schedule.size(); ++k) {
      const double r = rad(schedule.thresholds[k] + eps_u).value;
      penalty.push_back(2.0 * rho * r + 3.0 * std::sqrt(std::log(1.0 / schedule.weights[k]) / (2.0 * m)));
    }
    auto srm_objective = [&](const Vector& w) {
      const double d = oracle.sensitivity(w);
      std::size_t k = 0;
      while (k + 1 < penalty.size() && !(d <= schedule.thresholds[k] + eps_u)) ++k;
      return oracle.error(w) + penalty[k];
    };
    compare(1, srm_learner(lab, unl, op, schedule, eps_u, rad, spec, domain, p),
            exhaustive(pts, srm_objective, kAll));

    compare(2,
            sensitivity_regularized_erm(lab, op, SensitivityFn::empirical(op, unl, map, p), spec, domain),
            exhaustive(pts, [&](const Vector& w) { return oracle.approx_error(w) + rho * oracle.sensitivity(w); },
                       kAll));
    compare(3, sensitivity_regularized_erm(lab, op, SensitivityFn::analytic(op, budget), spec, domain),
            exhaustive(pts,
                       [&](const Vector& w) { return oracle.approx_error(w) + rho * oracle.analytic(w, budget); },
                       kAll));
    compare(4, lambda_erm(lab, unl, op, lambda, p, spec, domain),
            exhaustive(pts,
                       [&](const Vector& w) { return oracle.approx_error(w) + lambda * oracle.sensitivity(w); },
                       kAll));
    compare(5, analytic_lambda_erm(lab, op, lambda, budget, spec, domain),
            exhaustive(pts,
                       [&](const Vector& w) { return oracle.approx_error(w) + lambda * oracle.analytic(w, budget); },
                       kAll));

    const std::vector<double> lambdas{0.0, 0.5, 1.0, 2.0};
    const std::vector<double> weights{0.5, 0.25, 0.125, 0.0625};
    std::pair<Vector, double> best;
    bool have = false;
    for (std::size_t k = 0; k < lambdas.size(); ++k) {
      const double lk = lambdas[k];
      const Vector wk =
          exhaustive(pts, [&](const Vector& w) { return oracle.approx_error(w) + lk * oracle.sensitivity(w); },
                     kAll)
              .first;
      const double score = oracle.approx_error(wk) + 3.0 * std::sqrt(std::log(1.0 / weights[k]) / (2.0 * m));
      if (!have || score < best.second) {
        have = true;
        best = {wk, score};
      }
    }
    compare(6, lambda_grid_srm(lab, unl, op, lambdas, weights, p, spec, domain), best);

    TrialOutcome out;
    out.extra_violations = mismatch;
    out.violated = std::any_of(mismatch.begin(), mismatch.end(), [](bool b) { return b; });
    out.slack = 0.0;
    return out;
  });
  auto r = summarize("learner_oracle", "exhaustive_minimizer", outcomes, 1.0, 1.0);
  for (int k = 0; k < kLearners; ++k) add_coverage_check(r, outcomes, static_cast<std::size_t>(k), kNames[k], 1.0);
  r.parameters = {{"d", 2}, {"points_per_axis", {11, 15, 21}}, {"learners", kLearners}};
  finish(r);
  return r;
}

using SuiteFn = CoverageReport (*)(const ValidationOptions&);

struct SuiteEntry {
  const char* name;
  SuiteFn fn;
  const char* description;
};

const std::vector<SuiteEntry>& registry() {
  static const std::vector<SuiteEntry> entries{
      {"ellipse_exact", ellipse_exact, "closed-form ellipse complexity vs sign enumeration"},
      {"union_exact", union_exact, "axis-aligned union max formula vs sign enumeration"},
      {"crude_sandwich", crude_sandwich, "positive-orthant ball complexity inside the crude bounds"},
      {"cluster_dominance", cluster_dominance, "clustered-union bound vs enumerated point sets"},
      {"kernel_dominance", kernel_dominance, "kernel sensitivity bound vs Monte Carlo complexity"},
      {"lemma1", lemma1, "coverage of the sensitivity deviation bound"},
      {"prop2", prop2, "coverage of the joint Af bound for constrained ERM"},
      {"prop3", prop3, "coverage of the sensitivity-regularized ERM bound"},
      {"prop4", prop4, "coverage of the lambda-ERM equivalence bound"},
      {"prop10", prop10, "coverage of the fast-rate deviation bound"},
      {"stochastic_unbiased", stochastic_unbiased, "stochastic rounding mean and singleton reduction"},
      {"learner_oracle", learner_oracle, "learner outputs vs exhaustive minimization"},
  };
  return entries;
}

}  // namespace

std::vector<TrialOutcome> run_trials(int n, int threads, const std::function<TrialOutcome(int)>& trial) {
  std::vector<TrialOutcome> out(static_cast<std::size_t>(std::max(n, 0)));
  std::vector<std::exception_ptr> errors(out.size());
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        out[static_cast<std::size_t>(i)] = trial(i);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  };
  const int workers = std::clamp(threads, 1, std::max(n, 1));
  std::vector<std::thread> pool;
  for (int k = 1; k < workers; ++k) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

int resolve_threads(std::optional<int> requested) {
  if (requested) {
    require(*requested >= 1, ErrorCode::kInvalidArgument, "--threads must be >= 1");
    return *requested;
  }
  if (const char* env = std::getenv("APPROX_SENSE_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    require(end != env && *end == '\0' && v >= 1, ErrorCode::kInvalidArgument,
            "APPROX_SENSE_THREADS must be a positive integer");
    return static_cast<int>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& e : registry()) v.emplace_back(e.name);
    return v;
  }();
  return names;
}

std::string suite_description(const std::string& name) {
  for (const auto& e : registry())
    if (name == e.name) return e.description;
  throw Error(ErrorCode::kUnknownSuite, "unknown suite '" + name + "'");
}

CoverageReport run_suite(const std::string& name, const ValidationOptions& options) {
  require(options.trials >= 0, ErrorCode::kInvalidArgument, "trials must be nonnegative");
  for (const auto& e : registry())
    if (name == e.name) return e.fn(options);
  std::string known;
  for (const auto& s : suite_names()) known += (known.empty() ? "" : ", ") + s;
  throw Error(ErrorCode::kUnknownSuite, "unknown suite '" + name + "'; known suites: " + known);
}

nlohmann::json to_json(const CoverageReport& r) {
  json checks = json::array();
  for (const auto& c : r.checks) checks.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  return {{"suite", r.suite},
          {"bound", r.bound},
          {"trials", r.trials},
          {"violations", r.violations},
          {"coverage", r.coverage},
          {"target", r.target},
          {"threshold", r.threshold},
          {"mean_slack", r.mean_slack},
          {"passed", r.passed},
          {"checks", checks},
          {"parameters", r.parameters}};
}

}  // namespace approxsense
