#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "approxsense/bounds.hpp"
#include "approxsense/error.hpp"
#include "approxsense/geometry.hpp"
#include "approxsense/learners.hpp"
#include "approxsense/rademacher.hpp"
#include "approxsense/sensitivity.hpp"
#include "approxsense/validation.hpp"

namespace py = pybind11;
using namespace approxsense;

namespace {

py::object to_python(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

nlohmann::json from_python(const py::object& o) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

py::dict rad_dict(const RadEstimate& r) {
  py::dict d;
  d["value"] = r.value;
  d["method"] = to_string(r.method);
  d["m"] = r.m;
  d["certified"] = r.certified();
  d["standard_error"] = r.standard_error;
  d["n_sigma"] = r.n_sigma;
  d["notes"] = r.notes;
  return d;
}

py::dict sensitivity_dict(const SensitivityEstimate& s) {
  py::dict d;
  d["value"] = s.value;
  d["kind"] = to_string(s.kind);
  d["standard_error"] = s.standard_error;
  return d;
}

py::dict learner_dict(const LearnerOutput& out) {
  py::dict d;
  d["algorithm"] = out.algorithm;
  d["weights"] = out.hypothesis.weights;
  d["approx_weights"] = out.approx_hypothesis.weights;
  d["objective_value"] = out.objective_value;
  d["chosen_k"] = out.chosen_k;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Approximation-sensitivity bounds, Rademacher estimates and learners";

  py::register_exception<Error>(m, "ApproxSenseError");

  py::class_<ApproxOperator>(m, "ApproxOperator")
      .def_static("uniform_quantizer", &ApproxOperator::uniform_quantizer, py::arg("step"), py::arg("clamp"),
                  py::arg("offset") = 0.0)
      .def_static("uniform_levels", &ApproxOperator::uniform_levels, py::arg("levels"), py::arg("clamp"))
      .def_static("magnitude_pruner", &ApproxOperator::magnitude_pruner, py::arg("keep"))
      .def_static("stochastic_rounder", &ApproxOperator::stochastic_rounder, py::arg("step"), py::arg("clamp"),
                  py::arg("offset") = 0.0)
      .def_property_readonly("deterministic", &ApproxOperator::deterministic)
      .def("transform", py::overload_cast<const Vector&>(&ApproxOperator::transform, py::const_), py::arg("w"));

  m.def(
      "empirical_sensitivity",
      [](const Vector& w, const ApproxOperator& op, const Matrix& inputs, double p) {
        const Hypothesis h(w, FeatureMap::identity(static_cast<int>(w.size())));
        return sensitivity_dict(empirical_sensitivity(h, op, UnlabelledSample(inputs, "python"), p));
      },
      py::arg("w"), py::arg("op"), py::arg("inputs"), py::arg("p") = 1.0);

  m.def("sensitivity_deviation_bound",
        [](double rad, double C, std::int64_t m_, double delta) {
          return sensitivity_deviation_bound(rad, C, m_, delta).epsilon_u;
        });
  m.def("fast_rate_deviation_bound", [](double rad, double t, double C, std::int64_t m_, double delta) {
    return fast_rate_deviation_bound(rad, t, C, m_, delta).epsilon_u;
  });

  m.def("exact_rademacher", [](const Matrix& points) { return rad_dict(exact_rademacher_rows(points)); },
        py::arg("points"));
  m.def(
      "mc_rademacher",
      [](const Matrix& points, std::int64_t n_sigma, std::uint64_t seed) {
        return rad_dict(mc_rademacher_rows(points, n_sigma, seed));
      },
      py::arg("points"), py::arg("n_sigma"), py::arg("seed"));
  m.def("ellipse_rademacher", [](const Vector& mu, double p) {
    return rad_dict(ellipse_rademacher(mu, p, static_cast<int>(mu.size())));
  });
  m.def("geometry_rademacher", [](const py::object& model) {
    return rad_dict(rademacher_of(geometry_from_json(from_python(model))));
  });
  m.def("massart_bound", &massart_bound, py::arg("points"));
  m.def("crude_bounds", &crude_bounds, py::arg("R_p"), py::arg("p"));

  m.def("hoeffding_term", &hoeffding_term, py::arg("c"), py::arg("arg"), py::arg("m"));
  m.def("uniform_restricted_bound", [](double emp_err, double rad, double rho, std::int64_t m_, double delta) {
    return to_python(to_json(uniform_restricted_bound(emp_err, rad, rho, m_, delta)));
  });
  m.def("lambda_equivalence_bound",
        [](double rho, double rad, std::int64_t m_, double delta, double lambda, std::optional<double> eps) {
          return to_python(to_json(lambda_equivalence_bound(rho, rad, m_, delta, lambda, eps)));
        },
        py::arg("rho"), py::arg("rad_HA"), py::arg("m"), py::arg("delta"), py::arg("lambda_"),
        py::arg("epsilon_u") = py::none());
  m.def("stochastic_bound",
        [](double err, double sens, double rad, double rho, std::int64_t m_, double delta) {
          return to_python(to_json(stochastic_bound(err, sens, rad, rho, m_, delta)));
        });

  m.def(
      "lambda_erm",
      [](const Matrix& x, const Vector& y, const Matrix& u, const ApproxOperator& op, double lambda, double bound,
         int points_per_axis, double rho) {
        const FeatureMap map = FeatureMap::identity(static_cast<int>(x.cols()));
        const SearchDomain domain = SearchDomain::grid(map, bound, points_per_axis);
        return learner_dict(lambda_erm(LabelledSample(x, y, "python"), UnlabelledSample(u, "python"), op, lambda,
                                       1.0, LossSpec(LossSpec::Kind::kClippedAbsolute, rho), domain));
      },
      py::arg("x"), py::arg("y"), py::arg("unlabelled"), py::arg("op"), py::arg("lambda_"), py::arg("bound") = 1.0,
      py::arg("points_per_axis") = 21, py::arg("rho") = 1.0);

  m.def("suite_names", &suite_names);
  m.def(
      "run_suite",
      [](const std::string& name, int trials, std::uint64_t seed, int threads) {
        ValidationOptions opts;
        opts.trials = trials;
        opts.seed = seed;
        opts.threads = threads;
        CoverageReport r;
        {
          py::gil_scoped_release release;
          r = run_suite(name, opts);
        }
        return to_python(to_json(r));
      },
      py::arg("name"), py::arg("trials") = 0, py::arg("seed") = ValidationOptions{}.seed, py::arg("threads") = 1);
}
