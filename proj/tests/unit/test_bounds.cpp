#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "approxsense/bounds.hpp"
#include "helpers.hpp"

using namespace approxsense;
using approxsense::test::error_code_of;

namespace {

double term_sum(const BoundReport& r) {
  double s = 0.0;
  for (const auto& t : r.terms) s += t.value;
  return s;
}

void check_sum(const BoundReport& r) { CHECK(std::abs(term_sum(r) - r.value) <= 1e-12); }

std::vector<BoundReport> sample_reports(std::int64_t m) {
  const JointBounds j = joint_bounds({0.1, 0.2}, 0.05, 1.0, 0.1, m, 0.05);
  return {uniform_restricted_bound(0.1, 0.05, 1.0, m, 0.05),
          srm_uniform_bound(0.1, 0.05, 0.125, 1.0, m, 0.05),
          balcan_guarantee_bound({0.3, 0.2}, {0.01, 0.05}, {0.5, 0.25}, 1.0, m, 0.05),
          j.af_ag,
          j.af,
          j.f,
          regularized_bound({0.3, 0.2, 0.1}, {0.01, 0.05, 0.2}, 1.0, 0.05, m, 0.05),
          regularized_bound({0.3, 0.2, 0.1}, {0.01, 0.05, 0.2}, 1.0, 0.05, m, 0.05, 0.1),
          lambda_equivalence_bound(1.0, 0.05, m, 0.05, 1.0, 0.1),
          lambda_equivalence_bound(1.0, 0.05, m, 0.05, 1.0),
          stochastic_bound(0.1, 0.05, 0.02, 1.0, m, 0.1),
          stochastic_fixed_bound(0.1, 0.05, 0.02, 1.0, m, 0.1)};
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "approxsense_unit";
  std::filesystem::create_directories(dir);
  const auto path = dir / name;
  std::filesystem::remove(path);
  return path;
}

}  // namespace

TEST_SUITE("bounds") {
  TEST_CASE("confidence term") {
    CHECK(hoeffding_term(3.0, 40.0, 50) == doctest::Approx(0.5761936747919525).epsilon(1e-14));
    CHECK(hoeffding_term(3.0, 1.0, 50) == 0.0);
    CHECK(hoeffding_term(3.0, 40.0, 1LL << 50) < 1e-6);
    CHECK(error_code_of([] { hoeffding_term(3.0, 0.5, 50); }) == ErrorCode::kInvalidArgument);
  }

  TEST_CASE("uniform restricted") {
    const BoundReport r = uniform_restricted_bound(0.0, 0.0, 1.0, 50, 0.05);
    CHECK(r.value == doctest::Approx(0.5761936747919525).epsilon(1e-14));
    const BoundReport a = uniform_restricted_bound(0.1, 0.05, 1.0, 50, 0.05);
    const BoundReport b = uniform_restricted_bound(0.1, 0.1, 1.0, 50, 0.05);
    CHECK(b.term("rademacher_term") == 2.0 * a.term("rademacher_term"));
    check_sum(a);
  }

  TEST_CASE("SRM forms") {
    CHECK(srm_uniform_bound(0.1, 0.05, 1.0, 1.0, 50, 0.05).term("weight_term") == 0.0);
    CHECK(srm_uniform_bound(0.1, 0.05, 0.125, 1.0, 50, 0.05).term("weight_term") ==
          doctest::Approx(0.43260806598026486).epsilon(1e-14));
    double previous = INFINITY;
    for (double w : {0.01, 0.05, 0.125, 0.5, 1.0}) {
      const double v = srm_uniform_bound(0.1, 0.05, w, 1.0, 50, 0.05).value;
      CHECK(v <= previous);
      previous = v;
    }

    const BoundReport one = balcan_guarantee_bound({0.2}, {0.05}, {0.5}, 1.0, 50, 0.05);
    CHECK(one.term("confidence_term") == doctest::Approx(0.8752135047204923).epsilon(1e-14));
    CHECK(one.value == doctest::Approx(0.2 + 0.1 + 3.0 * std::sqrt(std::log(2.0) / 100.0) + 0.8752135047204923));
    const BoundReport dominated = balcan_guarantee_bound({0.2, 0.9}, {0.05, 0.3}, {0.5, 0.25}, 1.0, 50, 0.05);
    CHECK(dominated.value == one.value);
    CHECK(error_code_of([] { balcan_guarantee_bound({}, {}, {}, 1.0, 50, 0.05); }) == ErrorCode::kInvalidArgument);
  }

  TEST_CASE("joint bounds") {
    const JointBounds j = joint_bounds({0.15, 0.2}, 0.05, 1.0, 0.1, 50, 0.05);
    CHECK(j.f.value == doctest::Approx(0.2 + 0.2 + 0.1 + 0.9115224057270527).epsilon(1e-14));
    CHECK(j.f.value - j.af.value == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(j.af_ag.value == doctest::Approx(0.15 + 0.1 + 0.9115224057270527).epsilon(1e-14));
    const JointBounds z = joint_bounds({0.15, 0.2}, 0.05, 1.0, 0.0, 50, 0.05);
    CHECK(z.af.value == z.f.value);
  }

  TEST_CASE("regularized") {
    const BoundReport r = regularized_bound({0.1}, {0.05}, 1.0, 0.0, 100, 0.05);
    CHECK(r.value == doctest::Approx(0.2 + 0.6371922042984409).epsilon(1e-14));
    const BoundReport inf = regularized_bound({0.3, 0.1, 0.05}, {0.01, 0.05, 0.2}, 1.0, 0.0, 100, 0.05);
    CHECK(inf.term("err_star") + inf.term("sensitivity_term") == doctest::Approx(0.2));
    const BoundReport c0 = regularized_bound({0.1}, {0.05}, 1.0, 0.0, 100, 0.05, 0.0);
    CHECK(c0.term("confidence_term") == doctest::Approx(5.0 * std::sqrt(std::log(320.0) / 200.0)));
    CHECK(c0.term("epsilon_term") == 0.0);
    const BoundReport c1 = regularized_bound({0.1}, {0.05}, 1.0, 0.0, 100, 0.05, 0.1);
    const BoundReport c2 = regularized_bound({0.1}, {0.05}, 1.0, 0.0, 100, 0.05, 0.2);
    CHECK(c2.term("epsilon_term") == 2.0 * c1.term("epsilon_term"));
  }

  TEST_CASE("lambda equivalence") {
    const BoundReport r = lambda_equivalence_bound(1.0, 0.05, 50, 0.05, 1.0, 0.1);
    CHECK(r.term("confidence_term") == doctest::Approx(1.3516887857358948).epsilon(1e-14));
    CHECK(r.value == doctest::Approx(0.2 + 1.3516887857358948 + 0.2).epsilon(1e-14));
    CHECK(lambda_equivalence_bound(1.0, 0.05, 50, 0.05, 0.0, 0.1).value ==
          lambda_equivalence_bound(1.0, 0.05, 50, 0.05, 0.0, 0.7).value);
    const BoundReport analytic = lambda_equivalence_bound(1.0, 0.05, 50, 0.05, 1.0);
    CHECK(analytic.value == doctest::Approx(r.value - 0.2).epsilon(1e-14));
    CHECK(analytic.name == "lambda_equivalence_analytic");
  }

  TEST_CASE("stochastic") {
    CHECK(stochastic_bound(0.0, 0.0, 0.0, 1.0, 100, 0.1).value == doctest::Approx(0.10729830131446737).epsilon(1e-14));
    const BoundReport s = stochastic_bound(0.1, 0.05, 0.02, 2.0, 100, 0.1);
    const BoundReport f = stochastic_fixed_bound(0.1, 0.05, 0.02, 2.0, 100, 0.1);
    for (const char* label : {"empirical_error", "sensitivity_term", "rademacher_term"})
      CHECK(s.term(label) == f.term(label));
    const double a = stochastic_bound(0.1, 0.05, 0.02, 2.0, 100, 0.1).value;
    const double b = stochastic_bound(0.1, 0.15, 0.02, 2.0, 100, 0.1).value;
    CHECK(b - a == doctest::Approx(0.2));
    CHECK(s.certified);
    CHECK_FALSE(stochastic_bound(0.1, Constituent(0.05, false, 0.01), 0.02, 2.0, 100, 0.1).certified);
  }

  TEST_CASE("certification follows the constituents") {
    RadEstimate mc;
    mc.value = 0.05;
    mc.method = RadEstimate::Method::kMonteCarlo;
    mc.standard_error = 0.001;
    CHECK_FALSE(uniform_restricted_bound(0.1, mc, 1.0, 50, 0.05).certified);
    RadEstimate exact;
    exact.value = 0.05;
    exact.method = RadEstimate::Method::kExactEnumeration;
    CHECK(uniform_restricted_bound(0.1, exact, 1.0, 50, 0.05).certified);
  }

  TEST_CASE("terms sum, nonnegative and decreasing in m") {
    const auto small = sample_reports(50);
    const auto large = sample_reports(500);
    for (std::size_t i = 0; i < small.size(); ++i) {
      check_sum(small[i]);
      CHECK(small[i].value >= 0.0);
      CHECK(large[i].value <= small[i].value);
    }
  }

  TEST_CASE("JSON round trip and corruption") {
    for (const BoundReport& r : sample_reports(50)) {
      const BoundReport back = bound_report_from_json(nlohmann::json::parse(to_json(r).dump()));
      CHECK(back.name == r.name);
      CHECK(back.value == r.value);
      CHECK(back.inputs_digest == r.inputs_digest);
      CHECK(back.certified == r.certified);
      REQUIRE(back.terms.size() == r.terms.size());
    }
    nlohmann::json j = to_json(uniform_restricted_bound(0.1, 0.05, 1.0, 50, 0.05));
    j["value"] = j["value"].get<double>() + 1e-9;
    CHECK(error_code_of([&] { bound_report_from_json(j); }) == ErrorCode::kCorruptReport);
    CHECK(error_code_of([] { bound_report_from_json({{"name", "x"}}); }) == ErrorCode::kCorruptReport);
  }

  TEST_CASE("results table") {
    const auto path = scratch("results.csv");
    append_csv_row(path, uniform_restricted_bound(0.1, 0.05, 1.0, 50, 0.05));
    append_csv_row(path, srm_uniform_bound(0.1, 0.05, 0.5, 1.0, 50, 0.05));
    std::ifstream in(path);
    std::string line;
    int lines = 0, headers = 0;
    while (std::getline(in, line)) {
      ++lines;
      headers += line.rfind("name,", 0) == 0;
    }
    CHECK(lines == 3);
    CHECK(headers == 1);
  }

  TEST_CASE("inputs digest") {
    CHECK(inputs_digest({{"b", {0.5, 2.0}}, {"a", 1}}) == "7484df5823514f9e");
    const auto a = uniform_restricted_bound(0.1, 0.05, 1.0, 50, 0.05);
    CHECK(a.inputs_digest == uniform_restricted_bound(0.1, 0.05, 1.0, 50, 0.05).inputs_digest);
    CHECK(a.inputs_digest != uniform_restricted_bound(0.1, 0.05, 1.0, 51, 0.05).inputs_digest);
    CHECK(a.inputs_digest.size() == 16);
  }

  TEST_CASE("deviation report") {
    const BoundReport r = deviation_report("sensitivity_deviation", sensitivity_deviation_bound(0.0, 1.0, 50, 0.05), true);
    CHECK(r.value == doctest::Approx(0.5761936747919525).epsilon(1e-14));
    check_sum(r);
  }
}
