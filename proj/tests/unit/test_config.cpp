#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

#include "approxsense/config.hpp"
#include "approxsense/csv.hpp"
#include "helpers.hpp"

using namespace approxsense;
using approxsense::test::error_code_of;
using approxsense::test::rows;
using approxsense::test::vec;
using nlohmann::json;

namespace {

json base_config() {
  return json::parse(R"({
    "schema_version": 1,
    "seed": 7,
    "task": {
      "teacher": {"feature_map": {"kind": "identity", "input_dim": 2}, "weights": [0.5, -1.0]},
      "input_law": {"kind": "uniform_box", "low": -1, "high": 1},
      "label_noise_sd": 0.0,
      "m": 20,
      "m_unlabelled": 10
    },
    "operator": {"kind": "uniform_quantizer", "step": 0.5, "clamp": 1.0},
    "loss": {"kind": "clipped_absolute", "rho": 1.0},
    "learner": {"algorithm": "lambda_erm", "lambda": 0.5,
                "domain": {"mode": "grid", "bound": 1.0, "points_per_axis": 5}},
    "delta": 0.1
  })");
}

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

std::filesystem::path scratch_dir() {
  const auto dir = std::filesystem::temp_directory_path() / "approxsense_unit_config";
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("valid config") {
    const ExperimentConfig c = parse_config(base_config());
    CHECK(c.seed == 7);
    CHECK(c.m == 20);
    CHECK(c.m_unlabelled == 10);
    CHECK(c.delta == 0.1);
    REQUIRE(c.learner.has_value());
    CHECK(c.learner->algorithm == "lambda_erm");
    CHECK(c.learner->domain.grid_size() == 25);
    const LabelledSample s = c.labelled_sample();
    CHECK(s.size() == 20);
    CHECK(s.targets == s.inputs * vec({0.5, -1.0}));
    CHECK(c.unlabelled_sample()->size() == 10);
    CHECK(parse_config(base_config()).labelled_sample().inputs == s.inputs);
  }

  TEST_CASE("unknown keys and bad values name the path") {
    json j = base_config();
    j["learner"]["domain"]["pionts_per_axis"] = 3;
    const std::string msg = message_of([&] { parse_config(j); });
    CHECK(msg.find("config.learner.domain") != std::string::npos);
    CHECK(msg.find("pionts_per_axis") != std::string::npos);

    j = base_config();
    j["extra"] = true;
    CHECK(error_code_of([&] { parse_config(j); }) == ErrorCode::kConfig);

    j = base_config();
    j["schema_version"] = 2;
    CHECK(message_of([&] { parse_config(j); }).find("schema_version") != std::string::npos);

    j = base_config();
    j["delta"] = 1.5;
    CHECK(message_of([&] { parse_config(j); }).find("config.delta") != std::string::npos);

    j = base_config();
    j["operator"]["kind"] = "cubic";
    CHECK(message_of([&] { parse_config(j); }).find("config.operator") != std::string::npos);

    j = base_config();
    j["loss"]["rho"] = "one";
    CHECK(message_of([&] { parse_config(j); }).find("config.loss.rho") != std::string::npos);
  }

  TEST_CASE("syntax errors carry line and column") {
    const std::string text = "{\n  \"schema_version\": 1,\n  \"seed\": ,\n}";
    const std::string msg = message_of([&] { parse_config_text(text, "cfg.json"); });
    CHECK(msg.rfind("cfg.json:3:", 0) == 0);
    CHECK(error_code_of([&] { parse_config_text(text, "cfg.json"); }) == ErrorCode::kConfig);
  }

  TEST_CASE("operator and feature map round trip") {
    for (const ApproxOperator& op :
         {ApproxOperator::uniform_quantizer(0.25, 1.0), ApproxOperator::uniform_levels(4, 1.0),
          ApproxOperator::magnitude_pruner(2), ApproxOperator::stochastic_rounder(0.5, 2.0)}) {
      const ApproxOperator back = operator_from_json(to_json(op));
      CHECK(back.kind() == op.kind());
      CHECK(back.step() == op.step());
      CHECK(back.offset() == op.offset());
      CHECK(back.keep() == op.keep());
    }
    const FeatureMap rbf = FeatureMap::radial_basis(rows({{0, 1}, {1, 0}}), 0.5);
    const FeatureMap back = feature_map_from_json(to_json(rbf));
    CHECK(back.apply(vec({0.3, 0.2})) == rbf.apply(vec({0.3, 0.2})));
  }

  TEST_CASE("CSV-backed config") {
    const auto dir = scratch_dir();
    const LabelledSample s(rows({{0.1, 0.2}, {0.3, -0.4}}), vec({1.0, -1.0}), "x");
    csv::write_labelled(dir / "lab.csv", s);
    json j = base_config();
    j.erase("task");
    j["data"] = {{"labelled", "lab.csv"}};
    const ExperimentConfig c = parse_config(j, dir);
    CHECK(c.labelled_sample().inputs == s.inputs);
    CHECK_FALSE(c.unlabelled_sample().has_value());

    j["data"] = {{"labelled", "missing.csv"}};
    const std::string msg = message_of([&] { parse_config(j, dir).labelled_sample(); });
    CHECK(msg.find("missing.csv") != std::string::npos);
    CHECK(error_code_of([&] { parse_config(j, dir).labelled_sample(); }) == ErrorCode::kIngestion);

    j["task"] = base_config()["task"];
    CHECK(error_code_of([&] { parse_config(j, dir); }) == ErrorCode::kConfig);
  }
}

TEST_SUITE("csv") {
  TEST_CASE("parse and errors") {
    const csv::Table t = csv::parse_table("a,b,target\n1,2,3\n-0.5,1e-3,0\n", "t.csv");
    CHECK(t.header == std::vector<std::string>{"a", "b", "target"});
    CHECK(t.values(1, 1) == 1e-3);
    const std::string msg = message_of([] { csv::parse_table("a,b\n1,x\n", "bad.csv"); });
    CHECK(msg.find("bad.csv:2") != std::string::npos);
    CHECK(error_code_of([] { csv::parse_table("a,b\n1\n", "short.csv"); }) == ErrorCode::kIngestion);
    CHECK(error_code_of([] { csv::parse_table("", "empty.csv"); }) == ErrorCode::kIngestion);
    CHECK(error_code_of([] { csv::parse_table("a,b\n1,2,3\n", "long.csv"); }) == ErrorCode::kIngestion);
    CHECK(message_of([] { csv::read_table("/nonexistent/dir/in.csv"); }).find("/nonexistent/dir/in.csv") !=
          std::string::npos);
  }

  TEST_CASE("labelled and unlabelled files") {
    const auto dir = scratch_dir();
    const LabelledSample s(rows({{0.1, 0.2}, {0.3, -0.4}}), vec({1.0, -1.0}), "x");
    csv::write_labelled(dir / "l.csv", s);
    const LabelledSample back = csv::read_labelled(dir / "l.csv");
    CHECK(back.inputs == s.inputs);
    CHECK(back.targets == s.targets);
    const UnlabelledSample u(rows({{1, 2}, {3, 4}, {5, 6}}), "u");
    csv::write_unlabelled(dir / "u.csv", u);
    CHECK(csv::read_unlabelled(dir / "u.csv").inputs == u.inputs);
    CHECK(error_code_of([&] { csv::read_labelled(dir / "u.csv"); }) == ErrorCode::kIngestion);
  }

  TEST_CASE("doubles round trip") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1e3, 1e3);
    for (int i = 0; i < 2000; ++i) {
      const double v = u(rng) * std::pow(10.0, (i % 41) - 20);
      CHECK(std::strtod(csv::format_double(v).c_str(), nullptr) == v);
    }
    for (double v : {0.0, 0.1, 1.0 / 3.0, std::numeric_limits<double>::min(), std::numeric_limits<double>::max(),
                     std::numeric_limits<double>::denorm_min()})
      CHECK(std::strtod(csv::format_double(v).c_str(), nullptr) == v);
    CHECK(csv::format_double(0.1) == "0.1");
  }
}
