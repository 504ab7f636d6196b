// Copyright 2026 The polref Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "polref/evalsuite/evalsuite.hpp"
#include "polref/pipeline/config.hpp"
#include "polref/pipeline/stages.hpp"

using namespace polref;
using namespace polref::pipeline;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Runner {
  std::string config;
  std::vector<std::string> base;
  std::ostringstream log, err;

  int operator()(const std::string& sub, std::vector<std::string> extra = {}, const std::string& student = "",
                 bool dry = false) {
    RunOptions o;
    o.subcommand = sub;
    o.config_path = config;
    o.overrides = base;
    o.overrides.insert(o.overrides.end(), extra.begin(), extra.end());
    o.student = student;
    o.dry_run = dry;
    o.strict_determinism = true;
    err.str("");
    const int code = run(o, log, err);
    if (code != 0) MESSAGE(sub << " -> " << code << ": " << err.str());
    return code;
  }
};

// Tiny Pacman run: every stage in seconds.
fs::path write_tiny_config(const fs::path& dir, const fs::path& out) {
  fs::create_directories(dir);
  const nlohmann::json c = {
      {"task", "pacman"},
      {"seed", 3},
      {"output_dir", out.string()},
      {"data", {{"train_size", 40}}},
      {"teacher", {{"kind", "heuristic"}}},
      {"demos", {{"frames_per_trial", 60}, {"mixture", {{{"epsilon", 0.3}, {"trials", 2}}}}}},
      {"refactor",
       {{"proposals", "ground_truth"},
        {"width", 0.25},
        {"train", {{"steps", 12}, {"batch_size", 8}, {"eval_every", 4}, {"halve_every", 6}}}}},
      {"evaluate", {{"episodes", 2}}},
      {"sweep", {{"episodes", 2}}},
      {"robustness", {{"drop_rates", {0.1, 0.9}}, {"episodes", 2}}},
      {"features", {{"k", 2}, {"frames", 20}}},
  };
  const auto path = dir / "tiny.json";
  std::ofstream(path) << c.dump(2);
  return path;
}

}  // namespace

TEST_CASE("config: defaults, schema and overrides") {
  const auto c = resolve_config(nlohmann::json::object());
  CHECK(c.at("task") == "pacman");
  CHECK(c.at("env").at("objects") == 2);
  CHECK(resolve_config({{"task", "falling_digit"}}).at("demos").at("filter") == true);
  CHECK(resolve_config({{"task", "multi_mnist"}}).at("data").at("train_size") == 60000);
  check_semantics(c);

  CHECK_THROWS_AS(resolve_config({{"refactor", {{"bogus", 1}}}}), ConfigError);
  CHECK_THROWS_AS(resolve_config({{"evaluate", {{"episodes", "ten"}}}}), ConfigError);
  CHECK_THROWS_AS(resolve_config({{"evaluate", {{"episodes", 2.5}}}}), ConfigError);
  CHECK_THROWS_AS(resolve_config({{"demos", {{"mixture", {{{"epsilon", 0.1}, {"extra", 1}}}}}}}), ConfigError);
  CHECK_THROWS_AS(resolve_config({{"task", "chess"}}), ConfigError);
  // Whole numbers are accepted for integer keys, any number for real keys.
  CHECK(resolve_config({{"evaluate", {{"episodes", 7.0}}}}).at("evaluate").at("episodes") == 7.0);
  CHECK(resolve_config({{"refactor", {{"width", 1}}}}).at("refactor").at("width") == 1);

  auto o = resolve_config(nlohmann::json::object(),
                          {"refactor.train.steps=42", "refactor.student=cnn", "sweep.values=[\"2\",\"7\"]",
                           "demos.mixture.0.epsilon=0.25"});
  CHECK(o.at("refactor").at("train").at("steps") == 42);
  CHECK(o.at("refactor").at("student") == "cnn");
  CHECK(o.at("sweep").at("values").size() == 2);
  CHECK(o.at("demos").at("mixture").at(0).at("epsilon") == 0.25);
  CHECK(o.at("demos").at("mixture").size() == 1);
  CHECK_THROWS_AS(resolve_config(nlohmann::json::object(), {"refactor.nope=1"}), ConfigError);
  CHECK_THROWS_AS(resolve_config(nlohmann::json::object(), {"no_equals_sign"}), ConfigError);

  CHECK_THROWS_AS(check_semantics(resolve_config({{"refactor", {{"proposals", "oracle"}}}})), ConfigError);
  CHECK_THROWS_AS(check_semantics(resolve_config({{"refactor", {{"student", "transformer"}}}})), ConfigError);
  CHECK_THROWS_AS(check_semantics(resolve_config({{"env", {{"background", "plaid"}}}})), ConfigError);
  CHECK_THROWS_AS(check_semantics(resolve_config({{"robustness", {{"drop_rates", {1.5}}}}})), ConfigError);
  CHECK_THROWS_AS(check_semantics(resolve_config({{"demos", {{"mixture", {{{"epsilon", 2.0}, {"trials", 1}}}}}}})),
                  ConfigError);

  CHECK(config_hash(c) == config_hash(resolve_config(nlohmann::json::object())));
  CHECK(config_hash(c) != config_hash(o));
}

TEST_CASE("output root variable and dry run") {
  const fs::path root = fs::temp_directory_path() / "polref_root_test";
  fs::remove_all(root);
  setenv(kOutputRootVar, root.c_str(), 1);
  const auto c = resolve_config({{"output_dir", "rel"}});
  CHECK(fs::path(output_dir(c)) == root / "rel");
  CHECK(fs::path(output_dir(resolve_config({{"output_dir", "/abs/x"}}))) == fs::path("/abs/x"));

  Runner run;
  CHECK(run("refactor", {"output_dir=rel"}, "cnn", true) == kOk);
  CHECK_FALSE(fs::exists(root));
  CHECK(run("refactor", {"output_dir=rel", "refactor.bogus=1"}, "", true) == kConfigError);
  CHECK(run("refactor", {"output_dir=rel"}, "mlp", true) == kConfigError);
  CHECK(run("fly") == kConfigError);
  unsetenv(kOutputRootVar);
}

TEST_CASE("exit codes: missing artifacts, task mismatch and numeric failure") {
  const fs::path base = fs::temp_directory_path() / "polref_codes";
  fs::remove_all(base);
  Runner run;
  run.config = write_tiny_config(base, base / "run").string();
  CHECK(run("evaluate") == kMissingArtifact);
  CHECK(run("collect-demos") == kMissingArtifact);
  CHECK(run("refactor") == kMissingArtifact);
  CHECK(run("train-detector") == kMissingArtifact);
  CHECK(run("plot") == kMissingArtifact);
  CHECK(run("train-teacher", {"task=multi_mnist"}) == kConfigError);

  REQUIRE(run("train-teacher") == kOk);
  REQUIRE(run("collect-demos") == kOk);
  CHECK(run("refactor", {"refactor.train.learning_rate=1e30"}) == kNumericFailure);
  REQUIRE(run("refactor") == kOk);
  // A Pacman student handed to a FallingDigit evaluation is refused.
  const auto student = (base / "run" / "students" / "gnn_pointstyle.ckpt").string();
  CHECK(run("evaluate", {"task=falling_digit", "env.objects=3", "paths.student=" + student}) == kConfigError);
  fs::remove_all(base);
}

TEST_CASE("tiny pipeline end to end, reproducible under strict determinism") {
  const fs::path base = fs::temp_directory_path() / "polref_e2e";
  fs::remove_all(base);
  std::vector<std::string> csvs;
  for (int pass = 0; pass < 2; ++pass) {
    const auto out = base / ("run" + std::to_string(pass));
    Runner run;
    run.config = write_tiny_config(base, out).string();
    REQUIRE(run("gen-data") == kOk);
    REQUIRE(run("train-teacher") == kOk);
    REQUIRE(run("collect-demos") == kOk);
    REQUIRE(run("refactor") == kOk);
    REQUIRE(run("refactor", {}, "cnn") == kOk);
    REQUIRE(run("evaluate") == kOk);
    REQUIRE(run("evaluate", {}, "cnn") == kOk);
    REQUIRE(run("sweep") == kOk);
    REQUIRE(run("robustness") == kOk);
    REQUIRE(run("export-features") == kOk);
    CHECK(run("export-features", {}, "cnn") == kConfigError);
    REQUIRE(run("plot") == kOk);

    const auto sweep = evalsuite::read_reports_csv((out / "reports" / "sweep_gnn_pointstyle.csv").string());
    REQUIRE(sweep.size() == 4);
    CHECK(sweep[0].value == "2");
    CHECK(sweep[3].value == "10");
    CHECK(fs::exists(out / "plots" / "sweep_gnn_pointstyle.svg"));
    CHECK(fs::exists(out / "reports" / "features_gnn_pointstyle.jsonl"));

    const auto manifest = nlohmann::json::parse(slurp(out / "manifests" / "refactor_gnn_pointstyle.json"));
    CHECK(manifest.at("config_hash").get<std::string>().size() == 16);
    CHECK(manifest.at("seed") == 3);
    CHECK(manifest.at("provenance").get<std::string>().find(manifest.at("config_hash").get<std::string>()) !=
          std::string::npos);
    CHECK(manifest.at("inputs").size() >= 1);
    const auto report = nlohmann::json::parse(slurp(out / "reports" / "evaluate_gnn_pointstyle.json"));
    CHECK(report.dump().find(manifest.at("config_hash").get<std::string>()) != std::string::npos);

    std::string all;
    for (const char* f : {"evaluate_gnn_pointstyle.csv", "evaluate_cnn.csv", "sweep_gnn_pointstyle.csv",
                          "robustness_gnn_pointstyle.csv"})
      all += slurp(out / "reports" / f);
    csvs.push_back(all);
  }
  CHECK(csvs[0] == csvs[1]);
  fs::remove_all(base);
}

TEST_CASE("render_svg draws one polyline per label and one marker per report") {
  std::vector<evalsuite::MetricReport> rs;
  for (const char* label : {"gnn", "cnn"}) {
    for (const char* v : {"2", "5", "10"}) {
      evalsuite::MetricReport r;
      r.label = label;
      r.value = v;
      r.mean = std::atof(v) / 3.0;
      r.stdev = 0.1;
      rs.push_back(r);
    }
  }
  const auto svg = render_svg(rs, "a < b");
  auto count = [&](const std::string& needle) {
    std::size_t n = 0;
    for (auto p = svg.find(needle); p != std::string::npos; p = svg.find(needle, p + 1)) ++n;
    return n;
  };
  CHECK(count("<polyline") == 2);
  CHECK(count("<circle") == 6);
  CHECK(svg.find("a &lt; b") != std::string::npos);
  CHECK(svg.rfind("</svg>") != std::string::npos);
}

TEST_CASE("learned teacher and detector stages feed the student") {
  const fs::path base = fs::temp_directory_path() / "polref_learned";
  fs::remove_all(base);
  Runner run;
  run.config = write_tiny_config(base, base / "run").string();
  run.base = {"teacher.kind=dqn",         "teacher.dqn.total_steps=60", "teacher.dqn.learning_starts=20",
              "teacher.dqn.eval_every=30", "teacher.dqn.eval_episodes=1", "teacher.dqn.epsilon_steps=30",
              "teacher.dqn.replay_capacity=100", "teacher.dqn.width=0.25",  "detector.width=0.25",
              "detector.train.steps=3",    "detector.train.batch_size=4", "detector.eval_frames=8",
              "refactor.proposals=detector"};
  REQUIRE(run("gen-data") == kOk);
  REQUIRE(run("train-teacher") == kOk);
  CHECK(fs::exists(base / "run" / "teacher" / "dqn.ckpt"));
  REQUIRE(run("collect-demos") == kOk);
  CHECK(run("refactor") == kMissingArtifact);
  REQUIRE(run("train-detector") == kOk);
  const auto det = nlohmann::json::parse(slurp(base / "run" / "reports" / "detector.json"));
  CHECK(det.at("eval_frames") == 8);
  CHECK(det.at("recall").get<double>() >= 0.0);
  REQUIRE(run("refactor") == kOk);
  REQUIRE(run("evaluate") == kOk);
  // Artifacts of another task are not picked up.
  CHECK(run("evaluate", {"task=falling_digit", "env.objects=3"}) == kMissingArtifact);
  fs::remove_all(base);
}
