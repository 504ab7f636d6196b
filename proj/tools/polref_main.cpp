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

// polref: command line front end of the pipeline.
//
//   polref <subcommand> [--config FILE] [--set key=value ...] [--student TAG]
//          [--dry-run] [--strict-determinism]

#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "polref/pipeline/config.hpp"
#include "polref/pipeline/stages.hpp"

int main(int argc, char** argv) {
  using namespace polref;
  CLI::App app{"Two-stage policy refactorization pipeline"};
  app.require_subcommand(1, 1);

  const std::map<std::string, std::string> about = {
      {"gen-data", "Render labelled training/test frames"},
      {"train-teacher", "Train the DQN teacher or record the heuristic one"},
      {"collect-demos", "Roll out the teacher and store scored demonstrations"},
      {"train-detector", "Train the object detector on unlabelled frames"},
      {"refactor", "Distil the teacher into a student network"},
      {"evaluate", "Score a student on the configured test conditions"},
      {"sweep", "Evaluate across object counts or backgrounds"},
      {"robustness", "Retrain under dropped and spurious proposals"},
      {"export-features", "Dump per-node student features and cluster purity"},
      {"plot", "Render report CSVs as SVG charts"},
  };

  pipeline::RunOptions options;
  for (const auto& name : pipeline::subcommands()) {
    const auto it = about.find(name);
    auto* sub = app.add_subcommand(name, it == about.end() ? "" : it->second);
    sub->add_option("-c,--config", options.config_path, "JSON config file; task defaults when omitted");
    sub->add_option("--set", options.overrides, "Override a config key, e.g. refactor.train.steps=1000");
    sub->add_option("--student", options.student, "Student architecture: cnn, relation_net, gnn or an exact tag");
    sub->add_flag("--dry-run", options.dry_run, "Validate the config and print it, without side effects");
    sub->add_flag("--strict-determinism", options.strict_determinism, "Single-threaded, deterministic kernels");
    sub->callback([&options, name] { options.subcommand = name; });
  }
  app.footer(std::string("Relative output directories resolve against $") + pipeline::kOutputRootVar +
             ". Exit codes: 0 ok, 2 config error, 3 missing artifact, 4 numeric failure.");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : pipeline::kConfigError;
  }
  return pipeline::run(options, std::cout, std::cerr);
}
