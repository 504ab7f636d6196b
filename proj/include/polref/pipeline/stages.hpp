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

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "polref/evalsuite/evalsuite.hpp"

namespace polref::pipeline {

// Subcommands in pipeline order.
const std::vector<std::string>& subcommands();

struct RunOptions {
  std::string subcommand;
  std::string config_path;             // empty: task defaults
  std::vector<std::string> overrides;  // "key.path=value"
  std::string student;                 // cnn, relation_net, gnn or an exact arch; empty: refactor.student
  bool dry_run = false;
  bool strict_determinism = false;
};

// Runs one stage and returns its exit status (see ExitCode). Progress goes to
// `log`, errors to `err`.
int run(const RunOptions& options, std::ostream& log, std::ostream& err);

// Throws ConfigError when a resolved config holds an invalid value.
void check_semantics(const nlohmann::json& config);

// Line chart of report means against their values, one series per label,
// with one-stdev error bars.
std::string render_svg(const std::vector<evalsuite::MetricReport>& reports, const std::string& title);

// Provenance string recorded in run manifests.
std::string provenance(const std::string& hash);

}  // namespace polref::pipeline
