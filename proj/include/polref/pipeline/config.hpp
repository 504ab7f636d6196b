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

#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "polref/nn/presets.hpp"

namespace polref::pipeline {

// Exit statuses of the command line front end.
enum ExitCode : int { kOk = 0, kConfigError = 2, kMissingArtifact = 3, kNumericFailure = 4 };

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MissingArtifact : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Environment variable naming the root that relative output directories
// resolve against.
inline constexpr const char* kOutputRootVar = "POLREF_OUTPUT_ROOT";

// Complete config with every key and its default for `task`. The result is
// also the schema: user configs may only contain keys present here.
nlohmann::json default_config(nn::Task task);

// Throws ConfigError naming the first key of `user` that is absent from
// `schema` or whose type differs. Array elements are checked against the
// first element of the schema array when that element is an object.
void validate_against(const nlohmann::json& user, const nlohmann::json& schema, const std::string& where = "");

// Applies one "dotted.key=value" override. The value is parsed as JSON when
// possible and taken as a string otherwise. Numeric path segments index arrays.
void apply_override(nlohmann::json& config, const std::string& assignment);

// Reads `path` (or starts from {} when empty), applies the overrides,
// validates against the task defaults and returns the merged config.
nlohmann::json load_config(const std::string& path, const std::vector<std::string>& overrides = {});
nlohmann::json resolve_config(nlohmann::json user, const std::vector<std::string>& overrides = {});

// FNV-1a 64 of the compact serialization.
std::string config_hash(const nlohmann::json& config);

// Output directory of a resolved config, honoring kOutputRootVar.
std::string output_dir(const nlohmann::json& config);

}  // namespace polref::pipeline
