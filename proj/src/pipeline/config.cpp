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

#include "polref/pipeline/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "polref/nn/tensor_util.hpp"
#include "polref/refactor/student.hpp"
#include "polref/spacedet/space.hpp"
#include "polref/teachers/dqn.hpp"

namespace polref::pipeline {

namespace {

std::string join(const std::string& where, const std::string& key) { return where.empty() ? key : where + "." + key; }

bool same_kind(const nlohmann::json& user, const nlohmann::json& schema) {
  if (schema.is_number_integer() || schema.is_number_unsigned()) {
    if (user.is_number_integer() || user.is_number_unsigned()) return true;
    return user.is_number_float() && user.get<double>() == static_cast<double>(static_cast<int64_t>(user.get<double>()));
  }
  if (schema.is_number()) return user.is_number();
  return user.type() == schema.type();
}

}  // namespace

nlohmann::json default_config(nn::Task task) {
  const bool mm = task == nn::Task::multi_mnist;
  const int objects = task == nn::Task::pacman ? 2 : task == nn::Task::falling_digit ? 3 : 0;

  teachers::DqnConfig dqn;
  spacedet::DetectorTrainConfig det;
  refactor::StudentTrainConfig student;
  nlohmann::json sweep_values =
      task == nn::Task::pacman ? nlohmann::json{"2", "3", "5", "10"} : nlohmann::json{"3", "4", "5", "6"};

  nlohmann::json c = {
      {"task", nn::to_string(task)},
      {"seed", 0},
      {"output_dir", std::string("runs/") + nn::to_string(task)},
      {"env", {{"objects", objects}, {"background", "black"}, {"spawn", "random"}}},
      {"data",
       {{"train_size", mm ? 60000 : 10000},
        {"test_size", 10000},
        {"min_digits", 1},
        {"max_digits", 3},
        {"test_digits", 4},
        {"background", "black"}}},
      {"teacher", {{"kind", "dqn"}, {"dqn", dqn}}},
      {"demos",
       {{"frames_per_trial", 10000},
        {"mixture",
         nlohmann::json::array({{{"epsilon", 0.5}, {"trials", 5}},
                                {{"epsilon", 0.3}, {"trials", 3}},
                                {{"epsilon", 0.0}, {"trials", 1}}})},
        {"filter", task == nn::Task::falling_digit},
        {"min_return", 1.0}}},
      {"detector",
       {{"width", 1.0},
        {"background_module", "auto"},
        {"schedule_compression", 1.0},
        {"frames", 0},
        {"eval_frames", 200},
        {"train", det}}},
      {"refactor",
       {{"student", "gnn"},
        {"width", 1.0},
        {"proposals", "detector"},
        {"threshold", 0.1},
        {"readout", "default"},
        {"edge_form", "default"},
        {"train", student}}},
      {"evaluate", {{"episodes", 100}, {"seed", 1000003}, {"objects", nlohmann::json::array()}}},
      {"sweep", {{"variable", "objects"}, {"values", sweep_values}, {"episodes", 100}, {"policy", "student"}}},
      {"robustness",
       {{"drop_rates", {0.1, 0.5, 0.9}},
        {"false_positives", 25},
        {"eval_objects", task == nn::Task::pacman ? 5 : objects},
        {"episodes", 100},
        {"tolerance", 0.25}}},
      {"features", {{"k", 10}, {"frames", 1000}, {"iou", 0.25}}},
      {"plot", {{"reports", nlohmann::json::array()}}},
      {"paths",
       {{"train_data", ""}, {"test_data", ""}, {"teacher", ""}, {"demos", ""}, {"detector", ""}, {"student", ""}}},
  };
  if (!mm) c["data"]["test_size"] = 0;
  return c;
}

void validate_against(const nlohmann::json& user, const nlohmann::json& schema, const std::string& where) {
  if (!user.is_object()) throw ConfigError("config" + (where.empty() ? "" : " key '" + where + "'") + ": expected an object");
  for (const auto& [key, value] : user.items()) {
    const std::string path = join(where, key);
    if (!schema.contains(key)) throw ConfigError("unknown config key '" + path + "'");
    const auto& s = schema.at(key);
    if (s.is_object()) {
      validate_against(value, s, path);
    } else if (s.is_array()) {
      if (!value.is_array()) throw ConfigError("config key '" + path + "': expected an array");
      if (s.empty()) continue;
      for (std::size_t i = 0; i < value.size(); ++i) {
        const std::string item = path + "." + std::to_string(i);
        if (s.front().is_object()) validate_against(value[i], s.front(), item);
        else if (!same_kind(value[i], s.front())) throw ConfigError("config key '" + item + "': wrong type");
      }
    } else if (!same_kind(value, s)) {
      throw ConfigError("config key '" + path + "': expected " + std::string(s.type_name()) + ", got " +
                        value.type_name());
    }
  }
}

void apply_override(nlohmann::json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "': expected key=value");
  const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
  nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  std::string pointer;
  std::size_t start = 0;
  while (start <= key.size()) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("override '" + assignment + "': empty key segment");
    pointer += "/" + part;
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  try {
    config[nlohmann::json::json_pointer(pointer)] = value;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("override '" + assignment + "': " + e.what());
  }
}

nlohmann::json resolve_config(nlohmann::json user, const std::vector<std::string>& overrides) {
  if (user.is_null()) user = nlohmann::json::object();
  if (!user.is_object()) throw ConfigError("config: expected an object");
  for (const auto& o : overrides) apply_override(user, o);
  nn::Task task = nn::Task::pacman;
  if (user.contains("task")) {
    if (!user["task"].is_string()) throw ConfigError("config key 'task': expected a string");
    try {
      task = nn::parse_task(user["task"].get<std::string>());
    } catch (const std::exception& e) {
      throw ConfigError(std::string("config key 'task': ") + e.what());
    }
  }
  auto merged = default_config(task);
  validate_against(user, merged);
  merged.merge_patch(user);
  return merged;
}

nlohmann::json load_config(const std::string& path, const std::vector<std::string>& overrides) {
  nlohmann::json user = nlohmann::json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    user = nlohmann::json::parse(in, nullptr, false);
    if (user.is_discarded()) throw ConfigError("config file '" + path + "' is not valid JSON");
  }
  return resolve_config(std::move(user), overrides);
}

std::string config_hash(const nlohmann::json& config) { return nn::fnv1a64_hex(config.dump()); }

std::string output_dir(const nlohmann::json& config) {
  std::filesystem::path dir = config.at("output_dir").get<std::string>();
  if (dir.is_relative()) {
    if (const char* root = std::getenv(kOutputRootVar); root && *root) dir = std::filesystem::path(root) / dir;
  }
  return dir.string();
}

}  // namespace polref::pipeline
