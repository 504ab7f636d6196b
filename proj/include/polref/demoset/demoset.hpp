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

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "polref/envkit/env.hpp"
#include "polref/envkit/image.hpp"
#include "polref/teachers/policy.hpp"

namespace polref::demoset {

enum class TargetSemantics { q_values, logits, scalar };

const char* to_string(TargetSemantics s);
TargetSemantics parse_semantics(const std::string& name);

struct DemoSample {
  envkit::Image frame;
  std::vector<float> target;
  std::int64_t episode_id = 0;
  int step = 0;
  double episode_return = 0.0;
  float sigma = 0.0f;  // data parameter
  int action = -1;     // executed action, -1 for supervised samples
  std::vector<envkit::GroundTruthObject> gt;
};

struct DemoManifest {
  static constexpr int kVersion = 1;
  std::string task;  // "multi_mnist", "falling_digit" or "pacman"
  TargetSemantics semantics = TargetSemantics::q_values;
  int target_dim = 0;
  std::size_t sample_count = 0;
  // Free-form collection metadata: epsilons, filter threshold, teacher hash.
  nlohmann::json collection = nlohmann::json::object();
};

struct DemoDataset {
  DemoManifest manifest;
  std::vector<DemoSample> samples;

  std::size_t size() const { return samples.size(); }
  std::size_t episode_count() const;
  // Throws std::runtime_error when the manifest and the samples disagree.
  void validate() const;
};

struct CollectOptions {
  std::size_t n_frames = 10000;
  double epsilon = 0.0;
  std::uint64_t seed = 0;
  std::string teacher_hash;  // recorded in the manifest when set
};

// Rolls out `teacher` with epsilon-greedy exploration and stores every visited
// frame with the teacher's full score vector. Episodes are played to the end
// so recorded returns are complete even when the last one is cut short.
// Episode e is reset with seed `options.seed ^ e`.
DemoDataset collect(const envkit::EnvSpec& env, teachers::ActionScorer& teacher, const CollectOptions& options);

// Concatenates datasets of the same task and semantics. Episode ids are
// renumbered in (part index, episode id) order.
DemoDataset merge(const std::vector<DemoDataset>& parts);

// Drops every episode whose return is below `min_return`. Throws
// std::runtime_error when nothing survives.
DemoDataset filter_episodes(const DemoDataset& dataset, double min_return);

struct MultiMnistLabelOptions {
  std::size_t n = 60000;
  int min_digits = 1;
  int max_digits = 3;
  envkit::BackgroundSource background;
  std::uint64_t seed = 0;
};

// Supervised Multi-MNIST set: scalar target = digit sum. The digit count of
// each image is uniform over [min_digits, max_digits].
DemoDataset label_multi_mnist(const MultiMnistLabelOptions& options);

// Directory layout: manifest.json, index.jsonl (one row per sample) and
// frames/<id>.png.
void save(const DemoDataset& dataset, const std::string& dir);
DemoDataset load(const std::string& dir);

nlohmann::json gt_to_json(const std::vector<envkit::GroundTruthObject>& gt);
std::vector<envkit::GroundTruthObject> gt_from_json(const nlohmann::json& j);

}  // namespace polref::demoset
