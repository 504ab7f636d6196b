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

#include <memory>
#include <string>
#include <vector>

#include "polref/envkit/env.hpp"
#include "polref/envkit/rng.hpp"

namespace polref::teachers {

// Anything that scores the actions of the current env state. Acting greedily
// means taking the first argmax.
class ActionScorer {
 public:
  virtual ~ActionScorer() = default;
  virtual std::vector<float> scores(const envkit::Env& env) = 0;
  virtual int action_count() const = 0;
  virtual std::string name() const = 0;
  // "q_values", "logits" or "scalar".
  virtual std::string semantics() const = 0;
};

int argmax(const std::vector<float>& v);

// The scripted teachers, dispatching on the env type.
class HeuristicTeacher final : public ActionScorer {
 public:
  explicit HeuristicTeacher(envkit::EnvId env) : env_(env) {}
  std::vector<float> scores(const envkit::Env& env) override;
  int action_count() const override { return envkit::action_count(env_); }
  std::string name() const override { return "heuristic"; }
  std::string semantics() const override { return "logits"; }

 private:
  envkit::EnvId env_;
};

// One-hot scores on a uniformly drawn action.
class RandomPolicy final : public ActionScorer {
 public:
  RandomPolicy(int actions, std::uint64_t seed) : actions_(actions), rng_(envkit::Pcg32::from_seed(seed)) {}
  std::vector<float> scores(const envkit::Env& env) override;
  int action_count() const override { return actions_; }
  std::string name() const override { return "random"; }
  std::string semantics() const override { return "logits"; }

 private:
  int actions_;
  envkit::Pcg32 rng_;
};

}  // namespace polref::teachers
