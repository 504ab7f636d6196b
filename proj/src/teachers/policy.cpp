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

#include "polref/teachers/policy.hpp"

#include <algorithm>
#include <stdexcept>

#include "polref/teachers/heuristics.hpp"

namespace polref::teachers {

int argmax(const std::vector<float>& v) {
  if (v.empty()) throw std::invalid_argument("argmax of an empty vector");
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

std::vector<float> HeuristicTeacher::scores(const envkit::Env& env) {
  if (env.id() != env_) throw std::invalid_argument("heuristic teacher used on a different env");
  if (const auto* p = dynamic_cast<const envkit::PacmanEnv*>(&env)) return pacman_greedy_targets(p->state());
  if (const auto* f = dynamic_cast<const envkit::FallingDigitEnv*>(&env)) return falling_heuristic_targets(f->state());
  throw std::invalid_argument("heuristic teacher: unsupported env");
}

std::vector<float> RandomPolicy::scores(const envkit::Env&) {
  std::vector<float> s(static_cast<std::size_t>(actions_), 0.0f);
  s[rng_.bounded(static_cast<std::uint32_t>(actions_))] = 1.0f;
  return s;
}

}  // namespace polref::teachers
