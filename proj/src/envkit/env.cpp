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

#include "polref/envkit/env.hpp"

#include <stdexcept>

namespace polref::envkit {

const char* to_string(EnvId id) {
  switch (id) {
    case EnvId::pacman: return "pacman";
    case EnvId::falling_digit: return "falling_digit";
  }
  return "unknown";
}

EnvId parse_env_id(const std::string& name) {
  if (name == "pacman") return EnvId::pacman;
  if (name == "falling_digit") return EnvId::falling_digit;
  throw std::invalid_argument("unknown env id '" + name + "'");
}

int frame_size(EnvId id) {
  return id == EnvId::pacman ? PacmanState::kFrameSize : FallingDigitState::kFrameSize;
}

int action_count(EnvId id) { return id == EnvId::pacman ? 4 : 3; }

StepResult PacmanEnv::reset(std::uint64_t seed) {
  rng_ = Pcg32::from_seed(seed);
  background_ = spec_.background.render(PacmanState::kFrameSize, PacmanState::kFrameSize, rng_);
  state_ = pacman_reset(spec_.object_count, rng_);
  return observe(0.0);
}

StepResult PacmanEnv::step(int action) {
  if (action < 0 || action >= 4) throw std::invalid_argument("pacman action out of range");
  const auto t = pacman_step(state_, static_cast<PacmanAction>(action));
  return observe(t.reward);
}

StepResult PacmanEnv::observe(double reward) {
  render_pacman(state_, background_, frame_);
  return {frame_, reward, state_.done, pacman_gt(state_)};
}

StepResult FallingDigitEnv::reset(std::uint64_t seed) {
  rng_ = Pcg32::from_seed(seed);
  background_ = spec_.background.render(FallingDigitState::kFrameSize, FallingDigitState::kFrameSize, rng_);
  state_ = falling_reset(spec_.object_count, rng_, spec_.spawn);
  return observe(0.0);
}

StepResult FallingDigitEnv::step(int action) {
  if (action < 0 || action >= 3) throw std::invalid_argument("falling-digit action out of range");
  const auto t = falling_step(state_, static_cast<FallingAction>(action), rng_);
  return observe(t.reward);
}

StepResult FallingDigitEnv::observe(double reward) {
  render_falling(state_, background_, frame_);
  return {frame_, reward, state_.done, falling_gt(state_)};
}

std::unique_ptr<Env> make_env(const EnvSpec& spec) {
  switch (spec.id) {
    case EnvId::pacman: return std::make_unique<PacmanEnv>(spec);
    case EnvId::falling_digit: return std::make_unique<FallingDigitEnv>(spec);
  }
  throw std::invalid_argument("unknown env id");
}

}  // namespace polref::envkit
