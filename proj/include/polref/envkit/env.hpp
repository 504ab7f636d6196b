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
#include <memory>
#include <string>
#include <vector>

#include "polref/envkit/background.hpp"
#include "polref/envkit/falling_digit.hpp"
#include "polref/envkit/image.hpp"
#include "polref/envkit/pacman.hpp"
#include "polref/envkit/rng.hpp"

namespace polref::envkit {

enum class EnvId : std::uint8_t { pacman = 1, falling_digit = 2 };

const char* to_string(EnvId id);
EnvId parse_env_id(const std::string& name);
int frame_size(EnvId id);
int action_count(EnvId id);

struct StepResult {
  Image frame;
  double reward = 0.0;
  bool done = false;
  std::vector<GroundTruthObject> gt;
};

struct EnvSpec {
  EnvId id = EnvId::pacman;
  int object_count = 2;  // dots for Pacman, targets for FallingDigit
  BackgroundSource background;
  SpawnColumn spawn = SpawnColumn::random;
};

// An episodic environment instance. Not thread-safe; give every worker its own.
//
// reset(seed) seeds a fresh Pcg32::from_seed(seed), renders the episode
// background (first draw), then resets the game state.
class Env {
 public:
  virtual ~Env() = default;

  virtual EnvId id() const = 0;
  virtual int action_count() const = 0;
  virtual StepResult reset(std::uint64_t seed) = 0;
  virtual StepResult step(int action) = 0;
  virtual bool done() const = 0;
  virtual const Image& frame() const = 0;
  virtual std::vector<GroundTruthObject> gt() const = 0;
  virtual int steps_taken() const = 0;

  const EnvSpec& spec() const { return spec_; }

 protected:
  explicit Env(EnvSpec spec) : spec_(std::move(spec)) {}
  EnvSpec spec_;
};

class PacmanEnv final : public Env {
 public:
  explicit PacmanEnv(EnvSpec spec) : Env(std::move(spec)) {}

  EnvId id() const override { return EnvId::pacman; }
  int action_count() const override { return 4; }
  StepResult reset(std::uint64_t seed) override;
  StepResult step(int action) override;
  bool done() const override { return state_.done; }
  const Image& frame() const override { return frame_; }
  std::vector<GroundTruthObject> gt() const override { return pacman_gt(state_); }
  int steps_taken() const override { return state_.steps_taken; }

  const PacmanState& state() const { return state_; }

 private:
  StepResult observe(double reward);

  Pcg32 rng_;
  PacmanState state_;
  Image background_;
  Image frame_;
};

class FallingDigitEnv final : public Env {
 public:
  explicit FallingDigitEnv(EnvSpec spec) : Env(std::move(spec)) {}

  EnvId id() const override { return EnvId::falling_digit; }
  int action_count() const override { return 3; }
  StepResult reset(std::uint64_t seed) override;
  StepResult step(int action) override;
  bool done() const override { return state_.done; }
  const Image& frame() const override { return frame_; }
  std::vector<GroundTruthObject> gt() const override { return falling_gt(state_); }
  int steps_taken() const override { return state_.steps_taken; }

  const FallingDigitState& state() const { return state_; }

 private:
  StepResult observe(double reward);

  Pcg32 rng_;
  FallingDigitState state_;
  Image background_;
  Image frame_;
};

std::unique_ptr<Env> make_env(const EnvSpec& spec);

}  // namespace polref::envkit
