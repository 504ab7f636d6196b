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

#include <vector>

#include "polref/envkit/image.hpp"
#include "polref/envkit/rng.hpp"

namespace polref::envkit {

enum class PacmanAction : int { up = 0, down = 1, left = 2, right = 3 };

struct GridCell {
  int row = 0;
  int col = 0;
  friend auto operator<=>(const GridCell&, const GridCell&) = default;
};

struct PacmanDot {
  GridCell cell;
  int entity_id = 0;
};

struct PacmanState {
  static constexpr int kGrid = 14;
  static constexpr int kMaxSteps = 100;
  static constexpr int kCellPx = 4;
  static constexpr int kOriginPx = 4;
  static constexpr int kFrameSize = 64;
  static constexpr double kMoveReward = -0.01;
  static constexpr double kDotReward = 1.0;

  GridCell player;
  std::vector<PacmanDot> dots;  // spawn order; entity ids 1..n, player is 0
  int steps_taken = 0;
  bool done = false;
};

struct Transition {
  double reward = 0.0;
  bool done = false;
};

// RNG call order: player cell bounded(196), then each dot bounded(196) with
// rejection of the player cell and already used cells.
// Throws std::invalid_argument when n_dots < 1 or n_dots > 195.
PacmanState pacman_reset(int n_dots, Pcg32& rng);

// Moves one cell (clamped at the border), eats a dot on entry. Each move costs
// 0.01, so eating yields +0.99. Throws std::logic_error after the episode ended.
Transition pacman_step(PacmanState& state, PacmanAction action);

GridCell pacman_move(GridCell cell, PacmanAction action);

void render_pacman(const PacmanState& state, const Image& background, Image& out);
std::vector<GroundTruthObject> pacman_gt(const PacmanState& state);

}  // namespace polref::envkit
