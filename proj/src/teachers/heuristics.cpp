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

#include "polref/teachers/heuristics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>

namespace polref::teachers {

using envkit::FallingAction;
using envkit::FallingDigitState;
using envkit::GridCell;
using envkit::PacmanAction;
using envkit::PacmanState;

namespace {

int manhattan(GridCell a, GridCell b) { return std::abs(a.row - b.row) + std::abs(a.col - b.col); }

int nearest_dot_distance(GridCell from, const PacmanState& state) {
  int best = 1 << 30;
  for (const auto& d : state.dots) best = std::min(best, manhattan(from, d.cell));
  return best;
}

}  // namespace

PacmanAction pacman_greedy(const PacmanState& state) {
  if (state.dots.empty()) throw std::logic_error("pacman_greedy: no dots left");
  GridCell goal = state.dots.front().cell;
  int best = manhattan(state.player, goal);
  for (const auto& d : state.dots) {
    const int dist = manhattan(state.player, d.cell);
    if (dist < best || (dist == best && d.cell < goal)) {
      best = dist;
      goal = d.cell;
    }
  }
  for (int a = 0; a < 4; ++a) {
    const auto action = static_cast<PacmanAction>(a);
    if (manhattan(envkit::pacman_move(state.player, action), goal) < best) return action;
  }
  // Unreachable: the player never stands on a dot.
  throw std::logic_error("pacman_greedy: player is on a dot");
}

FallingAction falling_heuristic(const FallingDigitState& state) {
  if (!state.falling) return FallingAction::down;
  const int idx = envkit::closest_target(state, state.falling->value);
  if (idx < 0) return FallingAction::down;
  const int diff = state.targets[idx].col - state.falling->col;
  if (diff < 0) return FallingAction::down_left;
  if (diff > 0) return FallingAction::down_right;
  return FallingAction::down;
}

std::vector<float> pacman_greedy_targets(const PacmanState& state) {
  std::vector<float> t(4);
  for (int a = 0; a < 4; ++a) {
    const auto next = envkit::pacman_move(state.player, static_cast<PacmanAction>(a));
    t[a] = std::pow(kTargetDiscount, static_cast<float>(nearest_dot_distance(next, state)));
  }
  t[static_cast<int>(pacman_greedy(state))] += kTargetMargin;
  return t;
}

std::vector<float> falling_heuristic_targets(const FallingDigitState& state) {
  constexpr float kNorm = FallingDigitState::kColumns - 1;
  std::vector<float> t(3, 1.0f);
  if (state.falling) {
    const int idx = envkit::closest_target(state, state.falling->value);
    if (idx >= 0) {
      const int goal = state.targets[idx].col;
      for (int a = 0; a < 3; ++a) {
        const int col = std::clamp(state.falling->col + a - 1, 0, FallingDigitState::kColumns - 1);
        t[a] = 1.0f - static_cast<float>(std::abs(goal - col)) / kNorm;
      }
    }
  }
  t[static_cast<int>(falling_heuristic(state))] += kTargetMargin;
  return t;
}

}  // namespace polref::teachers
