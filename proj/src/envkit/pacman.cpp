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

#include "polref/envkit/pacman.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "polref/envkit/render.hpp"

namespace polref::envkit {

namespace {

constexpr int kCells = PacmanState::kGrid * PacmanState::kGrid;
constexpr Rgb kPlayerColor = {255, 220, 0};
constexpr Rgb kDotColor = {255, 184, 151};

GridCell cell_from_index(std::uint32_t idx) {
  return {static_cast<int>(idx) / PacmanState::kGrid, static_cast<int>(idx) % PacmanState::kGrid};
}

int cell_px(int index) { return PacmanState::kOriginPx + index * PacmanState::kCellPx; }

}  // namespace

PacmanState pacman_reset(int n_dots, Pcg32& rng) {
  if (n_dots < 1 || n_dots > kCells - 1)
    throw std::invalid_argument("n_dots must be in [1, " + std::to_string(kCells - 1) + "], got " +
                                std::to_string(n_dots));
  PacmanState state;
  state.player = cell_from_index(rng.bounded(kCells));
  while (static_cast<int>(state.dots.size()) < n_dots) {
    const GridCell c = cell_from_index(rng.bounded(kCells));
    if (c == state.player) continue;
    if (std::any_of(state.dots.begin(), state.dots.end(), [&](const PacmanDot& d) { return d.cell == c; }))
      continue;
    state.dots.push_back({c, static_cast<int>(state.dots.size()) + 1});
  }
  return state;
}

GridCell pacman_move(GridCell cell, PacmanAction action) {
  switch (action) {
    case PacmanAction::up: cell.row -= 1; break;
    case PacmanAction::down: cell.row += 1; break;
    case PacmanAction::left: cell.col -= 1; break;
    case PacmanAction::right: cell.col += 1; break;
  }
  cell.row = std::clamp(cell.row, 0, PacmanState::kGrid - 1);
  cell.col = std::clamp(cell.col, 0, PacmanState::kGrid - 1);
  return cell;
}

Transition pacman_step(PacmanState& state, PacmanAction action) {
  if (state.done) throw std::logic_error("pacman_step called after the episode ended");
  const int a = static_cast<int>(action);
  if (a < 0 || a > 3) throw std::invalid_argument("invalid pacman action " + std::to_string(a));
  state.player = pacman_move(state.player, action);
  state.steps_taken += 1;
  Transition t;
  t.reward = PacmanState::kMoveReward;
  const auto eaten = std::find_if(state.dots.begin(), state.dots.end(),
                                  [&](const PacmanDot& d) { return d.cell == state.player; });
  if (eaten != state.dots.end()) {
    state.dots.erase(eaten);
    t.reward = PacmanState::kDotReward + PacmanState::kMoveReward;
  }
  state.done = state.dots.empty() || state.steps_taken >= PacmanState::kMaxSteps;
  t.done = state.done;
  return t;
}

void render_pacman(const PacmanState& state, const Image& background, Image& out) {
  out = background;
  for (const auto& d : state.dots) fill_rect(out, cell_px(d.cell.col) + 1, cell_px(d.cell.row) + 1, 2, 2, kDotColor);
  // 4x4 disc: full cell with the four corner pixels left as background.
  const int px = cell_px(state.player.col), py = cell_px(state.player.row);
  fill_rect(out, px + 1, py, 2, 4, kPlayerColor);
  fill_rect(out, px, py + 1, 4, 2, kPlayerColor);
}

std::vector<GroundTruthObject> pacman_gt(const PacmanState& state) {
  constexpr int s = PacmanState::kFrameSize;
  std::vector<GroundTruthObject> gt;
  gt.push_back({BBox::from_pixels(cell_px(state.player.col), cell_px(state.player.row), 4, 4, s, s),
                ObjectKind::player, -1, 0});
  for (const auto& d : state.dots)
    gt.push_back({BBox::from_pixels(cell_px(d.cell.col) + 1, cell_px(d.cell.row) + 1, 2, 2, s, s),
                  ObjectKind::dot, -1, d.entity_id});
  return gt;
}

}  // namespace polref::envkit
