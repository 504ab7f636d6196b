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

#include "polref/envkit/falling_digit.hpp"

#include <algorithm>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "polref/envkit/render.hpp"

namespace polref::envkit {

namespace {

using S = FallingDigitState;
constexpr Rgb kDigitColor = {255, 255, 255};

int cell_px(int index) { return S::kOriginPx + index * S::kCellPx; }

void spawn_falling(S& state, Pcg32& rng) {
  S::Falling f;
  f.value = static_cast<int>(rng.bounded(10));
  f.col = state.spawn == SpawnColumn::random ? static_cast<int>(rng.bounded(S::kColumns)) : S::kColumns / 2;
  f.row = 0;
  f.entity_id = state.next_entity_id++;
  state.falling = f;
}

}  // namespace

int closest_target(const FallingDigitState& state, int value) {
  int best = -1;
  for (int i = 0; i < static_cast<int>(state.targets.size()); ++i) {
    if (best < 0) {
      best = i;
      continue;
    }
    const auto& t = state.targets[i];
    const auto& b = state.targets[best];
    const int dt = std::abs(t.value - value), db = std::abs(b.value - value);
    if (dt < db || (dt == db && (t.value < b.value || (t.value == b.value && t.col < b.col)))) best = i;
  }
  return best;
}

FallingDigitState falling_reset(int n_targets, Pcg32& rng, SpawnColumn spawn) {
  if (n_targets < 1 || n_targets > S::kColumns)
    throw std::invalid_argument("n_targets must be in [1, " + std::to_string(S::kColumns) + "], got " +
                                std::to_string(n_targets));
  S state;
  state.spawn = spawn;
  while (static_cast<int>(state.targets.size()) < n_targets) {
    const int col = static_cast<int>(rng.bounded(S::kColumns));
    if (std::any_of(state.targets.begin(), state.targets.end(), [&](const S::Target& t) { return t.col == col; }))
      continue;
    const int value = static_cast<int>(rng.bounded(10));
    state.targets.push_back({value, col, state.next_entity_id++});
  }
  spawn_falling(state, rng);
  return state;
}

Transition falling_step(FallingDigitState& state, FallingAction action, Pcg32& rng) {
  if (state.done) throw std::logic_error("falling_step called after the episode ended");
  const int a = static_cast<int>(action);
  if (a < 0 || a > 2) throw std::invalid_argument("invalid falling-digit action " + std::to_string(a));
  if (!state.falling) throw std::logic_error("no falling digit");
  auto& f = *state.falling;
  f.col = std::clamp(f.col + a - 1, 0, S::kColumns - 1);
  f.row += 1;
  state.steps_taken += 1;

  Transition t;
  bool landed = false;
  if (f.row >= S::kRows - 1) {
    landed = true;
    const int correct = closest_target(state, f.value);
    if (correct >= 0 && state.targets[correct].col == f.col) {
      t.reward = 1.0;
      state.targets.erase(state.targets.begin() + correct);
    } else {
      t.reward = -1.0;
    }
    state.falling.reset();
  }
  state.done = state.targets.empty() || state.steps_taken >= S::kMaxSteps;
  if (landed && !state.done) spawn_falling(state, rng);
  t.done = state.done;
  return t;
}

void render_falling(const FallingDigitState& state, const Image& background, Image& out,
                    const GlyphAtlas& atlas) {
  out = background;
  for (const auto& t : state.targets) blit_glyph(out, atlas[t.value], cell_px(t.col), cell_px(S::kRows - 1), kDigitColor);
  if (state.falling) {
    const auto& f = *state.falling;
    blit_glyph(out, atlas[f.value], cell_px(f.col), cell_px(f.row), kDigitColor);
  }
}

std::vector<GroundTruthObject> falling_gt(const FallingDigitState& state, const GlyphAtlas& atlas) {
  std::vector<GroundTruthObject> gt;
  if (state.falling) {
    const auto& f = *state.falling;
    gt.push_back({glyph_box(atlas[f.value], cell_px(f.col), cell_px(f.row), S::kFrameSize, S::kFrameSize),
                  ObjectKind::falling_digit, f.value, f.entity_id});
  }
  for (const auto& t : state.targets)
    gt.push_back({glyph_box(atlas[t.value], cell_px(t.col), cell_px(S::kRows - 1), S::kFrameSize, S::kFrameSize),
                  ObjectKind::target_digit, t.value, t.entity_id});
  return gt;
}

}  // namespace polref::envkit
