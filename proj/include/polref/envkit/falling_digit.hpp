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

#include <optional>
#include <vector>

#include "polref/envkit/glyphs.hpp"
#include "polref/envkit/image.hpp"
#include "polref/envkit/pacman.hpp"
#include "polref/envkit/rng.hpp"

namespace polref::envkit {

enum class FallingAction : int { down_left = 0, down = 1, down_right = 2 };

enum class SpawnColumn : std::uint8_t { random = 0, center = 1 };

struct FallingDigitState {
  static constexpr int kColumns = 10;
  static constexpr int kRows = 10;  // targets live on the last row
  static constexpr int kCellPx = GlyphAtlas::kCell;
  static constexpr int kOriginPx = 4;
  static constexpr int kFrameSize = 128;
  static constexpr int kMaxSteps = 100;

  struct Falling {
    int value = 0;
    int row = 0;
    int col = 0;
    int entity_id = 0;
  };
  struct Target {
    int value = 0;
    int col = 0;
    int entity_id = 0;
  };

  std::optional<Falling> falling;
  std::vector<Target> targets;
  int steps_taken = 0;
  bool done = false;
  int next_entity_id = 0;
  SpawnColumn spawn = SpawnColumn::random;
};

// Index into `targets` of the target whose value is closest to `value`;
// ties go to the smaller target value, then to the smaller column.
// Returns -1 when there are no targets.
int closest_target(const FallingDigitState& state, int value);

// RNG call order: per target, column bounded(10) with rejection of used
// columns, then value bounded(10); then the first falling digit: value
// bounded(10), column bounded(10) (random spawn only).
// Throws std::invalid_argument when n_targets < 1 or n_targets > 10.
FallingDigitState falling_reset(int n_targets, Pcg32& rng, SpawnColumn spawn = SpawnColumn::random);

// Descends one row, shifted by the action and clamped at the side walls. On
// entering the bottom row the digit lands: +1 and the target is cleared when it
// lands on the closest target, otherwise -1. A replacement digit is spawned
// (same draws as in reset) when the episode continues, so it is visible in the
// next observation. Throws std::logic_error after the episode ended.
Transition falling_step(FallingDigitState& state, FallingAction action, Pcg32& rng);

void render_falling(const FallingDigitState& state, const Image& background, Image& out,
                    const GlyphAtlas& atlas = GlyphAtlas::builtin());
std::vector<GroundTruthObject> falling_gt(const FallingDigitState& state,
                                          const GlyphAtlas& atlas = GlyphAtlas::builtin());

}  // namespace polref::envkit
