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

#include "polref/envkit/falling_digit.hpp"
#include "polref/envkit/pacman.hpp"

namespace polref::teachers {

// Step toward the Manhattan-nearest dot. Dot ties go to the smallest (row,
// col); direction ties to the first of up, down, left, right.
// Throws std::logic_error when no dot is left.
envkit::PacmanAction pacman_greedy(const envkit::PacmanState& state);

// Steer toward the column of the value-closest target (envkit tie rule).
// Returns `down` when there is nothing to steer for.
envkit::FallingAction falling_heuristic(const envkit::FallingDigitState& state);

// Per-action scores for demonstrations, built from d_after(a), the distance
// left to the goal after taking a. Pacman scores kTargetDiscount^d_after with
// the nearest dot as goal, so the score over all dots is the max of per-dot
// scores and falls off fast with distance. FallingDigit scores
// 1 - d_after / (columns - 1) toward the column of the closest target. The
// heuristic's own action gets `margin` on top, so the argmax of the scores is
// always the heuristic action.
inline constexpr float kTargetMargin = 0.02f;
inline constexpr float kTargetDiscount = 0.8f;
std::vector<float> pacman_greedy_targets(const envkit::PacmanState& state);
std::vector<float> falling_heuristic_targets(const envkit::FallingDigitState& state);

}  // namespace polref::teachers
