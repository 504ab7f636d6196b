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

#include "polref/envkit/background.hpp"
#include "polref/envkit/glyphs.hpp"
#include "polref/envkit/image.hpp"
#include "polref/envkit/rng.hpp"

namespace polref::envkit {

struct MultiMnistScene {
  Image frame;
  int sum_label = 0;
  std::vector<GroundTruthObject> gt;
};

struct MultiMnistOptions {
  static constexpr int kFrameSize = 54;
  int min_center_distance = 10;  // px, between glyph cell centers
  int max_attempts = 1000;       // per digit
};

// Scatters `n_digits` recolored glyphs on a 54x54 background.
//
// RNG call order: background draw, then per digit: value bounded(10), placement
// attempts (x bounded(43), y bounded(43)) until accepted, hue bounded(360).
// Throws std::invalid_argument for n_digits outside [1, 9] and
// std::runtime_error when a digit cannot be placed in max_attempts tries.
MultiMnistScene mmnist_generate(int n_digits, const BackgroundSource& background, Pcg32& rng,
                                const GlyphAtlas& atlas = GlyphAtlas::builtin(),
                                const MultiMnistOptions& options = {});

}  // namespace polref::envkit
