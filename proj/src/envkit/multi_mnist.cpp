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

#include "polref/envkit/multi_mnist.hpp"

#include <stdexcept>
#include <string>

#include "polref/envkit/render.hpp"

namespace polref::envkit {

MultiMnistScene mmnist_generate(int n_digits, const BackgroundSource& background, Pcg32& rng,
                                const GlyphAtlas& atlas, const MultiMnistOptions& options) {
  if (n_digits < 1 || n_digits > 9)
    throw std::invalid_argument("n_digits must be in [1, 9], got " + std::to_string(n_digits));
  constexpr int size = MultiMnistOptions::kFrameSize;
  const int cell = GlyphAtlas::kCell;
  const auto span = static_cast<std::uint32_t>(size - cell + 1);
  const int min_d2 = options.min_center_distance * options.min_center_distance;

  MultiMnistScene scene;
  scene.frame = background.render(size, size, rng);

  struct Placement {
    int value, x, y;
    Rgb color;
  };
  std::vector<Placement> placed;
  for (int i = 0; i < n_digits; ++i) {
    const int value = static_cast<int>(rng.bounded(10));
    bool ok = false;
    int x = 0, y = 0;
    for (int attempt = 0; attempt < options.max_attempts && !ok; ++attempt) {
      x = static_cast<int>(rng.bounded(span));
      y = static_cast<int>(rng.bounded(span));
      ok = true;
      for (const auto& p : placed) {
        const int dx = p.x - x, dy = p.y - y;
        if (dx * dx + dy * dy < min_d2) {
          ok = false;
          break;
        }
      }
    }
    if (!ok)
      throw std::runtime_error("could not place digit " + std::to_string(i + 1) + " of " +
                               std::to_string(n_digits) + " after " +
                               std::to_string(options.max_attempts) + " attempts");
    const Rgb color = hue_color(static_cast<int>(rng.bounded(360)));
    placed.push_back({value, x, y, color});
  }

  for (std::size_t i = 0; i < placed.size(); ++i) {
    const auto& p = placed[i];
    blit_glyph(scene.frame, atlas[p.value], p.x, p.y, p.color);
    scene.sum_label += p.value;
    scene.gt.push_back({glyph_box(atlas[p.value], p.x, p.y, size, size), ObjectKind::digit, p.value,
                        static_cast<int>(i)});
  }
  return scene;
}

}  // namespace polref::envkit
