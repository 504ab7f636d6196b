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

#include "polref/envkit/render.hpp"

#include <algorithm>

namespace polref::envkit {

Rgb hue_color(int hue) {
  hue = ((hue % 360) + 360) % 360;
  const int sector = hue / 60;
  const int rise = (hue % 60) * 255 / 60;
  const auto up = static_cast<std::uint8_t>(rise);
  const auto down = static_cast<std::uint8_t>(255 - rise);
  switch (sector) {
    case 0: return {255, up, 0};
    case 1: return {down, 255, 0};
    case 2: return {0, 255, up};
    case 3: return {0, down, 255};
    case 4: return {up, 0, 255};
    default: return {255, 0, down};
  }
}

void blit_glyph(Image& dst, const Glyph& glyph, int x, int y, Rgb color) {
  for (int gy = 0; gy < glyph.height; ++gy) {
    const int py = y + gy;
    if (py < 0 || py >= dst.height) continue;
    for (int gx = 0; gx < glyph.width; ++gx) {
      const int px = x + gx;
      if (px < 0 || px >= dst.width) continue;
      const int ink = glyph.at(gx, gy);
      if (ink == 0) continue;
      for (int c = 0; c < 3; ++c) {
        const int v = (ink * color[c] + (255 - ink) * dst.at(px, py, c)) / 255;
        dst.at(px, py, c) = static_cast<std::uint8_t>(v);
      }
    }
  }
}

void fill_rect(Image& dst, int x, int y, int w, int h, Rgb color) {
  for (int py = std::max(0, y); py < std::min(dst.height, y + h); ++py)
    for (int px = std::max(0, x); px < std::min(dst.width, x + w); ++px) dst.set(px, py, color);
}

BBox glyph_box(const Glyph& glyph, int x, int y, int image_w, int image_h) {
  const auto b = glyph.ink_bounds();
  return BBox::from_pixels(x + b[0], y + b[1], b[2], b[3], image_w, image_h);
}

}  // namespace polref::envkit
