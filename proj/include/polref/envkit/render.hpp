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

#include "polref/envkit/glyphs.hpp"
#include "polref/envkit/image.hpp"

namespace polref::envkit {

// Fully saturated color for an integer hue in [0, 360).
Rgb hue_color(int hue);

// Integer alpha blit: out = (ink * color + (255 - ink) * dst) / 255.
// Pixels outside the image are skipped.
void blit_glyph(Image& dst, const Glyph& glyph, int x, int y, Rgb color);

void fill_rect(Image& dst, int x, int y, int w, int h, Rgb color);

// Pixel box of a glyph's ink when the glyph cell is placed at (x, y).
BBox glyph_box(const Glyph& glyph, int x, int y, int image_w, int image_h);

}  // namespace polref::envkit
