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

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace polref::envkit {

// Interleaved 8-bit RGB, row-major.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  Image() = default;
  Image(int w, int h) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 0) {}

  std::uint8_t& at(int x, int y, int c) {
    return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  std::uint8_t at(int x, int y, int c) const {
    return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  void set(int x, int y, std::array<std::uint8_t, 3> color) {
    for (int c = 0; c < 3; ++c) at(x, y, c) = color[c];
  }

  friend bool operator==(const Image&, const Image&) = default;
};

using Rgb = std::array<std::uint8_t, 3>;

// Normalized box: center and size relative to the image, all in [0, 1].
struct BBox {
  double x_ctr = 0.0;
  double y_ctr = 0.0;
  double w = 0.0;
  double h = 0.0;

  double x0() const { return x_ctr - 0.5 * w; }
  double y0() const { return y_ctr - 0.5 * h; }
  double x1() const { return x_ctr + 0.5 * w; }
  double y1() const { return y_ctr + 0.5 * h; }

  bool valid() const;
  // Pixel-aligned box covering columns [px, px + pw) and rows [py, py + ph).
  static BBox from_pixels(int px, int py, int pw, int ph, int image_w, int image_h);

  friend bool operator==(const BBox&, const BBox&) = default;
};

// Intersection over union. Boxes with non-positive area give 0.
double iou(const BBox& a, const BBox& b);

enum class ObjectKind : std::uint8_t { digit, player, dot, falling_digit, target_digit };

const char* to_string(ObjectKind kind);

struct GroundTruthObject {
  BBox box;
  ObjectKind kind = ObjectKind::digit;
  int value = -1;  // digit value for digit kinds, -1 otherwise
  int entity_id = 0;
};

// PNG helpers (libpng). Throw std::runtime_error on I/O failure.
void write_png(const std::string& path, const Image& image);
Image read_png(const std::string& path);

// Nearest-neighbour resize, used for user-supplied backgrounds.
Image resize_nearest(const Image& src, int width, int height);

}  // namespace polref::envkit
