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

// One grayscale bitmap per digit. Ink intensity 0..255; 0 is transparent.
struct Glyph {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> ink;

  std::uint8_t at(int x, int y) const { return ink[static_cast<std::size_t>(y) * width + x]; }

  // Tight bounding box of non-zero ink, in glyph pixels: {x0, y0, w, h}.
  std::array<int, 4> ink_bounds() const;

  friend bool operator==(const Glyph&, const Glyph&) = default;
};

class GlyphAtlas {
 public:
  static constexpr int kDigits = 10;
  static constexpr int kCell = 12;
  static constexpr std::uint16_t kFileVersion = 1;

  GlyphAtlas() = default;
  explicit GlyphAtlas(std::array<Glyph, kDigits> glyphs) : glyphs_(std::move(glyphs)) {}

  // The fixed built-in atlas: one hand-drawn instance per digit, 12x12 cells.
  static const GlyphAtlas& builtin();

  // Loads the first instance of each digit from an MNIST IDX image/label pair
  // and area-resamples it to the atlas cell size.
  static GlyphAtlas from_mnist(const std::string& images_path, const std::string& labels_path);

  const Glyph& operator[](int digit) const { return glyphs_.at(static_cast<std::size_t>(digit)); }

  // "GLYA" file: magic, version u16, 10 x (w u16, h u16, w*h bytes), then a
  // u32 FNV-1a checksum of all preceding bytes. Little-endian throughout.
  std::vector<std::uint8_t> serialize() const;
  static GlyphAtlas deserialize(const std::vector<std::uint8_t>& bytes);
  void save(const std::string& path) const;
  static GlyphAtlas load(const std::string& path);

  friend bool operator==(const GlyphAtlas&, const GlyphAtlas&) = default;

 private:
  std::array<Glyph, kDigits> glyphs_{};
};

std::uint32_t fnv1a32(const std::uint8_t* data, std::size_t size);

}  // namespace polref::envkit
