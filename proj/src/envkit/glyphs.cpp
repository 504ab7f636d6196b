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

#include "polref/envkit/glyphs.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string_view>

namespace polref::envkit {

namespace {

// 8x10 ink patterns, placed at (2, 1) inside a 12x12 cell.
constexpr std::array<std::array<std::string_view, 10>, 10> kPatterns = {{
    {"..####..", ".##..##.", "##....##", "##....##", "##....##",
     "##....##", "##....##", "##....##", ".##..##.", "..####.."},
    {"...##...", "..###...", ".####...", "...##...", "...##...",
     "...##...", "...##...", "...##...", "...##...", ".######."},
    {".#####..", "##...##.", ".....##.", "....##..", "...##...",
     "..##....", ".##.....", "##......", "##......", "#######."},
    {".#####..", "##...##.", ".....##.", ".....##.", "..####..",
     ".....##.", ".....##.", ".....##.", "##...##.", ".#####.."},
    {"....##..", "...###..", "..####..", ".##.##..", "##..##..",
     "#######.", "....##..", "....##..", "....##..", "....##.."},
    {"#######.", "##......", "##......", "######..", ".....##.",
     ".....##.", ".....##.", ".....##.", "##...##.", ".#####.."},
    {"..####..", ".##.....", "##......", "##......", "######..",
     "##...##.", "##...##.", "##...##.", "##...##.", ".#####.."},
    {"#######.", ".....##.", "....##..", "....##..", "...##...",
     "...##...", "..##....", "..##....", "..##....", "..##...."},
    {".#####..", "##...##.", "##...##.", "##...##.", ".#####..",
     "##...##.", "##...##.", "##...##.", "##...##.", ".#####.."},
    {".#####..", "##...##.", "##...##.", "##...##.", ".######.",
     ".....##.", ".....##.", ".....##.", "....##..", ".####..."},
}};

GlyphAtlas make_builtin() {
  std::array<Glyph, GlyphAtlas::kDigits> glyphs;
  for (int d = 0; d < GlyphAtlas::kDigits; ++d) {
    Glyph g{GlyphAtlas::kCell, GlyphAtlas::kCell,
            std::vector<std::uint8_t>(GlyphAtlas::kCell * GlyphAtlas::kCell, 0)};
    for (int r = 0; r < 10; ++r) {
      for (int c = 0; c < 8; ++c) {
        if (kPatterns[d][r][c] == '#') g.ink[(r + 1) * GlyphAtlas::kCell + (c + 2)] = 255;
      }
    }
    glyphs[d] = std::move(g);
  }
  return GlyphAtlas(std::move(glyphs));
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t read_be32(std::ifstream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error("truncated IDX header");
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

std::array<int, 4> Glyph::ink_bounds() const {
  int x0 = width, y0 = height, x1 = -1, y1 = -1;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      if (at(x, y) == 0) continue;
      x0 = std::min(x0, x);
      y0 = std::min(y0, y);
      x1 = std::max(x1, x);
      y1 = std::max(y1, y);
    }
  }
  if (x1 < 0) return {0, 0, 0, 0};
  return {x0, y0, x1 - x0 + 1, y1 - y0 + 1};
}

const GlyphAtlas& GlyphAtlas::builtin() {
  static const GlyphAtlas atlas = make_builtin();
  return atlas;
}

GlyphAtlas GlyphAtlas::from_mnist(const std::string& images_path, const std::string& labels_path) {
  std::ifstream images(images_path, std::ios::binary);
  std::ifstream labels(labels_path, std::ios::binary);
  if (!images || !labels) throw std::runtime_error("cannot open MNIST files");
  if (read_be32(images) != 2051u) throw std::runtime_error("bad MNIST image magic");
  const std::uint32_t count = read_be32(images);
  const std::uint32_t rows = read_be32(images);
  const std::uint32_t cols = read_be32(images);
  if (read_be32(labels) != 2049u) throw std::runtime_error("bad MNIST label magic");
  if (read_be32(labels) != count) throw std::runtime_error("MNIST image/label count mismatch");

  std::array<Glyph, kDigits> glyphs;
  std::array<bool, kDigits> found{};
  std::vector<std::uint8_t> pixels(static_cast<std::size_t>(rows) * cols);
  for (std::uint32_t i = 0; i < count; ++i) {
    char label = 0;
    if (!labels.read(&label, 1)) break;
    if (!images.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()))) break;
    const int d = static_cast<unsigned char>(label);
    if (d < 0 || d >= kDigits || found[d]) continue;
    Glyph g{kCell, kCell, std::vector<std::uint8_t>(kCell * kCell, 0)};
    for (int y = 0; y < kCell; ++y) {
      for (int x = 0; x < kCell; ++x) {
        const auto sy0 = y * rows / kCell, sy1 = std::max<std::uint32_t>(sy0 + 1, (y + 1) * rows / kCell);
        const auto sx0 = x * cols / kCell, sx1 = std::max<std::uint32_t>(sx0 + 1, (x + 1) * cols / kCell);
        std::uint32_t acc = 0, n = 0;
        for (auto sy = sy0; sy < sy1; ++sy)
          for (auto sx = sx0; sx < sx1; ++sx, ++n) acc += pixels[sy * cols + sx];
        g.ink[y * kCell + x] = static_cast<std::uint8_t>(acc / n);
      }
    }
    glyphs[d] = std::move(g);
    found[d] = true;
    if (std::all_of(found.begin(), found.end(), [](bool f) { return f; })) break;
  }
  if (!std::all_of(found.begin(), found.end(), [](bool f) { return f; }))
    throw std::runtime_error("MNIST file does not contain all ten digits");
  return GlyphAtlas(std::move(glyphs));
}

std::uint32_t fnv1a32(const std::uint8_t* data, std::size_t size) {
  std::uint32_t h = 2166136261u;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= data[i];
    h *= 16777619u;
  }
  return h;
}

std::vector<std::uint8_t> GlyphAtlas::serialize() const {
  std::vector<std::uint8_t> out = {'G', 'L', 'Y', 'A'};
  put_u16(out, kFileVersion);
  for (const auto& g : glyphs_) {
    put_u16(out, static_cast<std::uint16_t>(g.width));
    put_u16(out, static_cast<std::uint16_t>(g.height));
    out.insert(out.end(), g.ink.begin(), g.ink.end());
  }
  put_u32(out, fnv1a32(out.data(), out.size()));
  return out;
}

GlyphAtlas GlyphAtlas::deserialize(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 10 || !std::equal(bytes.begin(), bytes.begin() + 4, "GLYA"))
    throw std::runtime_error("not a GLYA atlas");
  const std::size_t body = bytes.size() - 4;
  std::uint32_t stored = 0;
  for (int i = 0; i < 4; ++i) stored |= std::uint32_t{bytes[body + i]} << (8 * i);
  if (stored != fnv1a32(bytes.data(), body)) throw std::runtime_error("GLYA checksum mismatch");
  std::size_t pos = 4;
  auto u16 = [&]() {
    if (pos + 2 > body) throw std::runtime_error("truncated GLYA atlas");
    const std::uint16_t v = static_cast<std::uint16_t>(bytes[pos] | (bytes[pos + 1] << 8));
    pos += 2;
    return v;
  };
  if (u16() != kFileVersion) throw std::runtime_error("unsupported GLYA version");
  std::array<Glyph, kDigits> glyphs;
  for (auto& g : glyphs) {
    g.width = u16();
    g.height = u16();
    const std::size_t n = static_cast<std::size_t>(g.width) * g.height;
    if (pos + n > body) throw std::runtime_error("truncated GLYA atlas");
    g.ink.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.begin() + static_cast<std::ptrdiff_t>(pos + n));
    pos += n;
  }
  return GlyphAtlas(std::move(glyphs));
}

void GlyphAtlas::save(const std::string& path) const {
  const auto bytes = serialize();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

GlyphAtlas GlyphAtlas::load(const std::string& path) { return deserialize(read_file(path)); }

}  // namespace polref::envkit
