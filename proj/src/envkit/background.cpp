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

#include "polref/envkit/background.hpp"

#include <algorithm>
#include <filesystem>
#include <stdexcept>

namespace polref::envkit {

BackgroundSource BackgroundSource::procedural() {
  BackgroundSource s;
  s.kind_ = BackgroundKind::procedural;
  return s;
}

BackgroundSource BackgroundSource::directory(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw std::runtime_error("background directory not found: " + dir);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw std::runtime_error("no .png backgrounds in " + dir);
  auto images = std::make_shared<std::vector<Image>>();
  for (const auto& f : files) images->push_back(read_png(f.string()));
  BackgroundSource s;
  s.kind_ = BackgroundKind::directory;
  s.images_ = std::move(images);
  return s;
}

Image BackgroundSource::render(int width, int height, Pcg32& rng) const {
  switch (kind_) {
    case BackgroundKind::black:
      return Image(width, height);
    case BackgroundKind::procedural:
      return procedural_texture(width, height, rng.next_u32());
    case BackgroundKind::directory: {
      const auto& img = (*images_)[rng.bounded(static_cast<std::uint32_t>(images_->size()))];
      if (img.width == width && img.height == height) return img;
      return resize_nearest(img, width, height);
    }
  }
  return Image(width, height);
}

Image BackgroundSource::procedural_texture(int width, int height, std::uint32_t seed) {
  constexpr int kLattice = 8;
  Pcg32 tex(seed, 0x5eedu);
  const int gw = width / kLattice + 2;
  const int gh = height / kLattice + 2;
  // Muted lattice values keep the texture darker than rendered sprites.
  std::vector<int> lattice(static_cast<std::size_t>(gw) * gh * 3);
  for (auto& v : lattice) v = static_cast<int>(tex.bounded(128));

  Image out(width, height);
  for (int y = 0; y < height; ++y) {
    const int gy = y / kLattice, fy = y % kLattice;
    for (int x = 0; x < width; ++x) {
      const int gx = x / kLattice, fx = x % kLattice;
      for (int c = 0; c < 3; ++c) {
        auto at = [&](int ix, int iy) { return lattice[(static_cast<std::size_t>(iy) * gw + ix) * 3 + c]; };
        const int top = at(gx, gy) * (kLattice - fx) + at(gx + 1, gy) * fx;
        const int bot = at(gx, gy + 1) * (kLattice - fx) + at(gx + 1, gy + 1) * fx;
        out.at(x, y, c) = static_cast<std::uint8_t>((top * (kLattice - fy) + bot * fy) / (kLattice * kLattice));
      }
    }
  }

  const int blocks = 3 + static_cast<int>(tex.bounded(4));
  for (int b = 0; b < blocks; ++b) {
    const int bw = 4 + static_cast<int>(tex.bounded(static_cast<std::uint32_t>(std::max(1, width / 3))));
    const int bh = 4 + static_cast<int>(tex.bounded(static_cast<std::uint32_t>(std::max(1, height / 3))));
    const int bx = static_cast<int>(tex.bounded(static_cast<std::uint32_t>(width)));
    const int by = static_cast<int>(tex.bounded(static_cast<std::uint32_t>(height)));
    Rgb color;
    for (auto& ch : color) ch = static_cast<std::uint8_t>(tex.bounded(160));
    for (int y = by; y < std::min(height, by + bh); ++y)
      for (int x = bx; x < std::min(width, bx + bw); ++x)
        for (int c = 0; c < 3; ++c) out.at(x, y, c) = static_cast<std::uint8_t>((out.at(x, y, c) + color[c]) / 2);
  }
  return out;
}

BackgroundSource parse_background(const std::string& spec) {
  if (spec.empty() || spec == "black") return BackgroundSource::black();
  if (spec == "procedural") return BackgroundSource::procedural();
  const std::string prefix = "dir:";
  if (spec.rfind(prefix, 0) == 0) return BackgroundSource::directory(spec.substr(prefix.size()));
  throw std::invalid_argument("unknown background source '" + spec + "' (black|procedural|dir:<path>)");
}

}  // namespace polref::envkit
