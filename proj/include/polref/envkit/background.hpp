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

#include <memory>
#include <string>
#include <vector>

#include "polref/envkit/image.hpp"
#include "polref/envkit/rng.hpp"

namespace polref::envkit {

enum class BackgroundKind : std::uint8_t { black = 0, procedural = 1, directory = 2 };

// Where frame backgrounds come from.
//
// RNG use per render: black draws nothing; procedural draws one next_u32()
// (the texture seed); directory draws one bounded(image count).
class BackgroundSource {
 public:
  BackgroundSource() = default;

  static BackgroundSource black() { return {}; }
  static BackgroundSource procedural();
  // Every *.png under `dir` (sorted by file name), resized to the frame size.
  static BackgroundSource directory(const std::string& dir);

  BackgroundKind kind() const { return kind_; }
  Image render(int width, int height, Pcg32& rng) const;

  // Integer-only value-noise texture with blended color blocks.
  static Image procedural_texture(int width, int height, std::uint32_t seed);

 private:
  BackgroundKind kind_ = BackgroundKind::black;
  std::shared_ptr<const std::vector<Image>> images_;
};

BackgroundSource parse_background(const std::string& spec);

}  // namespace polref::envkit
