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

#include "polref/envkit/image.hpp"

namespace polref::spacedet {

struct Anchor {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;
};

// One anchor per cell of a rows x cols grid over the unit square, centered at
// the cell and the size of the cell.
struct AnchorGrid {
  int rows = 1;
  int cols = 1;

  int size() const { return rows * cols; }
  // Row-major cell index.
  Anchor anchor(int cell) const;
};

struct BoxOffsets {
  double dx = 0.0;
  double dy = 0.0;
  double dw = 0.0;
  double dh = 0.0;
};

// dx = (x - x_a) / w_a, dy = (y - y_a) / h_a, dw = log(w / w_a), dh = log(h / h_a).
// Throws std::invalid_argument for non-positive box or anchor sizes.
BoxOffsets encode_box(const envkit::BBox& box, const Anchor& anchor);
envkit::BBox decode_box(const BoxOffsets& offsets, const Anchor& anchor);

}  // namespace polref::spacedet
