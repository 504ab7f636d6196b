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

#include "polref/spacedet/box_codec.hpp"

#include <cmath>
#include <stdexcept>

namespace polref::spacedet {

Anchor AnchorGrid::anchor(int cell) const {
  if (cell < 0 || cell >= size()) throw std::out_of_range("anchor cell out of range");
  const int r = cell / cols;
  const int c = cell % cols;
  return {(c + 0.5) / cols, (r + 0.5) / rows, 1.0 / cols, 1.0 / rows};
}

BoxOffsets encode_box(const envkit::BBox& box, const Anchor& anchor) {
  if (!(box.w > 0.0 && box.h > 0.0)) throw std::invalid_argument("encode_box: box size must be positive");
  if (!(anchor.w > 0.0 && anchor.h > 0.0)) throw std::invalid_argument("encode_box: anchor size must be positive");
  return {(box.x_ctr - anchor.x) / anchor.w, (box.y_ctr - anchor.y) / anchor.h, std::log(box.w / anchor.w),
          std::log(box.h / anchor.h)};
}

envkit::BBox decode_box(const BoxOffsets& o, const Anchor& anchor) {
  if (!(anchor.w > 0.0 && anchor.h > 0.0)) throw std::invalid_argument("decode_box: anchor size must be positive");
  return {anchor.x + o.dx * anchor.w, anchor.y + o.dy * anchor.h, anchor.w * std::exp(o.dw),
          anchor.h * std::exp(o.dh)};
}

}  // namespace polref::spacedet
