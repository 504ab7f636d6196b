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

#include "polref/envkit/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>

namespace polref::envkit {

bool BBox::valid() const {
  return std::isfinite(x_ctr) && std::isfinite(y_ctr) && w > 0.0 && h > 0.0 && w <= 1.0 &&
         h <= 1.0 && x_ctr >= 0.0 && x_ctr <= 1.0 && y_ctr >= 0.0 && y_ctr <= 1.0;
}

BBox BBox::from_pixels(int px, int py, int pw, int ph, int image_w, int image_h) {
  return BBox{(px + 0.5 * pw) / image_w, (py + 0.5 * ph) / image_h,
              static_cast<double>(pw) / image_w, static_cast<double>(ph) / image_h};
}

double iou(const BBox& a, const BBox& b) {
  if (!(a.w > 0.0 && a.h > 0.0 && b.w > 0.0 && b.h > 0.0)) return 0.0;
  const double ix = std::max(0.0, std::min(a.x1(), b.x1()) - std::max(a.x0(), b.x0()));
  const double iy = std::max(0.0, std::min(a.y1(), b.y1()) - std::max(a.y0(), b.y0()));
  const double inter = ix * iy;
  const double uni = a.w * a.h + b.w * b.h - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

const char* to_string(ObjectKind kind) {
  switch (kind) {
    case ObjectKind::digit: return "digit";
    case ObjectKind::player: return "player";
    case ObjectKind::dot: return "dot";
    case ObjectKind::falling_digit: return "falling_digit";
    case ObjectKind::target_digit: return "target_digit";
  }
  return "unknown";
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

void write_png(const std::string& path, const Image& image) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw std::runtime_error("cannot open for writing: " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("png write failed: " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, image.width, image.height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < image.height; ++y) {
    auto* row = const_cast<png_bytep>(image.rgb.data() + static_cast<std::size_t>(y) * image.width * 3);
    png_write_row(png, row);
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Image read_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw std::runtime_error("cannot open for reading: " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("png read failed: " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  const png_byte color = png_get_color_type(png, info);
  const png_byte depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  Image image(w, h);
  for (int y = 0; y < h; ++y) png_read_row(png, image.rgb.data() + static_cast<std::size_t>(y) * w * 3, nullptr);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return image;
}

Image resize_nearest(const Image& src, int width, int height) {
  Image out(width, height);
  for (int y = 0; y < height; ++y) {
    const int sy = static_cast<int>(static_cast<long long>(y) * src.height / height);
    for (int x = 0; x < width; ++x) {
      const int sx = static_cast<int>(static_cast<long long>(x) * src.width / width);
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = src.at(sx, sy, c);
    }
  }
  return out;
}

}  // namespace polref::envkit
