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

#include "polref/nn/tensor_util.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>

namespace polref::nn {

namespace {

constexpr const char* kFormatTag = "polref-checkpoint";

}  // namespace

torch::Tensor image_to_tensor(const envkit::Image& image) {
  auto t = torch::from_blob(const_cast<std::uint8_t*>(image.rgb.data()), {image.height, image.width, 3},
                            torch::kUInt8);
  return t.permute({2, 0, 1}).to(torch::kFloat32).div_(255.0f).contiguous();
}

torch::Tensor images_to_batch(const std::vector<const envkit::Image*>& images) {
  if (images.empty()) throw std::invalid_argument("images_to_batch: empty batch");
  std::vector<torch::Tensor> parts;
  parts.reserve(images.size());
  for (const auto* img : images) {
    if (img->width != images[0]->width || img->height != images[0]->height)
      throw std::invalid_argument("images_to_batch: mixed image sizes");
    parts.push_back(image_to_tensor(*img));
  }
  return torch::stack(parts);
}

envkit::Image tensor_to_image(const torch::Tensor& chw) {
  const auto t = (chw.detach().to(torch::kFloat32).clamp(0, 1) * 255.0f).round().to(torch::kUInt8).permute({1, 2, 0}).contiguous();
  envkit::Image out(static_cast<int>(t.size(1)), static_cast<int>(t.size(0)));
  std::memcpy(out.rgb.data(), t.data_ptr<std::uint8_t>(), out.rgb.size());
  return out;
}

torch::Tensor boxes_to_tensor(const std::vector<envkit::BBox>& boxes) {
  auto t = torch::empty({static_cast<int64_t>(boxes.size()), 4}, torch::kFloat32);
  auto a = t.accessor<float, 2>();
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    a[i][0] = static_cast<float>(boxes[i].x_ctr);
    a[i][1] = static_cast<float>(boxes[i].y_ctr);
    a[i][2] = static_cast<float>(boxes[i].w);
    a[i][3] = static_cast<float>(boxes[i].h);
  }
  return t;
}

void seed_everything(std::uint64_t seed, bool single_thread) {
  torch::manual_seed(seed);
  if (single_thread) torch::set_num_threads(1);
}

void require_finite(const torch::Tensor& t, const std::string& what) {
  if (!torch::isfinite(t).all().item<bool>()) throw NumericError("non-finite value in " + what);
}

void save_checkpoint(const std::string& path, const std::string& kind, const nlohmann::json& descriptor,
                     const torch::nn::Module& module) {
  torch::serialize::OutputArchive archive;
  archive.write("format", torch::IValue(std::string(kFormatTag)));
  archive.write("version", torch::IValue(static_cast<int64_t>(CheckpointHeader::kVersion)));
  archive.write("kind", torch::IValue(kind));
  archive.write("descriptor", torch::IValue(descriptor.dump()));
  torch::serialize::OutputArchive params;
  module.save(params);
  archive.write("model", params);
  archive.save_to(path);
}

namespace {

torch::serialize::InputArchive open_checkpoint(const std::string& path, CheckpointHeader& header) {
  torch::serialize::InputArchive archive;
  try {
    archive.load_from(path);
  } catch (const c10::Error& e) {
    throw std::runtime_error("cannot read checkpoint " + path);
  }
  torch::IValue v;
  if (!archive.try_read("format", v) || v.toStringRef() != kFormatTag)
    throw std::runtime_error(path + " is not a polref checkpoint");
  archive.read("version", v);
  if (v.toInt() != CheckpointHeader::kVersion)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(v.toInt()));
  archive.read("kind", v);
  header.kind = v.toStringRef();
  archive.read("descriptor", v);
  header.descriptor = nlohmann::json::parse(v.toStringRef());
  return archive;
}

}  // namespace

CheckpointHeader read_checkpoint_header(const std::string& path) {
  CheckpointHeader h;
  open_checkpoint(path, h);
  return h;
}

void load_checkpoint_parameters(const std::string& path, torch::nn::Module& module) {
  CheckpointHeader h;
  auto archive = open_checkpoint(path, h);
  torch::serialize::InputArchive params;
  archive.read("model", params);
  module.load(params);
}

std::string fnv1a64_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return fnv1a64_hex(std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()));
}

}  // namespace polref::nn
