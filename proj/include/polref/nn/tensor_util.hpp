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

#include <torch/torch.h>

#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "polref/envkit/image.hpp"

namespace polref::nn {

// [3, H, W] float in [0, 1].
torch::Tensor image_to_tensor(const envkit::Image& image);
// [B, 3, H, W]; all images must share a size.
torch::Tensor images_to_batch(const std::vector<const envkit::Image*>& images);
envkit::Image tensor_to_image(const torch::Tensor& chw);

// [N, 4] rows of (x_ctr, y_ctr, w, h).
torch::Tensor boxes_to_tensor(const std::vector<envkit::BBox>& boxes);

// Seeds torch's global generator. With `single_thread` the intra-op pool is
// limited to one thread so float reductions run in a fixed order.
void seed_everything(std::uint64_t seed, bool single_thread = true);

// Raised when a loss or tensor stops being finite.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Throws NumericError when `t` holds NaN or Inf.
void require_finite(const torch::Tensor& t, const std::string& what);

// Versioned checkpoint container: format tag, version, kind, JSON
// descriptor, and the module's parameters and buffers.
struct CheckpointHeader {
  static constexpr int kVersion = 1;
  std::string kind;
  nlohmann::json descriptor;
};

void save_checkpoint(const std::string& path, const std::string& kind, const nlohmann::json& descriptor,
                     const torch::nn::Module& module);
// Reads only the header.
CheckpointHeader read_checkpoint_header(const std::string& path);
// Loads parameters into a module built from the header's descriptor.
void load_checkpoint_parameters(const std::string& path, torch::nn::Module& module);

// FNV-1a 64 of a byte string, hex encoded. Used for config and file hashes.
std::string fnv1a64_hex(const std::string& bytes);
std::string file_hash(const std::string& path);

}  // namespace polref::nn
