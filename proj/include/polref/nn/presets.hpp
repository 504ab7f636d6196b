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

#include <string>
#include <vector>

#include "polref/nn/layers.hpp"

namespace polref::nn {

enum class Task { multi_mnist, falling_digit, pacman };

const char* to_string(Task task);
Task parse_task(const std::string& name);
int task_frame_size(Task task);
// Action count, or 1 for the scalar Multi-MNIST head.
int task_output_dim(Task task);
// Patch size for the student's image patch encoder.
int task_patch_size(Task task);

// Plain CNN, split into the convolutional trunk and the head that follows it.
// The Pacman and FallingDigit heads start with a global max pool; the
// Multi-MNIST head flattens.
std::vector<LayerSpec> cnn_trunk(Task task);
std::vector<LayerSpec> cnn_head(Task task, int out_dim);

// Student patch encoder; its output is flattened to a feature vector.
std::vector<LayerSpec> patch_encoder(Task task);

// SPACE detector parts.
struct SpacePreset {
  int grid = 0;
  int glimpse = 0;
  int z_what = 0;
  std::vector<LayerSpec> fg_encoder;   // frame -> grid x grid feature map
  std::vector<LayerSpec> glimpse_encoder;  // glimpse -> flat feature (heads added by the model)
  // z_what -> 4 x glimpse x glimpse (pre-sigmoid). Convolutional decoders see
  // z_what as a D x 1 x 1 map.
  std::vector<LayerSpec> glimpse_decoder;
  std::vector<LayerSpec> bg_encoder;
  std::vector<LayerSpec> bg_decoder;   // -> 3 x H x W (pre-sigmoid)
};
SpacePreset space_preset(Task task);

}  // namespace polref::nn
