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

#include "polref/nn/presets.hpp"

#include <stdexcept>

namespace polref::nn {

const char* to_string(Task task) {
  switch (task) {
    case Task::multi_mnist: return "multi_mnist";
    case Task::falling_digit: return "falling_digit";
    case Task::pacman: return "pacman";
  }
  return "unknown";
}

Task parse_task(const std::string& name) {
  if (name == "multi_mnist") return Task::multi_mnist;
  if (name == "falling_digit") return Task::falling_digit;
  if (name == "pacman") return Task::pacman;
  throw std::invalid_argument("unknown task '" + name + "' (multi_mnist|falling_digit|pacman)");
}

int task_frame_size(Task task) {
  switch (task) {
    case Task::multi_mnist: return 54;
    case Task::falling_digit: return 128;
    case Task::pacman: return 64;
  }
  return 0;
}

int task_output_dim(Task task) {
  switch (task) {
    case Task::multi_mnist: return 1;
    case Task::falling_digit: return 3;
    case Task::pacman: return 4;
  }
  return 0;
}

int task_patch_size(Task task) {
  switch (task) {
    case Task::multi_mnist: return 16;
    case Task::falling_digit: return 16;
    case Task::pacman: return 8;
  }
  return 0;
}

std::vector<LayerSpec> cnn_trunk(Task task) {
  switch (task) {
    case Task::multi_mnist:
      return {conv(64, 3).bn().relu(),  conv(64, 3, 3).bn().relu(), conv(128, 3).bn().relu(),
              conv(128, 3, 3).bn().relu(), conv(256, 3).bn().relu()};
    case Task::falling_digit:
      return {conv(16, 3).relu(), maxpool(), conv(16, 3).relu(),  maxpool(), conv(32, 3).relu(), maxpool(),
              conv(64, 3).relu(), maxpool(), conv(128, 3).relu(), maxpool(), conv(128, 1).relu()};
    case Task::pacman:
      return {conv(16, 3).relu(), maxpool(), conv(32, 3).relu(),  maxpool(), conv(64, 3).relu(),
              maxpool(),          conv(128, 3).relu(), maxpool(), conv(128, 1).relu()};
  }
  return {};
}

std::vector<LayerSpec> cnn_head(Task task, int out_dim) {
  if (task == Task::multi_mnist)
    return {flatten(), linear(512).no_bias().relu(), linear(512).no_bias().relu(), linear(out_dim)};
  return {global_max(), linear(256).relu(), linear(out_dim)};
}

std::vector<LayerSpec> patch_encoder(Task task) {
  switch (task) {
    case Task::multi_mnist:
      return {conv(32, 3).relu(),       maxpool(), conv(64, 3).gn(4).relu(),   maxpool(),
              conv(128, 3).gn(8).relu(), maxpool(), conv(256, 3).gn(16).relu(), maxpool(), flatten()};
    case Task::falling_digit:
      return {conv(16, 3).relu(),       maxpool(), conv(32, 3).relu(),        maxpool(),
              conv(64, 3).gn(4).relu(), maxpool(), conv(128, 3).gn(8).relu(), maxpool(), flatten()};
    case Task::pacman:
      return {conv(32, 3).relu(),       maxpool(), conv(64, 3).gn(4).relu(), maxpool(),
              conv(128, 3).gn(8).relu(), maxpool(), flatten()};
  }
  return {};
}

SpacePreset space_preset(Task task) {
  SpacePreset p;
  switch (task) {
    case Task::multi_mnist:
      p.grid = 6;
      p.glimpse = 14;
      p.z_what = 50;
      p.fg_encoder = {conv(64, 3).bn().relu(),  conv(64, 3, 3).bn().relu(), conv(128, 3).bn().relu(),
                      conv(128, 3, 3).bn().relu(), conv(256, 3).bn().relu(), conv(128, 1).bn().relu(),
                      conv(128, 1).bn().relu()};
      p.glimpse_encoder = {flatten(), linear(256).gn(16).relu(), linear(256).gn(16).relu()};
      p.glimpse_decoder = {linear(256).gn(16).relu(), linear(256).gn(16).relu(), linear(4 * 14 * 14),
                           reshape({4, 14, 14})};
      p.bg_encoder = {conv(64, 3).bn().relu(),  conv(64, 3, 3).bn().relu(), conv(128, 3).bn().relu(),
                      conv(128, 3, 3).bn().relu(), conv(256, 3).bn().relu(), global_max()};
      p.bg_decoder = {linear(256).bn().relu(), linear(256).bn().relu(), linear(3 * 54 * 54), reshape({3, 54, 54})};
      break;
    case Task::falling_digit:
      p.grid = 16;
      p.glimpse = 16;
      p.z_what = 50;
      p.fg_encoder = {conv(16, 3).bn().relu(),  maxpool(), conv(32, 3).bn().relu(),  maxpool(),
                      conv(64, 3).bn().relu(),  maxpool(), conv(128, 3).bn().relu(), conv(128, 1).bn().relu(),
                      conv(128, 1).bn().relu()};
      p.glimpse_encoder = {conv(16, 1).relu(), maxpool(), conv(32, 1).relu(),  maxpool(),
                           conv(64, 1).relu(), maxpool(), conv(128, 1).relu(), maxpool(), flatten()};
      p.glimpse_decoder = {deconv(128, 2, 2).relu(), conv(64, 1).relu(),
                           deconv(64, 2, 2).relu(), conv(32, 1).relu(),     deconv(32, 2, 2).relu(),
                           conv(16, 1).relu(),      upsample(2),            conv(4, 1)};
      p.bg_encoder = {conv(32, 3).bn().relu(), maxpool(), conv(32, 3).bn().relu(), maxpool(),
                      conv(32, 3).bn().relu(), maxpool(), conv(32, 3).bn().relu(), maxpool()};
      p.bg_decoder = {deconv(32, 2, 2).bn().relu(), conv(32, 3).bn().relu(), deconv(32, 2, 2).bn().relu(),
                      conv(32, 3).bn().relu(),      deconv(32, 2, 2).bn().relu(), conv(32, 3).bn().relu(),
                      upsample(2),                  conv(32, 3).bn().relu(), conv(3, 1)};
      break;
    case Task::pacman:
      p.grid = 16;
      p.glimpse = 8;
      p.z_what = 32;
      p.fg_encoder = {conv(32, 3).bn().relu(),     conv(32, 2, 2).bn().relu(), conv(64, 3).bn().relu(),
                      conv(128, 2, 2).bn().relu(), conv(128, 1).bn().relu(),   conv(128, 1).bn().relu()};
      p.glimpse_encoder = {conv(32, 1).gn(4).relu(),  maxpool(), conv(64, 1).gn(4).relu(), maxpool(),
                           conv(128, 1).gn(8).relu(), maxpool(), flatten()};
      p.glimpse_decoder = {deconv(128, 2, 2).gn(8).relu(), conv(64, 1).gn(4).relu(),
                           deconv(64, 2, 2).gn(4).relu(), conv(32, 1).gn(4).relu(),       deconv(32, 2, 2).gn(4).relu(),
                           conv(16, 1).gn(4).relu(),      conv(4, 1)};
      p.bg_encoder = {conv(32, 3).bn().relu(), maxpool(), conv(32, 3).bn().relu(), maxpool(),
                      conv(32, 3).bn().relu(), maxpool(), conv(32, 3).bn().relu(), maxpool()};
      p.bg_decoder = {deconv(32, 2, 2).bn().relu(), conv(32, 1).bn().relu(), deconv(32, 2, 2).bn().relu(),
                      conv(32, 1).bn().relu(),      deconv(32, 2, 2).bn().relu(), conv(32, 1).bn().relu(),
                      deconv(32, 2, 2).bn().relu(), conv(32, 1).bn().relu(), conv(3, 1)};
      break;
  }
  return p;
}

}  // namespace polref::nn
