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

#include <string>
#include <vector>

#include "json.hpp"

namespace polref::nn {

enum class LayerKind { conv, deconv, maxpool, upsample, flatten, linear, reshape, global_max, global_sum };
enum class Norm { none, batch, group, layer };
enum class Act { none, relu, sigmoid, softplus };

// One row of an architecture table. Convolutions pad k/2 at stride 1 and
// nothing otherwise, so "Conv 3x3 stride 3" maps 54 to 18 and "Conv 2x2
// stride 2" halves the resolution.
struct LayerSpec {
  LayerKind kind = LayerKind::linear;
  int out = 0;  // channels or features
  int kernel = 1;
  int stride = 1;
  Norm norm = Norm::none;
  int groups = 0;  // group norm groups
  Act act = Act::none;
  bool bias = true;
  std::vector<int64_t> shape;  // reshape target (without batch)

  LayerSpec& bn() { norm = Norm::batch; return *this; }
  LayerSpec& gn(int g) { norm = Norm::group; groups = g; return *this; }
  LayerSpec& ln() { norm = Norm::layer; return *this; }
  LayerSpec& relu() { act = Act::relu; return *this; }
  LayerSpec& sigmoid() { act = Act::sigmoid; return *this; }
  LayerSpec& softplus() { act = Act::softplus; return *this; }
  LayerSpec& no_bias() { bias = false; return *this; }
};

LayerSpec conv(int out, int kernel, int stride = 1);
LayerSpec deconv(int out, int kernel, int stride);
LayerSpec maxpool(int kernel = 2);
LayerSpec upsample(int factor = 2);
LayerSpec flatten();
LayerSpec linear(int out);
LayerSpec reshape(std::vector<int64_t> shape);
LayerSpec global_max();
LayerSpec global_sum();

void to_json(nlohmann::json& j, const LayerSpec& s);
void from_json(const nlohmann::json& j, LayerSpec& s);

// Output shape (without batch) of `specs` applied to `in`.
std::vector<int64_t> infer_shape(const std::vector<int64_t>& in, const std::vector<LayerSpec>& specs);

// Scales channel/feature widths by `mult` (rounded, at least `floor`), and
// keeps group counts dividing the new width. The last layer keeps its width
// when `keep_last` is set.
std::vector<LayerSpec> scale_widths(std::vector<LayerSpec> specs, double mult, bool keep_last, int floor = 4);

// A feed-forward stack built from table rows.
class StackImpl : public torch::nn::Module {
 public:
  StackImpl(std::vector<int64_t> in_shape, std::vector<LayerSpec> specs);

  torch::Tensor forward(torch::Tensor x);

  const std::vector<int64_t>& in_shape() const { return in_shape_; }
  const std::vector<int64_t>& out_shape() const { return out_shape_; }
  int64_t out_features() const;
  const std::vector<LayerSpec>& specs() const { return specs_; }

 private:
  std::vector<int64_t> in_shape_;
  std::vector<int64_t> out_shape_;
  std::vector<LayerSpec> specs_;
  torch::nn::Sequential seq_;
};
TORCH_MODULE(Stack);

// Number of scalar parameters.
int64_t parameter_count(const torch::nn::Module& m);

}  // namespace polref::nn
