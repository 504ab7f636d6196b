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

#include "polref/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace polref::nn {

namespace {

NLOHMANN_JSON_SERIALIZE_ENUM(LayerKind, {{LayerKind::conv, "conv"},
                                         {LayerKind::deconv, "deconv"},
                                         {LayerKind::maxpool, "maxpool"},
                                         {LayerKind::upsample, "upsample"},
                                         {LayerKind::flatten, "flatten"},
                                         {LayerKind::linear, "linear"},
                                         {LayerKind::reshape, "reshape"},
                                         {LayerKind::global_max, "global_max"},
                                         {LayerKind::global_sum, "global_sum"}})
NLOHMANN_JSON_SERIALIZE_ENUM(Norm, {{Norm::none, "none"}, {Norm::batch, "bn"}, {Norm::group, "gn"}, {Norm::layer, "ln"}})
NLOHMANN_JSON_SERIALIZE_ENUM(Act, {{Act::none, "none"},
                                   {Act::relu, "relu"},
                                   {Act::sigmoid, "sigmoid"},
                                   {Act::softplus, "softplus"}})

int pad_for(const LayerSpec& s) { return s.stride == 1 ? s.kernel / 2 : 0; }

int64_t conv_out(int64_t in, const LayerSpec& s) { return (in + 2 * pad_for(s) - s.kernel) / s.stride + 1; }

}  // namespace

LayerSpec conv(int out, int kernel, int stride) {
  LayerSpec s;
  s.kind = LayerKind::conv;
  s.out = out;
  s.kernel = kernel;
  s.stride = stride;
  return s;
}

LayerSpec deconv(int out, int kernel, int stride) {
  LayerSpec s = conv(out, kernel, stride);
  s.kind = LayerKind::deconv;
  return s;
}

LayerSpec maxpool(int kernel) {
  LayerSpec s;
  s.kind = LayerKind::maxpool;
  s.kernel = kernel;
  s.stride = kernel;
  return s;
}

LayerSpec upsample(int factor) {
  LayerSpec s;
  s.kind = LayerKind::upsample;
  s.stride = factor;
  return s;
}

LayerSpec flatten() {
  LayerSpec s;
  s.kind = LayerKind::flatten;
  return s;
}

LayerSpec linear(int out) {
  LayerSpec s;
  s.kind = LayerKind::linear;
  s.out = out;
  return s;
}

LayerSpec reshape(std::vector<int64_t> shape) {
  LayerSpec s;
  s.kind = LayerKind::reshape;
  s.shape = std::move(shape);
  return s;
}

LayerSpec global_max() {
  LayerSpec s;
  s.kind = LayerKind::global_max;
  return s;
}

LayerSpec global_sum() {
  LayerSpec s;
  s.kind = LayerKind::global_sum;
  return s;
}

void to_json(nlohmann::json& j, const LayerSpec& s) {
  j = {{"kind", s.kind}, {"out", s.out},   {"kernel", s.kernel}, {"stride", s.stride}, {"norm", s.norm},
       {"groups", s.groups}, {"act", s.act}, {"bias", s.bias},     {"shape", s.shape}};
}

void from_json(const nlohmann::json& j, LayerSpec& s) {
  j.at("kind").get_to(s.kind);
  j.at("out").get_to(s.out);
  j.at("kernel").get_to(s.kernel);
  j.at("stride").get_to(s.stride);
  j.at("norm").get_to(s.norm);
  j.at("groups").get_to(s.groups);
  j.at("act").get_to(s.act);
  j.at("bias").get_to(s.bias);
  j.at("shape").get_to(s.shape);
}

std::vector<int64_t> infer_shape(const std::vector<int64_t>& in, const std::vector<LayerSpec>& specs) {
  std::vector<int64_t> shape = in;
  auto need_spatial = [&](const char* what) {
    if (shape.size() != 3) throw std::invalid_argument(std::string(what) + " needs a CxHxW input");
  };
  for (const auto& s : specs) {
    switch (s.kind) {
      case LayerKind::conv:
        need_spatial("conv");
        shape = {s.out, conv_out(shape[1], s), conv_out(shape[2], s)};
        break;
      case LayerKind::deconv:
        need_spatial("deconv");
        shape = {s.out, (shape[1] - 1) * s.stride + s.kernel, (shape[2] - 1) * s.stride + s.kernel};
        break;
      case LayerKind::maxpool:
        need_spatial("maxpool");
        shape = {shape[0], shape[1] / s.kernel, shape[2] / s.kernel};
        break;
      case LayerKind::upsample:
        need_spatial("upsample");
        shape = {shape[0], shape[1] * s.stride, shape[2] * s.stride};
        break;
      case LayerKind::flatten:
        shape = {std::accumulate(shape.begin(), shape.end(), int64_t{1}, std::multiplies<>())};
        break;
      case LayerKind::linear:
        if (shape.size() != 1) throw std::invalid_argument("linear needs a flat input");
        shape = {s.out};
        break;
      case LayerKind::reshape: {
        const auto n = std::accumulate(shape.begin(), shape.end(), int64_t{1}, std::multiplies<>());
        const auto m = std::accumulate(s.shape.begin(), s.shape.end(), int64_t{1}, std::multiplies<>());
        if (n != m) throw std::invalid_argument("reshape changes the element count");
        shape = s.shape;
        break;
      }
      case LayerKind::global_max:
      case LayerKind::global_sum:
        need_spatial("global pooling");
        shape = {shape[0]};
        break;
    }
    for (auto d : shape)
      if (d <= 0) throw std::invalid_argument("layer stack collapses to an empty shape");
  }
  return shape;
}

std::vector<LayerSpec> scale_widths(std::vector<LayerSpec> specs, double mult, bool keep_last, int floor) {
  int last = -1;
  for (int i = 0; i < static_cast<int>(specs.size()); ++i)
    if (specs[i].out > 0) last = i;
  for (int i = 0; i < static_cast<int>(specs.size()); ++i) {
    auto& s = specs[i];
    if (s.out <= 0 || (keep_last && i == last)) continue;
    s.out = std::max(floor, static_cast<int>(std::lround(s.out * mult)));
    if (s.norm == Norm::group)
      while (s.groups > 1 && s.out % s.groups != 0) --s.groups;
  }
  return specs;
}

StackImpl::StackImpl(std::vector<int64_t> in_shape, std::vector<LayerSpec> specs)
    : in_shape_(std::move(in_shape)), specs_(std::move(specs)) {
  out_shape_ = infer_shape(in_shape_, specs_);
  std::vector<int64_t> shape = in_shape_;
  for (const auto& s : specs_) {
    const std::vector<int64_t> next = infer_shape(shape, {s});
    switch (s.kind) {
      case LayerKind::conv:
        seq_->push_back(torch::nn::Conv2d(
            torch::nn::Conv2dOptions(shape[0], s.out, s.kernel).stride(s.stride).padding(pad_for(s)).bias(s.bias)));
        break;
      case LayerKind::deconv:
        seq_->push_back(torch::nn::ConvTranspose2d(
            torch::nn::ConvTranspose2dOptions(shape[0], s.out, s.kernel).stride(s.stride).bias(s.bias)));
        break;
      case LayerKind::maxpool:
        seq_->push_back(torch::nn::MaxPool2d(torch::nn::MaxPool2dOptions(s.kernel).stride(s.kernel)));
        break;
      case LayerKind::upsample:
        seq_->push_back(torch::nn::Upsample(
            torch::nn::UpsampleOptions()
                .scale_factor(std::vector<double>{static_cast<double>(s.stride), static_cast<double>(s.stride)})
                .mode(torch::kNearest)));
        break;
      case LayerKind::flatten:
        seq_->push_back(torch::nn::Flatten());
        break;
      case LayerKind::linear:
        seq_->push_back(torch::nn::Linear(torch::nn::LinearOptions(shape[0], s.out).bias(s.bias)));
        break;
      case LayerKind::reshape: {
        const auto target = s.shape;
        seq_->push_back(torch::nn::Functional([target](torch::Tensor x) {
          std::vector<int64_t> full{x.size(0)};
          full.insert(full.end(), target.begin(), target.end());
          return x.reshape(full);
        }));
        break;
      }
      case LayerKind::global_max:
        seq_->push_back(torch::nn::Functional([](torch::Tensor x) { return x.amax({2, 3}); }));
        break;
      case LayerKind::global_sum:
        seq_->push_back(torch::nn::Functional([](torch::Tensor x) { return x.sum({2, 3}); }));
        break;
    }
    const int64_t c = next[0];
    switch (s.norm) {
      case Norm::none:
        break;
      case Norm::batch:
        if (next.size() == 3)
          seq_->push_back(torch::nn::BatchNorm2d(c));
        else
          seq_->push_back(torch::nn::BatchNorm1d(c));
        break;
      case Norm::group:
        if (s.groups < 1 || c % s.groups != 0) throw std::invalid_argument("group norm groups must divide width");
        seq_->push_back(torch::nn::GroupNorm(s.groups, c));
        break;
      case Norm::layer:
        seq_->push_back(torch::nn::GroupNorm(1, c));
        break;
    }
    switch (s.act) {
      case Act::none: break;
      case Act::relu: seq_->push_back(torch::nn::ReLU()); break;
      case Act::sigmoid: seq_->push_back(torch::nn::Sigmoid()); break;
      case Act::softplus: seq_->push_back(torch::nn::Softplus()); break;
    }
    shape = next;
  }
  register_module("seq", seq_);
}

torch::Tensor StackImpl::forward(torch::Tensor x) { return seq_->is_empty() ? x : seq_->forward(x); }

int64_t StackImpl::out_features() const {
  return std::accumulate(out_shape_.begin(), out_shape_.end(), int64_t{1}, std::multiplies<>());
}

int64_t parameter_count(const torch::nn::Module& m) {
  int64_t n = 0;
  for (const auto& p : m.parameters()) n += p.numel();
  return n;
}

}  // namespace polref::nn
