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

#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "polref/envkit/image.hpp"
#include "polref/nn/layers.hpp"
#include "polref/nn/presets.hpp"
#include "polref/spacedet/box_codec.hpp"

namespace polref::spacedet {

// Piecewise-linear schedule: `start` until `from_step`, `end` after `to_step`.
struct AnnealSpec {
  double start = 0.0;
  double end = 0.0;
  std::int64_t from_step = 0;
  std::int64_t to_step = 0;
};

double anneal(const AnnealSpec& spec, std::int64_t step);

struct PriorSchedule {
  AnnealSpec pres_prob{0.1, 0.01, 10000, 50000};
  AnnealSpec temperature{2.0, 0.1, 10000, 50000};
  double where_mean = 0.0;
  double where_std = 0.2;
  double what_mean = 0.0;
  double what_std = 1.0;
  double depth_mean = 0.0;
  double depth_std = 1.0;
  double depth_scale = 10.0;
  double fg_std = 0.15;
  double bg_std = 0.15;

  // Throws std::invalid_argument on a decreasing window or a non-positive stdev.
  void validate() const;
  // Divides every schedule window by `factor`.
  PriorSchedule compressed(double factor) const;
};

PriorSchedule default_prior(nn::Task task, bool black_background);

void to_json(nlohmann::json& j, const PriorSchedule& p);
void from_json(const nlohmann::json& j, PriorSchedule& p);

// Sum over pixels of log(alpha * N(x; fg, fg_std) + (1 - alpha) * N(x; bg, bg_std)),
// where each component density is the product over channels. x, fg, bg are
// [B, C, H, W]; alpha is [B, 1, H, W] and is clamped to [0, 1]. Returns [B].
torch::Tensor mixture_log_likelihood(const torch::Tensor& x, const torch::Tensor& fg, const torch::Tensor& bg,
                                     const torch::Tensor& alpha, double fg_std, double bg_std);

// Concrete (Gumbel-sigmoid) sample: sigmoid((logit + log u - log(1 - u)) / temperature).
torch::Tensor sample_relaxed_presence(const torch::Tensor& logit, double temperature, const torch::Tensor& u);
torch::Tensor sample_relaxed_presence(const torch::Tensor& logit, double temperature);

// KL(Bern(q) || Bern(p)) elementwise, in probability space.
torch::Tensor bernoulli_kl(const torch::Tensor& q, double p);
// KL(N(mean, std) || N(prior_mean, prior_std)) elementwise.
torch::Tensor gaussian_kl(const torch::Tensor& mean, const torch::Tensor& std, double prior_mean, double prior_std);

struct SpaceConfig {
  nn::Task task = nn::Task::multi_mnist;
  int frame_size = 54;
  nn::SpacePreset preset;
  bool background = true;  // false: constant black background
  PriorSchedule prior;
};

// Task preset with every hidden width scaled by `width`.
SpaceConfig space_config(nn::Task task, double width, bool background);

void to_json(nlohmann::json& j, const SpaceConfig& c);
void from_json(const nlohmann::json& j, SpaceConfig& c);

// Reparameterization noise for one elbo evaluation. N cells, D = z_what size.
struct SpaceNoise {
  torch::Tensor u_pres;     // [B, N] in (0, 1)
  torch::Tensor eps_where;  // [B, N, 4]
  torch::Tensor eps_depth;  // [B, N]
  torch::Tensor eps_what;   // [B, N, D]

  static SpaceNoise draw(int64_t batch, int64_t cells, int64_t z_what, torch::TensorOptions options);
};

struct CellPosterior {
  torch::Tensor pres_logit;  // [B, N]
  torch::Tensor where_mean;  // [B, N, 4] anchor offsets
  torch::Tensor where_std;
  torch::Tensor depth_mean;  // [B, N]
  torch::Tensor depth_std;
};

// recon_nll is offset by the peak mixture density, so it is >= 0 and zero
// only for a perfect reconstruction.
struct ElboResult {
  torch::Tensor loss;  // scalar, batch mean
  double recon_nll = 0.0;
  double kl_pres = 0.0;
  double kl_where = 0.0;
  double kl_what = 0.0;
  double kl_depth = 0.0;
  torch::Tensor fg;     // [B, 3, H, W]
  torch::Tensor bg;     // [B, 3, H, W]
  torch::Tensor alpha;  // [B, 1, H, W]
};

class SpaceModelImpl : public torch::nn::Module {
 public:
  explicit SpaceModelImpl(SpaceConfig config);

  const SpaceConfig& config() const { return config_; }
  const AnchorGrid& anchors() const { return grid_; }
  int64_t cells() const { return grid_.size(); }

  CellPosterior encode(const torch::Tensor& x);
  // Anchor offsets [B, N, 4] -> boxes (x_ctr, y_ctr, w, h) [B, N, 4].
  torch::Tensor offsets_to_boxes(const torch::Tensor& offsets) const;
  // Returns (mean, std) of z_what for [M, 3, g, g] glimpses.
  std::pair<torch::Tensor, torch::Tensor> encode_what(const torch::Tensor& glimpses);
  // z_what [M, D] -> rgb and mask [M, 4, g, g] in [0, 1].
  torch::Tensor decode_what(const torch::Tensor& z_what);
  torch::Tensor background(const torch::Tensor& x);

  ElboResult elbo(const torch::Tensor& x, std::int64_t step, const SpaceNoise& noise);

 private:
  SpaceConfig config_;
  AnchorGrid grid_;
  nn::Stack fg_encoder_{nullptr};
  torch::nn::Conv2d pres_head_{nullptr};
  torch::nn::Conv2d where_head_{nullptr};
  torch::nn::Conv2d depth_head_{nullptr};
  nn::Stack glimpse_encoder_{nullptr};
  torch::nn::Linear what_head_{nullptr};
  nn::Stack glimpse_decoder_{nullptr};
  nn::Stack bg_encoder_{nullptr};
  nn::Stack bg_decoder_{nullptr};
};
TORCH_MODULE(SpaceModel);

// Affine crop of `boxes` [M, 4] from `images` [M, C, H, W] to out x out
// (bilinear, zero padding outside the image).
torch::Tensor crop_boxes(const torch::Tensor& images, const torch::Tensor& boxes, int64_t out);
// Inverse of crop_boxes: pastes [M, C, g, g] patches into [M, C, H, W].
torch::Tensor paste_boxes(const torch::Tensor& patches, const torch::Tensor& boxes, int64_t height, int64_t width);

struct CropResult {
  torch::Tensor patch;  // [3, out, out]
  bool clamped = false;  // box narrower or shorter than one pixel
};

// Bilinear resample of the box region of a [3, H, W] frame.
CropResult stn_crop(const torch::Tensor& frame, const envkit::BBox& box, int out_size);

struct Detection {
  envkit::BBox box;
  double score = 0.0;
  std::vector<float> what;
  double depth = 0.0;
  int cell = 0;
};

// Per frame: one candidate per cell with presence >= threshold, box from the
// mean offsets clipped to the image, sorted by score (descending).
std::vector<std::vector<Detection>> detect(SpaceModel& model, const torch::Tensor& frames, double threshold = 0.1);
std::vector<Detection> detect(SpaceModel& model, const envkit::Image& frame, double threshold = 0.1);

struct DetectorTrainConfig {
  std::int64_t steps = 100000;
  std::int64_t batch_size = 64;
  double learning_rate = 1e-3;
  double grad_clip = 1.0;
  std::uint64_t seed = 0;
  std::int64_t log_every = 100;
};

void to_json(nlohmann::json& j, const DetectorTrainConfig& c);
void from_json(const nlohmann::json& j, DetectorTrainConfig& c);

struct DetectorLogRow {
  std::int64_t step = 0;
  double loss = 0.0;
  double recon_nll = 0.0;
  double kl_pres = 0.0;
  double kl_where = 0.0;
  double kl_what = 0.0;
  double kl_depth = 0.0;
};

struct DetectorTrainResult {
  SpaceModel model{nullptr};
  std::int64_t steps_done = 0;
  bool diverged = false;  // parameters were rolled back to the last finite snapshot
  std::string error;
  std::vector<DetectorLogRow> log;
};

// Adam on the ELBO with gradient-norm clipping. Frames are uint8 [N, 3, H, W].
DetectorTrainResult train_detector(const torch::Tensor& frames, const SpaceConfig& model_config,
                                   const DetectorTrainConfig& config,
                                   const std::function<void(const DetectorLogRow&)>& observer = {});

// Stacks equally sized images into uint8 [N, 3, H, W].
torch::Tensor images_to_uint8(const std::vector<envkit::Image>& images);

void save_detector(const std::string& path, SpaceModel& model, std::int64_t step);
SpaceModel load_detector(const std::string& path, std::int64_t* step = nullptr);

// One JSON object per frame: {"frame": id, "detections": [{"box": [...], "score": s}, ...]}.
void write_detections_jsonl(const std::string& path, const std::vector<std::vector<Detection>>& detections);
std::vector<std::vector<Detection>> read_detections_jsonl(const std::string& path);

}  // namespace polref::spacedet
