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

#include "polref/spacedet/space.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "polref/nn/tensor_util.hpp"

namespace polref::spacedet {

using nlohmann::json;
namespace F = torch::nn::functional;

namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;
constexpr const char* kDetectorKind = "space_detector";

}  // namespace

double anneal(const AnnealSpec& s, std::int64_t step) {
  if (s.to_step < s.from_step) throw std::invalid_argument("anneal: window end before start");
  if (step <= s.from_step) return s.start;
  if (step >= s.to_step) return s.end;
  const double t = static_cast<double>(step - s.from_step) / static_cast<double>(s.to_step - s.from_step);
  return s.start + t * (s.end - s.start);
}

void PriorSchedule::validate() const {
  for (const auto* a : {&pres_prob, &temperature})
    if (a->to_step < a->from_step) throw std::invalid_argument("prior schedule window is decreasing");
  for (double s : {where_std, what_std, depth_std, fg_std, bg_std})
    if (!(s > 0.0)) throw std::invalid_argument("prior stdevs must be positive");
  if (!(temperature.start > 0.0 && temperature.end > 0.0)) throw std::invalid_argument("temperature must be positive");
  for (double p : {pres_prob.start, pres_prob.end})
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("presence prior must lie in (0, 1)");
}

PriorSchedule PriorSchedule::compressed(double factor) const {
  if (!(factor >= 1.0)) throw std::invalid_argument("compression factor must be >= 1");
  PriorSchedule p = *this;
  for (auto* a : {&p.pres_prob, &p.temperature}) {
    a->from_step = static_cast<std::int64_t>(std::llround(static_cast<double>(a->from_step) / factor));
    a->to_step = static_cast<std::int64_t>(std::llround(static_cast<double>(a->to_step) / factor));
  }
  return p;
}

PriorSchedule default_prior(nn::Task task, bool black_background) {
  PriorSchedule p;
  switch (task) {
    case nn::Task::multi_mnist:
      break;
    case nn::Task::falling_digit:
      p.pres_prob = {0.1, 0.005, 0, 50000};
      p.temperature = {2.5, 0.5, 0, 50000};
      p.bg_std = black_background ? 0.1 : 0.15;
      break;
    case nn::Task::pacman:
      p.pres_prob = {0.15, 0.05, 10000, 50000};
      p.temperature = {2.5, 0.5, 10000, 50000};
      p.where_std = 0.3;
      break;
  }
  return p;
}

namespace {

json anneal_json(const AnnealSpec& a) { return json::array({a.start, a.end, a.from_step, a.to_step}); }

AnnealSpec anneal_from(const json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<std::int64_t>(), j.at(3).get<std::int64_t>()};
}

}  // namespace

void to_json(json& j, const PriorSchedule& p) {
  j = {{"pres_prob", anneal_json(p.pres_prob)},
       {"temperature", anneal_json(p.temperature)},
       {"where_mean", p.where_mean},
       {"where_std", p.where_std},
       {"what_mean", p.what_mean},
       {"what_std", p.what_std},
       {"depth_mean", p.depth_mean},
       {"depth_std", p.depth_std},
       {"depth_scale", p.depth_scale},
       {"fg_std", p.fg_std},
       {"bg_std", p.bg_std}};
}

void from_json(const json& j, PriorSchedule& p) {
  p.pres_prob = anneal_from(j.at("pres_prob"));
  p.temperature = anneal_from(j.at("temperature"));
  p.where_mean = j.at("where_mean").get<double>();
  p.where_std = j.at("where_std").get<double>();
  p.what_mean = j.at("what_mean").get<double>();
  p.what_std = j.at("what_std").get<double>();
  p.depth_mean = j.at("depth_mean").get<double>();
  p.depth_std = j.at("depth_std").get<double>();
  p.depth_scale = j.at("depth_scale").get<double>();
  p.fg_std = j.at("fg_std").get<double>();
  p.bg_std = j.at("bg_std").get<double>();
  p.validate();
}

torch::Tensor mixture_log_likelihood(const torch::Tensor& x, const torch::Tensor& fg, const torch::Tensor& bg,
                                     const torch::Tensor& alpha, double fg_std, double bg_std) {
  const auto a = alpha.clamp(0.0, 1.0);
  const auto log_fg = (-0.5 * ((x - fg) / fg_std).pow(2) - std::log(fg_std) - kLogSqrt2Pi).sum(1, true);
  const auto log_bg = (-0.5 * ((x - bg) / bg_std).pow(2) - std::log(bg_std) - kLogSqrt2Pi).sum(1, true);
  // Factor out the larger component so that alpha = 0 or 1 stays exact.
  const auto m = torch::maximum(log_fg, log_bg).detach();
  const auto inner = a * torch::exp(log_fg - m) + (1.0 - a) * torch::exp(log_bg - m);
  const double tiny = x.scalar_type() == torch::kDouble ? 1e-300 : 1e-37;
  return (m + torch::log(inner.clamp_min(tiny))).flatten(1).sum(1);
}

torch::Tensor sample_relaxed_presence(const torch::Tensor& logit, double temperature, const torch::Tensor& u) {
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
  const auto uc = u.clamp(1e-12, 1.0 - 1e-12);
  return torch::sigmoid((logit + torch::log(uc) - torch::log1p(-uc)) / temperature);
}

torch::Tensor sample_relaxed_presence(const torch::Tensor& logit, double temperature) {
  return sample_relaxed_presence(logit, temperature, torch::rand_like(logit));
}

torch::Tensor bernoulli_kl(const torch::Tensor& q, double p) {
  const auto qc = q.clamp(1e-6, 1.0 - 1e-6);
  return qc * (torch::log(qc) - std::log(p)) + (1.0 - qc) * (torch::log1p(-qc) - std::log1p(-p));
}

torch::Tensor gaussian_kl(const torch::Tensor& mean, const torch::Tensor& std, double prior_mean, double prior_std) {
  const auto var_ratio = (std / prior_std).pow(2);
  const auto t = ((mean - prior_mean) / prior_std).pow(2);
  return 0.5 * (var_ratio + t - 1.0 - torch::log(var_ratio));
}

SpaceConfig space_config(nn::Task task, double width, bool background) {
  SpaceConfig c;
  c.task = task;
  c.frame_size = nn::task_frame_size(task);
  c.preset = nn::space_preset(task);
  c.background = background;
  c.prior = default_prior(task, !background);
  auto& p = c.preset;
  p.fg_encoder = nn::scale_widths(p.fg_encoder, width, false);
  p.glimpse_encoder = nn::scale_widths(p.glimpse_encoder, width, false);
  p.glimpse_decoder = nn::scale_widths(p.glimpse_decoder, width, true);
  p.bg_encoder = nn::scale_widths(p.bg_encoder, width, false);
  p.bg_decoder = nn::scale_widths(p.bg_decoder, width, true);
  return c;
}

void to_json(json& j, const SpaceConfig& c) {
  j = {{"task", nn::to_string(c.task)},
       {"frame_size", c.frame_size},
       {"grid", c.preset.grid},
       {"glimpse", c.preset.glimpse},
       {"z_what", c.preset.z_what},
       {"fg_encoder", c.preset.fg_encoder},
       {"glimpse_encoder", c.preset.glimpse_encoder},
       {"glimpse_decoder", c.preset.glimpse_decoder},
       {"bg_encoder", c.preset.bg_encoder},
       {"bg_decoder", c.preset.bg_decoder},
       {"background", c.background},
       {"prior", c.prior}};
}

void from_json(const json& j, SpaceConfig& c) {
  c.task = nn::parse_task(j.at("task").get<std::string>());
  c.frame_size = j.at("frame_size").get<int>();
  c.preset.grid = j.at("grid").get<int>();
  c.preset.glimpse = j.at("glimpse").get<int>();
  c.preset.z_what = j.at("z_what").get<int>();
  c.preset.fg_encoder = j.at("fg_encoder").get<std::vector<nn::LayerSpec>>();
  c.preset.glimpse_encoder = j.at("glimpse_encoder").get<std::vector<nn::LayerSpec>>();
  c.preset.glimpse_decoder = j.at("glimpse_decoder").get<std::vector<nn::LayerSpec>>();
  c.preset.bg_encoder = j.at("bg_encoder").get<std::vector<nn::LayerSpec>>();
  c.preset.bg_decoder = j.at("bg_decoder").get<std::vector<nn::LayerSpec>>();
  c.background = j.at("background").get<bool>();
  c.prior = j.at("prior").get<PriorSchedule>();
}

SpaceNoise SpaceNoise::draw(int64_t batch, int64_t cells, int64_t z_what, torch::TensorOptions options) {
  return {torch::rand({batch, cells}, options), torch::randn({batch, cells, 4}, options),
          torch::randn({batch, cells}, options), torch::randn({batch, cells, z_what}, options)};
}

SpaceModelImpl::SpaceModelImpl(SpaceConfig config) : config_(std::move(config)) {
  config_.prior.validate();
  const auto& p = config_.preset;
  const int64_t s = config_.frame_size;
  grid_ = {p.grid, p.grid};
  fg_encoder_ = register_module("fg_encoder", nn::Stack(std::vector<int64_t>{3, s, s}, p.fg_encoder));
  const auto& fg_out = fg_encoder_->out_shape();
  if (fg_out.size() != 3 || fg_out[1] != p.grid || fg_out[2] != p.grid)
    throw std::invalid_argument("foreground encoder must produce a grid x grid map");
  const int64_t c = fg_out[0];
  pres_head_ = register_module("pres_head", torch::nn::Conv2d(torch::nn::Conv2dOptions(c, 1, 1)));
  where_head_ = register_module("where_head", torch::nn::Conv2d(torch::nn::Conv2dOptions(c, 8, 1)));
  depth_head_ = register_module("depth_head", torch::nn::Conv2d(torch::nn::Conv2dOptions(c, 2, 1)));
  glimpse_encoder_ = register_module(
      "glimpse_encoder", nn::Stack(std::vector<int64_t>{3, p.glimpse, p.glimpse}, p.glimpse_encoder));
  what_head_ = register_module("what_head",
                               torch::nn::Linear(glimpse_encoder_->out_features(), 2 * static_cast<int64_t>(p.z_what)));
  const bool linear_decoder = !p.glimpse_decoder.empty() && p.glimpse_decoder.front().kind == nn::LayerKind::linear;
  const std::vector<int64_t> dec_in =
      linear_decoder ? std::vector<int64_t>{p.z_what} : std::vector<int64_t>{p.z_what, 1, 1};
  glimpse_decoder_ = register_module("glimpse_decoder", nn::Stack(dec_in, p.glimpse_decoder));
  if (glimpse_decoder_->out_shape() != std::vector<int64_t>{4, p.glimpse, p.glimpse})
    throw std::invalid_argument("glimpse decoder must produce 4 x glimpse x glimpse");
  if (config_.background) {
    bg_encoder_ = register_module("bg_encoder", nn::Stack(std::vector<int64_t>{3, s, s}, p.bg_encoder));
    bg_decoder_ = register_module("bg_decoder", nn::Stack(bg_encoder_->out_shape(), p.bg_decoder));
    if (bg_decoder_->out_shape() != std::vector<int64_t>{3, s, s})
      throw std::invalid_argument("background decoder must reproduce the frame size");
  }
}

CellPosterior SpaceModelImpl::encode(const torch::Tensor& x) {
  const auto h = fg_encoder_->forward(x);
  const int64_t b = x.size(0);
  const int64_t n = cells();
  auto flat = [&](const torch::Tensor& t) { return t.flatten(2).transpose(1, 2); };  // [B, N, C]
  CellPosterior post;
  post.pres_logit = flat(pres_head_->forward(h)).reshape({b, n});
  const auto where = flat(where_head_->forward(h));
  post.where_mean = where.slice(2, 0, 4);
  post.where_std = F::softplus(where.slice(2, 4, 8)) + 1e-4;
  const auto depth = flat(depth_head_->forward(h));
  post.depth_mean = depth.select(2, 0);
  post.depth_std = F::softplus(depth.select(2, 1)) + 1e-4;
  return post;
}

torch::Tensor SpaceModelImpl::offsets_to_boxes(const torch::Tensor& offsets) const {
  const int64_t n = cells();
  auto anchors = torch::empty({n, 4}, torch::TensorOptions().dtype(torch::kDouble));
  auto acc = anchors.accessor<double, 2>();
  for (int i = 0; i < n; ++i) {
    const auto a = grid_.anchor(i);
    acc[i][0] = a.x;
    acc[i][1] = a.y;
    acc[i][2] = a.w;
    acc[i][3] = a.h;
  }
  anchors = anchors.to(offsets.options());
  const auto xy = anchors.slice(1, 0, 2) + offsets.slice(-1, 0, 2) * anchors.slice(1, 2, 4);
  const auto wh = anchors.slice(1, 2, 4) * torch::exp(offsets.slice(-1, 2, 4));
  return torch::cat({xy, wh}, -1);
}

std::pair<torch::Tensor, torch::Tensor> SpaceModelImpl::encode_what(const torch::Tensor& glimpses) {
  const auto out = what_head_->forward(glimpse_encoder_->forward(glimpses));
  const int64_t d = config_.preset.z_what;
  return {out.slice(1, 0, d), F::softplus(out.slice(1, d, 2 * d)) + 1e-4};
}

torch::Tensor SpaceModelImpl::decode_what(const torch::Tensor& z_what) {
  auto in = z_what;
  if (glimpse_decoder_->in_shape().size() == 3) in = z_what.reshape({z_what.size(0), z_what.size(1), 1, 1});
  return torch::sigmoid(glimpse_decoder_->forward(in));
}

torch::Tensor SpaceModelImpl::background(const torch::Tensor& x) {
  if (!config_.background) return torch::zeros_like(x);
  return torch::sigmoid(bg_decoder_->forward(bg_encoder_->forward(x)));
}

ElboResult SpaceModelImpl::elbo(const torch::Tensor& x, std::int64_t step, const SpaceNoise& noise) {
  const auto& prior = config_.prior;
  const int64_t b = x.size(0), n = cells(), g = config_.preset.glimpse, d = config_.preset.z_what;
  const int64_t h = x.size(2), w = x.size(3);

  const auto post = encode(x);
  const auto q_pres = torch::sigmoid(post.pres_logit);
  const auto z_pres = sample_relaxed_presence(post.pres_logit, anneal(prior.temperature, step), noise.u_pres);
  const auto z_where = post.where_mean + post.where_std * noise.eps_where;
  const auto z_depth = post.depth_mean + post.depth_std * noise.eps_depth;
  const auto boxes = offsets_to_boxes(z_where).reshape({b * n, 4});

  const auto frames = x.unsqueeze(1).expand({b, n, 3, h, w}).reshape({b * n, 3, h, w});
  const auto glimpses = crop_boxes(frames, boxes, g);
  const auto [what_mean, what_std] = encode_what(glimpses);
  const auto z_what = what_mean + what_std * noise.eps_what.reshape({b * n, d});
  const auto pasted = paste_boxes(decode_what(z_what), boxes, h, w).reshape({b, n, 4, h, w});

  const auto rgb = pasted.slice(2, 0, 3);
  const auto alpha_hat = z_pres.reshape({b, n, 1, 1, 1}) * pasted.slice(2, 3, 4);
  const auto log_weight = torch::log(alpha_hat + 1e-8) + prior.depth_scale * z_depth.reshape({b, n, 1, 1, 1});
  const auto weights = torch::softmax(log_weight, 1);
  const auto fg = (weights * rgb).sum(1);
  const auto alpha = 1.0 - torch::exp(torch::log1p(-alpha_hat.clamp(0.0, 1.0 - 1e-6)).sum(1));
  const auto bg = background(x);

  // Shifted by the peak density so that a perfect reconstruction costs zero.
  const double peak = -std::log(std::min(prior.fg_std, prior.bg_std)) - kLogSqrt2Pi;
  const double offset = peak * static_cast<double>(x.size(1) * h * w);
  const auto recon = offset - mixture_log_likelihood(x, fg, bg, alpha, prior.fg_std, prior.bg_std).mean();
  const auto kl_pres = bernoulli_kl(q_pres, anneal(prior.pres_prob, step)).sum(1).mean();
  const auto kl_where =
      (gaussian_kl(post.where_mean, post.where_std, prior.where_mean, prior.where_std).sum(2) * z_pres).sum(1).mean();
  const auto kl_depth =
      (gaussian_kl(post.depth_mean, post.depth_std, prior.depth_mean, prior.depth_std) * z_pres).sum(1).mean();
  const auto kl_what =
      (gaussian_kl(what_mean, what_std, prior.what_mean, prior.what_std).sum(1).reshape({b, n}) * z_pres)
          .sum(1)
          .mean();

  ElboResult r;
  r.loss = recon + kl_pres + kl_where + kl_what + kl_depth;
  r.recon_nll = recon.item<double>();
  r.kl_pres = kl_pres.item<double>();
  r.kl_where = kl_where.item<double>();
  r.kl_what = kl_what.item<double>();
  r.kl_depth = kl_depth.item<double>();
  r.fg = fg;
  r.bg = bg;
  r.alpha = alpha;
  return r;
}

torch::Tensor crop_boxes(const torch::Tensor& images, const torch::Tensor& boxes, int64_t out) {
  const int64_t m = images.size(0);
  const auto x = boxes.select(1, 0), y = boxes.select(1, 1), w = boxes.select(1, 2), h = boxes.select(1, 3);
  const auto zero = torch::zeros_like(x);
  const auto theta = torch::stack({w, zero, 2.0 * x - 1.0, zero, h, 2.0 * y - 1.0}, 1).reshape({m, 2, 3});
  const auto grid = F::affine_grid(theta, {m, images.size(1), out, out}, false);
  return F::grid_sample(images, grid,
                        F::GridSampleFuncOptions().mode(torch::kBilinear).padding_mode(torch::kZeros).align_corners(false));
}

torch::Tensor paste_boxes(const torch::Tensor& patches, const torch::Tensor& boxes, int64_t height, int64_t width) {
  const int64_t m = patches.size(0);
  const double min_size = 1.0 / static_cast<double>(std::max(height, width));
  const auto x = boxes.select(1, 0), y = boxes.select(1, 1);
  const auto w = boxes.select(1, 2).clamp_min(min_size), h = boxes.select(1, 3).clamp_min(min_size);
  const auto zero = torch::zeros_like(x);
  const auto theta =
      torch::stack({1.0 / w, zero, -(2.0 * x - 1.0) / w, zero, 1.0 / h, -(2.0 * y - 1.0) / h}, 1).reshape({m, 2, 3});
  const auto grid = F::affine_grid(theta, {m, patches.size(1), height, width}, false);
  return F::grid_sample(patches, grid,
                        F::GridSampleFuncOptions().mode(torch::kBilinear).padding_mode(torch::kZeros).align_corners(false));
}

CropResult stn_crop(const torch::Tensor& frame, const envkit::BBox& box, int out_size) {
  if (frame.dim() != 3) throw std::invalid_argument("stn_crop expects a [C, H, W] frame");
  if (out_size < 1) throw std::invalid_argument("stn_crop: out_size must be positive");
  CropResult r;
  envkit::BBox b = box;
  const double min_w = 1.0 / static_cast<double>(frame.size(2));
  const double min_h = 1.0 / static_cast<double>(frame.size(1));
  if (b.w < min_w) b.w = min_w, r.clamped = true;
  if (b.h < min_h) b.h = min_h, r.clamped = true;
  const auto boxes = torch::tensor({b.x_ctr, b.y_ctr, b.w, b.h}, frame.options()).reshape({1, 4});
  r.patch = crop_boxes(frame.unsqueeze(0), boxes, out_size).squeeze(0);
  return r;
}

std::vector<std::vector<Detection>> detect(SpaceModel& model, const torch::Tensor& frames, double threshold) {
  torch::NoGradGuard no_grad;
  const bool was_training = model->is_training();
  model->eval();
  const int64_t b = frames.size(0), n = model->cells(), g = model->config().preset.glimpse;
  const auto post = model->encode(frames);
  const auto score = torch::sigmoid(post.pres_logit).to(torch::kDouble);
  const auto boxes = model->offsets_to_boxes(post.where_mean);
  const auto crops = crop_boxes(
      frames.unsqueeze(1).expand({b, n, 3, frames.size(2), frames.size(3)}).reshape({b * n, 3, frames.size(2), frames.size(3)}),
      boxes.reshape({b * n, 4}), g);
  const auto what = model->encode_what(crops).first.reshape({b, n, -1}).to(torch::kFloat).contiguous();
  const auto box_d = boxes.to(torch::kDouble).contiguous();
  const auto depth = post.depth_mean.to(torch::kDouble).contiguous();
  if (was_training) model->train();

  auto sa = score.accessor<double, 2>();
  auto ba = box_d.accessor<double, 3>();
  auto da = depth.accessor<double, 2>();
  const int64_t dim = what.size(2);
  std::vector<std::vector<Detection>> out(static_cast<std::size_t>(b));
  for (int64_t i = 0; i < b; ++i) {
    for (int64_t c = 0; c < n; ++c) {
      if (!(sa[i][c] >= threshold)) continue;
      const double x0 = std::clamp(ba[i][c][0] - 0.5 * ba[i][c][2], 0.0, 1.0);
      const double x1 = std::clamp(ba[i][c][0] + 0.5 * ba[i][c][2], 0.0, 1.0);
      const double y0 = std::clamp(ba[i][c][1] - 0.5 * ba[i][c][3], 0.0, 1.0);
      const double y1 = std::clamp(ba[i][c][1] + 0.5 * ba[i][c][3], 0.0, 1.0);
      Detection det;
      det.box = {0.5 * (x0 + x1), 0.5 * (y0 + y1), x1 - x0, y1 - y0};
      det.score = sa[i][c];
      det.depth = da[i][c];
      det.cell = static_cast<int>(c);
      const float* wp = what[i][c].data_ptr<float>();
      det.what.assign(wp, wp + dim);
      out[static_cast<std::size_t>(i)].push_back(std::move(det));
    }
    std::stable_sort(out[static_cast<std::size_t>(i)].begin(), out[static_cast<std::size_t>(i)].end(),
                     [](const Detection& a, const Detection& b) { return a.score > b.score; });
  }
  return out;
}

std::vector<Detection> detect(SpaceModel& model, const envkit::Image& frame, double threshold) {
  return detect(model, nn::image_to_tensor(frame).unsqueeze(0), threshold).front();
}

void to_json(json& j, const DetectorTrainConfig& c) {
  j = {{"steps", c.steps},          {"batch_size", c.batch_size}, {"learning_rate", c.learning_rate},
       {"grad_clip", c.grad_clip},  {"seed", c.seed},             {"log_every", c.log_every}};
}

void from_json(const json& j, DetectorTrainConfig& c) {
  c.steps = j.value("steps", c.steps);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.grad_clip = j.value("grad_clip", c.grad_clip);
  c.seed = j.value("seed", c.seed);
  c.log_every = j.value("log_every", c.log_every);
}

torch::Tensor images_to_uint8(const std::vector<envkit::Image>& images) {
  if (images.empty()) throw std::invalid_argument("no images");
  const int w = images.front().width, h = images.front().height;
  auto out = torch::empty({static_cast<int64_t>(images.size()), h, w, 3}, torch::kUInt8);
  auto* dst = out.data_ptr<std::uint8_t>();
  for (const auto& im : images) {
    if (im.width != w || im.height != h) throw std::invalid_argument("images differ in size");
    dst = std::copy(im.rgb.begin(), im.rgb.end(), dst);
  }
  return out.permute({0, 3, 1, 2}).contiguous();
}

namespace {

std::vector<torch::Tensor> snapshot(const torch::nn::Module& m) {
  std::vector<torch::Tensor> s;
  for (const auto& p : m.parameters()) s.push_back(p.detach().clone());
  for (const auto& b : m.buffers()) s.push_back(b.detach().clone());
  return s;
}

void restore(torch::nn::Module& m, const std::vector<torch::Tensor>& s) {
  torch::NoGradGuard no_grad;
  std::size_t i = 0;
  for (auto& p : m.parameters()) p.copy_(s[i++]);
  for (auto& b : m.buffers()) b.copy_(s[i++]);
}

}  // namespace

DetectorTrainResult train_detector(const torch::Tensor& frames, const SpaceConfig& model_config,
                                   const DetectorTrainConfig& config,
                                   const std::function<void(const DetectorLogRow&)>& observer) {
  if (frames.dim() != 4 || frames.size(0) == 0) throw std::invalid_argument("train_detector needs a nonempty [N, 3, H, W] set");
  if (frames.size(2) != model_config.frame_size || frames.size(3) != model_config.frame_size)
    throw std::invalid_argument("frame size does not match the detector config");
  nn::seed_everything(config.seed);
  DetectorTrainResult result;
  result.model = SpaceModel(model_config);
  auto& model = result.model;
  model->train();
  torch::optim::Adam opt(model->parameters(), torch::optim::AdamOptions(config.learning_rate));

  const int64_t n = frames.size(0);
  const int64_t batch = std::min<int64_t>(config.batch_size, n);
  auto order = torch::randperm(n, torch::kLong);
  int64_t cursor = 0;
  auto last_good = snapshot(*model);
  DetectorLogRow acc;
  int64_t acc_count = 0;

  for (int64_t step = 0; step < config.steps; ++step) {
    if (cursor + batch > n) {
      order = torch::randperm(n, torch::kLong);
      cursor = 0;
    }
    const auto idx = order.slice(0, cursor, cursor + batch);
    cursor += batch;
    const auto x = frames.index_select(0, idx).to(torch::kFloat).div(255.0);
    const auto noise = SpaceNoise::draw(batch, model->cells(), model_config.preset.z_what, x.options());
    auto r = model->elbo(x, step, noise);
    const double loss = r.loss.item<double>();
    if (!std::isfinite(loss)) {
      restore(*model, last_good);
      result.diverged = true;
      result.error = "non-finite detector loss at step " + std::to_string(step);
      break;
    }
    opt.zero_grad();
    r.loss.backward();
    torch::nn::utils::clip_grad_norm_(model->parameters(), config.grad_clip);
    opt.step();
    result.steps_done = step + 1;

    acc.loss += loss;
    acc.recon_nll += r.recon_nll;
    acc.kl_pres += r.kl_pres;
    acc.kl_where += r.kl_where;
    acc.kl_what += r.kl_what;
    acc.kl_depth += r.kl_depth;
    ++acc_count;
    if ((step + 1) % config.log_every == 0 || step + 1 == config.steps) {
      DetectorLogRow row;
      const double k = static_cast<double>(acc_count);
      row.step = step + 1;
      row.loss = acc.loss / k;
      row.recon_nll = acc.recon_nll / k;
      row.kl_pres = acc.kl_pres / k;
      row.kl_where = acc.kl_where / k;
      row.kl_what = acc.kl_what / k;
      row.kl_depth = acc.kl_depth / k;
      result.log.push_back(row);
      if (observer) observer(row);
      acc = {};
      acc_count = 0;
      last_good = snapshot(*model);
    }
  }
  model->eval();
  return result;
}

void save_detector(const std::string& path, SpaceModel& model, std::int64_t step) {
  const json desc = {{"config", model->config()}, {"step", step}};
  nn::save_checkpoint(path, kDetectorKind, desc, *model);
}

SpaceModel load_detector(const std::string& path, std::int64_t* step) {
  const auto header = nn::read_checkpoint_header(path);
  if (header.kind != kDetectorKind) throw std::runtime_error(path + " holds a '" + header.kind + "', not a detector");
  SpaceModel model(header.descriptor.at("config").get<SpaceConfig>());
  nn::load_checkpoint_parameters(path, *model);
  model->eval();
  if (step) *step = header.descriptor.value("step", std::int64_t{0});
  return model;
}

void write_detections_jsonl(const std::string& path, const std::vector<std::vector<Detection>>& detections) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (std::size_t f = 0; f < detections.size(); ++f) {
    json dets = json::array();
    for (const auto& d : detections[f])
      dets.push_back({{"box", {d.box.x_ctr, d.box.y_ctr, d.box.w, d.box.h}},
                      {"score", d.score},
                      {"depth", d.depth},
                      {"cell", d.cell},
                      {"what", d.what}});
    out << json{{"frame", f}, {"detections", dets}}.dump() << "\n";
  }
}

std::vector<std::vector<Detection>> read_detections_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::vector<std::vector<Detection>> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto row = json::parse(line);
    const auto f = row.at("frame").get<std::size_t>();
    if (f >= out.size()) out.resize(f + 1);
    for (const auto& d : row.at("detections")) {
      Detection det;
      const auto& b = d.at("box");
      det.box = {b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(), b.at(3).get<double>()};
      det.score = d.at("score").get<double>();
      det.depth = d.value("depth", 0.0);
      det.cell = d.value("cell", 0);
      det.what = d.value("what", std::vector<float>{});
      out[f].push_back(std::move(det));
    }
  }
  return out;
}

}  // namespace polref::spacedet
