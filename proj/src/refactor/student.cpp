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

#include "polref/refactor/student.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "polref/nn/tensor_util.hpp"

namespace polref::refactor {

namespace {

constexpr int kHeads = 4;
constexpr int kKeyDim = 64;

NLOHMANN_JSON_SERIALIZE_ENUM(Readout, {{Readout::add, "add"}, {Readout::max, "max"}})
NLOHMANN_JSON_SERIALIZE_ENUM(EdgeForm, {{EdgeForm::sender, "sender"}, {EdgeForm::canonical, "canonical"}})

// Max over `dim` of the entries where `mask` is set; all-masked rows give 0.
torch::Tensor masked_max(const torch::Tensor& x, const torch::Tensor& mask, int64_t dim) {
  const auto m = mask.to(torch::kBool);
  const auto filled = x.masked_fill(~m, -std::numeric_limits<double>::infinity());
  const auto any = m.any(dim);
  return torch::where(any, filled.amax(dim), torch::zeros({}, x.options()));
}

int scaled(int v, double width, int floor = 8) {
  return std::max(floor, static_cast<int>(std::lround(v * width)));
}

// Group norm over single channels is constant; keep at least two per group.
std::vector<nn::LayerSpec> mlp(std::vector<nn::LayerSpec> specs, double width, bool keep_last, int floor = 8) {
  specs = nn::scale_widths(std::move(specs), width, keep_last, floor);
  for (auto& s : specs)
    while (s.norm == nn::Norm::group && s.groups > 1 && s.out / s.groups < 2) s.groups /= 2;
  return specs;
}

nn::Stack make_stack(torch::nn::Module& owner, const std::string& name, std::vector<int64_t> in,
                     std::vector<nn::LayerSpec> specs) {
  return owner.register_module(name, nn::Stack(std::move(in), std::move(specs)));
}

}  // namespace

const char* to_string(Arch a) {
  switch (a) {
    case Arch::gnn_pointnet: return "gnn_pointnet";
    case Arch::gnn_pointstyle: return "gnn_pointstyle";
    case Arch::gnn_edgeconv: return "gnn_edgeconv";
    case Arch::cnn: return "cnn";
    case Arch::relation_net: return "relation_net";
  }
  return "unknown";
}

Arch parse_arch(const std::string& name) {
  if (name == "gnn_pointnet") return Arch::gnn_pointnet;
  if (name == "gnn_pointstyle") return Arch::gnn_pointstyle;
  if (name == "gnn_edgeconv") return Arch::gnn_edgeconv;
  if (name == "cnn") return Arch::cnn;
  if (name == "relation_net") return Arch::relation_net;
  throw std::invalid_argument("unknown student architecture '" + name + "'");
}

Arch default_gnn(nn::Task task) {
  switch (task) {
    case nn::Task::multi_mnist: return Arch::gnn_pointnet;
    case nn::Task::falling_digit: return Arch::gnn_edgeconv;
    case nn::Task::pacman: return Arch::gnn_pointstyle;
  }
  return Arch::gnn_pointstyle;
}

bool is_gnn(Arch a) { return a == Arch::gnn_pointnet || a == Arch::gnn_pointstyle || a == Arch::gnn_edgeconv; }

StudentConfig student_config(Arch arch, nn::Task task, double width) {
  StudentConfig c;
  c.arch = arch;
  c.task = task;
  c.width = width;
  c.topology = arch == Arch::gnn_pointnet ? Topology::empty : default_topology(task);
  c.use_box = task != nn::Task::multi_mnist;
  return c;
}

void to_json(nlohmann::json& j, const StudentConfig& c) {
  j = {{"arch", to_string(c.arch)},         {"task", nn::to_string(c.task)},    {"width", c.width},
       {"topology", to_string(c.topology)}, {"readout", c.readout},            {"edge_form", c.edge_form},
       {"use_box", c.use_box}};
}

void from_json(const nlohmann::json& j, StudentConfig& c) {
  c.arch = parse_arch(j.at("arch").get<std::string>());
  c.task = nn::parse_task(j.at("task").get<std::string>());
  c.width = j.at("width").get<double>();
  c.topology = parse_topology(j.at("topology").get<std::string>());
  c.readout = j.at("readout").get<Readout>();
  c.edge_form = j.at("edge_form").get<EdgeForm>();
  c.use_box = j.at("use_box").get<bool>();
}

// ---------------------------------------------------------------------------
// Relation module

RelationModuleImpl::RelationModuleImpl(int64_t channels, int heads, int64_t key_dim, nn::Norm norm, bool coords)
    : heads_(heads), coords_(coords) {
  if (channels % heads != 0 || key_dim % heads != 0)
    throw std::invalid_argument("relation module: widths must divide by the head count");
  const auto c = static_cast<int>(channels);
  auto hidden = [&](int out) {
    auto s = nn::conv(out, 1).relu();
    if (norm == nn::Norm::group) s.gn(4);
    if (norm == nn::Norm::layer) s.ln();
    return s;
  };
  const std::vector<int64_t> in{channels + (coords ? 2 : 0), 1, 1};
  key_ = make_stack(*this, "key", in, {hidden(c), nn::conv(static_cast<int>(key_dim), 1)});
  query_ = make_stack(*this, "query", in, {hidden(c), nn::conv(static_cast<int>(key_dim), 1)});
  value_ = make_stack(*this, "value", in, {hidden(c), hidden(c)});
  post_ = make_stack(*this, "post", {channels, 1, 1}, {hidden(c), hidden(c)});
}

torch::Tensor RelationModuleImpl::forward(const torch::Tensor& x, torch::Tensor* attention, torch::Tensor* mixed) {
  const int64_t b = x.size(0), c = x.size(1), h = x.size(2), w = x.size(3), n = h * w;
  torch::Tensor in = x;
  if (coords_) {
    const auto opts = x.options();
    const auto ys = torch::linspace(-1.0, 1.0, h, opts).reshape({1, 1, h, 1}).expand({b, 1, h, w});
    const auto xs = torch::linspace(-1.0, 1.0, w, opts).reshape({1, 1, 1, w}).expand({b, 1, h, w});
    in = torch::cat({x, xs, ys}, 1);
  }
  auto split = [&](const torch::Tensor& t) {  // [B, D, H, W] -> [B, heads, HW, D/heads]
    return t.reshape({b, heads_, t.size(1) / heads_, n}).transpose(2, 3);
  };
  const auto k = split(key_->forward(in));
  const auto q = split(query_->forward(in));
  const auto v = split(value_->forward(in));
  const auto logits = torch::matmul(q, k.transpose(2, 3)) / std::sqrt(static_cast<double>(k.size(3)));
  const auto attn = torch::softmax(logits, 3);
  const auto out = torch::matmul(attn, v).transpose(2, 3).reshape({b, c, h, w});
  if (attention) *attention = attn;
  if (mixed) *mixed = out;
  return x + post_->forward(out);
}

// ---------------------------------------------------------------------------
// Students

StudentImpl::StudentImpl(StudentConfig config) : config_(std::move(config)) {
  const nn::Task task = config_.task;
  const int out = output_dim();
  const double wd = config_.width;
  if (is_gnn(config_.arch)) {
    const int p = patch_size();
    patch_encoder_ = make_stack(*this, "patch_encoder", {3, p, p},
                                mlp(nn::patch_encoder(task), wd, false, 4));
    const int64_t feat = patch_encoder_->out_features();
    const int64_t node_in = feat + (config_.use_box ? 4 : 0);
    const int hid = scaled(128, wd);
    switch (config_.arch) {
      case Arch::gnn_pointnet: {
        const int wide = scaled(512, wd);
        head_ = make_stack(*this, "head", {feat},
                           {nn::linear(wide).no_bias().relu(), nn::linear(wide).no_bias().relu(),
                            nn::linear(out).no_bias()});
        break;
      }
      case Arch::gnn_edgeconv:
        edge_mlp_ = make_stack(*this, "edge_mlp", {2 * node_in},
                               mlp({nn::linear(128).gn(8).relu(), nn::linear(128).gn(8).relu()}, wd, false));
        node_mlp_ = make_stack(*this, "node_mlp", {edge_mlp_->out_shape()[0]},
                               mlp({nn::linear(128).gn(8).relu(), nn::linear(128).gn(8).relu()}, wd, false));
        head_ = make_stack(*this, "head", {node_mlp_->out_shape()[0]}, {nn::linear(hid).relu(), nn::linear(hid).relu(), nn::linear(out)});
        break;
      case Arch::gnn_pointstyle:
        edge_mlp_ = make_stack(
            *this, "edge_mlp", {node_in},
            mlp({nn::linear(128).gn(8).relu(), nn::linear(128).gn(8).relu(), nn::linear(out)}, wd, true));
        break;
      default:
        break;
    }
  } else {
    const int size = nn::task_frame_size(task);
    auto trunk = nn::scale_widths(nn::cnn_trunk(task), wd, false);
    trunk_ = make_stack(*this, "trunk", {3, size, size}, trunk);
    const auto& shape = trunk_->out_shape();
    if (config_.arch == Arch::relation_net) {
      const auto norm = task == nn::Task::pacman ? nn::Norm::layer : nn::Norm::group;
      relation_ = register_module("relation", RelationModule(shape[0], kHeads, kKeyDim, norm));
    }
    auto head = nn::cnn_head(task, out);
    for (std::size_t i = 0; i + 1 < head.size(); ++i)
      if (head[i].kind == nn::LayerKind::linear) head[i].out = scaled(head[i].out, wd);
    head_ = make_stack(*this, "head", shape, head);
  }
}

torch::Tensor StudentImpl::node_inputs(const GraphBatch& g) {
  const int64_t b = g.patches.size(0), n = g.patches.size(1);
  const auto& ps = g.patches.sizes();
  if (ps[2] != 3 || ps[3] != patch_size() || ps[4] != patch_size())
    throw std::invalid_argument("student: patch shape does not match the task patch size");
  if (g.boxes.size(0) != b || g.boxes.size(1) != n || g.mask.sizes() != torch::IntArrayRef{b, n})
    throw std::invalid_argument("student: graph batch fields disagree in shape");
  return patch_encoder_->forward(g.patches.reshape({b * n, 3, ps[3], ps[4]})).reshape({b, n, -1});
}

torch::Tensor StudentImpl::gnn_forward(const GraphBatch& g) {
  const auto x_img = node_inputs(g);
  const int64_t b = x_img.size(0), n = x_img.size(1);
  const auto& mask = g.mask;
  const auto x = config_.use_box ? torch::cat({x_img, g.boxes}, 2) : x_img;

  // Edge (i receiver, j sender) validity.
  auto edge_mask = mask.unsqueeze(2) * mask.unsqueeze(1);
  if (config_.topology == Topology::complete_no_self_loops)
    edge_mask = edge_mask * (1.0 - torch::eye(n, mask.options())).unsqueeze(0);

  switch (config_.arch) {
    case Arch::gnn_pointnet: {
      if (config_.topology != Topology::empty) throw std::invalid_argument("gnn_pointnet expects an empty graph");
      const auto pooled = config_.readout == Readout::add ? (x * mask.unsqueeze(2)).sum(1) : masked_max(x, mask.unsqueeze(2).expand_as(x), 1);
      return head_->forward(pooled);
    }
    case Arch::gnn_edgeconv: {
      if (config_.topology == Topology::empty) throw std::invalid_argument("gnn_edgeconv expects edges");
      const int64_t f = x.size(2);
      const auto xi = x.unsqueeze(2).expand({b, n, n, f});
      const auto xj = x.unsqueeze(1).expand({b, n, n, f});
      const auto first = config_.edge_form == EdgeForm::sender ? xj : xi;
      const auto e = torch::cat({first, xj - xi}, 3).reshape({b * n * n, 2 * f});
      const auto msg = edge_mlp_->forward(e).reshape({b, n, n, -1});
      const auto agg = masked_max(msg, edge_mask.unsqueeze(3).expand_as(msg), 2);  // [B, N, H]
      const auto h = node_mlp_->forward(agg.reshape({b * n, -1})).reshape({b, n, -1});
      const auto pooled = masked_max(h, mask.unsqueeze(2).expand_as(h), 1);
      return head_->forward(pooled);
    }
    case Arch::gnn_pointstyle: {
      if (config_.topology == Topology::empty) throw std::invalid_argument("gnn_pointstyle expects edges");
      const int64_t f = x_img.size(2);
      auto in = x_img.unsqueeze(1).expand({b, n, n, f});
      if (config_.use_box) {
        const auto d = g.boxes.unsqueeze(1) - g.boxes.unsqueeze(2);  // box_j - box_i
        in = torch::cat({in, d}, 3);
      }
      const auto msg = edge_mlp_->forward(in.reshape({b * n * n, -1})).reshape({b, n, n, -1});
      const auto agg = (msg * edge_mask.unsqueeze(3)).sum(2);
      return masked_max(agg, mask.unsqueeze(2).expand_as(agg), 1);
    }
    default:
      break;
  }
  throw std::logic_error("gnn_forward on a non-graph architecture");
}

torch::Tensor StudentImpl::forward(const StudentInput& in) {
  if (is_gnn(config_.arch)) {
    if (!in.graphs.mask.defined()) throw std::invalid_argument("graph student needs a graph batch");
    return gnn_forward(in.graphs);
  }
  if (!in.frames.defined()) throw std::invalid_argument("convolutional student needs frames");
  const int size = nn::task_frame_size(config_.task);
  if (in.frames.dim() != 4 || in.frames.size(1) != 3 || in.frames.size(2) != size || in.frames.size(3) != size)
    throw std::invalid_argument("student: frames must be [B, 3, " + std::to_string(size) + ", " +
                                std::to_string(size) + "]");
  auto h = trunk_->forward(in.frames);
  if (relation_) h = relation_->forward(h);
  return head_->forward(h);
}

torch::Tensor StudentImpl::node_features(const GraphBatch& g) {
  if (!is_gnn(config_.arch)) throw std::invalid_argument("node features exist only for graph students");
  const auto x_img = node_inputs(g);
  if (config_.arch != Arch::gnn_edgeconv) return x_img;
  const int64_t b = x_img.size(0), n = x_img.size(1);
  const auto x = config_.use_box ? torch::cat({x_img, g.boxes}, 2) : x_img;
  const int64_t f = x.size(2);
  auto edge_mask = g.mask.unsqueeze(2) * g.mask.unsqueeze(1);
  const auto xi = x.unsqueeze(2).expand({b, n, n, f});
  const auto xj = x.unsqueeze(1).expand({b, n, n, f});
  const auto first = config_.edge_form == EdgeForm::sender ? xj : xi;
  const auto msg = edge_mlp_->forward(torch::cat({first, xj - xi}, 3).reshape({b * n * n, 2 * f})).reshape({b, n, n, -1});
  const auto agg = masked_max(msg, edge_mask.unsqueeze(3).expand_as(msg), 2);
  return node_mlp_->forward(agg.reshape({b * n, -1})).reshape({b, n, -1});
}

// ---------------------------------------------------------------------------
// Losses and data parameters

torch::Tensor bc_loss(const torch::Tensor& output, const torch::Tensor& target) {
  if (output.sizes() != target.sizes())
    throw std::invalid_argument("bc_loss: output and target shapes differ");
  return (output - target).pow(2).sum(1);
}

torch::Tensor reweight(const torch::Tensor& losses, const torch::Tensor& sigmas) {
  if (losses.dim() != 1 || losses.sizes() != sigmas.sizes() || losses.size(0) < 1)
    throw std::invalid_argument("reweight: need matching non-empty [B] tensors");
  return (torch::softmax(sigmas, 0) * losses).sum();
}

DataParameterBank::DataParameterBank(int64_t n, double learning_rate, double init) : lr_(learning_rate) {
  if (n < 1) throw std::invalid_argument("data parameter bank needs at least one sample");
  sigma_ = torch::full({n}, init, torch::kDouble);
  m_ = torch::zeros({n}, torch::kDouble);
  v_ = torch::zeros({n}, torch::kDouble);
  t_ = torch::zeros({n}, torch::kDouble);
}

torch::Tensor DataParameterBank::gather(const torch::Tensor& index) {
  auto leaf = sigma_.index_select(0, index).clone().set_requires_grad(true);
  pending_.emplace_back(index, leaf);
  return leaf;
}

void DataParameterBank::step() {
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  for (auto& [index, leaf] : pending_) {
    if (!leaf.grad().defined()) continue;
    const auto g = leaf.grad().to(torch::kDouble);
    const auto t = t_.index_select(0, index) + 1.0;
    const auto m = kBeta1 * m_.index_select(0, index) + (1.0 - kBeta1) * g;
    const auto v = kBeta2 * v_.index_select(0, index) + (1.0 - kBeta2) * g * g;
    const auto m_hat = m / (1.0 - torch::pow(kBeta1, t));
    const auto v_hat = v / (1.0 - torch::pow(kBeta2, t));
    const auto s = sigma_.index_select(0, index) - lr_ * m_hat / (v_hat.sqrt() + kEps);
    t_.index_copy_(0, index, t);
    m_.index_copy_(0, index, m);
    v_.index_copy_(0, index, v);
    sigma_.index_copy_(0, index, s);
  }
  pending_.clear();
  nn::require_finite(sigma_, "data parameters");
}

void DataParameterBank::set_values(const torch::Tensor& v) {
  if (v.sizes() != sigma_.sizes()) throw std::invalid_argument("data parameter size mismatch");
  sigma_ = v.to(torch::kDouble).clone();
}

// ---------------------------------------------------------------------------
// Training

StudentDataset StudentDataset::subset(const std::vector<int64_t>& index) const {
  StudentDataset out;
  const auto idx = torch::tensor(index, torch::kLong);
  out.frames = frames.index_select(0, idx);
  out.targets = targets.index_select(0, idx);
  for (int64_t i : index) {
    if (!proposals.empty()) out.proposals.push_back(proposals[static_cast<std::size_t>(i)]);
    if (!pools.empty()) out.pools.push_back(pools[static_cast<std::size_t>(i)]);
  }
  return out;
}

void to_json(nlohmann::json& j, const StudentTrainConfig& c) {
  j = {{"steps", c.steps},
       {"batch_size", c.batch_size},
       {"learning_rate", c.learning_rate},
       {"halve_every", c.halve_every},
       {"data_parameters", c.data_parameters},
       {"sigma_learning_rate", c.sigma_learning_rate},
       {"augment_fraction", c.augment_fraction},
       {"drop_rate", c.drop_rate},
       {"false_positives", c.false_positives},
       {"validation_fraction", c.validation_fraction},
       {"eval_every", c.eval_every},
       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, StudentTrainConfig& c) {
  c.steps = j.at("steps").get<int64_t>();
  c.batch_size = j.at("batch_size").get<int64_t>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.halve_every = j.at("halve_every").get<int64_t>();
  c.data_parameters = j.at("data_parameters").get<bool>();
  c.sigma_learning_rate = j.at("sigma_learning_rate").get<double>();
  c.augment_fraction = j.at("augment_fraction").get<double>();
  c.drop_rate = j.at("drop_rate").get<double>();
  c.false_positives = j.at("false_positives").get<int>();
  c.validation_fraction = j.at("validation_fraction").get<double>();
  c.eval_every = j.at("eval_every").get<int64_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
}

StudentInput make_input(const StudentConfig& config, const torch::Tensor& frames_u8,
                        const std::vector<std::vector<envkit::BBox>>& boxes) {
  StudentInput in;
  const auto frames = frames_u8.dtype() == torch::kUInt8 ? frames_u8.to(torch::kFloat).div(255.0) : frames_u8;
  if (is_gnn(config.arch))
    in.graphs = crop_graph_batch(frames, boxes, nn::task_patch_size(config.task), config.topology);
  else
    in.frames = frames;
  return in;
}

namespace {

using Snapshot = std::vector<torch::Tensor>;

Snapshot snapshot(torch::nn::Module& m) {
  Snapshot s;
  for (const auto& p : m.parameters()) s.push_back(p.detach().clone());
  for (const auto& b : m.buffers()) s.push_back(b.detach().clone());
  return s;
}

void restore(torch::nn::Module& m, const Snapshot& s) {
  torch::NoGradGuard no_grad;
  std::size_t k = 0;
  for (auto& p : m.parameters()) p.copy_(s[k++]);
  for (auto& b : m.buffers()) b.copy_(s[k++]);
}

std::vector<std::vector<envkit::BBox>> batch_boxes(const StudentDataset& data, const std::vector<int64_t>& idx) {
  std::vector<std::vector<envkit::BBox>> out;
  out.reserve(idx.size());
  for (int64_t i : idx)
    out.push_back(data.proposals.empty() ? std::vector<envkit::BBox>{}
                                         : boxes_of(data.proposals[static_cast<std::size_t>(i)]));
  return out;
}

double evaluate_loss(Student& student, const StudentDataset& data, const std::vector<int64_t>& index,
                     int64_t batch) {
  torch::NoGradGuard no_grad;
  student->eval();
  double total = 0.0;
  for (std::size_t s = 0; s < index.size(); s += static_cast<std::size_t>(batch)) {
    const std::vector<int64_t> idx(index.begin() + static_cast<std::ptrdiff_t>(s),
                                   index.begin() + static_cast<std::ptrdiff_t>(std::min(index.size(), s + batch)));
    const auto t = torch::tensor(idx, torch::kLong);
    const auto in = make_input(student->config(), data.frames.index_select(0, t), batch_boxes(data, idx));
    total += bc_loss(student->forward(in), data.targets.index_select(0, t)).sum().item<double>();
  }
  student->train();
  return total / static_cast<double>(index.size());
}

}  // namespace

StudentTrainResult train_student(const StudentDataset& data, const StudentConfig& model_config,
                                 const StudentTrainConfig& config,
                                 const std::function<void(const StudentLogRow&)>& observer) {
  const int64_t n = data.size();
  if (n < 1) throw std::invalid_argument("train_student: empty dataset");
  if (data.targets.dim() != 2 || data.targets.size(0) != n || data.targets.size(1) != nn::task_output_dim(model_config.task))
    throw std::invalid_argument("train_student: targets do not match the student head");
  if (is_gnn(model_config.arch) && static_cast<int64_t>(data.proposals.size()) != n)
    throw std::invalid_argument("train_student: graph students need one proposal list per frame");
  if (!data.pools.empty() && static_cast<int64_t>(data.pools.size()) != n)
    throw std::invalid_argument("train_student: one candidate pool per frame");
  if (config.batch_size < 1 || config.steps < 0 || config.halve_every < 1 || config.eval_every < 1)
    throw std::invalid_argument("train_student: invalid schedule");

  nn::seed_everything(config.seed);
  auto rng = envkit::Pcg32::from_seed(config.seed);

  StudentTrainResult r;
  {
    std::vector<int64_t> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    for (int64_t k = n - 1; k > 0; --k)
      std::swap(perm[static_cast<std::size_t>(k)], perm[rng.next_u32() % static_cast<std::uint32_t>(k + 1)]);
    auto n_val = static_cast<int64_t>(std::lround(config.validation_fraction * static_cast<double>(n)));
    n_val = std::clamp<int64_t>(n_val, 0, n - 1);
    r.val_index.assign(perm.begin(), perm.begin() + n_val);
    r.train_index.assign(perm.begin() + n_val, perm.end());
    std::sort(r.val_index.begin(), r.val_index.end());
    std::sort(r.train_index.begin(), r.train_index.end());
  }

  Student student(model_config);
  student->train();
  torch::optim::Adam opt(student->parameters(), torch::optim::AdamOptions(config.learning_rate));
  DataParameterBank bank(n, config.sigma_learning_rate);
  const bool degrade = config.drop_rate > 0.0 || config.false_positives > 0;

  std::vector<int64_t> order;
  std::size_t cursor = 0;
  auto next_batch = [&]() {
    std::vector<int64_t> idx;
    while (static_cast<int64_t>(idx.size()) < std::min<int64_t>(config.batch_size, static_cast<int64_t>(r.train_index.size()))) {
      if (cursor >= order.size()) {
        order = r.train_index;
        for (std::size_t k = order.size() - 1; k > 0; --k)
          std::swap(order[k], order[rng.next_u32() % static_cast<std::uint32_t>(k + 1)]);
        cursor = 0;
      }
      idx.push_back(order[cursor++]);
    }
    return idx;
  };

  Snapshot best;
  r.best_val_loss = std::numeric_limits<double>::infinity();
  double window = 0.0;
  int64_t window_n = 0;
  auto checkpoint = [&](int64_t step) {
    StudentLogRow row;
    row.step = step;
    row.train_loss = window_n ? window / static_cast<double>(window_n) : 0.0;
    row.val_loss = r.val_index.empty() ? row.train_loss : evaluate_loss(student, data, r.val_index, 256);
    window = 0.0, window_n = 0;
    r.log.push_back(row);
    if (observer) observer(row);
    if (row.val_loss < r.best_val_loss || best.empty()) {
      r.best_val_loss = row.val_loss;
      r.best_step = step;
      best = snapshot(*student);
    }
  };

  for (int64_t step = 1; step <= config.steps; ++step) {
    if (step > 1 && (step - 1) % config.halve_every == 0)
      for (auto& group : opt.param_groups())
        static_cast<torch::optim::AdamOptions&>(group.options()).lr(config.learning_rate *
                                                                    std::pow(0.5, (step - 1) / config.halve_every));

    const auto idx = next_batch();
    std::vector<std::vector<envkit::BBox>> boxes;
    if (is_gnn(model_config.arch)) {
      for (int64_t i : idx) {
        auto props = data.proposals[static_cast<std::size_t>(i)];
        static const std::vector<Proposal> kNoPool;
        const auto& pool = data.pools.empty() ? kNoPool : data.pools[static_cast<std::size_t>(i)];
        if (config.augment_fraction > 0.0) props = augment_low_confidence(props, pool, config.augment_fraction, rng);
        if (degrade) props = degrade_detections(props, pool, config.drop_rate, config.false_positives, rng);
        if (props.empty()) ++r.empty_graphs;
        boxes.push_back(boxes_of(props));
      }
    }
    const auto t = torch::tensor(idx, torch::kLong);
    const auto in = make_input(model_config, data.frames.index_select(0, t), boxes);
    const auto losses = bc_loss(student->forward(in), data.targets.index_select(0, t));
    const auto loss =
        config.data_parameters ? reweight(losses, bank.gather(t).to(losses.dtype())) : losses.mean();
    if (!std::isfinite(loss.item<double>())) {
      std::ostringstream msg;
      msg << "student loss became non-finite at step " << step << " (lr "
          << config.learning_rate * std::pow(0.5, (step - 1) / config.halve_every) << ", batch mean raw loss "
          << losses.mean().item<double>() << ")";
      throw nn::NumericError(msg.str());
    }
    opt.zero_grad();
    loss.backward();
    opt.step();
    if (config.data_parameters) bank.step();
    window += losses.mean().item<double>();
    ++window_n;
    if (step % config.eval_every == 0 || step == config.steps) checkpoint(step);
  }
  if (config.steps == 0) checkpoint(0);
  restore(*student, best);
  student->eval();
  r.student = student;
  r.sigmas = bank.values().clone();
  return r;
}

// ---------------------------------------------------------------------------
// Checkpoints and acting

void save_student(const std::string& path, Student& student, const nlohmann::json& extra) {
  nn::save_checkpoint(path, "student", {{"config", student->config()}, {"extra", extra}}, *student);
}

Student load_student(const std::string& path, nlohmann::json* extra) {
  const auto header = nn::read_checkpoint_header(path);
  if (header.kind != "student") throw std::runtime_error(path + ": not a student checkpoint (kind " + header.kind + ")");
  Student s(header.descriptor.at("config").get<StudentConfig>());
  nn::load_checkpoint_parameters(path, *s);
  s->eval();
  if (extra) *extra = header.descriptor.value("extra", nlohmann::json::object());
  return s;
}

ProposalSource ground_truth_proposals() {
  return [](const envkit::Env& env) {
    std::vector<envkit::BBox> out;
    for (const auto& o : env.gt()) out.push_back(o.box);
    return out;
  };
}

StudentScorer::StudentScorer(Student student, ProposalSource source)
    : student_(std::move(student)), source_(std::move(source)) {
  student_->eval();
}

std::vector<float> StudentScorer::scores(const envkit::Env& env) {
  torch::NoGradGuard no_grad;
  const auto frame = nn::image_to_tensor(env.frame()).unsqueeze(0);
  std::vector<std::vector<envkit::BBox>> boxes{source_ ? source_(env) : std::vector<envkit::BBox>{}};
  const auto out = student_->forward(make_input(student_->config(), frame, boxes)).to(torch::kFloat).contiguous();
  return {out.data_ptr<float>(), out.data_ptr<float>() + out.numel()};
}

ProposalSource detector_proposals(spacedet::SpaceModel model, double threshold) {
  return [model, threshold](const envkit::Env& env) mutable {
    std::vector<envkit::BBox> out;
    for (const auto& d : spacedet::detect(model, env.frame(), threshold)) out.push_back(d.box);
    return out;
  };
}

ProposalSource with_false_positives(ProposalSource source, int n, std::uint64_t seed) {
  if (n < 0) throw std::invalid_argument("with_false_positives: negative count");
  auto rng = std::make_shared<envkit::Pcg32>(envkit::Pcg32::from_seed(seed));
  return [source = std::move(source), n, rng](const envkit::Env& env) {
    std::vector<Proposal> props;
    for (const auto& b : source(env)) props.push_back({b, 1.0});
    return boxes_of(degrade_detections(props, {}, 0.0, n, *rng));
  };
}

std::pair<std::vector<Proposal>, std::vector<Proposal>> split_candidates(
    const std::vector<spacedet::Detection>& candidates, double threshold) {
  std::pair<std::vector<Proposal>, std::vector<Proposal>> out;
  for (const auto& d : candidates) (d.score >= threshold ? out.first : out.second).push_back({d.box, d.score});
  return out;
}

NodeFeatures export_node_features(Student& student, const torch::Tensor& frames_u8,
                                  const std::vector<std::vector<envkit::BBox>>& boxes, int64_t batch) {
  if (static_cast<int64_t>(boxes.size()) != frames_u8.size(0))
    throw std::invalid_argument("export_node_features: one box list per frame");
  torch::NoGradGuard no_grad;
  student->eval();
  NodeFeatures out;
  std::vector<torch::Tensor> rows;
  for (int64_t s = 0; s < frames_u8.size(0); s += batch) {
    const int64_t e = std::min(frames_u8.size(0), s + batch);
    const std::vector<std::vector<envkit::BBox>> part(boxes.begin() + s, boxes.begin() + e);
    const auto in = make_input(student->config(), frames_u8.slice(0, s, e), part);
    const auto f = student->node_features(in.graphs);
    for (int64_t i = s; i < e; ++i)
      for (std::size_t k = 0; k < boxes[static_cast<std::size_t>(i)].size(); ++k) {
        rows.push_back(f[i - s][static_cast<int64_t>(k)]);
        out.frame.push_back(i);
        out.box.push_back(boxes[static_cast<std::size_t>(i)][k]);
      }
  }
  out.features = rows.empty() ? torch::zeros({0, 0}) : torch::stack(rows).to(torch::kFloat);
  return out;
}

void write_node_features(const std::string& path, const NodeFeatures& f) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  const auto feat = f.features.contiguous();
  for (std::size_t i = 0; i < f.frame.size(); ++i) {
    const auto row = feat[static_cast<int64_t>(i)];
    const float* p = row.data_ptr<float>();
    const auto& b = f.box[i];
    os << nlohmann::json{{"frame", f.frame[i]},
                         {"box", {b.x_ctr, b.y_ctr, b.w, b.h}},
                         {"feature", std::vector<float>(p, p + row.numel())}}
              .dump()
       << '\n';
  }
}

NodeFeatures read_node_features(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path);
  NodeFeatures out;
  std::vector<float> flat;
  int64_t dim = -1;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    const auto feature = j.at("feature").get<std::vector<float>>();
    if (dim >= 0 && static_cast<int64_t>(feature.size()) != dim)
      throw std::runtime_error(path + ": ragged feature rows");
    dim = static_cast<int64_t>(feature.size());
    flat.insert(flat.end(), feature.begin(), feature.end());
    out.frame.push_back(j.at("frame").get<int64_t>());
    const auto b = j.at("box").get<std::vector<double>>();
    out.box.push_back({b.at(0), b.at(1), b.at(2), b.at(3)});
  }
  const auto m = static_cast<int64_t>(out.frame.size());
  out.features = m == 0 ? torch::zeros({0, 0}) : torch::tensor(flat).reshape({m, dim});
  return out;
}

}  // namespace polref::refactor
