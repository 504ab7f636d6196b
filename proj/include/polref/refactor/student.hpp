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
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "polref/envkit/env.hpp"
#include "polref/nn/layers.hpp"
#include "polref/nn/presets.hpp"
#include "polref/refactor/graph.hpp"
#include "polref/spacedet/space.hpp"
#include "polref/teachers/policy.hpp"

namespace polref::refactor {

// gnn_pointnet: empty graph, patch features pooled over nodes, MLP head.
// gnn_pointstyle: messages from the sender patch feature and the box offset,
// sum aggregation, global max. gnn_edgeconv: EdgeConv with max aggregation,
// node MLP, global max and MLP head.
enum class Arch { gnn_pointnet, gnn_pointstyle, gnn_edgeconv, cnn, relation_net };
enum class Readout { add, max };
enum class EdgeForm { sender, canonical };  // concat(x_j, x_j - x_i) or concat(x_i, x_j - x_i)

const char* to_string(Arch a);
Arch parse_arch(const std::string& name);
Arch default_gnn(nn::Task task);
bool is_gnn(Arch a);

struct StudentConfig {
  Arch arch = Arch::gnn_pointstyle;
  nn::Task task = nn::Task::pacman;
  double width = 1.0;
  Topology topology = Topology::complete_with_self_loops;
  Readout readout = Readout::add;  // gnn_pointnet only
  EdgeForm edge_form = EdgeForm::sender;
  bool use_box = true;  // concatenate the box to the node feature
};

// Task defaults for `arch`.
StudentConfig student_config(Arch arch, nn::Task task, double width = 1.0);

void to_json(nlohmann::json& j, const StudentConfig& c);
void from_json(const nlohmann::json& j, StudentConfig& c);

// Multi-head dot-product attention over the cells of a feature map with a
// residual connection. Keys and queries see the map with two coordinate
// channels appended (unless `coords` is off).
class RelationModuleImpl : public torch::nn::Module {
 public:
  RelationModuleImpl(int64_t channels, int heads, int64_t key_dim, nn::Norm norm, bool coords = true);
  // x: [B, C, H, W]. `attention` receives [B, heads, HW, HW], `mixed` the
  // attended values [B, C, H, W] before the post-attention encoder.
  torch::Tensor forward(const torch::Tensor& x, torch::Tensor* attention = nullptr, torch::Tensor* mixed = nullptr);

 private:
  int heads_;
  bool coords_;
  nn::Stack key_{nullptr}, query_{nullptr}, value_{nullptr}, post_{nullptr};
};
TORCH_MODULE(RelationModule);

struct StudentInput {
  torch::Tensor frames;  // [B, 3, H, W] in [0, 1]; CNN students
  GraphBatch graphs;     // GNN students
};

class StudentImpl : public torch::nn::Module {
 public:
  explicit StudentImpl(StudentConfig config);

  const StudentConfig& config() const { return config_; }
  int output_dim() const { return nn::task_output_dim(config_.task); }
  int patch_size() const { return nn::task_patch_size(config_.task); }

  torch::Tensor forward(const StudentInput& in);
  // Per-node features [B, N, F] used for attribute discovery (GNN only).
  torch::Tensor node_features(const GraphBatch& g);

 private:
  torch::Tensor node_inputs(const GraphBatch& g);
  torch::Tensor gnn_forward(const GraphBatch& g);

  StudentConfig config_;
  nn::Stack patch_encoder_{nullptr};
  nn::Stack edge_mlp_{nullptr};
  nn::Stack node_mlp_{nullptr};
  nn::Stack head_{nullptr};
  nn::Stack trunk_{nullptr};
  RelationModule relation_{nullptr};
};
TORCH_MODULE(Student);

// Squared L2 per sample: [B, D] x [B, D] -> [B].
torch::Tensor bc_loss(const torch::Tensor& output, const torch::Tensor& target);
// sum_i softmax(sigma)_i * losses_i.
torch::Tensor reweight(const torch::Tensor& losses, const torch::Tensor& sigmas);

// One learnable logit per training sample, updated by a lazy (row-sparse)
// Adam that only touches the rows seen in a batch.
class DataParameterBank {
 public:
  DataParameterBank(int64_t n, double learning_rate, double init = 0.0);

  torch::Tensor gather(const torch::Tensor& index);  // differentiable rows
  void step();                                       // applies and clears the gathered gradients
  const torch::Tensor& values() const { return sigma_; }
  void set_values(const torch::Tensor& v);
  double learning_rate() const { return lr_; }

 private:
  torch::Tensor sigma_, m_, v_, t_;
  double lr_;
  std::vector<std::pair<torch::Tensor, torch::Tensor>> pending_;  // (index, leaf)
};

// Training data for one refactorization run. `proposals[i]` are the boxes
// fed to the GNN for frame i, `pools[i]` its sub-threshold candidates.
struct StudentDataset {
  torch::Tensor frames;   // uint8 [N, 3, H, W]
  torch::Tensor targets;  // float [N, D]
  std::vector<std::vector<Proposal>> proposals;
  std::vector<std::vector<Proposal>> pools;

  int64_t size() const { return frames.size(0); }
  StudentDataset subset(const std::vector<int64_t>& index) const;
};

struct StudentTrainConfig {
  int64_t steps = 500000;
  int64_t batch_size = 64;
  double learning_rate = 1e-3;
  int64_t halve_every = 100000;
  bool data_parameters = false;
  double sigma_learning_rate = 0.1;
  double augment_fraction = 0.0;  // low-confidence augmentation, training only
  double drop_rate = 0.0;         // robustness degradation, training only
  int false_positives = 0;
  double validation_fraction = 0.1;
  int64_t eval_every = 1000;
  std::uint64_t seed = 0;
};

void to_json(nlohmann::json& j, const StudentTrainConfig& c);
void from_json(const nlohmann::json& j, StudentTrainConfig& c);

struct StudentLogRow {
  int64_t step = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct StudentTrainResult {
  Student student{nullptr};
  torch::Tensor sigmas;  // final data parameters, one per training sample (all samples, validation rows untouched)
  std::vector<int64_t> train_index, val_index;
  int64_t best_step = 0;
  double best_val_loss = 0.0;
  int64_t empty_graphs = 0;
  std::vector<StudentLogRow> log;
};

// Behaviour cloning with optional data parameters and detection hooks.
// Keeps the parameters with the lowest validation loss. Throws
// nn::NumericError on a non-finite loss.
StudentTrainResult train_student(const StudentDataset& data, const StudentConfig& model_config,
                                 const StudentTrainConfig& config,
                                 const std::function<void(const StudentLogRow&)>& observer = {});

// Model input from frames (uint8 or float in [0, 1]) and per-frame boxes.
StudentInput make_input(const StudentConfig& config, const torch::Tensor& frames_u8,
                        const std::vector<std::vector<envkit::BBox>>& boxes);

void save_student(const std::string& path, Student& student, const nlohmann::json& extra = nlohmann::json::object());
Student load_student(const std::string& path, nlohmann::json* extra = nullptr);

// Per frame boxes from the environment state or from a detector.
using ProposalSource = std::function<std::vector<envkit::BBox>(const envkit::Env&)>;

// Ground-truth boxes of the current env frame.
ProposalSource ground_truth_proposals();

// Detector boxes with presence >= threshold.
ProposalSource detector_proposals(spacedet::SpaceModel model, double threshold);

// `source` plus `n` spurious boxes per frame, synthesized as in
// degrade_detections with an empty pool. Copies share one RNG stream.
ProposalSource with_false_positives(ProposalSource source, int n, std::uint64_t seed);

// Splits one frame's per-cell candidates (detected at threshold 0) into the
// proposals at or above `threshold` and the sub-threshold pool.
std::pair<std::vector<Proposal>, std::vector<Proposal>> split_candidates(
    const std::vector<spacedet::Detection>& candidates, double threshold);

// Per-node features of a graph student, one row per (frame, box).
struct NodeFeatures {
  torch::Tensor features;  // [M, F]
  std::vector<int64_t> frame;
  std::vector<envkit::BBox> box;
};

NodeFeatures export_node_features(Student& student, const torch::Tensor& frames_u8,
                                  const std::vector<std::vector<envkit::BBox>>& boxes, int64_t batch = 256);

// JSON lines: {"frame": i, "box": [x, y, w, h], "feature": [...]}.
void write_node_features(const std::string& path, const NodeFeatures& f);
NodeFeatures read_node_features(const std::string& path);

// A trained student acting in an environment.
class StudentScorer final : public teachers::ActionScorer {
 public:
  StudentScorer(Student student, ProposalSource source);
  std::vector<float> scores(const envkit::Env& env) override;
  int action_count() const override { return student_->output_dim(); }
  std::string name() const override { return to_string(student_->config().arch); }
  std::string semantics() const override { return "q_values"; }

 private:
  Student student_;
  ProposalSource source_;
};

}  // namespace polref::refactor
