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

#include <vector>

#include "polref/envkit/image.hpp"
#include "polref/envkit/rng.hpp"
#include "polref/nn/presets.hpp"

namespace polref::refactor {

enum class Topology { empty, complete_with_self_loops, complete_no_self_loops };

const char* to_string(Topology t);
Topology parse_topology(const std::string& name);
Topology default_topology(nn::Task task);

struct GraphNode {
  torch::Tensor patch;  // [3, p, p]
  envkit::BBox box;
};

struct SceneGraph {
  std::vector<GraphNode> nodes;
  Topology topology = Topology::empty;

  std::size_t edge_count() const;
};

// Crops one patch per box (spatial-transformer resample at the task patch
// size). Zero boxes give an empty graph.
SceneGraph build_scene_graph(const torch::Tensor& frame, const std::vector<envkit::BBox>& boxes, nn::Task task);

// Dense padded batch of graphs. Padding nodes have mask 0.
struct GraphBatch {
  torch::Tensor patches;  // [B, N, 3, p, p]
  torch::Tensor boxes;    // [B, N, 4] (x_ctr, y_ctr, w, h)
  torch::Tensor mask;     // [B, N], 1 for real nodes
  Topology topology = Topology::empty;

  int64_t batch_size() const { return mask.size(0); }
  GraphBatch to(torch::Dtype dtype) const;
};

GraphBatch batch_graphs(const std::vector<SceneGraph>& graphs);

// Crops every frame's boxes in one pass. `frames` is [B, 3, H, W] in [0, 1].
// Frames with fewer boxes are padded; at least one node slot is kept.
GraphBatch crop_graph_batch(const torch::Tensor& frames, const std::vector<std::vector<envkit::BBox>>& boxes,
                            int patch_size, Topology topology);

// Reorders the nodes of every graph by `perm` (applied to the first n nodes
// of each graph, n = real node count).
GraphBatch permute_nodes(const GraphBatch& g, envkit::Pcg32& rng);

struct Proposal {
  envkit::BBox box;
  double score = 1.0;
};

// Adds ceil(fraction * |pool|) proposals drawn without replacement from the
// sub-threshold pool. An empty pool leaves the detections unchanged.
std::vector<Proposal> augment_low_confidence(const std::vector<Proposal>& detections,
                                             const std::vector<Proposal>& pool, double fraction, envkit::Pcg32& rng);

// Drops each detection independently with `drop_rate`, then appends exactly
// `n_false_positives` boxes: drawn from `pool` without replacement while it
// lasts, then synthesized (uniform center, size of a typical detection).
std::vector<Proposal> degrade_detections(const std::vector<Proposal>& detections, const std::vector<Proposal>& pool,
                                         double drop_rate, int n_false_positives, envkit::Pcg32& rng);

std::vector<envkit::BBox> boxes_of(const std::vector<Proposal>& proposals);

}  // namespace polref::refactor
