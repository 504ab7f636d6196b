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

#include "polref/refactor/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "polref/spacedet/space.hpp"

namespace polref::refactor {

namespace F = torch::nn::functional;

const char* to_string(Topology t) {
  switch (t) {
    case Topology::empty: return "empty";
    case Topology::complete_with_self_loops: return "complete_with_self_loops";
    case Topology::complete_no_self_loops: return "complete_no_self_loops";
  }
  return "unknown";
}

Topology parse_topology(const std::string& name) {
  if (name == "empty") return Topology::empty;
  if (name == "complete_with_self_loops") return Topology::complete_with_self_loops;
  if (name == "complete_no_self_loops") return Topology::complete_no_self_loops;
  throw std::invalid_argument("unknown topology '" + name + "'");
}

Topology default_topology(nn::Task task) {
  return task == nn::Task::multi_mnist ? Topology::empty : Topology::complete_with_self_loops;
}

std::size_t SceneGraph::edge_count() const {
  const std::size_t n = nodes.size();
  switch (topology) {
    case Topology::empty: return 0;
    case Topology::complete_with_self_loops: return n * n;
    case Topology::complete_no_self_loops: return n * (n == 0 ? 0 : n - 1);
  }
  return 0;
}

SceneGraph build_scene_graph(const torch::Tensor& frame, const std::vector<envkit::BBox>& boxes, nn::Task task) {
  if (frame.dim() != 3 || frame.size(0) != 3) throw std::invalid_argument("build_scene_graph expects a [3, H, W] frame");
  SceneGraph g;
  g.topology = default_topology(task);
  const int p = nn::task_patch_size(task);
  for (const auto& b : boxes) g.nodes.push_back({spacedet::stn_crop(frame, b, p).patch, b});
  return g;
}

GraphBatch GraphBatch::to(torch::Dtype dtype) const {
  return {patches.to(dtype), boxes.to(dtype), mask.to(dtype), topology};
}

GraphBatch batch_graphs(const std::vector<SceneGraph>& graphs) {
  if (graphs.empty()) throw std::invalid_argument("batch_graphs: no graphs");
  int64_t n_max = 1, p = 0;
  for (const auto& g : graphs) {
    n_max = std::max<int64_t>(n_max, static_cast<int64_t>(g.nodes.size()));
    if (!g.nodes.empty()) p = g.nodes.front().patch.size(-1);
    if (g.topology != graphs.front().topology) throw std::invalid_argument("batch_graphs: mixed topologies");
  }
  if (p == 0) p = 1;
  const auto b = static_cast<int64_t>(graphs.size());
  GraphBatch out;
  out.topology = graphs.front().topology;
  out.patches = torch::zeros({b, n_max, 3, p, p});
  out.boxes = torch::zeros({b, n_max, 4});
  out.mask = torch::zeros({b, n_max});
  for (int64_t i = 0; i < b; ++i) {
    const auto& nodes = graphs[static_cast<std::size_t>(i)].nodes;
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      const auto kk = static_cast<int64_t>(k);
      out.patches[i][kk].copy_(nodes[k].patch);
      out.boxes[i][kk].copy_(torch::tensor({nodes[k].box.x_ctr, nodes[k].box.y_ctr, nodes[k].box.w, nodes[k].box.h}));
      out.mask[i][kk] = 1.0;
    }
  }
  return out;
}

GraphBatch crop_graph_batch(const torch::Tensor& frames, const std::vector<std::vector<envkit::BBox>>& boxes,
                            int patch_size, Topology topology) {
  const int64_t b = frames.size(0);
  if (static_cast<int64_t>(boxes.size()) != b) throw std::invalid_argument("crop_graph_batch: one box list per frame");
  int64_t n = 1;
  for (const auto& v : boxes) n = std::max<int64_t>(n, static_cast<int64_t>(v.size()));
  const double min_w = 1.0 / static_cast<double>(frames.size(3));
  const double min_h = 1.0 / static_cast<double>(frames.size(2));

  auto box_t = torch::zeros({b, n, 4}, torch::kDouble);
  auto mask = torch::zeros({b, n}, torch::kDouble);
  auto ba = box_t.accessor<double, 3>();
  auto ma = mask.accessor<double, 2>();
  for (int64_t i = 0; i < b; ++i) {
    const auto& v = boxes[static_cast<std::size_t>(i)];
    for (int64_t k = 0; k < n; ++k) {
      if (k < static_cast<int64_t>(v.size())) {
        const auto& bb = v[static_cast<std::size_t>(k)];
        ba[i][k][0] = bb.x_ctr, ba[i][k][1] = bb.y_ctr, ba[i][k][2] = bb.w, ba[i][k][3] = bb.h;
        ma[i][k] = 1.0;
      } else {
        ba[i][k][0] = 0.5, ba[i][k][1] = 0.5, ba[i][k][2] = 1.0, ba[i][k][3] = 1.0;
      }
    }
  }
  const auto opts = frames.options();
  box_t = box_t.to(opts.dtype());
  mask = mask.to(opts.dtype());

  // One grid per frame holding all of its node grids stacked along rows.
  const auto flat = box_t.reshape({b * n, 4});
  const auto x = flat.select(1, 0), y = flat.select(1, 1);
  const auto w = flat.select(1, 2).clamp_min(min_w), h = flat.select(1, 3).clamp_min(min_h);
  const auto zero = torch::zeros_like(x);
  const auto theta = torch::stack({w, zero, 2.0 * x - 1.0, zero, h, 2.0 * y - 1.0}, 1).reshape({b * n, 2, 3});
  const auto grid = F::affine_grid(theta, {b * n, 3, patch_size, patch_size}, false)
                        .reshape({b, n * patch_size, patch_size, 2});
  const auto sampled = F::grid_sample(
      frames, grid, F::GridSampleFuncOptions().mode(torch::kBilinear).padding_mode(torch::kZeros).align_corners(false));
  // [B, 3, n*p, p] -> [B, n, 3, p, p]
  auto patches = sampled.reshape({b, 3, n, patch_size, patch_size}).permute({0, 2, 1, 3, 4});
  patches = patches * mask.reshape({b, n, 1, 1, 1});
  return {patches.contiguous(), box_t * mask.unsqueeze(2), mask, topology};
}

GraphBatch permute_nodes(const GraphBatch& g, envkit::Pcg32& rng) {
  const int64_t b = g.batch_size(), n = g.mask.size(1);
  auto index = torch::arange(n, torch::kLong).repeat({b, 1});
  const auto counts = g.mask.sum(1).to(torch::kLong);
  auto ia = index.accessor<int64_t, 2>();
  for (int64_t i = 0; i < b; ++i) {
    const int64_t real = counts[i].item<int64_t>();
    for (int64_t k = real - 1; k > 0; --k) {
      const auto j = static_cast<int64_t>(rng.next_u32() % static_cast<std::uint32_t>(k + 1));
      std::swap(ia[i][k], ia[i][j]);
    }
  }
  GraphBatch out;
  out.topology = g.topology;
  out.mask = torch::gather(g.mask, 1, index);
  out.boxes = torch::gather(g.boxes, 1, index.unsqueeze(2).expand({b, n, 4}));
  const auto& ps = g.patches.sizes();
  out.patches =
      torch::gather(g.patches, 1, index.reshape({b, n, 1, 1, 1}).expand({b, n, ps[2], ps[3], ps[4]}));
  return out;
}

namespace {

// First `k` indices of a Fisher-Yates shuffle of [0, n).
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k, envkit::Pcg32& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  k = std::min(k, n);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.next_u32() % static_cast<std::uint32_t>(n - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

}  // namespace

std::vector<Proposal> augment_low_confidence(const std::vector<Proposal>& detections,
                                             const std::vector<Proposal>& pool, double fraction, envkit::Pcg32& rng) {
  if (fraction < 0.0 || fraction > 1.0) throw std::invalid_argument("augment fraction must lie in [0, 1]");
  std::vector<Proposal> out = detections;
  if (pool.empty() || fraction == 0.0) return out;
  const auto k = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(pool.size()) - 1e-9));
  for (std::size_t i : sample_without_replacement(pool.size(), k, rng)) out.push_back(pool[i]);
  return out;
}

std::vector<Proposal> degrade_detections(const std::vector<Proposal>& detections, const std::vector<Proposal>& pool,
                                         double drop_rate, int n_false_positives, envkit::Pcg32& rng) {
  if (drop_rate < 0.0 || drop_rate > 1.0) throw std::invalid_argument("drop_rate must lie in [0, 1]");
  if (n_false_positives < 0) throw std::invalid_argument("n_false_positives must be non-negative");
  std::vector<Proposal> out;
  for (const auto& d : detections)
    if (!(rng.uniform() < drop_rate)) out.push_back(d);

  const auto fp = static_cast<std::size_t>(n_false_positives);
  for (std::size_t i : sample_without_replacement(pool.size(), fp, rng)) out.push_back(pool[i]);

  // Pool exhausted: synthesize boxes with the median detection size.
  if (pool.size() < fp) {
    double w = 0.1, h = 0.1;
    const auto& src = detections.empty() ? pool : detections;
    if (!src.empty()) {
      std::vector<double> ws, hs;
      for (const auto& d : src) ws.push_back(d.box.w), hs.push_back(d.box.h);
      std::nth_element(ws.begin(), ws.begin() + static_cast<std::ptrdiff_t>(ws.size() / 2), ws.end());
      std::nth_element(hs.begin(), hs.begin() + static_cast<std::ptrdiff_t>(hs.size() / 2), hs.end());
      w = ws[ws.size() / 2], h = hs[hs.size() / 2];
    }
    for (std::size_t i = pool.size(); i < fp; ++i) {
      Proposal p;
      p.box.w = w, p.box.h = h;
      p.box.x_ctr = 0.5 * w + rng.uniform() * std::max(0.0, 1.0 - w);
      p.box.y_ctr = 0.5 * h + rng.uniform() * std::max(0.0, 1.0 - h);
      p.score = 0.0;
      out.push_back(p);
    }
  }
  return out;
}

std::vector<envkit::BBox> boxes_of(const std::vector<Proposal>& proposals) {
  std::vector<envkit::BBox> out;
  out.reserve(proposals.size());
  for (const auto& p : proposals) out.push_back(p.box);
  return out;
}

}  // namespace polref::refactor
