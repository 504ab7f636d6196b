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

#include "polref/pipeline/experiments.hpp"

#include <stdexcept>

namespace polref::pipeline {

std::vector<std::vector<spacedet::Detection>> detect_all(spacedet::SpaceModel& detector, const torch::Tensor& frames_u8,
                                                         std::size_t batch) {
  std::vector<std::vector<spacedet::Detection>> out;
  const int64_t n = frames_u8.size(0), b = static_cast<int64_t>(batch);
  for (int64_t s = 0; s < n; s += b) {
    const auto part = frames_u8.slice(0, s, std::min(n, s + b)).to(torch::kFloat).div(255.0);
    auto d = spacedet::detect(detector, part, 0.0);
    for (auto& f : d) out.push_back(std::move(f));
  }
  return out;
}

refactor::StudentDataset student_dataset(const demoset::DemoDataset& demos, const ProposalConfig& proposals,
                                         spacedet::SpaceModel* detector) {
  demos.validate();
  if (demos.samples.empty()) throw std::invalid_argument("student_dataset: no samples");
  refactor::StudentDataset d;
  std::vector<envkit::Image> frames;
  std::vector<float> targets;
  frames.reserve(demos.samples.size());
  for (const auto& s : demos.samples) {
    frames.push_back(s.frame);
    targets.insert(targets.end(), s.target.begin(), s.target.end());
  }
  const auto n = static_cast<int64_t>(demos.samples.size());
  d.frames = spacedet::images_to_uint8(frames);
  d.targets = torch::tensor(targets).reshape({n, demos.manifest.target_dim});

  if (proposals.ground_truth) {
    for (const auto& s : demos.samples) {
      std::vector<refactor::Proposal> p;
      for (const auto& o : s.gt) p.push_back({o.box, 1.0});
      d.proposals.push_back(std::move(p));
    }
    return d;
  }
  if (!detector) throw std::invalid_argument("student_dataset: detector proposals need a detector");
  for (const auto& cands : detect_all(*detector, d.frames, proposals.batch)) {
    auto [keep, pool] = refactor::split_candidates(cands, proposals.threshold);
    d.proposals.push_back(std::move(keep));
    d.pools.push_back(std::move(pool));
  }
  return d;
}

std::vector<int64_t> samples_with_objects(const demoset::DemoDataset& demos, std::size_t count) {
  std::vector<int64_t> out;
  for (std::size_t i = 0; i < demos.samples.size(); ++i)
    if (demos.samples[i].gt.size() == count) out.push_back(static_cast<int64_t>(i));
  return out;
}

std::vector<double> sum_labels(const demoset::DemoDataset& demos) {
  std::vector<double> out;
  for (const auto& s : demos.samples) {
    if (s.target.size() != 1) throw std::invalid_argument("sum_labels: scalar targets expected");
    out.push_back(s.target.front());
  }
  return out;
}

}  // namespace polref::pipeline
