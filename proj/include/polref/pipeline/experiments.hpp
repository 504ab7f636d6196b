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

#include <optional>
#include <vector>

#include "polref/demoset/demoset.hpp"
#include "polref/refactor/student.hpp"
#include "polref/spacedet/space.hpp"

namespace polref::pipeline {

// Where a student's node boxes come from.
struct ProposalConfig {
  bool ground_truth = true;     // false: run the detector
  double threshold = 0.1;       // detector presence threshold
  std::size_t batch = 128;      // detector batch size
};

// Pairs demo frames and targets with per-frame proposals. With a detector,
// sub-threshold candidates become the pool used by augmentation and
// false-positive injection.
refactor::StudentDataset student_dataset(const demoset::DemoDataset& demos, const ProposalConfig& proposals,
                                         spacedet::SpaceModel* detector = nullptr);

// Frame ids (sample indices) whose ground-truth object count is `count`.
std::vector<int64_t> samples_with_objects(const demoset::DemoDataset& demos, std::size_t count);

// Multi-MNIST sum labels as doubles.
std::vector<double> sum_labels(const demoset::DemoDataset& demos);

// Detector candidates for every frame (threshold 0, i.e. every cell).
std::vector<std::vector<spacedet::Detection>> detect_all(spacedet::SpaceModel& detector, const torch::Tensor& frames_u8,
                                                         std::size_t batch = 128);

}  // namespace polref::pipeline
