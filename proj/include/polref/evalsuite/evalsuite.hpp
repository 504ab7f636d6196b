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
#include "polref/envkit/env.hpp"
#include "polref/refactor/student.hpp"
#include "polref/teachers/policy.hpp"

namespace polref::evalsuite {

struct MetricReport {
  std::string label;
  std::string value;  // sweep point, e.g. "5" dots
  double mean = 0.0;
  double stdev = 0.0;  // population standard deviation of `values`
  std::vector<double> values;
  nlohmann::json meta = nlohmann::json::object();
};

MetricReport summarize(std::vector<double> values);

// Greedy rollouts; episode e resets with seed ^ e.
MetricReport eval_policy(teachers::ActionScorer& policy, const envkit::EnvSpec& env, int n_episodes,
                         std::uint64_t seed);

// Fraction of |pred - label| < 0.5.
double accuracy_multi_mnist(const std::vector<double>& predictions, const std::vector<double>& labels);

struct DetectionMetrics {
  double recall = 0.0;
  double average_precision = 0.0;
  std::size_t gt_count = 0;
  std::size_t detection_count = 0;
};

// Greedy matching in descending score order (one detection per ground-truth
// box, IoU >= threshold), AP with all-points interpolation.
DetectionMetrics detection_metrics(const std::vector<std::vector<refactor::Proposal>>& detections,
                                   const std::vector<std::vector<envkit::BBox>>& ground_truth,
                                   double iou_threshold = 0.25);

// Class of each box: the value of the ground-truth object it overlaps best
// when that IoU exceeds `threshold`, otherwise `background`.
std::vector<int> label_boxes(const std::vector<envkit::BBox>& boxes, const std::vector<envkit::GroundTruthObject>& gt,
                             double threshold = 0.25, int background = -1);

struct ClusterResult {
  std::vector<int> assignment;
  torch::Tensor centroids;  // [k, F]
  double purity = 0.0;
  int iterations = 0;
};

// k-means (k-means++ seeding, Lloyd iterations) on rows of `features` [M, F].
// Throws std::invalid_argument when k exceeds the row count.
ClusterResult kmeans(const torch::Tensor& features, int k, std::uint64_t seed, int max_iterations = 100);

// Mean over non-empty clusters of the majority-label fraction.
double purity(const std::vector<int>& assignment, const std::vector<int>& labels, int k);

ClusterResult discover_attributes(const torch::Tensor& features, const std::vector<int>& labels, int k,
                                  std::uint64_t seed);

enum class SweepVariable { object_count, background };

struct SweepSpec {
  envkit::EnvSpec base;
  SweepVariable variable = SweepVariable::object_count;
  std::vector<std::string> values;  // counts, or background specs
  int episodes = 100;
  std::uint64_t seed = 0;
};

// One report per value, in order.
std::vector<MetricReport> sweep(teachers::ActionScorer& policy, const SweepSpec& spec);

// Multi-MNIST sum predictions of a student for frames with the given boxes.
std::vector<double> predict_sums(refactor::Student& student, const torch::Tensor& frames_u8,
                                 const std::vector<std::vector<envkit::BBox>>& boxes, int64_t batch = 256);

struct RobustnessPoint {
  double drop_rate = 0.0;
  int false_positives = 0;
  MetricReport report;
};

// Retrains the student once per drop rate, removing detections at training
// time only, and evaluates it with clean proposals from `eval_source` (no
// false positives). When `false_positives` > 0 one more point (drop 0) adds
// that many spurious boxes per frame, both in training and at evaluation.
std::vector<RobustnessPoint> robustness_sweep(
    const refactor::StudentDataset& data, const refactor::StudentConfig& model, const refactor::StudentTrainConfig& train,
    const std::vector<double>& drop_rates, int false_positives, const envkit::EnvSpec& eval_env, int episodes,
    std::uint64_t eval_seed, const refactor::ProposalSource& eval_source,
    const std::function<void(const RobustnessPoint&)>& observer = {});

// True when means never rise by more than `tolerance` from one point to the
// next and the last point is below the first.
bool degrades_monotonically(const std::vector<double>& means, double tolerance);

nlohmann::json to_json(const MetricReport& r);
void write_reports_json(const std::string& path, const std::vector<MetricReport>& reports,
                        const nlohmann::json& meta = nlohmann::json::object());
// Columns: label,value,mean,stdev,n
void write_reports_csv(const std::string& path, const std::vector<MetricReport>& reports);
std::vector<MetricReport> read_reports_csv(const std::string& path);

}  // namespace polref::evalsuite
