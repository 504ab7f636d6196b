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

#include "polref/evalsuite/evalsuite.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace polref::evalsuite {

MetricReport summarize(std::vector<double> values) {
  MetricReport r;
  r.values = std::move(values);
  if (r.values.empty()) return r;
  const double n = static_cast<double>(r.values.size());
  r.mean = std::accumulate(r.values.begin(), r.values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : r.values) ss += (v - r.mean) * (v - r.mean);
  r.stdev = std::sqrt(ss / n);
  return r;
}

MetricReport eval_policy(teachers::ActionScorer& policy, const envkit::EnvSpec& env, int n_episodes,
                         std::uint64_t seed) {
  if (n_episodes < 1) throw std::invalid_argument("eval_policy: need at least one episode");
  if (policy.action_count() != envkit::action_count(env.id))
    throw std::invalid_argument("eval_policy: policy has " + std::to_string(policy.action_count()) +
                                " actions, env " + std::to_string(envkit::action_count(env.id)));
  auto e = envkit::make_env(env);
  std::vector<double> returns;
  returns.reserve(static_cast<std::size_t>(n_episodes));
  for (int k = 0; k < n_episodes; ++k) {
    e->reset(seed ^ static_cast<std::uint64_t>(k));
    double total = 0.0;
    while (!e->done()) total += e->step(teachers::argmax(policy.scores(*e))).reward;
    returns.push_back(total);
  }
  auto r = summarize(std::move(returns));
  r.label = policy.name();
  r.value = std::to_string(env.object_count);
  r.meta = {{"env", envkit::to_string(env.id)}, {"objects", env.object_count}, {"episodes", n_episodes},
            {"seed", seed}};
  return r;
}

double accuracy_multi_mnist(const std::vector<double>& predictions, const std::vector<double>& labels) {
  if (predictions.size() != labels.size()) throw std::invalid_argument("accuracy: length mismatch");
  if (predictions.empty()) return 0.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hit += std::abs(predictions[i] - labels[i]) < 0.5;
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

DetectionMetrics detection_metrics(const std::vector<std::vector<refactor::Proposal>>& detections,
                                   const std::vector<std::vector<envkit::BBox>>& ground_truth,
                                   double iou_threshold) {
  if (detections.size() != ground_truth.size()) throw std::invalid_argument("detection_metrics: frame count mismatch");
  struct Ranked {
    double score;
    std::size_t frame, index;
  };
  DetectionMetrics m;
  std::vector<Ranked> ranked;
  for (std::size_t f = 0; f < detections.size(); ++f) {
    m.gt_count += ground_truth[f].size();
    for (std::size_t i = 0; i < detections[f].size(); ++i) ranked.push_back({detections[f][i].score, f, i});
  }
  m.detection_count = ranked.size();
  if (m.gt_count == 0) return m;
  std::stable_sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) { return a.score > b.score; });

  std::vector<std::vector<bool>> used(ground_truth.size());
  for (std::size_t f = 0; f < ground_truth.size(); ++f) used[f].assign(ground_truth[f].size(), false);
  std::vector<double> precision, recall;
  std::size_t tp = 0;
  for (std::size_t r = 0; r < ranked.size(); ++r) {
    const auto& d = detections[ranked[r].frame][ranked[r].index].box;
    const auto& gts = ground_truth[ranked[r].frame];
    double best = -1.0;
    std::size_t best_j = 0;
    for (std::size_t j = 0; j < gts.size(); ++j) {
      if (used[ranked[r].frame][j]) continue;
      const double o = envkit::iou(d, gts[j]);
      if (o > best) best = o, best_j = j;
    }
    if (best >= iou_threshold) {
      used[ranked[r].frame][best_j] = true;
      ++tp;
    }
    precision.push_back(static_cast<double>(tp) / static_cast<double>(r + 1));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(m.gt_count));
  }
  m.recall = static_cast<double>(tp) / static_cast<double>(m.gt_count);

  // All-points interpolation: area under the precision envelope.
  double ap = 0.0, prev_recall = 0.0;
  for (std::size_t i = precision.size(); i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
  for (std::size_t i = 0; i < precision.size(); ++i) {
    ap += (recall[i] - prev_recall) * precision[i];
    prev_recall = recall[i];
  }
  m.average_precision = ap;
  return m;
}

std::vector<int> label_boxes(const std::vector<envkit::BBox>& boxes, const std::vector<envkit::GroundTruthObject>& gt,
                             double threshold, int background) {
  std::vector<int> out;
  for (const auto& b : boxes) {
    double best = 0.0;
    int label = background;
    for (const auto& g : gt) {
      const double o = envkit::iou(b, g.box);
      if (o > threshold && o > best) best = o, label = g.value;
    }
    out.push_back(label);
  }
  return out;
}

ClusterResult kmeans(const torch::Tensor& features, int k, std::uint64_t seed, int max_iterations) {
  if (features.dim() != 2) throw std::invalid_argument("kmeans: features must be [M, F]");
  const int64_t m = features.size(0);
  if (k < 1 || k > m) throw std::invalid_argument("kmeans: k must lie in [1, sample count]");
  const auto x = features.to(torch::kDouble).contiguous();
  auto rng = envkit::Pcg32::from_seed(seed);

  // k-means++ seeding.
  std::vector<int64_t> chosen{static_cast<int64_t>(rng.bounded(static_cast<std::uint32_t>(m)))};
  auto d2 = (x - x[chosen[0]]).pow(2).sum(1);
  while (static_cast<int>(chosen.size()) < k) {
    const double total = d2.sum().item<double>();
    int64_t pick = 0;
    if (total <= 0.0) {
      pick = static_cast<int64_t>(rng.bounded(static_cast<std::uint32_t>(m)));
    } else {
      const double u = rng.uniform() * total;
      const auto cum = d2.cumsum(0);
      pick = std::min<int64_t>(m - 1, torch::searchsorted(cum, torch::tensor({u}, torch::kDouble), false, true)
                                          .item<int64_t>());
    }
    chosen.push_back(pick);
    d2 = torch::minimum(d2, (x - x[pick]).pow(2).sum(1));
  }
  auto centroids = x.index_select(0, torch::tensor(chosen, torch::kLong)).clone();

  ClusterResult r;
  torch::Tensor assign;
  for (r.iterations = 1; r.iterations <= max_iterations; ++r.iterations) {
    const auto next = torch::cdist(x, centroids).argmin(1);
    const bool stable = assign.defined() && next.equal(assign);
    assign = next;
    if (stable) break;
    for (int c = 0; c < k; ++c) {
      const auto members = (assign == c).nonzero().squeeze(1);
      if (members.numel() > 0) centroids[c] = x.index_select(0, members).mean(0);
    }
  }
  r.iterations = std::min(r.iterations, max_iterations);
  r.centroids = centroids;
  const auto a = assign.to(torch::kLong).contiguous();
  r.assignment.assign(a.data_ptr<int64_t>(), a.data_ptr<int64_t>() + m);
  return r;
}

double purity(const std::vector<int>& assignment, const std::vector<int>& labels, int k) {
  if (assignment.size() != labels.size()) throw std::invalid_argument("purity: length mismatch");
  std::vector<std::map<int, int>> counts(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < labels.size(); ++i) ++counts.at(static_cast<std::size_t>(assignment[i]))[labels[i]];
  double sum = 0.0;
  int clusters = 0;
  for (const auto& c : counts) {
    int total = 0, best = 0;
    for (const auto& [label, n] : c) total += n, best = std::max(best, n);
    if (total == 0) continue;
    sum += static_cast<double>(best) / total;
    ++clusters;
  }
  return clusters ? sum / clusters : 0.0;
}

ClusterResult discover_attributes(const torch::Tensor& features, const std::vector<int>& labels, int k,
                                  std::uint64_t seed) {
  if (static_cast<int64_t>(labels.size()) != features.size(0))
    throw std::invalid_argument("discover_attributes: one label per feature row");
  auto r = kmeans(features, k, seed);
  r.purity = purity(r.assignment, labels, k);
  return r;
}

std::vector<MetricReport> sweep(teachers::ActionScorer& policy, const SweepSpec& spec) {
  if (spec.values.empty()) throw std::invalid_argument("sweep: no values");
  std::vector<MetricReport> out;
  for (const auto& v : spec.values) {
    envkit::EnvSpec env = spec.base;
    if (spec.variable == SweepVariable::object_count) {
      std::size_t used = 0;
      env.object_count = std::stoi(v, &used);
      if (used != v.size() || env.object_count < 1) throw std::invalid_argument("sweep: bad object count '" + v + "'");
    } else {
      env.background = envkit::parse_background(v);
    }
    auto r = eval_policy(policy, env, spec.episodes, spec.seed);
    r.value = v;
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<double> predict_sums(refactor::Student& student, const torch::Tensor& frames_u8,
                                 const std::vector<std::vector<envkit::BBox>>& boxes, int64_t batch) {
  if (student->output_dim() != 1) throw std::invalid_argument("predict_sums needs a scalar-head student");
  torch::NoGradGuard no_grad;
  student->eval();
  std::vector<double> out;
  for (int64_t s = 0; s < frames_u8.size(0); s += batch) {
    const int64_t e = std::min(frames_u8.size(0), s + batch);
    std::vector<std::vector<envkit::BBox>> part;
    if (!boxes.empty()) part.assign(boxes.begin() + s, boxes.begin() + e);
    const auto pred = student->forward(refactor::make_input(student->config(), frames_u8.slice(0, s, e), part))
                          .to(torch::kDouble)
                          .contiguous();
    out.insert(out.end(), pred.data_ptr<double>(), pred.data_ptr<double>() + pred.numel());
  }
  return out;
}

std::vector<RobustnessPoint> robustness_sweep(const refactor::StudentDataset& data,
                                              const refactor::StudentConfig& model,
                                              const refactor::StudentTrainConfig& train,
                                              const std::vector<double>& drop_rates, int false_positives,
                                              const envkit::EnvSpec& eval_env, int episodes, std::uint64_t eval_seed,
                                              const refactor::ProposalSource& eval_source,
                                              const std::function<void(const RobustnessPoint&)>& observer) {
  std::vector<RobustnessPoint> out;
  auto run = [&](double drop, int fp, const refactor::ProposalSource& source) {
    auto tc = train;
    tc.drop_rate = drop;
    tc.false_positives = fp;
    auto trained = refactor::train_student(data, model, tc);
    refactor::StudentScorer scorer(trained.student, source);
    RobustnessPoint p{drop, fp, eval_policy(scorer, eval_env, episodes, eval_seed)};
    std::ostringstream v;
    v << "drop=" << drop << ";fp=" << fp;
    p.report.value = v.str();
    p.report.meta["drop_rate"] = drop;
    p.report.meta["false_positives"] = fp;
    p.report.meta["best_val_loss"] = trained.best_val_loss;
    if (observer) observer(p);
    out.push_back(std::move(p));
  };
  for (double drop : drop_rates) run(drop, 0, eval_source);
  if (false_positives > 0)
    run(0.0, false_positives, refactor::with_false_positives(eval_source, false_positives, eval_seed ^ 0x6670ULL));
  return out;
}

bool degrades_monotonically(const std::vector<double>& means, double tolerance) {
  if (means.size() < 2) return true;
  for (std::size_t i = 1; i < means.size(); ++i)
    if (means[i] > means[i - 1] + tolerance) return false;
  return means.back() < means.front();
}

nlohmann::json to_json(const MetricReport& r) {
  return {{"label", r.label}, {"value", r.value},   {"mean", r.mean},
          {"stdev", r.stdev}, {"n", r.values.size()}, {"values", r.values}, {"meta", r.meta}};
}

void write_reports_json(const std::string& path, const std::vector<MetricReport>& reports, const nlohmann::json& meta) {
  nlohmann::json j{{"meta", meta}, {"reports", nlohmann::json::array()}};
  for (const auto& r : reports) j["reports"].push_back(to_json(r));
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << j.dump(2) << '\n';
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') out.back() += '"', ++i;
      else if (c == '"') quoted = false;
      else out.back() += c;
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back();
    } else {
      out.back() += c;
    }
  }
  return out;
}

}  // namespace

void write_reports_csv(const std::string& path, const std::vector<MetricReport>& reports) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "label,value,mean,stdev,n\n";
  os.precision(10);
  for (const auto& r : reports)
    os << csv_field(r.label) << ',' << csv_field(r.value) << ',' << r.mean << ',' << r.stdev << ',' << r.values.size()
       << '\n';
}

std::vector<MetricReport> read_reports_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path);
  std::string line;
  std::getline(is, line);
  if (line.rfind("label,value,mean,stdev", 0) != 0) throw std::runtime_error(path + ": not a report table");
  std::vector<MetricReport> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() < 5) throw std::runtime_error(path + ": short row");
    MetricReport r;
    r.label = f[0];
    r.value = f[1];
    r.mean = std::stod(f[2]);
    r.stdev = std::stod(f[3]);
    r.meta["n"] = std::stoll(f[4]);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace polref::evalsuite
