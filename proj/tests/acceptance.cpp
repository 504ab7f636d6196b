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

// Acceptance gate. Each criterion prints one PASS/FAIL line; the process
// exits nonzero when any selected criterion fails.
//
//   acceptance [criterion ...]   (no arguments: all criteria, in order)

#include <torch/torch.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "polref/demoset/demoset.hpp"
#include "polref/envkit/env.hpp"
#include "polref/envkit/episode_record.hpp"
#include "polref/evalsuite/evalsuite.hpp"
#include "polref/pipeline/experiments.hpp"
#include "polref/refactor/graph.hpp"
#include "polref/refactor/student.hpp"
#include "polref/spacedet/space.hpp"
#include "polref/teachers/dqn.hpp"

using namespace polref;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string num(double v, int digits = 4) {
  std::ostringstream o;
  o << std::setprecision(digits) << v;
  return o.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Relative L2 error between analytic gradients and central differences over
// `per_param` random coordinates of every parameter.
double gradient_error(torch::nn::Module& module, const std::function<torch::Tensor()>& loss_of, int per_param,
                      envkit::Pcg32& rng) {
  module.zero_grad();
  loss_of().backward();
  std::vector<double> analytic, numeric;
  torch::NoGradGuard no_grad;
  for (auto& p : module.parameters()) {
    auto flat = p.view(-1);
    const auto grad = p.grad().view(-1);
    for (int k = 0; k < per_param; ++k) {
      const auto i = static_cast<int64_t>(rng.bounded(static_cast<std::uint32_t>(flat.numel())));
      const double orig = flat[i].item<double>(), h = 1e-6;
      flat[i] = orig + h;
      const double up = loss_of().item<double>();
      flat[i] = orig - h;
      const double down = loss_of().item<double>();
      flat[i] = orig;
      analytic.push_back(grad[i].item<double>());
      numeric.push_back((up - down) / (2.0 * h));
    }
  }
  double diff = 0.0, norm = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    norm += numeric[i] * numeric[i];
  }
  return std::sqrt(diff) / std::max(std::sqrt(norm), 1e-12);
}

// Padded batch of random graphs with 1..n_max real nodes each.
refactor::GraphBatch random_graphs(int64_t b, int64_t n_max, int p, refactor::Topology topology, envkit::Pcg32& rng,
                                   torch::Dtype dtype = torch::kFloat) {
  refactor::GraphBatch g;
  g.topology = topology;
  g.patches = torch::rand({b, n_max, 3, p, p}, dtype);
  g.boxes = torch::rand({b, n_max, 4}, dtype) * 0.5 + 0.1;
  g.mask = torch::zeros({b, n_max}, dtype);
  for (int64_t i = 0; i < b; ++i) {
    const auto n = 1 + static_cast<int64_t>(rng.bounded(static_cast<std::uint32_t>(n_max)));
    g.mask[i].slice(0, 0, n).fill_(1.0);
  }
  return g;
}

std::vector<refactor::StudentConfig> graph_students(double width) {
  using namespace refactor;
  std::vector<StudentConfig> out;
  auto pn = student_config(Arch::gnn_pointnet, nn::Task::multi_mnist, width);
  out.push_back(pn);
  pn.readout = Readout::max;
  out.push_back(pn);
  auto ec = student_config(Arch::gnn_edgeconv, nn::Task::falling_digit, width);
  out.push_back(ec);
  ec.edge_form = EdgeForm::canonical;
  out.push_back(ec);
  out.push_back(student_config(Arch::gnn_pointstyle, nn::Task::pacman, width));
  return out;
}

std::string tag(const refactor::StudentConfig& c) {
  return std::string(refactor::to_string(c.arch)) + (c.readout == refactor::Readout::max ? "/max" : "") +
         (c.edge_form == refactor::EdgeForm::canonical ? "/canonical" : "");
}

envkit::EnvSpec pacman(int dots) {
  envkit::EnvSpec s;
  s.id = envkit::EnvId::pacman;
  s.object_count = dots;
  return s;
}

// Heuristic-teacher demonstrations on 2-dot Pacman.
demoset::DemoDataset pacman_demos(std::size_t frames, double epsilon, std::uint64_t seed) {
  teachers::HeuristicTeacher teacher(envkit::EnvId::pacman);
  demoset::CollectOptions o;
  o.n_frames = frames;
  o.epsilon = epsilon;
  o.seed = seed;
  return demoset::collect(pacman(2), teacher, o);
}

refactor::StudentTrainConfig desk_train(int64_t steps, std::uint64_t seed) {
  refactor::StudentTrainConfig t;
  t.steps = steps;
  t.eval_every = std::max<int64_t>(1, steps / 10);
  t.halve_every = std::max<int64_t>(1, steps / 2);
  t.seed = seed;
  return t;
}

std::vector<std::vector<envkit::BBox>> boxes_of(const refactor::StudentDataset& d) {
  std::vector<std::vector<envkit::BBox>> b;
  for (const auto& p : d.proposals) b.push_back(refactor::boxes_of(p));
  return b;
}

// ---- criteria -------------------------------------------------------------

Verdict codec_properties() {
  const auto t0 = std::chrono::steady_clock::now();
  auto rng = envkit::Pcg32::from_seed(101);
  const spacedet::AnchorGrid grid{16, 16};
  double codec = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const envkit::BBox b{rng.uniform(), rng.uniform(), 0.005 + rng.uniform(), 0.005 + rng.uniform()};
    const auto a = grid.anchor(static_cast<int>(rng.bounded(256)));
    const auto d = spacedet::decode_box(spacedet::encode_box(b, a), a);
    codec = std::max({codec, std::abs(d.x_ctr - b.x_ctr), std::abs(d.y_ctr - b.y_ctr), std::abs(d.w - b.w),
                      std::abs(d.h - b.h)});
  }

  torch::manual_seed(102);
  double sum_err = 0.0, shift_err = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto sig = torch::randn({64}, torch::kDouble) * 3.0;
    const auto loss = torch::rand({64}, torch::kDouble) * 5.0;
    const auto w = torch::softmax(sig, 0);
    sum_err = std::max(sum_err, std::abs(w.sum().item<double>() - 1.0));
    const double shift = 10.0 * (rng.uniform() - 0.5);
    shift_err = std::max(shift_err, std::abs(refactor::reweight(loss, sig).item<double>() -
                                             refactor::reweight(loss, sig + shift).item<double>()));
  }

  double kl_min = std::numeric_limits<double>::infinity();
  for (int trial = 0; trial < 200; ++trial) {
    const auto mean = torch::randn({256}, torch::kDouble) * 3.0;
    const auto stdev = torch::rand({256}, torch::kDouble) * 3.0 + 1e-3;
    const double prior_std = 0.05 + rng.uniform();
    kl_min = std::min(kl_min, spacedet::gaussian_kl(mean, stdev, rng.uniform() - 0.5, prior_std).min().item<double>());
    const double p = 0.001 + 0.998 * rng.uniform();
    kl_min = std::min(kl_min, spacedet::bernoulli_kl(torch::rand({256}, torch::kDouble), p).min().item<double>());
  }
  const double elapsed = seconds_since(t0);
  const bool ok = codec <= 1e-9 && sum_err < 1e-12 && shift_err < 1e-12 && kl_min >= -1e-12 && elapsed < 60.0;
  return {ok, "codec max error " + num(codec) + ", softmax sum error " + num(sum_err) + ", shift drift " +
                  num(shift_err) + ", min KL " + num(kl_min) + ", " + num(elapsed, 3) + " s"};
}

spacedet::SpaceConfig tiny_detector() {
  spacedet::SpaceConfig c;
  c.task = nn::Task::multi_mnist;
  c.frame_size = 8;
  auto& p = c.preset;
  p.grid = 2;
  p.glimpse = 4;
  p.z_what = 4;
  p.fg_encoder = {nn::conv(4, 3).relu(), nn::conv(4, 2, 2).relu(), nn::conv(4, 2, 2).relu()};
  p.glimpse_encoder = {nn::flatten(), nn::linear(8).relu()};
  p.glimpse_decoder = {nn::linear(8).relu(), nn::linear(64), nn::reshape({4, 4, 4})};
  p.bg_encoder = {nn::conv(4, 3).relu(), nn::global_max()};
  p.bg_decoder = {nn::linear(3 * 8 * 8), nn::reshape({3, 8, 8})};
  return c;
}

Verdict gradient_checks() {
  auto rng = envkit::Pcg32::from_seed(201);
  torch::manual_seed(201);
  double worst = 0.0;
  std::string detail;

  spacedet::SpaceModel det(tiny_detector());
  det->to(torch::kDouble);
  const auto x = torch::rand({2, 3, 8, 8}, torch::kDouble);
  const auto noise = spacedet::SpaceNoise::draw(2, det->cells(), 4, x.options());
  const double e = gradient_error(*det, [&] { return det->elbo(x, 0, noise).loss; }, 6, rng);
  worst = std::max(worst, e);
  detail += "elbo " + num(e, 3);

  for (const auto& cfg : graph_students(0.125)) {
    refactor::Student s(cfg);
    s->to(torch::kDouble);
    s->eval();
    auto g = random_graphs(2, 3, nn::task_patch_size(cfg.task), cfg.topology, rng, torch::kDouble);
    const auto w = torch::randn({2, nn::task_output_dim(cfg.task)}, torch::kDouble);
    const double err = gradient_error(*s, [&] { return (s->forward({torch::Tensor(), g}) * w).sum(); }, 4, rng);
    worst = std::max(worst, err);
    detail += ", " + tag(cfg) + " " + num(err, 3);
  }
  return {worst < 1e-3, "relative errors: " + detail};
}

Verdict permutation_invariance() {
  torch::manual_seed(301);
  auto rng = envkit::Pcg32::from_seed(301);
  double worst = 0.0;
  std::string detail;
  for (const auto& cfg : graph_students(0.5)) {
    refactor::Student s(cfg);
    s->eval();
    torch::NoGradGuard no_grad;
    const auto g = random_graphs(100, 8, nn::task_patch_size(cfg.task), cfg.topology, rng);
    const auto a = s->forward({torch::Tensor(), g});
    const auto b = s->forward({torch::Tensor(), refactor::permute_nodes(g, rng)});
    const double drift = (a - b).abs().max().item<double>();
    worst = std::max(worst, drift);
    detail += (detail.empty() ? "" : ", ") + tag(cfg) + " " + num(drift, 3);
  }
  return {worst < 1e-5, "max output drift over 100 graphs: " + detail};
}

Verdict env_determinism() {
  bool identical = true, pac_ok = true, fall_ok = true;
  std::set<double> pac_rewards, fall_terminal;
  std::size_t records = 0;
  for (auto id : {envkit::EnvId::pacman, envkit::EnvId::falling_digit}) {
    envkit::EnvSpec spec;
    spec.id = id;
    spec.object_count = 3;
    auto e1 = envkit::make_env(spec), e2 = envkit::make_env(spec);
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
      auto r1 = envkit::Pcg32::from_seed(seed * 31 + 7), r2 = envkit::Pcg32::from_seed(seed * 31 + 7);
      const auto n = static_cast<std::uint32_t>(envkit::action_count(id));
      const auto a = envkit::record_episode(*e1, seed, [&](const envkit::Env&) { return static_cast<int>(r1.bounded(n)); }, true);
      const auto b = envkit::record_episode(*e2, seed, [&](const envkit::Env&) { return static_cast<int>(r2.bounded(n)); }, true);
      identical = identical && a.serialize() == b.serialize() &&
                  envkit::replay_episode(a, true).serialize() == a.serialize();
      ++records;
    }
  }

  envkit::PacmanEnv pac(pacman(3));
  envkit::FallingDigitEnv fall([] {
    envkit::EnvSpec s;
    s.id = envkit::EnvId::falling_digit;
    s.object_count = 3;
    return s;
  }());
  auto rng = envkit::Pcg32::from_seed(401);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    pac.reset(seed);
    while (!pac.done()) {
      const double r = pac.step(static_cast<int>(rng.bounded(4))).reward;
      pac_rewards.insert(r);
      pac_ok = pac_ok && (std::abs(r + 0.01) < 1e-12 || std::abs(r - 0.99) < 1e-12);
    }
    fall.reset(seed);
    while (!fall.done()) {
      const bool landing = fall.state().falling && fall.state().falling->row == envkit::FallingDigitState::kRows - 2;
      const double r = fall.step(static_cast<int>(rng.bounded(3))).reward;
      if (landing) {
        fall_terminal.insert(r);
        fall_ok = fall_ok && (r == 1.0 || r == -1.0);
      } else {
        fall_ok = fall_ok && r == 0.0;
      }
    }
  }
  std::string pr, fr;
  for (double r : pac_rewards) pr += (pr.empty() ? "" : ",") + num(r);
  for (double r : fall_terminal) fr += (fr.empty() ? "" : ",") + num(r);
  return {identical && pac_ok && fall_ok,
          std::to_string(records) + " record pairs " + (identical ? "byte-identical" : "DIFFER") +
              ", pacman rewards {" + pr + "}, falling landing rewards {" + fr + "}"};
}

Verdict teacher_quality() {
  teachers::HeuristicTeacher pac(envkit::EnvId::pacman), fall(envkit::EnvId::falling_digit);
  const auto p = evalsuite::eval_policy(pac, pacman(2), 100, 501);
  envkit::EnvSpec fs;
  fs.id = envkit::EnvId::falling_digit;
  fs.object_count = 3;
  const auto f = evalsuite::eval_policy(fall, fs, 100, 502);
  return {p.mean >= 1.80 && f.mean >= 2.7,
          "pacman greedy " + num(p.mean) + " (>= 1.80), falling heuristic " + num(f.mean) + " (>= 2.7)"};
}

Verdict detector_recall() {
  const auto t0 = std::chrono::steady_clock::now();
  demoset::MultiMnistLabelOptions o;
  o.n = 2000;
  o.seed = 601;
  const auto train = demoset::label_multi_mnist(o);
  o.n = 200;
  o.seed = 602;
  const auto held = demoset::label_multi_mnist(o);

  std::vector<envkit::Image> frames;
  for (const auto& s : train.samples) frames.push_back(s.frame);
  auto model = spacedet::space_config(nn::Task::multi_mnist, 0.5, false);
  model.prior = model.prior.compressed(5.0);
  spacedet::DetectorTrainConfig tc;
  tc.steps = 10000;
  tc.batch_size = 16;
  tc.seed = 603;
  tc.log_every = 1000;
  auto r = spacedet::train_detector(spacedet::images_to_uint8(frames), model, tc,
                                    [&](const spacedet::DetectorLogRow& row) {
                                      std::cerr << "  detector step " << row.step << " loss " << row.loss << " ("
                                                << num(seconds_since(t0), 4) << " s)\n";
                                    });

  std::vector<envkit::Image> held_frames;
  std::vector<std::vector<envkit::BBox>> gt;
  for (const auto& s : held.samples) {
    held_frames.push_back(s.frame);
    std::vector<envkit::BBox> b;
    for (const auto& g : s.gt) b.push_back(g.box);
    gt.push_back(std::move(b));
  }
  std::vector<std::vector<refactor::Proposal>> dets;
  for (const auto& f : pipeline::detect_all(r.model, spacedet::images_to_uint8(held_frames)))
    dets.push_back(refactor::split_candidates(f, 0.1).first);
  const auto m = evalsuite::detection_metrics(dets, gt, 0.25);
  const double elapsed = seconds_since(t0);
  return {!r.diverged && m.recall >= 0.85 && elapsed <= 3 * 3600.0,
          "recall@0.25 " + num(m.recall) + " (>= 0.85), AP " + num(m.average_precision) + ", " +
              std::to_string(m.detection_count) + " detections for " + std::to_string(m.gt_count) + " digits, " +
              num(elapsed / 60.0, 3) + " min CPU (<= 180)"};
}

Verdict pacman_generalization() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto demos = pacman_demos(10000, 0.3, 701);
  const auto data = pipeline::student_dataset(demos, {});
  const auto gnn = refactor::train_student(
      data, refactor::student_config(refactor::Arch::gnn_pointstyle, nn::Task::pacman, 0.5), desk_train(10000, 702));
  refactor::StudentScorer student(gnn.student, refactor::ground_truth_proposals());
  const auto five = evalsuite::eval_policy(student, pacman(5), 100, 703);
  const auto gnn_ten = evalsuite::eval_policy(student, pacman(10), 100, 704);

  teachers::DqnConfig dc;
  dc.total_steps = 20000;
  dc.epsilon_steps = 10000;
  dc.eval_every = 2000;
  dc.learning_rate = 1e-4;
  dc.seed = 705;
  const auto dqn = teachers::dqn_train(pacman(2), dc);
  auto cnn = dqn.q;
  const auto cnn_two = evalsuite::eval_policy(cnn, pacman(2), 100, 706);
  const auto cnn_ten = evalsuite::eval_policy(cnn, pacman(10), 100, 704);
  return {five.mean >= 4.0 && cnn_ten.mean < gnn_ten.mean,
          "GNN on 5 dots " + num(five.mean) + " +- " + num(five.stdev, 3) + " (>= 4.0); 10 dots: GNN " +
              num(gnn_ten.mean) + " vs DQN CNN " + num(cnn_ten.mean) + " (CNN on its 2-dot training task " +
              num(cnn_two.mean) + "), " + num(seconds_since(t0), 4) + " s"};
}

Verdict multi_mnist_direction() {
  const auto t0 = std::chrono::steady_clock::now();
  demoset::MultiMnistLabelOptions o;
  o.n = 10000;
  o.seed = 801;
  const auto train = demoset::label_multi_mnist(o);
  o.n = 1000;
  o.seed = 802;
  o.min_digits = o.max_digits = 4;
  const auto test = demoset::label_multi_mnist(o);
  const auto data = pipeline::student_dataset(train, {});
  const auto tdata = pipeline::student_dataset(test, {});
  const auto labels = pipeline::sum_labels(test);

  double acc[2] = {0.0, 0.0};
  const refactor::Arch archs[2] = {refactor::Arch::gnn_pointnet, refactor::Arch::cnn};
  for (int i = 0; i < 2; ++i) {
    auto r = refactor::train_student(data, refactor::student_config(archs[i], nn::Task::multi_mnist, 0.5),
                                           desk_train(5000, 803));
    acc[i] = evalsuite::accuracy_multi_mnist(evalsuite::predict_sums(r.student, tdata.frames, boxes_of(tdata)), labels);
    std::cerr << "  " << refactor::to_string(archs[i]) << " 4-digit accuracy " << acc[i] << " ("
              << num(seconds_since(t0), 4) << " s)\n";
  }
  const double gap = 100.0 * (acc[0] - acc[1]);
  return {gap >= 10.0, "4-digit test accuracy: GNN+GT " + num(100 * acc[0]) + "%, CNN " + num(100 * acc[1]) +
                           "%, gap " + num(gap) + " points (>= 10), equal budget 5000 steps x 64"};
}

Verdict sigma_diagnosis() {
  demoset::MultiMnistLabelOptions o;
  o.n = 5000;
  o.seed = 901;
  const auto train = demoset::label_multi_mnist(o);
  auto data = pipeline::student_dataset(train, {});
  // 10% of the samples lose every detection.
  auto rng = envkit::Pcg32::from_seed(902);
  std::vector<bool> corrupted(static_cast<std::size_t>(data.size()), false);
  std::vector<std::size_t> order(corrupted.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[rng.bounded(static_cast<std::uint32_t>(i + 1))]);
  for (std::size_t k = 0; k < order.size() / 10; ++k) {
    corrupted[order[k]] = true;
    data.proposals[order[k]].clear();
  }
  auto tc = desk_train(4000, 903);
  tc.data_parameters = true;
  const auto r = refactor::train_student(data, refactor::student_config(refactor::Arch::gnn_pointnet, nn::Task::multi_mnist, 0.5), tc);

  std::vector<double> bad, good;
  const auto sig = r.sigmas.contiguous();
  for (auto i : r.train_index) (corrupted[static_cast<std::size_t>(i)] ? bad : good).push_back(sig[i].item<double>());
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v.size() % 2 ? v[v.size() / 2] : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
  };
  const double mb = median(bad), mg = median(good);
  return {mb < mg, "median sigma corrupted " + num(mb) + " vs clean " + num(mg) + " (" + std::to_string(bad.size()) +
                       " corrupted, " + std::to_string(good.size()) + " clean training samples)"};
}

Verdict robustness() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto demos = pacman_demos(10000, 0.3, 1001);
  const auto data = pipeline::student_dataset(demos, {});
  const auto points = evalsuite::robustness_sweep(
      data, refactor::student_config(refactor::Arch::gnn_pointstyle, nn::Task::pacman, 0.5), desk_train(5000, 1002),
      {0.1, 0.5, 0.9}, 25, pacman(5), 100, 1003, refactor::ground_truth_proposals(),
      [&](const evalsuite::RobustnessPoint& p) {
        std::cerr << "  drop " << p.drop_rate << " fp " << p.false_positives << ": " << p.report.mean << " ("
                  << num(seconds_since(t0), 4) << " s)\n";
      });
  std::vector<double> means;
  std::string detail;
  for (const auto& p : points) {
    if (p.false_positives == 0) means.push_back(p.report.mean);
    detail += (detail.empty() ? "" : ", ") +
              (p.false_positives == 0 ? "drop " + num(p.drop_rate) : "fp " + std::to_string(p.false_positives)) + ": " +
              num(p.report.mean);
  }
  const bool ok = means.size() == 3 && evalsuite::degrades_monotonically(means, 0.25);
  return {ok, "5-dot return " + detail + " (drop points monotone within 0.25, last < first), " +
                  num(seconds_since(t0), 4) + " s"};
}

struct Criterion {
  const char* name;
  Verdict (*run)();
};

const Criterion kCriteria[] = {
    {"codec_properties", codec_properties},
    {"gradient_checks", gradient_checks},
    {"permutation_invariance", permutation_invariance},
    {"env_determinism", env_determinism},
    {"teacher_quality", teacher_quality},
    {"detector_recall", detector_recall},
    {"pacman_generalization", pacman_generalization},
    {"multi_mnist_direction", multi_mnist_direction},
    {"sigma_diagnosis", sigma_diagnosis},
    {"robustness", robustness},
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> wanted(argv + 1, argv + argc);
  for (const auto& w : wanted) {
    if (std::none_of(std::begin(kCriteria), std::end(kCriteria), [&](const Criterion& c) { return w == c.name; })) {
      std::cerr << "unknown criterion '" << w << "'; known:";
      for (const auto& c : kCriteria) std::cerr << " " << c.name;
      std::cerr << "\n";
      return 2;
    }
  }
  int failures = 0;
  for (const auto& c : kCriteria) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), c.name) == wanted.end()) continue;
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    std::cout << (v.pass ? "PASS " : "FAIL ") << c.name << ": " << v.detail << std::endl;
    failures += v.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
