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

#include <torch/torch.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "doctest.h"
#include "polref/envkit/env.hpp"
#include "polref/envkit/rng.hpp"
#include "polref/nn/tensor_util.hpp"
#include "polref/refactor/graph.hpp"
#include "polref/refactor/student.hpp"
#include "polref/spacedet/space.hpp"

using namespace polref;
using namespace polref::refactor;

namespace {

envkit::BBox random_box(envkit::Pcg32& rng) {
  const double w = 0.05 + 0.2 * rng.uniform(), h = 0.05 + 0.2 * rng.uniform();
  return {w / 2 + rng.uniform() * (1 - w), h / 2 + rng.uniform() * (1 - h), w, h};
}

std::vector<Proposal> random_proposals(std::size_t n, envkit::Pcg32& rng, double score) {
  std::vector<Proposal> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back({random_box(rng), score});
  return out;
}

// Random padded batch; padding slots hold garbage so masking is exercised.
GraphBatch random_graphs(int64_t b, int64_t n_max, int p, Topology topology, envkit::Pcg32& rng,
                         torch::Dtype dtype = torch::kFloat) {
  GraphBatch g;
  g.topology = topology;
  g.patches = torch::rand({b, n_max, 3, p, p}, dtype);
  g.boxes = torch::rand({b, n_max, 4}, dtype) * 0.5 + 0.1;
  g.mask = torch::zeros({b, n_max}, dtype);
  for (int64_t i = 0; i < b; ++i) {
    const int64_t n = 1 + static_cast<int64_t>(rng.next_u32() % static_cast<std::uint32_t>(n_max));
    g.mask[i].slice(0, 0, n).fill_(1.0);
  }
  return g;
}

std::vector<StudentConfig> gnn_variants(double width) {
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

std::string label(const StudentConfig& c) {
  return std::string(to_string(c.arch)) + (c.readout == Readout::max ? "/max" : "") +
         (c.edge_form == EdgeForm::canonical ? "/canonical" : "");
}

}  // namespace

TEST_CASE("bc_loss is the per-sample squared L2 distance") {
  const auto out = torch::tensor({1.0, 0.0, 0.0, 0.5, 0.5, 0.5}).reshape({2, 3});
  const auto tgt = torch::tensor({0.0, 1.0, 0.0, 0.5, 0.5, 0.5}).reshape({2, 3});
  const auto l = bc_loss(out, tgt);
  REQUIRE(l.sizes() == torch::IntArrayRef({2}));
  CHECK(l[0].item<double>() == doctest::Approx(2.0));
  CHECK(l[1].item<double>() == 0.0);
  CHECK_THROWS_AS(bc_loss(out, tgt.slice(1, 0, 2)), std::invalid_argument);
}

TEST_CASE("reweight: softmax weights, symmetry, shift invariance and gradients") {
  const auto sig = torch::tensor({std::log(3.0), 0.0}, torch::kDouble);
  CHECK(reweight(torch::tensor({1.0, 0.0}, torch::kDouble), sig).item<double>() == doctest::Approx(0.75));
  CHECK(reweight(torch::tensor({0.0, 1.0}, torch::kDouble), sig).item<double>() == doctest::Approx(0.25));

  const auto losses = torch::tensor({0.3, 1.7, 2.0, 0.1}, torch::kDouble);
  CHECK(reweight(losses, torch::full({4}, 2.5, torch::kDouble)).item<double>() ==
        doctest::Approx(losses.mean().item<double>()));
  const auto s = torch::tensor({0.2, -1.0, 0.7, 3.0}, torch::kDouble);
  CHECK(reweight(losses, s).item<double>() == doctest::Approx(reweight(losses, s + 11.0).item<double>()));

  // d/dsigma_i = w_i (l_i - L)
  auto sv = s.clone().set_requires_grad(true);
  auto lv = losses.clone().set_requires_grad(true);
  const auto total = reweight(lv, sv);
  total.backward();
  const auto w = torch::softmax(s, 0);
  CHECK((sv.grad() - w * (losses - total.item<double>())).abs().max().item<double>() < 1e-12);
  CHECK((lv.grad() - w).abs().max().item<double>() < 1e-12);
  CHECK_THROWS_AS(reweight(losses, s.slice(0, 0, 3)), std::invalid_argument);
}

TEST_CASE("data parameter bank: lazy Adam touches only gathered rows") {
  DataParameterBank bank(6, 0.1);
  const auto idx = torch::tensor({1, 4}, torch::kLong);
  const auto s = bank.gather(idx);
  (s * torch::tensor({2.0, -0.5}, torch::kDouble)).sum().backward();
  bank.step();
  const auto v = bank.values();
  // First Adam step moves by lr * sign(g).
  CHECK(v[1].item<double>() == doctest::Approx(-0.1).epsilon(1e-6));
  CHECK(v[4].item<double>() == doctest::Approx(0.1).epsilon(1e-6));
  for (int i : {0, 2, 3, 5}) CHECK(v[i].item<double>() == 0.0);

  // Row 4 again: its bias correction is per row (t = 2), row 0 starts fresh.
  const auto s2 = bank.gather(torch::tensor({0, 4}, torch::kLong));
  (s2 * torch::tensor({1.0, -0.5}, torch::kDouble)).sum().backward();
  bank.step();
  CHECK(bank.values()[0].item<double>() == doctest::Approx(-0.1).epsilon(1e-6));
  CHECK(bank.values()[4].item<double>() == doctest::Approx(0.2).epsilon(1e-6));
  CHECK(bank.values()[1].item<double>() == doctest::Approx(-0.1).epsilon(1e-6));
}

TEST_CASE("augment_low_confidence") {
  auto rng = envkit::Pcg32::from_seed(1);
  const auto det = random_proposals(4, rng, 0.9);
  const auto pool = random_proposals(60, rng, 0.05);
  CHECK(augment_low_confidence(det, pool, 0.0, rng).size() == 4);
  CHECK(augment_low_confidence(det, {}, 0.3, rng).size() == 4);
  const auto aug = augment_low_confidence(det, pool, 0.3, rng);
  REQUIRE(aug.size() == 4 + 18);
  for (std::size_t i = 0; i < det.size(); ++i) CHECK(aug[i].box == det[i].box);
  std::set<std::pair<double, double>> pool_keys, added;
  for (const auto& p : pool) pool_keys.insert({p.box.x_ctr, p.box.y_ctr});
  for (std::size_t i = det.size(); i < aug.size(); ++i) {
    CHECK(pool_keys.count({aug[i].box.x_ctr, aug[i].box.y_ctr}) == 1);
    added.insert({aug[i].box.x_ctr, aug[i].box.y_ctr});
  }
  CHECK(added.size() == 18);  // without replacement
  CHECK(augment_low_confidence(det, random_proposals(7, rng, 0.0), 0.3, rng).size() == 4 + 3);
  CHECK_THROWS_AS(augment_low_confidence(det, pool, 1.5, rng), std::invalid_argument);
}

TEST_CASE("degrade_detections") {
  auto rng = envkit::Pcg32::from_seed(2);
  const auto det = random_proposals(10000, rng, 0.9);
  const auto pool = random_proposals(60, rng, 0.05);

  const auto same = degrade_detections(det, pool, 0.0, 0, rng);
  REQUIRE(same.size() == det.size());
  CHECK(same.front().box == det.front().box);
  CHECK(same.back().box == det.back().box);

  const auto half = degrade_detections(det, {}, 0.5, 0, rng);
  const double kept = static_cast<double>(half.size()) / 1e4;
  MESSAGE("retained fraction " << kept);
  CHECK(kept == doctest::Approx(0.5).epsilon(0.04));

  const auto small = random_proposals(5, rng, 0.9);
  CHECK(degrade_detections(small, pool, 0.0, 25, rng).size() == 30);
  CHECK(degrade_detections(small, pool, 1.0, 25, rng).size() == 25);
  // Pool of 10: the other 15 are synthesized, inside the image.
  const auto short_pool = random_proposals(10, rng, 0.05);
  const auto padded = degrade_detections(small, short_pool, 0.0, 25, rng);
  REQUIRE(padded.size() == 30);
  for (const auto& p : padded) {
    CHECK(p.box.x0() >= -1e-12);
    CHECK(p.box.x1() <= 1.0 + 1e-12);
    CHECK(p.box.w > 0.0);
  }
  CHECK(degrade_detections({}, {}, 0.5, 25, rng).size() == 25);
  CHECK_THROWS_AS(degrade_detections(small, pool, -0.1, 0, rng), std::invalid_argument);
}

TEST_CASE("with_false_positives adds a fixed number of in-frame boxes") {
  envkit::EnvSpec spec;
  spec.id = envkit::EnvId::pacman;
  spec.object_count = 2;
  auto env = envkit::make_env(spec);
  env->reset(3);
  const auto gt = ground_truth_proposals()(*env);
  auto a = with_false_positives(ground_truth_proposals(), 25, 9);
  auto b = with_false_positives(ground_truth_proposals(), 25, 9);
  const auto first = a(*env);
  REQUIRE(first.size() == gt.size() + 25);
  for (std::size_t i = 0; i < gt.size(); ++i) CHECK(first[i].x_ctr == gt[i].x_ctr);
  for (const auto& box : first) {
    CHECK(box.x_ctr - 0.5 * box.w >= -1e-12);
    CHECK(box.x_ctr + 0.5 * box.w <= 1.0 + 1e-12);
  }
  CHECK(b(*env)[gt.size()].x_ctr == first[gt.size()].x_ctr);
  CHECK(a(*env)[gt.size()].x_ctr != first[gt.size()].x_ctr);  // the stream advances
  CHECK(with_false_positives(ground_truth_proposals(), 0, 1)(*env).size() == gt.size());
  CHECK_THROWS_AS(with_false_positives(ground_truth_proposals(), -1, 1), std::invalid_argument);
}

TEST_CASE("scene graphs: topology, edge counts and patch crops") {
  torch::manual_seed(3);
  auto rng = envkit::Pcg32::from_seed(3);
  const auto frame = torch::rand({3, 54, 54});
  std::vector<envkit::BBox> three{random_box(rng), random_box(rng), random_box(rng)};
  const auto mm = build_scene_graph(frame, three, nn::Task::multi_mnist);
  CHECK(mm.nodes.size() == 3);
  CHECK(mm.edge_count() == 0);
  CHECK(mm.nodes[0].patch.sizes() == torch::IntArrayRef({3, 16, 16}));

  auto four = three;
  four.push_back(random_box(rng));
  auto fd = build_scene_graph(torch::rand({3, 128, 128}), four, nn::Task::falling_digit);
  CHECK(fd.edge_count() == 16);
  fd.topology = Topology::complete_no_self_loops;
  CHECK(fd.edge_count() == 12);
  const auto none = build_scene_graph(frame, {}, nn::Task::pacman);
  CHECK(none.nodes.empty());
  CHECK(none.edge_count() == 0);
  CHECK(parse_topology(to_string(Topology::complete_no_self_loops)) == Topology::complete_no_self_loops);

  // Batched cropping agrees with per-box cropping.
  const auto frames = torch::rand({2, 3, 54, 54});
  const std::vector<std::vector<envkit::BBox>> boxes{three, {four[3]}};
  const auto batch = crop_graph_batch(frames, boxes, 16, Topology::empty);
  CHECK(batch.patches.sizes() == torch::IntArrayRef({2, 3, 3, 16, 16}));
  CHECK(batch.mask.sum().item<double>() == 4.0);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t k = 0; k < boxes[i].size(); ++k) {
      const auto ref = spacedet::stn_crop(frames[static_cast<int64_t>(i)], boxes[i][k], 16).patch;
      CHECK((batch.patches[static_cast<int64_t>(i)][static_cast<int64_t>(k)] - ref).abs().max().item<double>() < 1e-5);
    }
  CHECK(batch.patches[1][2].abs().max().item<double>() == 0.0);

  std::vector<SceneGraph> graphs{build_scene_graph(frames[0], three, nn::Task::multi_mnist),
                                 build_scene_graph(frames[1], {four[3]}, nn::Task::multi_mnist)};
  const auto listed = batch_graphs(graphs);
  CHECK((listed.patches - batch.patches).abs().max().item<double>() < 1e-5);
  CHECK((listed.mask - batch.mask).abs().max().item<double>() == 0.0);
}

TEST_CASE("graph students are invariant to node order") {
  torch::manual_seed(4);
  auto rng = envkit::Pcg32::from_seed(4);
  for (const auto& cfg : gnn_variants(0.25)) {
    Student s(cfg);
    s->eval();
    torch::NoGradGuard no_grad;
    const auto g = random_graphs(100, 6, nn::task_patch_size(cfg.task), cfg.topology, rng);
    const auto a = s->forward({torch::Tensor(), g});
    const auto b = s->forward({torch::Tensor(), permute_nodes(g, rng)});
    const double drift = (a - b).abs().max().item<double>();
    MESSAGE(label(cfg) << " permutation drift " << drift);
    CHECK(drift < 1e-5);
    CHECK(a.size(1) == nn::task_output_dim(cfg.task));
  }
}

TEST_CASE("max aggregation ignores duplicated nodes; add readout scales with copies") {
  torch::manual_seed(5);
  auto rng = envkit::Pcg32::from_seed(5);
  torch::NoGradGuard no_grad;

  Student ec(student_config(Arch::gnn_edgeconv, nn::Task::falling_digit, 0.25));
  ec->eval();
  auto g = random_graphs(8, 4, 16, Topology::complete_with_self_loops, rng);
  g.mask.fill_(1.0);
  GraphBatch dup = g;
  dup.patches = torch::cat({g.patches, g.patches.slice(1, 1, 2)}, 1);
  dup.boxes = torch::cat({g.boxes, g.boxes.slice(1, 1, 2)}, 1);
  dup.mask = torch::ones({8, 5});
  CHECK((ec->forward({torch::Tensor(), g}) - ec->forward({torch::Tensor(), dup})).abs().max().item<double>() == 0.0);

  Student pn(student_config(Arch::gnn_pointnet, nn::Task::multi_mnist, 0.25));
  pn->eval();
  auto one = random_graphs(4, 1, 16, Topology::empty, rng);
  const auto base = pn->forward({torch::Tensor(), one});
  for (int k : {2, 3, 5}) {
    GraphBatch copies = one;
    copies.patches = one.patches.repeat({1, k, 1, 1, 1});
    copies.boxes = one.boxes.repeat({1, k, 1});
    copies.mask = torch::ones({4, k});
    const auto out = pn->forward({torch::Tensor(), copies});
    CHECK((out - k * base).abs().max().item<double>() < 1e-4 * (1.0 + base.abs().max().item<double>() * k));
  }

  // Single node: the sender and canonical edge forms see the same edge.
  auto canon = student_config(Arch::gnn_edgeconv, nn::Task::falling_digit, 0.25);
  canon.edge_form = EdgeForm::canonical;
  Student ec2(canon);
  ec2->eval();
  torch::save(ec, "/tmp/polref_ec.pt");
  torch::load(ec2, "/tmp/polref_ec.pt");
  auto single = random_graphs(5, 1, 16, Topology::complete_with_self_loops, rng);
  CHECK((ec->forward({torch::Tensor(), single}) - ec2->forward({torch::Tensor(), single})).abs().max().item<double>() ==
        0.0);
  CHECK((ec->forward({torch::Tensor(), g}) - ec2->forward({torch::Tensor(), g})).abs().max().item<double>() > 0.0);
  std::filesystem::remove("/tmp/polref_ec.pt");
}

TEST_CASE("empty graphs emit the bias-only output") {
  torch::manual_seed(6);
  torch::NoGradGuard no_grad;
  for (const auto& cfg : gnn_variants(0.25)) {
    Student s(cfg);
    s->eval();
    const int p = nn::task_patch_size(cfg.task);
    const auto in = make_input(cfg, torch::rand({2, 3, nn::task_frame_size(cfg.task), nn::task_frame_size(cfg.task)}),
                               {{}, {}});
    const auto out = s->forward(in);
    CHECK(in.graphs.patches.size(3) == p);
    CHECK(std::isfinite(out.sum().item<double>()));
    CHECK((out[0] - out[1]).abs().max().item<double>() == 0.0);
    if (cfg.arch != Arch::gnn_edgeconv) CHECK(out.abs().max().item<double>() == 0.0);
  }
}

TEST_CASE("graph students: analytic gradients match central differences") {
  torch::manual_seed(7);
  auto rng = envkit::Pcg32::from_seed(7);
  for (auto cfg : gnn_variants(0.125)) {
    Student s(cfg);
    s->to(torch::kDouble);
    s->eval();
    auto g = random_graphs(2, 2, nn::task_patch_size(cfg.task), cfg.topology, rng, torch::kDouble);
    g.mask.fill_(1.0);
    const auto w = torch::randn({2, nn::task_output_dim(cfg.task)}, torch::kDouble);
    auto loss_of = [&] { return (s->forward({torch::Tensor(), g}) * w).sum(); };
    s->zero_grad();
    loss_of().backward();
    std::vector<double> analytic, numeric;
    torch::NoGradGuard no_grad;
    for (auto& p : s->parameters()) {
      auto flat = p.view(-1);
      const auto grad = p.grad().view(-1);
      for (int k = 0; k < 4; ++k) {
        const auto i = static_cast<int64_t>(rng.bounded(static_cast<std::uint32_t>(flat.numel())));
        const double orig = flat[i].template item<double>();
        const double h = 1e-6;
        flat[i] = orig + h;
        const double up = loss_of().item<double>();
        flat[i] = orig - h;
        const double down = loss_of().item<double>();
        flat[i] = orig;
        analytic.push_back(grad[i].template item<double>());
        numeric.push_back((up - down) / (2.0 * h));
      }
    }
    double diff = 0.0, norm = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
      diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
      norm += numeric[i] * numeric[i];
    }
    const double rel = std::sqrt(diff) / std::max(std::sqrt(norm), 1e-12);
    MESSAGE(label(cfg) << " gradient relative error " << rel);
    CHECK(rel < 1e-3);
  }
}

TEST_CASE("relation module attention") {
  torch::manual_seed(8);
  torch::NoGradGuard no_grad;
  RelationModule rel(16, 4, 16, nn::Norm::group);
  rel->eval();
  const auto x = torch::randn({2, 16, 5, 5});
  torch::Tensor attn;
  const auto y = rel->forward(x, &attn);
  CHECK(attn.sizes() == torch::IntArrayRef({2, 4, 25, 25}));
  CHECK((attn.sum(3) - 1.0).abs().max().item<double>() < 1e-5);
  CHECK(y.sizes() == x.sizes());

  // Uniform map without coordinates: uniform attention, output = value average.
  RelationModule plain(16, 4, 16, nn::Norm::layer, false);
  plain->eval();
  const auto u = torch::randn({1, 16, 1, 1}).expand({1, 16, 4, 4}).contiguous();
  torch::Tensor mixed;
  const auto out = plain->forward(u, &attn, &mixed);
  CHECK((attn - 1.0 / 16.0).abs().max().item<double>() < 1e-6);
  const auto mean = mixed.mean({2, 3}, true);
  CHECK((mixed - mean).abs().max().item<double>() < 1e-5);
  const auto delta = out - u;
  CHECK((delta - delta.mean({2, 3}, true)).abs().max().item<double>() < 1e-5);
}

TEST_CASE("convolutional students: output dimensions per task") {
  torch::manual_seed(9);
  torch::NoGradGuard no_grad;
  for (auto task : {nn::Task::multi_mnist, nn::Task::falling_digit, nn::Task::pacman})
    for (auto arch : {Arch::cnn, Arch::relation_net}) {
      Student s(student_config(arch, task, 0.25));
      s->eval();
      const int size = nn::task_frame_size(task);
      const auto out = s->forward({torch::rand({2, 3, size, size}), {}});
      CHECK(out.sizes() == torch::IntArrayRef({2, nn::task_output_dim(task)}));
      CHECK_THROWS_AS(s->forward({torch::rand({2, 3, size + 2, size}), {}}), std::invalid_argument);
    }
  CHECK(nn::task_output_dim(nn::Task::multi_mnist) == 1);
  CHECK(nn::task_output_dim(nn::Task::pacman) == 4);
  CHECK(nn::task_output_dim(nn::Task::falling_digit) == 3);
  CHECK(parse_arch("relation_net") == Arch::relation_net);
  CHECK_THROWS_AS(parse_arch("mlp"), std::invalid_argument);
}

namespace {

StudentDataset toy_pacman_dataset(int n, std::uint64_t seed) {
  envkit::EnvSpec spec;
  spec.id = envkit::EnvId::pacman;
  auto env = envkit::make_env(spec);
  std::vector<envkit::Image> frames;
  StudentDataset d;
  std::vector<float> targets;
  auto rng = envkit::Pcg32::from_seed(seed);
  env->reset(seed);
  for (int i = 0; i < n; ++i) {
    if (env->done()) env->reset(seed + static_cast<std::uint64_t>(i));
    frames.push_back(env->frame());
    std::vector<Proposal> props;
    for (const auto& o : env->gt()) props.push_back({o.box, 1.0});
    d.proposals.push_back(props);
    d.pools.push_back(random_proposals(5, rng, 0.01));
    for (int a = 0; a < 4; ++a) targets.push_back(static_cast<float>(rng.uniform()));
    env->step(static_cast<int>(rng.next_u32() % 4));
  }
  d.frames = spacedet::images_to_uint8(frames);
  d.targets = torch::tensor(targets).reshape({n, 4});
  return d;
}

}  // namespace

TEST_CASE("train_student: reweighting with frozen equal sigmas reproduces mean-loss training") {
  const auto data = toy_pacman_dataset(40, 11);
  const auto cfg = student_config(Arch::gnn_pointstyle, nn::Task::pacman, 0.25);
  StudentTrainConfig tc;
  tc.steps = 12;
  tc.batch_size = 8;
  tc.eval_every = 4;
  tc.seed = 3;
  tc.augment_fraction = 0.3;
  const auto plain = train_student(data, cfg, tc);
  tc.data_parameters = true;
  tc.sigma_learning_rate = 0.0;
  const auto frozen = train_student(data, cfg, tc);
  const auto pa = plain.student->parameters(), pb = frozen.student->parameters();
  double drift = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i) drift = std::max(drift, (pa[i] - pb[i]).abs().max().item<double>());
  MESSAGE("parameter drift " << drift);
  CHECK(drift <= 1e-6);
  CHECK(plain.best_step == frozen.best_step);
  CHECK(plain.log.size() == 3);
  CHECK(frozen.sigmas.abs().max().item<double>() == 0.0);

  // Learned sigmas move only for training rows.
  tc.sigma_learning_rate = 0.1;
  const auto learned = train_student(data, cfg, tc);
  for (int64_t i : learned.val_index) CHECK(learned.sigmas[i].item<double>() == 0.0);
  CHECK(learned.sigmas.abs().max().item<double>() > 0.0);
}

TEST_CASE("train_student: best-validation selection, errors and checkpoints") {
  const auto data = toy_pacman_dataset(40, 12);
  const auto cfg = student_config(Arch::gnn_pointstyle, nn::Task::pacman, 0.25);
  StudentTrainConfig tc;
  tc.steps = 30;
  tc.batch_size = 8;
  tc.eval_every = 5;
  tc.learning_rate = 1e-2;
  tc.halve_every = 10;
  auto r = train_student(data, cfg, tc);
  double best = 1e300;
  for (const auto& row : r.log) best = std::min(best, row.val_loss);
  CHECK(r.best_val_loss == doctest::Approx(best));
  // The returned parameters reproduce the best validation loss.
  {
    torch::NoGradGuard no_grad;
    const auto val = data.subset(r.val_index);
    std::vector<std::vector<envkit::BBox>> boxes;
    for (const auto& p : val.proposals) boxes.push_back(boxes_of(p));
    const auto out = r.student->forward(make_input(cfg, val.frames, boxes));
    CHECK(bc_loss(out, val.targets).mean().item<double>() == doctest::Approx(best).epsilon(1e-4));
  }

  auto bad = data;
  bad.targets = data.targets.clone();
  bad.targets[3][1] = std::nanf("");
  tc.validation_fraction = 0.0;
  tc.batch_size = 40;
  CHECK_THROWS_AS(train_student(bad, cfg, tc), nn::NumericError);
  auto wrong = data;
  wrong.targets = torch::zeros({40, 3});
  CHECK_THROWS_AS(train_student(wrong, cfg, tc), std::invalid_argument);

  const std::string path = "/tmp/polref_student.ckpt";
  save_student(path, r.student, {{"note", "test"}});
  nlohmann::json extra;
  auto loaded = load_student(path, &extra);
  CHECK(extra.at("note") == "test");
  CHECK(loaded->config().arch == Arch::gnn_pointstyle);
  envkit::EnvSpec spec;
  spec.object_count = 3;
  auto env = envkit::make_env(spec);
  env->reset(5);
  StudentScorer a(r.student, ground_truth_proposals()), b(loaded, ground_truth_proposals());
  const auto sa = a.scores(*env), sb = b.scores(*env);
  REQUIRE(sa.size() == 4);
  CHECK(sa == sb);
  std::filesystem::remove(path);
}
