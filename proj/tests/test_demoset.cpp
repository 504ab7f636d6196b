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

#include <cmath>
#include <cstring>
#include <limits>

#include "doctest.h"
#include "polref/demoset/demoset.hpp"
#include "test_util.hpp"

using namespace polref;
using demoset::DemoDataset;
using demoset::DemoSample;

namespace {

envkit::EnvSpec spec_of(envkit::EnvId id, int objects) {
  envkit::EnvSpec s;
  s.id = id;
  s.object_count = objects;
  return s;
}

DemoDataset synthetic(const std::vector<double>& returns, int steps_per_episode) {
  DemoDataset d;
  d.manifest.task = "pacman";
  d.manifest.semantics = demoset::TargetSemantics::logits;
  d.manifest.target_dim = 4;
  for (std::size_t e = 0; e < returns.size(); ++e)
    for (int t = 0; t < steps_per_episode; ++t) {
      DemoSample s;
      s.frame = envkit::Image(2, 2);
      s.target = {0, 1, 0, 0};
      s.episode_id = static_cast<std::int64_t>(e);
      s.step = t;
      s.episode_return = returns[e];
      d.samples.push_back(s);
    }
  d.manifest.sample_count = d.samples.size();
  return d;
}

}  // namespace

TEST_CASE("collect: greedy rollouts execute the argmax target") {
  teachers::HeuristicTeacher teacher(envkit::EnvId::pacman);
  const auto d = demoset::collect(spec_of(envkit::EnvId::pacman, 3), teacher, {500, 0.0, 7, ""});
  REQUIRE(d.size() == 500);
  CHECK(d.manifest.target_dim == 4);
  CHECK(d.manifest.semantics == demoset::TargetSemantics::logits);
  for (const auto& s : d.samples) CHECK(s.action == teachers::argmax(s.target));
  d.validate();
}

TEST_CASE("collect: epsilon 0.5 explores") {
  teachers::HeuristicTeacher teacher(envkit::EnvId::pacman);
  const auto d = demoset::collect(spec_of(envkit::EnvId::pacman, 2), teacher, {10000, 0.5, 11, ""});
  std::size_t differ = 0;
  for (const auto& s : d.samples) differ += s.action != teachers::argmax(s.target);
  const double frac = static_cast<double>(differ) / static_cast<double>(d.size());
  MESSAGE("off-greedy fraction " << frac);
  // Expected 0.5 * 3/4; 0.30 is more than ten standard deviations below.
  CHECK(frac >= 0.30);
}

TEST_CASE("collect: returns equal the summed rewards of each episode") {
  teachers::HeuristicTeacher teacher(envkit::EnvId::falling_digit);
  const auto d = demoset::collect(spec_of(envkit::EnvId::falling_digit, 3), teacher, {300, 0.3, 5, ""});
  // Replay each episode through a fresh env with the recorded actions.
  auto env = envkit::make_env(spec_of(envkit::EnvId::falling_digit, 3));
  std::int64_t current = -1;
  double ret = 0.0, recorded = 0.0;
  auto flush = [&] {
    if (current >= 0 && env->done()) CHECK(ret == doctest::Approx(recorded));
  };
  for (const auto& s : d.samples) {
    if (s.episode_id != current) {
      flush();
      current = s.episode_id;
      env->reset(5 ^ static_cast<std::uint64_t>(current));
      ret = 0.0;
      recorded = s.episode_return;
    }
    CHECK(env->frame() == s.frame);
    ret += env->step(s.action).reward;
  }
}

TEST_CASE("collect: action-space mismatch and bad epsilon") {
  teachers::RandomPolicy three(3, 0);
  CHECK_THROWS_AS(demoset::collect(spec_of(envkit::EnvId::pacman, 2), three, {10, 0.0, 0, ""}),
                  std::invalid_argument);
  teachers::HeuristicTeacher teacher(envkit::EnvId::pacman);
  CHECK_THROWS_AS(demoset::collect(spec_of(envkit::EnvId::pacman, 2), teacher, {10, 1.5, 0, ""}),
                  std::invalid_argument);
}

TEST_CASE("merge: epsilon mixture composition") {
  teachers::HeuristicTeacher teacher(envkit::EnvId::falling_digit);
  std::vector<DemoDataset> parts;
  const std::vector<std::pair<double, int>> mix = {{0.5, 5}, {0.3, 3}, {0.0, 1}};
  std::uint64_t seed = 0;
  for (const auto& [eps, trials] : mix)
    for (int t = 0; t < trials; ++t)
      parts.push_back(demoset::collect(spec_of(envkit::EnvId::falling_digit, 3), teacher, {40, eps, seed++, ""}));
  const auto merged = demoset::merge(parts);
  CHECK(merged.size() == 9 * 40);
  CHECK(merged.manifest.collection["epsilons"].size() == 9);
  std::size_t expected_episodes = 0;
  for (const auto& p : parts) expected_episodes += p.episode_count();
  CHECK(merged.episode_count() == expected_episodes);
  for (std::size_t i = 1; i < merged.size(); ++i) {
    const auto& a = merged.samples[i - 1];
    const auto& b = merged.samples[i];
    CHECK((a.episode_id < b.episode_id || (a.episode_id == b.episode_id && a.step < b.step)));
  }
  merged.validate();
}

TEST_CASE("filter_episodes") {
  const auto d = synthetic({3.0, -1.0, 2.0}, 4);
  const auto all = demoset::filter_episodes(d, -std::numeric_limits<double>::infinity());
  CHECK(all.size() == d.size());
  const auto kept = demoset::filter_episodes(d, 0.0);
  CHECK(kept.size() == 8);
  CHECK(kept.episode_count() == 2);
  for (const auto& s : kept.samples) CHECK(s.episode_id != 1);
  CHECK(kept.manifest.collection["retained_episode_fraction"].get<double>() == doctest::Approx(2.0 / 3.0));
  CHECK_THROWS_AS(demoset::filter_episodes(d, 10.0), std::runtime_error);
}

TEST_CASE("filter_episodes never drops an episode at or above the threshold") {
  auto rng = envkit::Pcg32::from_seed(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> returns;
    for (int e = 0; e < 10; ++e) returns.push_back(static_cast<double>(rng.bounded(7)) - 3.0);
    const double threshold = static_cast<double>(rng.bounded(5)) - 3.0;
    const auto d = synthetic(returns, 2);
    std::size_t expected = 0;
    for (double r : returns) expected += r >= threshold ? 2 : 0;
    if (expected == 0) {
      CHECK_THROWS(demoset::filter_episodes(d, threshold));
      continue;
    }
    const auto f = demoset::filter_episodes(d, threshold);
    CHECK(f.size() == expected);
    for (const auto& s : f.samples) CHECK(s.episode_return >= threshold);
  }
}

TEST_CASE("label_multi_mnist") {
  demoset::MultiMnistLabelOptions one;
  one.n = 200;
  one.min_digits = one.max_digits = 1;
  const auto single = demoset::label_multi_mnist(one);
  for (const auto& s : single.samples) {
    REQUIRE(s.gt.size() == 1);
    CHECK(s.target[0] == static_cast<float>(s.gt[0].value));
  }

  demoset::MultiMnistLabelOptions test_split;
  test_split.n = 100;
  test_split.min_digits = test_split.max_digits = 4;
  for (const auto& s : demoset::label_multi_mnist(test_split).samples) {
    CHECK(s.gt.size() == 4);
    int sum = 0;
    for (const auto& g : s.gt) sum += g.value;
    CHECK(s.target[0] == static_cast<float>(sum));
  }

  demoset::MultiMnistLabelOptions train;  // 60000 images of 1 to 3 digits
  const auto d = demoset::label_multi_mnist(train);
  REQUIRE(d.size() == 60000);
  std::size_t count[4] = {0, 0, 0, 0};
  for (const auto& s : d.samples) ++count[s.gt.size()];
  for (int k = 1; k <= 3; ++k) CHECK(std::abs(count[k] / 60000.0 - 1.0 / 3.0) <= 0.02);
  CHECK(d.manifest.semantics == demoset::TargetSemantics::scalar);
}

TEST_CASE("save/load round trip is exact") {
  teachers::HeuristicTeacher teacher(envkit::EnvId::falling_digit);
  envkit::EnvSpec spec = spec_of(envkit::EnvId::falling_digit, 3);
  spec.background = envkit::BackgroundSource::procedural();
  auto d = demoset::collect(spec, teacher, {60, 0.2, 1, "abc"});
  auto rng = envkit::Pcg32::from_seed(9);
  for (auto& s : d.samples) {
    s.sigma = static_cast<float>(rng.uniform() * 2.0 - 1.0) / 3.0f;
    for (auto& v : s.target) v += static_cast<float>(rng.uniform()) * 1e-3f;
  }
  const auto dir = polref_test::temp_path("demos");
  demoset::save(d, dir);
  const auto back = demoset::load(dir);
  REQUIRE(back.size() == d.size());
  CHECK(back.manifest.collection["teacher_hash"] == "abc");
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto& a = d.samples[i];
    const auto& b = back.samples[i];
    CHECK(a.frame == b.frame);
    CHECK(std::memcmp(a.target.data(), b.target.data(), a.target.size() * sizeof(float)) == 0);
    CHECK(std::memcmp(&a.sigma, &b.sigma, sizeof(float)) == 0);
    CHECK(a.episode_id == b.episode_id);
    CHECK(a.step == b.step);
    CHECK(a.action == b.action);
    CHECK(a.episode_return == b.episode_return);
    REQUIRE(a.gt.size() == b.gt.size());
    for (std::size_t k = 0; k < a.gt.size(); ++k) CHECK(a.gt[k].box == b.gt[k].box);
  }
}

TEST_CASE("manifest/shape mismatch is rejected") {
  auto d = synthetic({1.0}, 3);
  d.samples[1].target.push_back(0.0f);
  CHECK_THROWS_AS(d.validate(), std::runtime_error);
  auto e = synthetic({1.0}, 3);
  e.manifest.sample_count = 7;
  CHECK_THROWS_AS(e.validate(), std::runtime_error);
}
