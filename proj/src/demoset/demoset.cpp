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

#include "polref/demoset/demoset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>

#include "polref/envkit/multi_mnist.hpp"

namespace polref::demoset {

namespace fs = std::filesystem;
using nlohmann::json;

const char* to_string(TargetSemantics s) {
  switch (s) {
    case TargetSemantics::q_values: return "q_values";
    case TargetSemantics::logits: return "logits";
    case TargetSemantics::scalar: return "scalar";
  }
  return "?";
}

TargetSemantics parse_semantics(const std::string& name) {
  if (name == "q_values") return TargetSemantics::q_values;
  if (name == "logits") return TargetSemantics::logits;
  if (name == "scalar") return TargetSemantics::scalar;
  throw std::invalid_argument("unknown target semantics: " + name);
}

std::size_t DemoDataset::episode_count() const {
  std::set<std::int64_t> ids;
  for (const auto& s : samples) ids.insert(s.episode_id);
  return ids.size();
}

void DemoDataset::validate() const {
  if (manifest.sample_count != samples.size())
    throw std::runtime_error("manifest sample count does not match the index");
  if (manifest.semantics == TargetSemantics::scalar && manifest.target_dim != 1)
    throw std::runtime_error("scalar targets must have length 1");
  for (const auto& s : samples) {
    if (static_cast<int>(s.target.size()) != manifest.target_dim)
      throw std::runtime_error("target length differs from the manifest");
    if (!std::isfinite(s.sigma)) throw std::runtime_error("non-finite data parameter");
  }
}

namespace {

std::string task_name(envkit::EnvId id) { return envkit::to_string(id); }

TargetSemantics semantics_of(const teachers::ActionScorer& teacher) {
  return parse_semantics(teacher.semantics());
}

}  // namespace

DemoDataset collect(const envkit::EnvSpec& spec, teachers::ActionScorer& teacher, const CollectOptions& options) {
  if (!(options.epsilon >= 0.0 && options.epsilon <= 1.0))
    throw std::invalid_argument("epsilon must lie in [0, 1]");
  auto env = envkit::make_env(spec);
  if (teacher.action_count() != env->action_count())
    throw std::invalid_argument("teacher and env action spaces differ");

  DemoDataset out;
  out.manifest.task = task_name(spec.id);
  out.manifest.semantics = semantics_of(teacher);
  out.manifest.target_dim = teacher.action_count();
  out.manifest.collection["teacher"] = teacher.name();
  out.manifest.collection["epsilons"] = json::array({options.epsilon});
  out.manifest.collection["seed"] = options.seed;
  if (!options.teacher_hash.empty()) out.manifest.collection["teacher_hash"] = options.teacher_hash;

  auto rng = envkit::Pcg32::from_seed(options.seed ^ 0x5eedULL);
  const auto n_actions = static_cast<std::uint32_t>(env->action_count());
  for (std::int64_t episode = 0; out.samples.size() < options.n_frames; ++episode) {
    env->reset(options.seed ^ static_cast<std::uint64_t>(episode));
    const std::size_t first = out.samples.size();
    double ret = 0.0;
    int step = 0;
    while (!env->done()) {
      auto target = teacher.scores(*env);
      int action = teachers::argmax(target);
      if (options.epsilon > 0.0 && rng.uniform() < options.epsilon)
        action = static_cast<int>(rng.bounded(n_actions));
      if (out.samples.size() < options.n_frames) {
        DemoSample s;
        s.frame = env->frame();
        s.target = std::move(target);
        s.episode_id = episode;
        s.step = step;
        s.action = action;
        s.gt = env->gt();
        out.samples.push_back(std::move(s));
      }
      ret += env->step(action).reward;
      ++step;
    }
    for (std::size_t i = first; i < out.samples.size(); ++i) out.samples[i].episode_return = ret;
  }
  out.manifest.sample_count = out.samples.size();
  return out;
}

DemoDataset merge(const std::vector<DemoDataset>& parts) {
  if (parts.empty()) throw std::invalid_argument("merge of zero datasets");
  DemoDataset out;
  out.manifest = parts.front().manifest;
  out.manifest.collection = json::object();
  json epsilons = json::array();
  json sources = json::array();
  std::int64_t next_episode = 0;
  for (const auto& part : parts) {
    if (part.manifest.task != out.manifest.task || part.manifest.semantics != out.manifest.semantics ||
        part.manifest.target_dim != out.manifest.target_dim)
      throw std::invalid_argument("merge of datasets with different tasks or targets");
    if (part.manifest.collection.contains("epsilons"))
      for (const auto& e : part.manifest.collection["epsilons"]) epsilons.push_back(e);
    sources.push_back(part.manifest.collection);
    std::map<std::int64_t, std::int64_t> renumber;
    for (const auto& s : part.samples) renumber.emplace(s.episode_id, 0);
    for (auto& [old_id, new_id] : renumber) new_id = next_episode++;
    for (auto s : part.samples) {
      s.episode_id = renumber[s.episode_id];
      out.samples.push_back(std::move(s));
    }
  }
  std::stable_sort(out.samples.begin(), out.samples.end(), [](const DemoSample& a, const DemoSample& b) {
    return a.episode_id != b.episode_id ? a.episode_id < b.episode_id : a.step < b.step;
  });
  out.manifest.collection["epsilons"] = epsilons;
  out.manifest.collection["sources"] = sources;
  out.manifest.sample_count = out.samples.size();
  return out;
}

DemoDataset filter_episodes(const DemoDataset& dataset, double min_return) {
  DemoDataset out;
  out.manifest = dataset.manifest;
  for (const auto& s : dataset.samples)
    if (s.episode_return >= min_return) out.samples.push_back(s);
  if (out.samples.empty()) throw std::runtime_error("episode filter removed every sample");
  const double kept_episodes = static_cast<double>(out.episode_count());
  out.manifest.sample_count = out.samples.size();
  out.manifest.collection["filter_min_return"] = std::isfinite(min_return) ? json(min_return) : json(nullptr);
  out.manifest.collection["retained_sample_fraction"] =
      static_cast<double>(out.samples.size()) / static_cast<double>(dataset.samples.size());
  out.manifest.collection["retained_episode_fraction"] =
      kept_episodes / static_cast<double>(dataset.episode_count());
  return out;
}

DemoDataset label_multi_mnist(const MultiMnistLabelOptions& options) {
  if (options.n < 1) throw std::invalid_argument("label_multi_mnist needs n >= 1");
  if (options.min_digits < 1 || options.max_digits < options.min_digits)
    throw std::invalid_argument("bad digit count range");
  DemoDataset out;
  out.manifest.task = "multi_mnist";
  out.manifest.semantics = TargetSemantics::scalar;
  out.manifest.target_dim = 1;
  out.manifest.collection["min_digits"] = options.min_digits;
  out.manifest.collection["max_digits"] = options.max_digits;
  out.manifest.collection["seed"] = options.seed;
  auto rng = envkit::Pcg32::from_seed(options.seed);
  const auto span = static_cast<std::uint32_t>(options.max_digits - options.min_digits + 1);
  out.samples.reserve(options.n);
  for (std::size_t i = 0; i < options.n; ++i) {
    const int digits = options.min_digits + static_cast<int>(rng.bounded(span));
    auto scene = envkit::mmnist_generate(digits, options.background, rng);
    DemoSample s;
    s.frame = std::move(scene.frame);
    s.target = {static_cast<float>(scene.sum_label)};
    s.episode_id = static_cast<std::int64_t>(i);
    s.gt = std::move(scene.gt);
    out.samples.push_back(std::move(s));
  }
  out.manifest.sample_count = out.samples.size();
  return out;
}

json gt_to_json(const std::vector<envkit::GroundTruthObject>& gt) {
  json arr = json::array();
  for (const auto& g : gt)
    arr.push_back({{"box", {g.box.x_ctr, g.box.y_ctr, g.box.w, g.box.h}},
                   {"kind", static_cast<int>(g.kind)},
                   {"value", g.value},
                   {"entity", g.entity_id}});
  return arr;
}

std::vector<envkit::GroundTruthObject> gt_from_json(const json& j) {
  std::vector<envkit::GroundTruthObject> out;
  for (const auto& o : j) {
    envkit::GroundTruthObject g;
    const auto& b = o.at("box");
    g.box = {b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(), b.at(3).get<double>()};
    g.kind = static_cast<envkit::ObjectKind>(o.at("kind").get<int>());
    g.value = o.at("value").get<int>();
    g.entity_id = o.at("entity").get<int>();
    out.push_back(g);
  }
  return out;
}

namespace {

std::string frame_name(std::size_t id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%07zu.png", id);
  return buf;
}

}  // namespace

void save(const DemoDataset& dataset, const std::string& dir) {
  dataset.validate();
  fs::create_directories(fs::path(dir) / "frames");
  json m = {{"version", DemoManifest::kVersion},
            {"task", dataset.manifest.task},
            {"semantics", to_string(dataset.manifest.semantics)},
            {"target_dim", dataset.manifest.target_dim},
            {"sample_count", dataset.manifest.sample_count},
            {"collection", dataset.manifest.collection}};
  std::ofstream(fs::path(dir) / "manifest.json") << m.dump(2) << "\n";
  std::ofstream index(fs::path(dir) / "index.jsonl");
  if (!index) throw std::runtime_error("cannot write " + dir + "/index.jsonl");
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    const auto& s = dataset.samples[i];
    const auto name = frame_name(i);
    envkit::write_png((fs::path(dir) / "frames" / name).string(), s.frame);
    json row = {{"id", i},           {"frame", "frames/" + name},     {"episode", s.episode_id},
                {"step", s.step},    {"return", s.episode_return},    {"target", s.target},
                {"sigma", s.sigma},  {"action", s.action},            {"gt", gt_to_json(s.gt)}};
    index << row.dump() << "\n";
  }
}

DemoDataset load(const std::string& dir) {
  std::ifstream mf(fs::path(dir) / "manifest.json");
  if (!mf) throw std::runtime_error("missing dataset manifest in " + dir);
  const json m = json::parse(mf);
  if (m.at("version").get<int>() != DemoManifest::kVersion)
    throw std::runtime_error("unsupported dataset manifest version");
  DemoDataset out;
  out.manifest.task = m.at("task").get<std::string>();
  out.manifest.semantics = parse_semantics(m.at("semantics").get<std::string>());
  out.manifest.target_dim = m.at("target_dim").get<int>();
  out.manifest.sample_count = m.at("sample_count").get<std::size_t>();
  out.manifest.collection = m.value("collection", json::object());
  std::ifstream index(fs::path(dir) / "index.jsonl");
  if (!index) throw std::runtime_error("missing dataset index in " + dir);
  std::string line;
  while (std::getline(index, line)) {
    if (line.empty()) continue;
    const json row = json::parse(line);
    DemoSample s;
    s.frame = envkit::read_png((fs::path(dir) / row.at("frame").get<std::string>()).string());
    s.target = row.at("target").get<std::vector<float>>();
    s.episode_id = row.at("episode").get<std::int64_t>();
    s.step = row.at("step").get<int>();
    s.episode_return = row.at("return").get<double>();
    s.sigma = row.at("sigma").get<float>();
    s.action = row.at("action").get<int>();
    s.gt = gt_from_json(row.at("gt"));
    out.samples.push_back(std::move(s));
  }
  out.validate();
  return out;
}

}  // namespace polref::demoset
