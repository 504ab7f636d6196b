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

#include "polref/pipeline/stages.hpp"

#include <torch/torch.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>

#include "polref/demoset/demoset.hpp"
#include "polref/nn/tensor_util.hpp"
#include "polref/pipeline/config.hpp"
#include "polref/pipeline/experiments.hpp"
#include "polref/refactor/student.hpp"
#include "polref/spacedet/space.hpp"
#include "polref/teachers/dqn.hpp"

#ifndef POLREF_GIT_REV
#define POLREF_GIT_REV "unknown"
#endif

namespace polref::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

template <class F>
auto as_config(const std::string& key, F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError("config key '" + key + "': " + e.what());
  }
}

void require_one_of(const json& c, const std::string& section, const std::string& key,
                    std::initializer_list<const char*> allowed) {
  const auto v = c.at(section).at(key).get<std::string>();
  for (const char* a : allowed)
    if (v == a) return;
  std::string list;
  for (const char* a : allowed) list += std::string(list.empty() ? "" : ", ") + a;
  throw ConfigError("config key '" + section + "." + key + "': '" + v + "' is not one of " + list);
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

// Everything a stage needs from the resolved config.
struct Context {
  json config;
  std::string hash;
  nn::Task task = nn::Task::pacman;
  std::uint64_t seed = 0;
  fs::path out;
  std::string student_tag;
  std::ostream* log = nullptr;
  json inputs = json::object();
  json outputs = json::array();

  bool multi_mnist() const { return task == nn::Task::multi_mnist; }
  const json& section(const char* name) const { return config.at(name); }

  fs::path path_or(const char* key, const fs::path& fallback) const {
    const auto p = config.at("paths").at(key).get<std::string>();
    return p.empty() ? out / fallback : fs::path(p);
  }
  fs::path train_data() const { return path_or("train_data", "data/train"); }
  fs::path test_data() const { return path_or("test_data", "data/test"); }
  fs::path teacher_dir() const { return path_or("teacher", "teacher"); }
  fs::path demos_dir() const { return path_or("demos", "demos"); }
  fs::path detector_path() const { return path_or("detector", "detector/detector.ckpt"); }
  fs::path student_path(const std::string& arch) const {
    return path_or("student", fs::path("students") / (arch + ".ckpt"));
  }

  envkit::EnvSpec env(int objects = -1) const {
    const auto& e = section("env");
    envkit::EnvSpec s;
    s.id = task == nn::Task::falling_digit ? envkit::EnvId::falling_digit : envkit::EnvId::pacman;
    s.object_count = objects > 0 ? objects : e.at("objects").get<int>();
    s.background = envkit::parse_background(e.at("background").get<std::string>());
    s.spawn = e.at("spawn").get<std::string>() == "center" ? envkit::SpawnColumn::center : envkit::SpawnColumn::random;
    return s;
  }

  // Seed of a stage: its own seed mixed with the run seed.
  std::uint64_t stage_seed(std::uint64_t own) const { return own ^ seed; }

  fs::path need(const fs::path& p, const std::string& producer) {
    if (!fs::exists(p))
      throw MissingArtifact("missing artifact " + p.string() + "; run '" + producer + "' first or set paths");
    inputs[p.string()] = fs::is_regular_file(p) ? file_hash(p) : "dir";
    return p;
  }

  void produced(const fs::path& p) { outputs.push_back(p.string()); }

  static std::string file_hash(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return nn::fnv1a64_hex(ss.str());
  }
};

std::string xml_escape(const std::string& s) {
  std::string o;
  for (char c : s) {
    if (c == '<') o += "&lt;";
    else if (c == '>') o += "&gt;";
    else if (c == '&') o += "&amp;";
    else o += c;
  }
  return o;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

void write_json(const fs::path& p, const json& j) {
  ensure_parent(p);
  std::ofstream o(p);
  if (!o) throw std::runtime_error("cannot write " + p.string());
  o << j.dump(2) << "\n";
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw MissingArtifact("cannot read " + p.string());
  auto j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw MissingArtifact(p.string() + " is not valid JSON");
  return j;
}

refactor::Arch resolve_arch(const std::string& tag, nn::Task task) {
  if (tag == "gnn") return refactor::default_gnn(task);
  return refactor::parse_arch(tag);
}

std::unique_ptr<teachers::ActionScorer> load_teacher(Context& ctx) {
  const auto meta = read_json(ctx.need(ctx.teacher_dir() / "teacher.json", "train-teacher"));
  if (meta.at("task") != nn::to_string(ctx.task))
    throw ConfigError("teacher was trained for task '" + meta.at("task").get<std::string>() + "'");
  if (meta.at("kind") == "heuristic") return std::make_unique<teachers::HeuristicTeacher>(ctx.env().id);
  const auto ckpt = ctx.need(ctx.teacher_dir() / "dqn.ckpt", "train-teacher");
  return std::make_unique<teachers::QFunction>(teachers::QFunction::load(ckpt.string()));
}

spacedet::SpaceModel load_detector_checked(Context& ctx) {
  const auto path = ctx.need(ctx.detector_path(), "train-detector");
  const auto header = nn::read_checkpoint_header(path.string());
  const auto task = header.descriptor.at("config").at("task").get<std::string>();
  if (task != nn::to_string(ctx.task)) throw ConfigError("detector was trained for task '" + task + "'");
  return spacedet::load_detector(path.string());
}

bool use_detector(const Context& ctx) { return ctx.section("refactor").at("proposals") == "detector"; }

refactor::ProposalSource proposal_source(Context& ctx) {
  if (!use_detector(ctx)) return refactor::ground_truth_proposals();
  return refactor::detector_proposals(load_detector_checked(ctx), ctx.section("refactor").at("threshold").get<double>());
}

// Student training data: labelled images for Multi-MNIST, demos otherwise.
demoset::DemoDataset training_demos(Context& ctx) {
  if (ctx.multi_mnist()) return demoset::load(ctx.need(ctx.train_data(), "gen-data").string());
  return demoset::load(ctx.need(ctx.demos_dir(), "collect-demos").string());
}

refactor::StudentDataset student_data(Context& ctx, const demoset::DemoDataset& demos) {
  ProposalConfig pc;
  pc.ground_truth = !use_detector(ctx);
  pc.threshold = ctx.section("refactor").at("threshold").get<double>();
  if (pc.ground_truth) return student_dataset(demos, pc);
  auto detector = load_detector_checked(ctx);
  return student_dataset(demos, pc, &detector);
}

refactor::StudentConfig student_model(const Context& ctx, refactor::Arch arch) {
  const auto& r = ctx.section("refactor");
  auto c = refactor::student_config(arch, ctx.task, r.at("width").get<double>());
  const auto readout = r.at("readout").get<std::string>(), edge = r.at("edge_form").get<std::string>();
  if (readout != "default") c.readout = readout == "max" ? refactor::Readout::max : refactor::Readout::add;
  if (edge != "default") c.edge_form = edge == "canonical" ? refactor::EdgeForm::canonical : refactor::EdgeForm::sender;
  return c;
}

refactor::StudentTrainConfig student_train(const Context& ctx) {
  auto t = ctx.section("refactor").at("train").get<refactor::StudentTrainConfig>();
  t.seed = ctx.stage_seed(t.seed);
  return t;
}

refactor::Student load_student_checked(Context& ctx, refactor::Arch arch, json* extra_out = nullptr) {
  const auto path = ctx.need(ctx.student_path(refactor::to_string(arch)), "refactor");
  json extra;
  auto s = refactor::load_student(path.string(), &extra);
  const std::string task = extra.value("task", std::string(nn::to_string(s->config().task)));
  if (task != nn::to_string(ctx.task) || s->config().task != ctx.task)
    throw ConfigError("student " + path.string() + " belongs to task '" + task + "', config says '" +
                      nn::to_string(ctx.task) + "'");
  if (extra_out) *extra_out = extra;
  return s;
}

std::vector<std::vector<envkit::BBox>> boxes(const refactor::StudentDataset& d) {
  std::vector<std::vector<envkit::BBox>> b;
  for (const auto& p : d.proposals) b.push_back(refactor::boxes_of(p));
  return b;
}

void write_reports(Context& ctx, const std::string& stem, const std::vector<evalsuite::MetricReport>& reports,
                   const json& meta) {
  const auto dir = ctx.out / "reports";
  fs::create_directories(dir);
  json m = meta;
  m["config_hash"] = ctx.hash;
  m["task"] = nn::to_string(ctx.task);
  evalsuite::write_reports_csv((dir / (stem + ".csv")).string(), reports);
  evalsuite::write_reports_json((dir / (stem + ".json")).string(), reports, m);
  ctx.produced(dir / (stem + ".csv"));
  ctx.produced(dir / (stem + ".json"));
  for (const auto& r : reports)
    *ctx.log << r.label << " [" << r.value << "]: " << fmt(r.mean) << " +- " << fmt(r.stdev) << "\n";
}

// ---- stages ---------------------------------------------------------------

void gen_data(Context& ctx) {
  const auto& d = ctx.section("data");
  if (ctx.multi_mnist()) {
    demoset::MultiMnistLabelOptions train;
    train.n = d.at("train_size").get<std::size_t>();
    train.min_digits = d.at("min_digits").get<int>();
    train.max_digits = d.at("max_digits").get<int>();
    train.background = envkit::parse_background(d.at("background").get<std::string>());
    train.seed = ctx.stage_seed(1);
    auto set = demoset::label_multi_mnist(train);
    set.manifest.collection["config_hash"] = ctx.hash;
    demoset::save(set, ctx.train_data().string());
    ctx.produced(ctx.train_data());
    *ctx.log << "train set: " << set.size() << " images\n";

    auto test = train;
    test.n = d.at("test_size").get<std::size_t>();
    test.min_digits = test.max_digits = d.at("test_digits").get<int>();
    test.seed = ctx.stage_seed(2);
    if (test.n > 0) {
      auto t = demoset::label_multi_mnist(test);
      t.manifest.collection["config_hash"] = ctx.hash;
      demoset::save(t, ctx.test_data().string());
      ctx.produced(ctx.test_data());
      *ctx.log << "test set: " << t.size() << " images with " << test.min_digits << " digits\n";
    }
    return;
  }
  // Environment tasks: uniformly random exploration frames for the detector.
  teachers::HeuristicTeacher scorer(ctx.env().id);
  demoset::CollectOptions o;
  o.n_frames = d.at("train_size").get<std::size_t>();
  o.epsilon = 1.0;
  o.seed = ctx.stage_seed(1);
  auto set = demoset::collect(ctx.env(), scorer, o);
  set.manifest.collection["config_hash"] = ctx.hash;
  demoset::save(set, ctx.train_data().string());
  ctx.produced(ctx.train_data());
  *ctx.log << "exploration frames: " << set.size() << "\n";
}

void train_teacher(Context& ctx) {
  if (ctx.multi_mnist()) throw ConfigError("multi_mnist has no teacher; gen-data writes the labels");
  const auto& t = ctx.section("teacher");
  const auto dir = ctx.teacher_dir();
  fs::create_directories(dir);
  json meta = {{"task", nn::to_string(ctx.task)}, {"kind", t.at("kind")}, {"config_hash", ctx.hash}};
  const auto spec = ctx.env();
  const auto eval_seed = ctx.stage_seed(0x7eac);
  if (t.at("kind") == "heuristic") {
    teachers::HeuristicTeacher h(spec.id);
    meta["eval_return"] = teachers::greedy_return(h, spec, 50, eval_seed);
  } else {
    auto dc = t.at("dqn").get<teachers::DqnConfig>();
    dc.seed = ctx.stage_seed(dc.seed);
    std::ofstream csv(dir / "log.csv");
    csv << "step,epsilon,loss,eval_return\n";
    auto r = teachers::dqn_train(spec, dc, [&](const teachers::DqnLogRow& row) {
      csv << row.step << "," << row.epsilon << "," << row.loss << "," << row.eval_return << "\n";
      *ctx.log << "step " << row.step << " eps " << fmt(row.epsilon) << " eval " << fmt(row.eval_return) << "\n";
    });
    r.q.save((dir / "dqn.ckpt").string());
    ctx.produced(dir / "dqn.ckpt");
    ctx.produced(dir / "log.csv");
    meta["best_eval_return"] = r.best_eval_return;
    meta["reached_threshold"] = r.reached_threshold;
    meta["warning"] = r.warning;
    meta["eval_return"] = teachers::greedy_return(r.q, spec, 50, eval_seed);
    if (!r.warning.empty()) *ctx.log << "warning: " << r.warning << "\n";
  }
  write_json(dir / "teacher.json", meta);
  ctx.produced(dir / "teacher.json");
  *ctx.log << "teacher return over 50 episodes: " << fmt(meta["eval_return"].get<double>()) << "\n";
}

void collect_demos(Context& ctx) {
  if (ctx.multi_mnist()) throw ConfigError("multi_mnist uses labelled images from gen-data, not demonstrations");
  auto teacher = load_teacher(ctx);
  const auto& d = ctx.section("demos");
  std::string teacher_hash = "heuristic";
  if (fs::exists(ctx.teacher_dir() / "dqn.ckpt") && teacher->name() == "dqn")
    teacher_hash = Context::file_hash(ctx.teacher_dir() / "dqn.ckpt");
  std::vector<demoset::DemoDataset> parts;
  std::uint64_t part = 0;
  for (const auto& m : d.at("mixture")) {
    for (int trial = 0; trial < m.at("trials").get<int>(); ++trial, ++part) {
      demoset::CollectOptions o;
      o.n_frames = d.at("frames_per_trial").get<std::size_t>();
      o.epsilon = m.at("epsilon").get<double>();
      o.seed = ctx.stage_seed(0xde30000 + (part << 20));
      o.teacher_hash = teacher_hash;
      parts.push_back(demoset::collect(ctx.env(), *teacher, o));
      *ctx.log << "epsilon " << o.epsilon << " trial " << trial << ": " << parts.back().size() << " frames\n";
    }
  }
  auto set = demoset::merge(parts);
  const auto before = set.size();
  if (d.at("filter").get<bool>()) {
    set = demoset::filter_episodes(set, d.at("min_return").get<double>());
    *ctx.log << "kept " << set.size() << " of " << before << " frames after the return filter\n";
  }
  set.manifest.collection["config_hash"] = ctx.hash;
  set.manifest.collection["mixture"] = d.at("mixture");
  set.manifest.collection["retained_fraction"] = static_cast<double>(set.size()) / static_cast<double>(before);
  demoset::save(set, ctx.demos_dir().string());
  ctx.produced(ctx.demos_dir());
}

void train_detector(Context& ctx) {
  const auto& d = ctx.section("detector");
  auto data = demoset::load(ctx.need(ctx.train_data(), "gen-data").string());
  std::vector<envkit::Image> frames;
  for (const auto& s : data.samples) frames.push_back(s.frame);
  const auto n_eval = std::min<std::size_t>(d.at("eval_frames").get<std::size_t>(), frames.size() / 2);
  std::size_t n_train = frames.size() - n_eval;
  if (const auto cap = d.at("frames").get<std::size_t>(); cap > 0) n_train = std::min(n_train, cap);
  const std::vector<envkit::Image> train(frames.begin(), frames.begin() + static_cast<std::ptrdiff_t>(n_train));

  const auto mode = d.at("background_module").get<std::string>();
  const bool black = ctx.multi_mnist() ? ctx.section("data").at("background") == "black"
                                       : ctx.section("env").at("background") == "black";
  const bool bg = mode == "on" || (mode == "auto" && !black);
  auto model = spacedet::space_config(ctx.task, d.at("width").get<double>(), bg);
  if (const double f = d.at("schedule_compression").get<double>(); f != 1.0) model.prior = model.prior.compressed(f);
  auto tc = d.at("train").get<spacedet::DetectorTrainConfig>();
  tc.seed = ctx.stage_seed(tc.seed);

  const auto dir = ctx.out / "detector";
  fs::create_directories(dir);
  std::ofstream csv(dir / "log.csv");
  csv << "step,loss,recon_nll,kl_pres,kl_where,kl_what,kl_depth\n";
  auto r = spacedet::train_detector(spacedet::images_to_uint8(train), model, tc, [&](const spacedet::DetectorLogRow& row) {
    csv << row.step << "," << row.loss << "," << row.recon_nll << "," << row.kl_pres << "," << row.kl_where << ","
        << row.kl_what << "," << row.kl_depth << "\n";
    *ctx.log << "step " << row.step << " loss " << fmt(row.loss) << "\n";
  });
  const auto ckpt = ctx.detector_path();
  ensure_parent(ckpt);
  spacedet::save_detector(ckpt.string(), r.model, r.steps_done);
  ctx.produced(ckpt);
  ctx.produced(dir / "log.csv");

  json meta = {{"steps_done", r.steps_done}, {"diverged", r.diverged}, {"train_frames", n_train}};
  if (n_eval > 0) {
    std::vector<envkit::Image> held(frames.end() - static_cast<std::ptrdiff_t>(n_eval), frames.end());
    std::vector<std::vector<envkit::BBox>> gt;
    for (std::size_t i = frames.size() - n_eval; i < frames.size(); ++i) {
      std::vector<envkit::BBox> b;
      for (const auto& o : data.samples[i].gt) b.push_back(o.box);
      gt.push_back(std::move(b));
    }
    const double thr = ctx.section("refactor").at("threshold").get<double>();
    std::vector<std::vector<refactor::Proposal>> dets;
    for (const auto& f : detect_all(r.model, spacedet::images_to_uint8(held))) {
      dets.push_back(refactor::split_candidates(f, thr).first);
    }
    const auto m = evalsuite::detection_metrics(dets, gt);
    meta["recall"] = m.recall;
    meta["average_precision"] = m.average_precision;
    meta["eval_frames"] = n_eval;
    *ctx.log << "held-out recall " << fmt(m.recall) << " AP " << fmt(m.average_precision) << "\n";
  }
  meta["config_hash"] = ctx.hash;
  write_json(ctx.out / "reports" / "detector.json", meta);
  ctx.produced(ctx.out / "reports" / "detector.json");
  if (r.diverged) throw nn::NumericError("detector training diverged: " + r.error);
}

void refactor_stage(Context& ctx) {
  const auto arch = resolve_arch(ctx.student_tag, ctx.task);
  const auto demos = training_demos(ctx);
  const auto data = student_data(ctx, demos);
  const auto model = student_model(ctx, arch);
  const auto train = student_train(ctx);
  const auto name = std::string(refactor::to_string(arch));

  fs::create_directories(ctx.out / "students");
  std::ofstream csv(ctx.out / "students" / (name + ".log.csv"));
  csv << "step,train_loss,val_loss\n";
  auto r = refactor::train_student(data, model, train, [&](const refactor::StudentLogRow& row) {
    csv << row.step << "," << row.train_loss << "," << row.val_loss << "\n";
    *ctx.log << "step " << row.step << " train " << fmt(row.train_loss) << " val " << fmt(row.val_loss) << "\n";
  });
  const json extra = {{"task", nn::to_string(ctx.task)},
                      {"config_hash", ctx.hash},
                      {"proposals", ctx.section("refactor").at("proposals")},
                      {"best_step", r.best_step},
                      {"best_val_loss", r.best_val_loss},
                      {"empty_graphs", r.empty_graphs}};
  const auto path = ctx.student_path(name);
  ensure_parent(path);
  refactor::save_student(path.string(), r.student, extra);
  ctx.produced(path);
  ctx.produced(ctx.out / "students" / (name + ".log.csv"));

  if (train.data_parameters) {
    const auto sig = ctx.out / "students" / (name + ".sigma.csv");
    std::ofstream o(sig);
    o << "sample,episode,step,sigma\n";
    const auto s = r.sigmas.contiguous();
    for (int64_t i = 0; i < s.size(0); ++i) {
      const auto& sample = demos.samples[static_cast<std::size_t>(i)];
      o << i << "," << sample.episode_id << "," << sample.step << "," << s[i].item<float>() << "\n";
    }
    ctx.produced(sig);
  }
  *ctx.log << name << ": best validation loss " << fmt(r.best_val_loss) << " at step " << r.best_step << "\n";
}

void evaluate(Context& ctx) {
  const auto arch = resolve_arch(ctx.student_tag, ctx.task);
  auto student = load_student_checked(ctx, arch);
  const auto& e = ctx.section("evaluate");
  const std::string name = refactor::to_string(arch);
  std::vector<evalsuite::MetricReport> reports;
  if (ctx.multi_mnist()) {
    const auto test = demoset::load(ctx.need(ctx.test_data(), "gen-data").string());
    const auto data = student_data(ctx, test);
    const auto pred = evalsuite::predict_sums(student, data.frames, boxes(data));
    const auto labels = sum_labels(test);
    std::vector<double> hit;
    for (std::size_t i = 0; i < pred.size(); ++i) hit.push_back(std::abs(pred[i] - labels[i]) < 0.5 ? 1.0 : 0.0);
    auto r = evalsuite::summarize(hit);
    r.label = name + " accuracy";
    r.value = std::to_string(ctx.section("data").at("test_digits").get<int>());
    reports.push_back(r);
  } else {
    refactor::StudentScorer scorer(student, proposal_source(ctx));
    std::vector<int> counts = e.at("objects").get<std::vector<int>>();
    if (counts.empty()) counts.push_back(ctx.section("env").at("objects").get<int>());
    for (int n : counts) {
      auto r = evalsuite::eval_policy(scorer, ctx.env(n), e.at("episodes").get<int>(),
                                      ctx.stage_seed(e.at("seed").get<std::uint64_t>()));
      r.label = name + " return";
      r.value = std::to_string(n);
      reports.push_back(r);
    }
  }
  write_reports(ctx, "evaluate_" + name, reports, {{"student", name}});
}

void sweep_stage(Context& ctx) {
  if (ctx.multi_mnist()) throw ConfigError("sweep applies to environment tasks");
  const auto& s = ctx.section("sweep");
  std::unique_ptr<teachers::ActionScorer> policy;
  std::string name;
  if (s.at("policy") == "teacher") {
    policy = load_teacher(ctx);
    name = "teacher_" + policy->name();
  } else {
    const auto arch = resolve_arch(ctx.student_tag, ctx.task);
    policy = std::make_unique<refactor::StudentScorer>(load_student_checked(ctx, arch), proposal_source(ctx));
    name = refactor::to_string(arch);
  }
  evalsuite::SweepSpec spec;
  spec.base = ctx.env();
  spec.variable = s.at("variable") == "background" ? evalsuite::SweepVariable::background
                                                   : evalsuite::SweepVariable::object_count;
  spec.values = s.at("values").get<std::vector<std::string>>();
  spec.episodes = s.at("episodes").get<int>();
  spec.seed = ctx.stage_seed(ctx.section("evaluate").at("seed").get<std::uint64_t>());
  auto reports = evalsuite::sweep(*policy, spec);
  for (auto& r : reports) r.label = name;
  write_reports(ctx, "sweep_" + name, reports, {{"policy", name}, {"variable", s.at("variable")}});
}

void robustness(Context& ctx) {
  if (ctx.multi_mnist()) throw ConfigError("robustness applies to environment tasks");
  const auto arch = resolve_arch(ctx.student_tag, ctx.task);
  const auto& r = ctx.section("robustness");
  const auto demos = training_demos(ctx);
  const auto data = student_data(ctx, demos);
  const auto name = std::string(refactor::to_string(arch));
  const auto points = evalsuite::robustness_sweep(
      data, student_model(ctx, arch), student_train(ctx), r.at("drop_rates").get<std::vector<double>>(),
      r.at("false_positives").get<int>(), ctx.env(r.at("eval_objects").get<int>()), r.at("episodes").get<int>(),
      ctx.stage_seed(ctx.section("evaluate").at("seed").get<std::uint64_t>()), proposal_source(ctx),
      [&](const evalsuite::RobustnessPoint& p) {
        *ctx.log << "drop " << p.drop_rate << " fp " << p.false_positives << ": " << fmt(p.report.mean) << "\n";
      });
  std::vector<evalsuite::MetricReport> reports;
  std::vector<double> means;
  for (const auto& p : points) {
    auto rep = p.report;
    rep.label = name + " fp=" + std::to_string(p.false_positives);
    rep.value = fmt(p.drop_rate);
    if (p.false_positives == 0) means.push_back(rep.mean);
    reports.push_back(rep);
  }
  const bool monotone = evalsuite::degrades_monotonically(means, r.at("tolerance").get<double>());
  *ctx.log << "degrades monotonically: " << (monotone ? "yes" : "no") << "\n";
  write_reports(ctx, "robustness_" + name, reports, {{"student", name}, {"degrades_monotonically", monotone}});
}

void export_features(Context& ctx) {
  const auto arch = resolve_arch(ctx.student_tag, ctx.task);
  if (!refactor::is_gnn(arch)) throw ConfigError("export-features needs a graph student");
  auto student = load_student_checked(ctx, arch);
  const auto& f = ctx.section("features");
  const auto set = ctx.multi_mnist() && fs::exists(ctx.test_data())
                       ? demoset::load(ctx.need(ctx.test_data(), "gen-data").string())
                       : training_demos(ctx);
  const auto frames_cap = std::min(set.size(), f.at("frames").get<std::size_t>());
  demoset::DemoDataset part;
  part.manifest = set.manifest;
  part.samples.assign(set.samples.begin(), set.samples.begin() + static_cast<std::ptrdiff_t>(frames_cap));
  part.manifest.sample_count = part.samples.size();
  const auto data = student_data(ctx, part);
  const auto nf = refactor::export_node_features(student, data.frames, boxes(data));
  const std::string name = refactor::to_string(arch);
  const auto path = ctx.out / "reports" / ("features_" + name + ".jsonl");
  ensure_parent(path);
  refactor::write_node_features(path.string(), nf);
  ctx.produced(path);

  // Class of each node: digit value, or 100 + object kind for non-digits.
  std::vector<int> labels;
  for (std::size_t i = 0; i < nf.frame.size(); ++i) {
    auto gt = part.samples[static_cast<std::size_t>(nf.frame[i])].gt;
    for (auto& o : gt)
      if (o.value < 0) o.value = 100 + static_cast<int>(o.kind);
    labels.push_back(evalsuite::label_boxes({nf.box[i]}, gt, f.at("iou").get<double>()).front());
  }
  json summary = {{"student", name}, {"nodes", nf.frame.size()}, {"config_hash", ctx.hash}};
  const int k = f.at("k").get<int>();
  if (static_cast<int64_t>(nf.frame.size()) >= k) {
    const auto c = evalsuite::discover_attributes(nf.features, labels, k, ctx.stage_seed(5));
    summary["purity"] = c.purity;
    summary["k"] = k;
    *ctx.log << "cluster purity (k=" << k << "): " << fmt(c.purity) << "\n";
  }
  write_json(ctx.out / "reports" / ("features_" + name + ".json"), summary);
  ctx.produced(ctx.out / "reports" / ("features_" + name + ".json"));
}

void plot(Context& ctx) {
  std::vector<fs::path> inputs;
  for (const auto& p : ctx.section("plot").at("reports")) inputs.emplace_back(p.get<std::string>());
  if (inputs.empty()) {
    const auto dir = ctx.need(ctx.out / "reports", "evaluate");
    for (const auto& e : fs::directory_iterator(dir))
      if (e.path().extension() == ".csv") inputs.push_back(e.path());
    std::sort(inputs.begin(), inputs.end());
  }
  if (inputs.empty()) throw MissingArtifact("no CSV reports under " + (ctx.out / "reports").string());
  fs::create_directories(ctx.out / "plots");
  for (const auto& in : inputs) {
    const auto reports = evalsuite::read_reports_csv(ctx.need(in, "evaluate").string());
    const auto svg = ctx.out / "plots" / (in.stem().string() + ".svg");
    std::ofstream o(svg);
    o << render_svg(reports, in.stem().string());
    ctx.produced(svg);
    *ctx.log << "wrote " << svg.string() << "\n";
  }
}

using StageFn = void (*)(Context&);

const std::map<std::string, StageFn>& stage_table() {
  static const std::map<std::string, StageFn> t = {
      {"gen-data", gen_data},         {"train-teacher", train_teacher}, {"collect-demos", collect_demos},
      {"train-detector", train_detector}, {"refactor", refactor_stage},   {"evaluate", evaluate},
      {"sweep", sweep_stage},         {"robustness", robustness},      {"export-features", export_features},
      {"plot", plot},
  };
  return t;
}

}  // namespace

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> s = {"gen-data", "train-teacher", "collect-demos", "train-detector",
                                             "refactor", "evaluate",      "sweep",         "robustness",
                                             "export-features", "plot"};
  return s;
}

void check_semantics(const json& c) {
  as_config("task", [&] { return nn::parse_task(c.at("task").get<std::string>()); });
  as_config("env.background", [&] { return envkit::parse_background(c.at("env").at("background").get<std::string>()); });
  as_config("data.background", [&] { return envkit::parse_background(c.at("data").at("background").get<std::string>()); });
  require_one_of(c, "env", "spawn", {"random", "center"});
  require_one_of(c, "teacher", "kind", {"heuristic", "dqn"});
  require_one_of(c, "detector", "background_module", {"auto", "on", "off"});
  require_one_of(c, "refactor", "proposals", {"ground_truth", "detector"});
  require_one_of(c, "refactor", "readout", {"default", "add", "max"});
  require_one_of(c, "refactor", "edge_form", {"default", "sender", "canonical"});
  require_one_of(c, "sweep", "variable", {"objects", "background"});
  require_one_of(c, "sweep", "policy", {"student", "teacher"});
  const auto task = nn::parse_task(c.at("task").get<std::string>());
  as_config("refactor.student", [&] { return resolve_arch(c.at("refactor").at("student").get<std::string>(), task); });

  const auto& d = c.at("data");
  require(d.at("min_digits").get<int>() >= 1 && d.at("min_digits") <= d.at("max_digits"),
          "config keys 'data.min_digits'/'data.max_digits': need 1 <= min <= max");
  require(d.at("train_size").get<int64_t>() >= 1, "config key 'data.train_size': must be positive");
  require(d.at("test_digits").get<int>() >= 1, "config key 'data.test_digits': must be positive");
  if (task != nn::Task::multi_mnist) require(c.at("env").at("objects").get<int>() >= 1, "config key 'env.objects': must be positive");
  for (const auto& m : c.at("demos").at("mixture")) {
    require(m.contains("epsilon") && m.contains("trials"), "config key 'demos.mixture': entries need epsilon and trials");
    const double eps = m.at("epsilon").get<double>();
    require(eps >= 0.0 && eps <= 1.0, "config key 'demos.mixture.epsilon': must lie in [0, 1]");
    require(m.at("trials").get<int>() >= 1, "config key 'demos.mixture.trials': must be positive");
  }
  require(c.at("demos").at("frames_per_trial").get<int64_t>() >= 1, "config key 'demos.frames_per_trial': must be positive");
  require(c.at("detector").at("schedule_compression").get<double>() >= 1.0,
          "config key 'detector.schedule_compression': must be >= 1");
  require(c.at("detector").at("width").get<double>() > 0.0, "config key 'detector.width': must be positive");
  require(c.at("refactor").at("width").get<double>() > 0.0, "config key 'refactor.width': must be positive");
  const double thr = c.at("refactor").at("threshold").get<double>();
  require(thr >= 0.0 && thr <= 1.0, "config key 'refactor.threshold': must lie in [0, 1]");
  const auto tr = c.at("refactor").at("train").get<refactor::StudentTrainConfig>();
  require(tr.steps >= 1 && tr.batch_size >= 1 && tr.halve_every >= 1 && tr.eval_every >= 1,
          "config section 'refactor.train': step counts and batch size must be positive");
  require(tr.validation_fraction >= 0.0 && tr.validation_fraction < 1.0,
          "config key 'refactor.train.validation_fraction': must lie in [0, 1)");
  require(tr.drop_rate >= 0.0 && tr.drop_rate <= 1.0 && tr.augment_fraction >= 0.0 && tr.augment_fraction <= 1.0 &&
              tr.false_positives >= 0,
          "config section 'refactor.train': detection hooks out of range");
  for (double p : c.at("robustness").at("drop_rates").get<std::vector<double>>())
    require(p >= 0.0 && p <= 1.0, "config key 'robustness.drop_rates': must lie in [0, 1]");
  require(c.at("robustness").at("false_positives").get<int>() >= 0, "config key 'robustness.false_positives': negative");
  require(c.at("evaluate").at("episodes").get<int>() >= 1, "config key 'evaluate.episodes': must be positive");
  require(c.at("sweep").at("episodes").get<int>() >= 1, "config key 'sweep.episodes': must be positive");
  require(c.at("robustness").at("episodes").get<int>() >= 1, "config key 'robustness.episodes': must be positive");
  require(c.at("features").at("k").get<int>() >= 1, "config key 'features.k': must be positive");
}

std::string provenance(const std::string& hash) {
  return std::string("polref ") + kVersion + " (" + POLREF_GIT_REV + ") config " + hash;
}

int run(const RunOptions& options, std::ostream& log, std::ostream& err) {
  const auto& table = stage_table();
  if (!table.count(options.subcommand)) {
    err << "error: unknown subcommand '" << options.subcommand << "'\n";
    return kConfigError;
  }
  try {
    Context ctx;
    ctx.config = load_config(options.config_path, options.overrides);
    check_semantics(ctx.config);
    ctx.task = nn::parse_task(ctx.config.at("task").get<std::string>());
    ctx.seed = ctx.config.at("seed").get<std::uint64_t>();
    ctx.hash = config_hash(ctx.config);
    ctx.out = output_dir(ctx.config);
    ctx.student_tag = options.student.empty() ? ctx.config.at("refactor").at("student").get<std::string>() : options.student;
    as_config("--student", [&] { return resolve_arch(ctx.student_tag, ctx.task); });
    ctx.log = &log;

    if (options.dry_run) {
      log << "config ok: task " << nn::to_string(ctx.task) << ", hash " << ctx.hash << ", output " << ctx.out.string()
          << "\n"
          << ctx.config.dump(2) << "\n";
      return kOk;
    }
    if (options.strict_determinism) {
      torch::set_num_threads(1);
      torch::globalContext().setDeterministicAlgorithms(true, false);
    }
    torch::manual_seed(ctx.seed);
    fs::create_directories(ctx.out);
    log << options.subcommand << ": " << provenance(ctx.hash) << "\n";

    int status = kOk;
    try {
      table.at(options.subcommand)(ctx);
    } catch (const nn::NumericError& e) {
      err << "numeric failure: " << e.what() << "\n";
      status = kNumericFailure;
    }
    json manifest = {{"stage", options.subcommand},
                     {"config_hash", ctx.hash},
                     {"seed", ctx.seed},
                     {"provenance", provenance(ctx.hash)},
                     {"student", ctx.student_tag},
                     {"strict_determinism", options.strict_determinism},
                     {"status", status},
                     {"inputs", ctx.inputs},
                     {"outputs", ctx.outputs},
                     {"config", ctx.config}};
    std::string stem = options.subcommand;
    if (options.subcommand == "refactor" || options.subcommand == "evaluate" || options.subcommand == "robustness" ||
        options.subcommand == "export-features")
      stem += std::string("_") + refactor::to_string(resolve_arch(ctx.student_tag, ctx.task));
    write_json(ctx.out / "manifests" / (stem + ".json"), manifest);
    return status;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const MissingArtifact& e) {
    err << "missing artifact: " << e.what() << "\n";
    return kMissingArtifact;
  } catch (const nn::NumericError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kNumericFailure;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

std::string render_svg(const std::vector<evalsuite::MetricReport>& reports, const std::string& title) {
  constexpr double W = 640, H = 400, L = 60, R = 20, T = 40, B = 50;
  std::vector<std::string> xs;
  std::vector<std::string> labels;
  for (const auto& r : reports) {
    if (std::find(xs.begin(), xs.end(), r.value) == xs.end()) xs.push_back(r.value);
    if (std::find(labels.begin(), labels.end(), r.label) == labels.end()) labels.push_back(r.label);
  }
  double lo = 0.0, hi = 1.0;
  if (!reports.empty()) {
    lo = hi = reports.front().mean;
    for (const auto& r : reports) {
      lo = std::min(lo, r.mean - r.stdev);
      hi = std::max(hi, r.mean + r.stdev);
    }
    if (hi - lo < 1e-9) hi = lo + 1.0;
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
  }
  const auto px = [&](std::size_t i) {
    return xs.size() < 2 ? L + (W - L - R) / 2 : L + (W - L - R) * static_cast<double>(i) / static_cast<double>(xs.size() - 1);
  };
  const auto py = [&](double v) { return T + (H - T - B) * (hi - v) / (hi - lo); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

  std::ostringstream o;
  o << std::fixed << std::setprecision(2);
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" "
    << "font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << xml_escape(title) << "</text>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double v = lo + (hi - lo) * t / 4.0;
    o << "<text x=\"" << L - 6 << "\" y=\"" << py(v) + 4 << "\" text-anchor=\"end\">" << fmt(v) << "</text>\n";
  }
  for (std::size_t i = 0; i < xs.size(); ++i)
    o << "<text x=\"" << px(i) << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">" << xml_escape(xs[i]) << "</text>\n";
  for (std::size_t s = 0; s < labels.size(); ++s) {
    const char* color = colors[s % 6];
    std::ostringstream pts;
    pts << std::fixed << std::setprecision(2);
    for (const auto& r : reports) {
      if (r.label != labels[s]) continue;
      const auto i = static_cast<std::size_t>(std::find(xs.begin(), xs.end(), r.value) - xs.begin());
      pts << px(i) << "," << py(r.mean) << " ";
      o << "<line x1=\"" << px(i) << "\" y1=\"" << py(r.mean - r.stdev) << "\" x2=\"" << px(i) << "\" y2=\""
        << py(r.mean + r.stdev) << "\" stroke=\"" << color << "\"/>\n";
      o << "<circle cx=\"" << px(i) << "\" cy=\"" << py(r.mean) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"" << pts.str() << "\"/>\n";
    o << "<text x=\"" << L + 10 << "\" y=\"" << T + 14 * (static_cast<double>(s) + 1) << "\" fill=\"" << color << "\">"
      << xml_escape(labels[s]) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace polref::pipeline
