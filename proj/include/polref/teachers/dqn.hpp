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
#include "polref/nn/layers.hpp"
#include "polref/nn/presets.hpp"
#include "polref/teachers/policy.hpp"

namespace polref::teachers {

struct QNetConfig {
  nn::Task task = nn::Task::pacman;
  double width = 1.0;  // channel multiplier on the plain CNN
};

void to_json(nlohmann::json& j, const QNetConfig& c);
void from_json(const nlohmann::json& j, QNetConfig& c);

// Plain CNN Q-network: frame in [0, 1] -> one value per action.
class QNetImpl : public torch::nn::Module {
 public:
  explicit QNetImpl(QNetConfig config);
  torch::Tensor forward(torch::Tensor frames);
  const QNetConfig& config() const { return config_; }
  int action_count() const { return nn::task_output_dim(config_.task); }

 private:
  QNetConfig config_;
  nn::Stack trunk_{nullptr};
  nn::Stack head_{nullptr};
};
TORCH_MODULE(QNet);

// A trained Q-function usable as a teacher.
class QFunction final : public ActionScorer {
 public:
  explicit QFunction(QNet net) : net_(std::move(net)) { net_->eval(); }

  std::vector<float> scores(const envkit::Env& env) override;
  int action_count() const override { return net_->action_count(); }
  std::string name() const override { return "dqn"; }
  std::string semantics() const override { return "q_values"; }

  QNet& net() { return net_; }
  void save(const std::string& path) const;
  static QFunction load(const std::string& path);

 private:
  QNet net_;
};

struct DqnConfig {
  double learning_rate = 1e-4;
  double grad_clip = 10.0;
  double epsilon_start = 1.0;
  double epsilon_end = 0.1;
  int64_t epsilon_steps = 100000;
  int64_t target_update = 500;
  int64_t replay_capacity = 30000;
  double discount = 0.99;
  int64_t train_every = 4;
  int64_t batch_size = 32;
  bool double_q = true;
  int64_t total_steps = 200000;
  int64_t learning_starts = 1000;  // no updates before this many env steps
  int64_t eval_every = 10000;
  int64_t eval_episodes = 20;
  double reward_threshold = 1.5;
  double width = 0.5;
  std::uint64_t seed = 0;
};

void to_json(nlohmann::json& j, const DqnConfig& c);
void from_json(const nlohmann::json& j, DqnConfig& c);

// Linear epsilon: epsilon_start at step 0, epsilon_end from epsilon_steps on.
double epsilon_at(const DqnConfig& config, int64_t step);

// Fixed-capacity FIFO of transitions. Frames are kept as uint8 tensors and
// shared between consecutive transitions of an episode.
class ReplayBuffer {
 public:
  struct Batch {
    torch::Tensor obs, actions, rewards, next_obs, dones;
  };

  explicit ReplayBuffer(std::size_t capacity);
  void add(torch::Tensor obs, int action, float reward, torch::Tensor next_obs, bool done);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  Batch sample(std::size_t batch, envkit::Pcg32& rng) const;

 private:
  struct Item {
    torch::Tensor obs;
    int action;
    float reward;
    torch::Tensor next_obs;
    bool done;
  };
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<Item> items_;
};

// One gradient step of (double) DQN with a Huber loss. Returns the loss.
// Does nothing and returns NaN when the buffer holds fewer than batch_size
// transitions.
double dqn_update(QNet& online, QNet& target, torch::optim::Optimizer& opt, const ReplayBuffer& buffer,
                  const DqnConfig& config, envkit::Pcg32& rng);

struct DqnLogRow {
  int64_t step = 0;
  double epsilon = 0.0;
  double loss = 0.0;
  double eval_return = 0.0;
};

struct DqnResult {
  QFunction q;
  double best_eval_return = 0.0;
  bool reached_threshold = false;
  std::string warning;
  std::vector<DqnLogRow> log;
};

// Trains on `env_spec` from scratch. Throws std::runtime_error (numeric
// failure) when the loss stops being finite. `observer`, when set, gets every
// log row as it is produced.
DqnResult dqn_train(const envkit::EnvSpec& env_spec, const DqnConfig& config,
                    const std::function<void(const DqnLogRow&)>& observer = {});

// Greedy mean return over `episodes` seeded episodes.
double greedy_return(ActionScorer& policy, const envkit::EnvSpec& spec, int episodes, std::uint64_t seed);

nn::Task task_for_env(envkit::EnvId id);

}  // namespace polref::teachers
