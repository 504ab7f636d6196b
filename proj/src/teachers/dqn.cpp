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

#include "polref/teachers/dqn.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "polref/nn/tensor_util.hpp"

namespace polref::teachers {

namespace {

constexpr const char* kQKind = "qfunction";

torch::Tensor frame_u8(const envkit::Image& img) {
  auto t = torch::from_blob(const_cast<std::uint8_t*>(img.rgb.data()), {img.height, img.width, 3}, torch::kUInt8);
  return t.permute({2, 0, 1}).contiguous();
}

torch::Tensor to_float(const torch::Tensor& u8) { return u8.to(torch::kFloat32).div_(255.0f); }

void copy_params(QNet& dst, const QNet& src) {
  torch::NoGradGuard guard;
  auto d = dst->named_parameters(true);
  auto s = src->named_parameters(true);
  for (const auto& item : s) d[item.key()].copy_(item.value());
  auto db = dst->named_buffers(true);
  auto sb = src->named_buffers(true);
  for (const auto& item : sb) db[item.key()].copy_(item.value());
}

}  // namespace

void to_json(nlohmann::json& j, const QNetConfig& c) { j = {{"task", nn::to_string(c.task)}, {"width", c.width}}; }

void from_json(const nlohmann::json& j, QNetConfig& c) {
  c.task = nn::parse_task(j.at("task").get<std::string>());
  c.width = j.at("width").get<double>();
}

QNetImpl::QNetImpl(QNetConfig config) : config_(config) {
  const int s = nn::task_frame_size(config_.task);
  trunk_ = register_module("trunk", nn::Stack(std::vector<int64_t>{3, s, s},
                                              nn::scale_widths(nn::cnn_trunk(config_.task), config_.width, false)));
  head_ = register_module("head", nn::Stack(trunk_->out_shape(),
                                            nn::scale_widths(nn::cnn_head(config_.task, action_count()), config_.width, true)));
}

torch::Tensor QNetImpl::forward(torch::Tensor frames) { return head_->forward(trunk_->forward(frames)); }

std::vector<float> QFunction::scores(const envkit::Env& env) {
  torch::NoGradGuard guard;
  const auto q = net_->forward(nn::image_to_tensor(env.frame()).unsqueeze(0)).squeeze(0).contiguous();
  return {q.data_ptr<float>(), q.data_ptr<float>() + q.numel()};
}

void QFunction::save(const std::string& path) const {
  nlohmann::json d = net_->config();
  d["preprocessing"] = "divide_by_255";
  d["action_count"] = net_->action_count();
  nn::save_checkpoint(path, kQKind, d, *net_);
}

QFunction QFunction::load(const std::string& path) {
  const auto header = nn::read_checkpoint_header(path);
  if (header.kind != kQKind) throw std::runtime_error(path + " holds a '" + header.kind + "', not a Q-function");
  QNet net(header.descriptor.get<QNetConfig>());
  nn::load_checkpoint_parameters(path, *net);
  return QFunction(net);
}

void to_json(nlohmann::json& j, const DqnConfig& c) {
  j = {{"learning_rate", c.learning_rate}, {"grad_clip", c.grad_clip},
       {"epsilon_start", c.epsilon_start}, {"epsilon_end", c.epsilon_end},
       {"epsilon_steps", c.epsilon_steps}, {"target_update", c.target_update},
       {"replay_capacity", c.replay_capacity}, {"discount", c.discount},
       {"train_every", c.train_every},     {"batch_size", c.batch_size},
       {"double_q", c.double_q},           {"total_steps", c.total_steps},
       {"learning_starts", c.learning_starts}, {"eval_every", c.eval_every},
       {"eval_episodes", c.eval_episodes}, {"reward_threshold", c.reward_threshold},
       {"width", c.width},                 {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, DqnConfig& c) {
  DqnConfig d;
  c.learning_rate = j.value("learning_rate", d.learning_rate);
  c.grad_clip = j.value("grad_clip", d.grad_clip);
  c.epsilon_start = j.value("epsilon_start", d.epsilon_start);
  c.epsilon_end = j.value("epsilon_end", d.epsilon_end);
  c.epsilon_steps = j.value("epsilon_steps", d.epsilon_steps);
  c.target_update = j.value("target_update", d.target_update);
  c.replay_capacity = j.value("replay_capacity", d.replay_capacity);
  c.discount = j.value("discount", d.discount);
  c.train_every = j.value("train_every", d.train_every);
  c.batch_size = j.value("batch_size", d.batch_size);
  c.double_q = j.value("double_q", d.double_q);
  c.total_steps = j.value("total_steps", d.total_steps);
  c.learning_starts = j.value("learning_starts", d.learning_starts);
  c.eval_every = j.value("eval_every", d.eval_every);
  c.eval_episodes = j.value("eval_episodes", d.eval_episodes);
  c.reward_threshold = j.value("reward_threshold", d.reward_threshold);
  c.width = j.value("width", d.width);
  c.seed = j.value("seed", d.seed);
}

double epsilon_at(const DqnConfig& config, int64_t step) {
  if (config.epsilon_steps <= 0) return config.epsilon_end;
  const double frac = std::min(1.0, static_cast<double>(step) / static_cast<double>(config.epsilon_steps));
  return config.epsilon_start + (config.epsilon_end - config.epsilon_start) * frac;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("replay capacity must be positive");
  items_.reserve(std::min<std::size_t>(capacity, 1 << 16));
}

void ReplayBuffer::add(torch::Tensor obs, int action, float reward, torch::Tensor next_obs, bool done) {
  Item item{std::move(obs), action, reward, std::move(next_obs), done};
  if (items_.size() < capacity_) {
    items_.push_back(std::move(item));
  } else {
    items_[next_] = std::move(item);
  }
  next_ = (next_ + 1) % capacity_;
}

ReplayBuffer::Batch ReplayBuffer::sample(std::size_t batch, envkit::Pcg32& rng) const {
  if (items_.empty()) throw std::logic_error("sampling from an empty replay buffer");
  std::vector<torch::Tensor> obs, next;
  std::vector<int64_t> actions;
  std::vector<float> rewards, dones;
  for (std::size_t i = 0; i < batch; ++i) {
    const auto& it = items_[rng.bounded(static_cast<std::uint32_t>(items_.size()))];
    obs.push_back(it.obs);
    next.push_back(it.next_obs);
    actions.push_back(it.action);
    rewards.push_back(it.reward);
    dones.push_back(it.done ? 1.0f : 0.0f);
  }
  Batch b;
  b.obs = to_float(torch::stack(obs));
  b.next_obs = to_float(torch::stack(next));
  b.actions = torch::tensor(actions, torch::kInt64);
  b.rewards = torch::tensor(rewards, torch::kFloat32);
  b.dones = torch::tensor(dones, torch::kFloat32);
  return b;
}

double dqn_update(QNet& online, QNet& target, torch::optim::Optimizer& opt, const ReplayBuffer& buffer,
                  const DqnConfig& config, envkit::Pcg32& rng) {
  if (buffer.size() < static_cast<std::size_t>(config.batch_size)) return std::numeric_limits<double>::quiet_NaN();
  const auto b = buffer.sample(static_cast<std::size_t>(config.batch_size), rng);
  torch::Tensor y;
  {
    torch::NoGradGuard guard;
    const auto q_next_target = target->forward(b.next_obs);
    torch::Tensor next_a;
    if (config.double_q) {
      next_a = online->forward(b.next_obs).argmax(1, true);
    } else {
      next_a = q_next_target.argmax(1, true);
    }
    const auto q_next = q_next_target.gather(1, next_a).squeeze(1);
    y = b.rewards + static_cast<float>(config.discount) * (1.0f - b.dones) * q_next;
  }
  const auto q = online->forward(b.obs).gather(1, b.actions.unsqueeze(1)).squeeze(1);
  auto loss = torch::smooth_l1_loss(q, y);
  opt.zero_grad();
  loss.backward();
  torch::nn::utils::clip_grad_norm_(online->parameters(), config.grad_clip);
  opt.step();
  return loss.item<double>();
}

nn::Task task_for_env(envkit::EnvId id) {
  return id == envkit::EnvId::pacman ? nn::Task::pacman : nn::Task::falling_digit;
}

double greedy_return(ActionScorer& policy, const envkit::EnvSpec& spec, int episodes, std::uint64_t seed) {
  auto env = envkit::make_env(spec);
  double total = 0.0;
  for (int e = 0; e < episodes; ++e) {
    env->reset(seed ^ static_cast<std::uint64_t>(e));
    while (!env->done()) total += env->step(argmax(policy.scores(*env))).reward;
  }
  return total / episodes;
}

DqnResult dqn_train(const envkit::EnvSpec& env_spec, const DqnConfig& config,
                    const std::function<void(const DqnLogRow&)>& observer) {
  if (config.epsilon_start < 0 || config.epsilon_start > 1 || config.epsilon_end < 0 || config.epsilon_end > 1)
    throw std::invalid_argument("epsilon must lie in [0, 1]");
  if (config.batch_size <= 0 || config.train_every <= 0 || config.target_update <= 0 || config.total_steps <= 0)
    throw std::invalid_argument("DQN step counts must be positive");

  nn::seed_everything(config.seed);
  QNetConfig qc{task_for_env(env_spec.id), config.width};
  QNet online(qc), target(qc);
  copy_params(target, online);
  target->eval();
  torch::optim::Adam opt(online->parameters(), torch::optim::AdamOptions(config.learning_rate));
  ReplayBuffer buffer(static_cast<std::size_t>(config.replay_capacity));
  auto act_rng = envkit::Pcg32(config.seed, 0xac7);
  auto sample_rng = envkit::Pcg32(config.seed, 0x5a3);

  auto env = envkit::make_env(env_spec);
  const int n_actions = env->action_count();
  // Evaluation seeds sit in a disjoint range from training episodes.
  const std::uint64_t eval_seed = config.seed + 0x9e3779b97f4a7c15ull;

  DqnResult result{QFunction(QNet(qc)), -std::numeric_limits<double>::infinity(), false, "", {}};
  QNet best(qc);
  std::uint64_t episode = 0;
  env->reset(config.seed ^ episode);
  auto obs = frame_u8(env->frame());
  double last_loss = std::numeric_limits<double>::quiet_NaN();

  for (int64_t step = 1; step <= config.total_steps; ++step) {
    const double eps = epsilon_at(config, step - 1);
    int action;
    if (act_rng.uniform() < eps) {
      action = static_cast<int>(act_rng.bounded(static_cast<std::uint32_t>(n_actions)));
    } else {
      torch::NoGradGuard guard;
      online->eval();
      action = static_cast<int>(online->forward(to_float(obs).unsqueeze(0)).argmax(1).item<int64_t>());
      online->train();
    }
    const auto r = env->step(action);
    auto next = frame_u8(r.frame);
    buffer.add(obs, action, static_cast<float>(r.reward), next, r.done);
    obs = next;
    if (r.done) {
      ++episode;
      env->reset(config.seed ^ episode);
      obs = frame_u8(env->frame());
    }

    if (step >= config.learning_starts && step % config.train_every == 0) {
      online->train();
      const bool warm = buffer.size() >= static_cast<std::size_t>(config.batch_size);
      const double loss = dqn_update(online, target, opt, buffer, config, sample_rng);
      if (warm) {
        if (!std::isfinite(loss))
          throw nn::NumericError("DQN diverged at step " + std::to_string(step) + ": loss " + std::to_string(loss));
        last_loss = loss;
      }
    }
    if (step % config.target_update == 0) copy_params(target, online);

    if (step % config.eval_every == 0 || step == config.total_steps) {
      online->eval();
      QFunction probe(online);
      const double ret = greedy_return(probe, env_spec, static_cast<int>(config.eval_episodes), eval_seed);
      online->train();
      DqnLogRow row{step, eps, last_loss, ret};
      result.log.push_back(row);
      if (observer) observer(row);
      if (ret > result.best_eval_return) {
        result.best_eval_return = ret;
        copy_params(best, online);
      }
    }
  }
  best->eval();
  result.q = QFunction(best);
  result.reached_threshold = result.best_eval_return >= config.reward_threshold;
  if (!result.reached_threshold)
    result.warning = "best greedy return " + std::to_string(result.best_eval_return) + " is below the threshold " +
                     std::to_string(config.reward_threshold) + "; returning the best checkpoint";
  return result;
}

}  // namespace polref::teachers
