//
// Copyright 2026 The rlu Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#include "rlu/baselines.hpp"

#include <algorithm>
#include <unordered_set>

namespace rlu {

LabeledSampleStore::LabeledSampleStore(std::vector<ExperienceSample> samples)
    : samples_(std::move(samples)) {}

LabeledSampleStore::LabeledSampleStore(const ReplayBuffer& buffer) : samples_(buffer.Samples()) {}

std::size_t LabeledSampleStore::CountFor(int env_id) const {
  return static_cast<std::size_t>(std::count_if(
      samples_.begin(), samples_.end(), [&](const ExperienceSample& s) { return s.env_id == env_id; }));
}

LabeledSampleStore LabeledSampleStore::Without(int env_id) const {
  std::vector<ExperienceSample> kept;
  kept.reserve(samples_.size());
  for (const ExperienceSample& s : samples_) {
    if (s.env_id != env_id) kept.push_back(s);
  }
  return LabeledSampleStore(std::move(kept));
}

TrainResult Lfs(const EnvironmentSet& envs, const TrainConfig& cfg) {
  envs.Validate();
  if (envs.environments.size() < 2) {
    throw Error(ErrorCode::kConfig, "learning from scratch needs a retained environment");
  }
  std::vector<GridSpec> kept;
  const std::vector<int> ids = envs.RetainedIds();
  for (int id : ids) kept.push_back(envs.environments[static_cast<std::size_t>(id)]);
  return Train(kept, cfg, ids);
}

namespace {

void PackTd(const Mlp& target, std::span<const ExperienceSample> batch, double gamma,
            Eigen::MatrixXd& inputs, Eigen::MatrixXd& targets, Eigen::MatrixXd& mask) {
  const auto n = static_cast<Eigen::Index>(batch.size());
  inputs.resize(kObservationSize, n);
  Eigen::MatrixXd next(kObservationSize, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const ExperienceSample& s = batch[static_cast<std::size_t>(i)];
    inputs.col(i) = Eigen::Map<const Eigen::VectorXd>(s.obs.data(), kObservationSize);
    next.col(i) = Eigen::Map<const Eigen::VectorXd>(s.next_obs.data(), kObservationSize);
  }
  const Eigen::MatrixXd q_next = target.ForwardBatch(next);
  targets = Eigen::MatrixXd::Zero(kNumActions, n);
  mask = Eigen::MatrixXd::Zero(kNumActions, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const ExperienceSample& s = batch[static_cast<std::size_t>(i)];
    const int a = ActionIndex(s.action);
    targets(a, i) = s.reward + (s.done ? 0.0 : gamma * q_next.col(i).maxCoeff());
    mask(a, i) = 1.0;
  }
}

}  // namespace

SignedLoss ComputeSignedLoss(const Mlp& net, const Mlp& target,
                             std::span<const ExperienceSample> batch, int unlearn_env,
                             double gamma) {
  if (batch.empty()) throw Error(ErrorCode::kEmptyBatch, "empty batch");
  std::vector<ExperienceSample> standard;
  std::vector<ExperienceSample> negated;
  for (const ExperienceSample& s : batch) (s.env_id == unlearn_env ? negated : standard).push_back(s);
  const auto total = static_cast<double>(batch.size());
  SignedLoss out;
  out.standard = net.ZeroGradients();
  out.negated = net.ZeroGradients();
  Eigen::MatrixXd inputs, targets, mask;
  if (!standard.empty()) {
    PackTd(target, standard, gamma, inputs, targets, mask);
    LossAndGradients lg = MaskedMseLoss(net, inputs, targets, mask);
    const double w = static_cast<double>(standard.size()) / total;
    out.loss += w * lg.loss;
    lg.grads.Scale(w);
    out.standard = std::move(lg.grads);
  }
  if (!negated.empty()) {
    PackTd(target, negated, gamma, inputs, targets, mask);
    LossAndGradients lg = MaskedMseLoss(net, inputs, targets, mask);
    const double w = static_cast<double>(negated.size()) / total;
    out.loss -= w * lg.loss;
    lg.grads.Scale(-w);
    out.negated = std::move(lg.grads);
  }
  return out;
}

Mlp NonTransferLfs(const LabeledSampleStore& store, int unlearn_env, const TrainConfig& cfg,
                   const OfflineConfig& offline) {
  cfg.Validate();
  if (store.empty()) throw Error(ErrorCode::kEmptyInput, "sample store is empty");
  if (offline.gradient_steps < 0 || !(offline.negated_clip > 0.0)) {
    throw Error(ErrorCode::kConfig, "offline configuration out of range");
  }
  Mlp net = Mlp::Init(cfg.net_spec, MixSeed(cfg.seed, 0x6f666669));
  Mlp target = net;
  AdamOptimizer adam(net);
  Rng rng(MixSeed(cfg.seed, 0x6f666672));
  const std::int64_t steps =
      offline.gradient_steps > 0 ? offline.gradient_steps : static_cast<std::int64_t>(store.size());
  const auto& samples = store.samples();
  const std::size_t b = std::min(samples.size(), static_cast<std::size_t>(cfg.batch_size));
  std::vector<ExperienceSample> batch(b);
  std::unordered_set<std::size_t> picked;
  for (std::int64_t step = 1; step <= steps; ++step) {
    // Floyd's sampling without replacement.
    picked.clear();
    std::size_t k = 0;
    for (std::size_t j = samples.size() - b; j < samples.size(); ++j) {
      const auto t = static_cast<std::size_t>(UniformInt(rng, 0, static_cast<int>(j)));
      const std::size_t idx = picked.insert(t).second ? t : j;
      if (idx == j) picked.insert(j);
      batch[k++] = samples[idx];
    }
    SignedLoss loss = ComputeSignedLoss(net, target, batch, unlearn_env, cfg.gamma);
    const double norm = loss.negated.Norm();
    if (norm > offline.negated_clip) loss.negated.Scale(offline.negated_clip / norm);
    loss.standard.Add(loss.negated);
    adam.Apply(net, loss.standard, cfg.learning_rate);
    if (step % cfg.target_sync_interval == 0) target = net;
  }
  return net;
}

Mlp OfflineLfs(const LabeledSampleStore& store, const TrainConfig& cfg,
               const OfflineConfig& offline) {
  return NonTransferLfs(store, -1, cfg, offline);
}

}  // namespace rlu
