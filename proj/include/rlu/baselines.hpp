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

#ifndef RLU_BASELINES_HPP_
#define RLU_BASELINES_HPP_

#include <vector>

#include "rlu/agent.hpp"

namespace rlu {

// Stored training experience, partitioned by the env_id tag of each sample.
class LabeledSampleStore {
 public:
  LabeledSampleStore() = default;
  explicit LabeledSampleStore(std::vector<ExperienceSample> samples);
  explicit LabeledSampleStore(const ReplayBuffer& buffer);

  const std::vector<ExperienceSample>& samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  std::size_t CountFor(int env_id) const;
  // Copy without the samples of `env_id`.
  LabeledSampleStore Without(int env_id) const;

 private:
  std::vector<ExperienceSample> samples_;
};

// Fresh agent trained online on every environment except the unlearning one.
// Sample tags keep the original environment ids.
TrainResult Lfs(const EnvironmentSet& envs, const TrainConfig& cfg);

struct OfflineConfig {
  // Gradient steps; 0 means one per stored sample.
  std::int64_t gradient_steps = 0;
  // Norm bound on the gradient of the negated branch, per batch.
  double negated_clip = 1.0;
};

// One minibatch of the signed loss: mean squared TD error over the batch with
// samples of `unlearn_env` entering negated. Exposed for testing.
struct SignedLoss {
  double loss = 0.0;
  Gradients standard;
  Gradients negated;  // gradient of the negated part, before clipping
};

SignedLoss ComputeSignedLoss(const Mlp& net, const Mlp& target,
                             std::span<const ExperienceSample> batch, int unlearn_env,
                             double gamma);

// Fresh network trained offline from the store. Samples of `unlearn_env` use
// the negated TD loss (gradient clipped to `negated_clip`); all others the
// standard one. Pass unlearn_env = -1 for plain offline training.
Mlp NonTransferLfs(const LabeledSampleStore& store, int unlearn_env, const TrainConfig& cfg,
                   const OfflineConfig& offline = {});

// Offline retraining on the same code path with no negated branch.
Mlp OfflineLfs(const LabeledSampleStore& store, const TrainConfig& cfg,
               const OfflineConfig& offline = {});

}  // namespace rlu

#endif  // RLU_BASELINES_HPP_
