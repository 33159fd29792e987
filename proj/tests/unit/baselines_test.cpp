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


#include <gtest/gtest.h>

#include "rlu/baselines.hpp"

namespace rlu {
namespace {

std::vector<ExperienceSample> Collect(const EnvironmentSet& envs, int per_env) {
  std::vector<ExperienceSample> out;
  for (std::size_t e = 0; e < envs.environments.size(); ++e) {
    std::vector<ExperienceSample> walk = RandomWalkCollect(envs.environments[e], per_env, e + 1, static_cast<int>(e));
    out.insert(out.end(), walk.begin(), walk.end());
  }
  return out;
}

TEST(Lfs, NeedsRetainedEnvironment) {
  const EnvironmentSet one = GenerateEnvironmentSet(1, 1, 5, 5, 3);
  EXPECT_THROW(Lfs(one, TrainConfig{}), Error);
}

TEST(Lfs, NeverSeesUnlearningEnvironment) {
  const EnvironmentSet envs = GenerateEnvironmentSet(2, 3, 5, 5, 3, 1);
  TrainConfig cfg;
  cfg.episodes_per_env = 5;
  const TrainResult r = Lfs(envs, cfg);
  EXPECT_EQ(LabeledSampleStore(r.buffer).CountFor(1), 0u);
  EXPECT_GT(LabeledSampleStore(r.buffer).CountFor(0), 0u);
  EXPECT_GT(LabeledSampleStore(r.buffer).CountFor(2), 0u);
}

TEST(Store, PartitionsByTag) {
  const EnvironmentSet envs = GenerateEnvironmentSet(2, 3, 5, 5, 3);
  const LabeledSampleStore store(Collect(envs, 10));
  EXPECT_EQ(store.size(), 30u);
  EXPECT_EQ(store.CountFor(1), 10u);
  const LabeledSampleStore kept = store.Without(1);
  EXPECT_EQ(kept.size(), 20u);
  EXPECT_EQ(kept.CountFor(1), 0u);
}

TEST(SignedLoss, SignRule) {
  const EnvironmentSet envs = GenerateEnvironmentSet(2, 2, 5, 5, 3);
  const std::vector<ExperienceSample> samples = Collect(envs, 8);
  const Mlp net = Mlp::Init(MlpSpec{}, 1);
  const Mlp target = Mlp::Init(MlpSpec{}, 2);
  const SignedLoss plain = ComputeSignedLoss(net, target, samples, -1, 0.9);
  const SignedLoss flipped = ComputeSignedLoss(net, target, std::span(samples).first(8), 0, 0.9);
  const SignedLoss standard_only = ComputeSignedLoss(net, target, std::span(samples).first(8), -1, 0.9);
  EXPECT_GT(plain.loss, 0.0);
  EXPECT_NEAR(flipped.loss, -standard_only.loss, 1e-12);
  EXPECT_LT((flipped.negated.Flatten() + standard_only.standard.Flatten()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(plain.negated.Norm(), 0.0);
  // Mixed batch: each part weighted by its share.
  const SignedLoss mixed = ComputeSignedLoss(net, target, samples, 0, 0.9);
  const SignedLoss rest = ComputeSignedLoss(net, target, std::span(samples).last(8), -1, 0.9);
  EXPECT_NEAR(mixed.loss, 0.5 * rest.loss - 0.5 * standard_only.loss, 1e-12);
  EXPECT_THROW(ComputeSignedLoss(net, target, {}, 0, 0.9), Error);
}

TEST(NonTransfer, WithoutUnlearningSamplesMatchesOffline) {
  const EnvironmentSet envs = GenerateEnvironmentSet(2, 3, 5, 5, 3);
  const LabeledSampleStore store = LabeledSampleStore(Collect(envs, 40)).Without(0);
  TrainConfig cfg;
  cfg.seed = 4;
  OfflineConfig off;
  off.gradient_steps = 50;
  EXPECT_TRUE(NonTransferLfs(store, 0, cfg, off) == OfflineLfs(store, cfg, off));
}

TEST(NonTransfer, NegatedBranchChangesResultAndStaysFinite) {
  const EnvironmentSet envs = GenerateEnvironmentSet(2, 3, 5, 5, 3);
  const LabeledSampleStore store(Collect(envs, 40));
  TrainConfig cfg;
  cfg.seed = 4;
  OfflineConfig off;
  off.gradient_steps = 200;
  const Mlp a = NonTransferLfs(store, 0, cfg, off);
  EXPECT_TRUE(a.AllFinite());
  EXPECT_FALSE(a == OfflineLfs(store, cfg, off));
  EXPECT_TRUE(a == NonTransferLfs(store, 0, cfg, off));
  off.negated_clip = 0.0;
  EXPECT_THROW(NonTransferLfs(store, 0, cfg, off), Error);
  EXPECT_THROW(NonTransferLfs(LabeledSampleStore{}, 0, cfg, OfflineConfig{}), Error);
}

}  // namespace
}  // namespace rlu
