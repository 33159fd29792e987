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

#ifndef RLU_POISON_HPP_
#define RLU_POISON_HPP_

#include <ostream>
#include <string>
#include <vector>

#include "rlu/decremental.hpp"

namespace rlu {

enum class PoisonRule {
  kFlip,       // binary flag -> 1 - flag
  kNudgePlus,  // coordinate + one cell, clamped to [0, 1]
  kNudgeMinus,
};

struct PoisonEdit {
  int component = 0;
  PoisonRule rule = PoisonRule::kFlip;

  friend bool operator==(const PoisonEdit&, const PoisonEdit&) = default;
};

// One poisoning action g: edits applied to the true next observation.
struct PoisonAction {
  std::vector<PoisonEdit> edits;

  bool IsIdentity() const { return edits.empty(); }
  std::string Name() const;
  friend bool operator==(const PoisonAction&, const PoisonAction&) = default;
};

// Throws kInvalidPattern unless every edit suits its component (flips on the
// flags 4..7, nudges on the coordinates 0..3), components are distinct and at
// most `level` are touched.
void ValidatePoisonAction(const PoisonAction& g, int level);

// Identity, the 4 flag flips and the 8 coordinate nudges, then compound
// patterns of 2..level edits on distinct components, up to `cap` entries.
// Deterministic. level 0 yields only the identity.
std::vector<PoisonAction> BuildPoisonActionSpace(int level, int cap = 25);

// Applies the edits in order. Nudges move a coordinate by one cell of the
// grid frame.
Observation ApplyEdits(const GridSpec& spec, const std::vector<PoisonEdit>& edits,
                       const Observation& obs);

// True s' from (s, a), then g's edits.
Observation ApplyPoison(const GridSpec& spec, const PoisonAction& g, const Observation& s,
                        Action a);

// Accumulated wrap of the unlearning environment's transitions. Composing
// appends the new edits; the oldest components are dropped when more than
// `level` would differ.
class PoisonWrap {
 public:
  explicit PoisonWrap(int level = 3) : level_(level) {}

  void Compose(const PoisonAction& g);
  const std::vector<PoisonEdit>& edits() const { return edits_; }
  int level() const { return level_; }
  ObservationFilter Filter() const;

 private:
  int level_;
  std::vector<PoisonEdit> edits_;
};

// Concatenated action distributions at fixed probe cells of the unlearning
// environment (4 entries per probe).
using PolicyEmbedding = Eigen::VectorXd;

std::vector<Cell> SelectEmbeddingCells(const GridSpec& spec, int k, std::uint64_t seed);
PolicyEmbedding EmbedPolicy(const Mlp& net, const GridSpec& spec, const std::vector<Cell>& cells,
                            double temperature = 1.0);

// KL(p || q) with 1e-8 added to every entry before renormalizing.
double SmoothedKl(std::span<const double> p, std::span<const double> q);

struct PoisonReward {
  double kl = 0.0;        // mean KL over the unlearning-env probes
  double retained = 0.0;  // sum over retained probes of sum_a pi(a|s) r(s, a)
  double total = 0.0;
};

// lambda1 * mean_s KL(pi_i(s) || pi_prime(s)) + lambda2 * retained term.
// `current` and `reference` are embeddings over the same probes; throws
// kMisalignedProbes otherwise.
PoisonReward ComputePoisonReward(const PolicyEmbedding& current, const PolicyEmbedding& reference,
                                 const Mlp& net, const RetainProbeSet& probes, double lambda1,
                                 double lambda2, double temperature = 1.0);

struct PoisonConfig {
  int poison_level = 3;
  int epochs = 20;
  double lambda1 = 1.0;
  double lambda2 = 0.01;
  // Agent episodes per epoch in the poisoned unlearning env and, round-robin,
  // in the retained envs.
  int inner_episodes = 20;
  int retain_episodes = 20;
  double epsilon = 0.15;
  int embedding_probes = 16;
  int probes_per_env = 32;
  int action_space_cap = 25;
  double strategy_gamma = 0.9;
  double strategy_learning_rate = 1e-3;
  int strategy_batch = 16;
  int strategy_updates = 10;  // gradient steps on replayed records per epoch
  std::uint64_t seed = 0;

  void Validate() const;
};

struct PoisonRecord {
  PolicyEmbedding before;
  int action = 0;  // index into the action space
  PolicyEmbedding after;
  PoisonReward reward;
};

// Discrete Q-learner over the action space: embedding -> 64 -> |G|.
class PoisoningStrategy {
 public:
  PoisoningStrategy(int embedding_size, int action_count, const PoisonConfig& cfg);

  // Greedy with probability 1 - eps, otherwise uniform over the others.
  int Select(const PolicyEmbedding& state, double epsilon, Rng& rng) const;
  Eigen::VectorXd Values(const PolicyEmbedding& state) const;
  // TD updates on minibatches replayed from `records`; returns the last loss.
  double Update(const std::vector<PoisonRecord>& records, Rng& rng);

  Mlp& net() { return net_; }
  const Mlp& net() const { return net_; }

 private:
  PoisonConfig cfg_;
  Mlp net_;
  Mlp target_;
  AdamOptimizer adam_;
};

struct PoisonTraceRow {
  int epoch = 0;
  int action = 0;
  PoisonReward reward;
};

void WritePoisonTraceCsv(std::ostream& out, const std::vector<PoisonTraceRow>& trace);

// State threaded through the poisoning epochs.
struct PoisonSession {
  // `memory` (optional) preloads the agent's replay with the original
  // training samples of the retained envs.
  PoisonSession(const Mlp& net, const EnvironmentSet& envs, const PoisonConfig& cfg,
                const TrainConfig& train, const ReplayBuffer* memory = nullptr);

  EnvironmentSet envs;
  PoisonConfig cfg;
  std::vector<PoisonAction> space;
  std::vector<Cell> embedding_cells;
  PolicyEmbedding reference;  // pre-unlearning policy at the embedding cells
  RetainProbeSet probes;
  PoisonWrap wrap;
  DqnTrainer trainer;
  PoisoningStrategy strategy;
  PolicyEmbedding state;
  Rng rng;
  double temperature;
  std::size_t retain_cursor = 0;
};

// One epoch: pick g, compose it onto the wrap, retrain in the poisoned
// unlearning env and the retained envs (interleaved), score the new policy.
PoisonRecord PoisonEpoch(PoisonSession& session);

struct PoisonResult {
  Mlp net;
  std::vector<PoisonRecord> records;
  std::vector<PoisonTraceRow> trace;
  std::vector<PoisonEdit> final_wrap;
};

PoisonResult RunPoisoning(const Mlp& net, const EnvironmentSet& envs, const PoisonConfig& cfg,
                          const TrainConfig& train, const ReplayBuffer* memory = nullptr,
                          const EpochObserver& observer = nullptr);

}  // namespace rlu

#endif  // RLU_POISON_HPP_
