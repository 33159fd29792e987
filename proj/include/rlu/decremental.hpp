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

#ifndef RLU_DECREMENTAL_HPP_
#define RLU_DECREMENTAL_HPP_

#include <ostream>
#include <vector>

#include "rlu/agent.hpp"

namespace rlu {

struct RetainProbe {
  int env_id = 0;
  Cell cell;
  Observation obs{};
  ActionValues reference{};  // frozen Q of the pre-unlearning network
  ActionValues rewards{};    // one-step reward of each action
};

// Fixed states from every environment except the unlearning one, with their
// reference action values. Built once and never mutated.
class RetainProbeSet {
 public:
  RetainProbeSet() = default;

  // `per_env` cells per retained environment, uniform without replacement
  // over its free cells (all of them when fewer).
  static RetainProbeSet Build(const Mlp& reference, const EnvironmentSet& envs,
                              int per_env, std::uint64_t seed);
  // Probes from explicit (env_id, cell) pairs.
  static RetainProbeSet FromCells(const Mlp& reference, const std::vector<GridSpec>& envs,
                                  const std::vector<std::pair<int, Cell>>& cells);

  const std::vector<RetainProbe>& probes() const { return probes_; }
  std::size_t size() const { return probes_.size(); }
  bool empty() const { return probes_.empty(); }

  RetainProbeSet Subset(const std::vector<std::size_t>& indices) const;

  Eigen::MatrixXd InputMatrix() const;
  Eigen::MatrixXd ReferenceMatrix() const;

 private:
  std::vector<RetainProbe> probes_;
};

struct DecrementalConfig {
  int m = 0;  // random-walk samples in the unlearning env; 0 = 5 per grid cell
  int epochs = 300;
  int batch_size = 32;
  double learning_rate = 1e-3;
  double w1 = 1.0;
  double w2 = 1.0;
  int probes_per_env = 32;
  // Probes per minibatch step; 0 uses the whole probe set every step.
  int probe_batch = 0;
  std::uint64_t seed = 0;

  int ResolvedM(const GridSpec& spec) const;
  void Validate() const;
};

struct DecrementalTerms {
  double term1 = 0.0;
  double term2 = 0.0;
  double total = 0.0;
};

struct DecrementalLoss {
  DecrementalTerms terms;
  Gradients grads;
};

// term1 = mean over `unlearn_inputs` columns of max_a |Q(s, a)|;
// term2 = mean over probes of max_a |Q(s, a) - Q_ref(s, a)|;
// total = w1 term1 + w2 term2, with its (sub)gradient. Ties in the max take
// the first action.
DecrementalLoss ComputeDecrementalLoss(const Mlp& net, const Eigen::MatrixXd& unlearn_inputs,
                                       const RetainProbeSet& probes, double w1 = 1.0,
                                       double w2 = 1.0);

struct LossTraceRow {
  int epoch = 0;
  DecrementalTerms terms;
};

using LossTrace = std::vector<LossTraceRow>;

void WriteLossTraceCsv(std::ostream& out, const LossTrace& trace);

struct DecrementalResult {
  Mlp net;
  LossTrace trace;  // full-data terms measured after each epoch
  std::vector<ExperienceSample> unlearn_samples;
  RetainProbeSet probes;
};

// Called after every epoch with the current network.
using EpochObserver = std::function<void(int epoch, const Mlp& net)>;

// Collects m random-walk samples in the unlearning env, freezes the probe
// set, then runs `epochs` passes of shuffled minibatch Adam steps over the
// collected states.
DecrementalResult UnlearnDecremental(const Mlp& net, const EnvironmentSet& envs,
                                     const DecrementalConfig& cfg,
                                     const EpochObserver& observer = nullptr);

// Single-environment variant: pushes Q(s, a) down along `forget` and holds
// Q(s, a) at its reference value on the state-action pairs of `keep` that do
// not occur in `forget`. One epoch is one full-batch Adam step.
Mlp UnlearnTrajectory(const Mlp& net, const GridSpec& spec, const Trajectory& forget,
                      const std::vector<Trajectory>& keep, const DecrementalConfig& cfg);

}  // namespace rlu

#endif  // RLU_DECREMENTAL_HPP_
