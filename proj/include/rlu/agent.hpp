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

#ifndef RLU_AGENT_HPP_
#define RLU_AGENT_HPP_

#include <array>
#include <functional>
#include <optional>
#include <ostream>
#include <vector>

#include "rlu/gridworld.hpp"
#include "rlu/nn.hpp"

namespace rlu {

using ActionValues = std::array<double, kNumActions>;
using PolicyDist = std::array<double, kNumActions>;

struct ExperienceSample {
  Observation obs{};
  Action action = Action::kUp;
  double reward = 0.0;
  Observation next_obs{};
  bool done = false;
  int env_id = 0;
};

// Bounded FIFO of experience, tagged by environment.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 200000);

  void Add(const ExperienceSample& sample);
  std::size_t size() const { return samples_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return samples_.empty(); }

  // Oldest first.
  std::vector<ExperienceSample> Samples() const;
  std::vector<ExperienceSample> SamplesFor(int env_id) const;
  // Uniform without replacement; returns min(n, size()) samples.
  std::vector<ExperienceSample> SampleBatch(std::size_t n, Rng& rng) const;

 private:
  const ExperienceSample& at(std::size_t i) const;

  std::size_t capacity_;
  std::size_t head_ = 0;  // index of the oldest sample once full
  std::vector<ExperienceSample> samples_;
};

struct TrainConfig {
  double gamma = 0.9;
  double epsilon = 0.15;
  int episodes_per_env = 150;
  int batch_size = 32;
  int target_sync_interval = 200;
  std::uint64_t seed = 0;
  double softmax_temperature = 1.0;
  double learning_rate = 1e-3;
  std::size_t replay_capacity = 200000;
  // Gradient steps wait until the buffer holds this many samples.
  int warmup_samples = 256;
  MlpSpec net_spec;

  void Validate() const;
};

// Best action with probability 1 - eps, every other action with eps / 3.
// Ties in the maximum go to the earliest action in canonical order.
Action SelectAction(const ActionValues& q, double epsilon, Rng& rng);
Action GreedyAction(const ActionValues& q);

ActionValues QValues(const Mlp& net, const Observation& obs);
Action GreedyAction(const Mlp& net, const Observation& obs);

PolicyDist Softmax(const ActionValues& q, double temperature);
PolicyDist PolicyDistribution(const Mlp& net, const Observation& obs,
                              double temperature = 1.0);

// Maps the true observation of `pos` to what the agent is shown. Used by the
// poisoning method to wrap an environment's transitions: the episode goes on
// from the cell the shown observation encodes when that cell is free and not
// the target.
using ObservationFilter =
    std::function<Observation(const GridSpec& spec, Cell pos, const Observation& truth)>;

struct EpisodeLogRow {
  int episode = 0;
  int env_id = 0;
  int steps = 0;
  double reward = 0.0;
  double loss = 0.0;  // mean TD loss over the episode's gradient steps
};

void WriteTrainingLogCsv(std::ostream& out, const std::vector<EpisodeLogRow>& log);

// Target-network DQN. Holds the online and target networks, the optimizer
// state and the replay buffer so training can be resumed (the poisoning
// method keeps retraining the same agent).
class DqnTrainer {
 public:
  DqnTrainer(const TrainConfig& cfg, Mlp net);
  explicit DqnTrainer(const TrainConfig& cfg);

  // Runs one epsilon-greedy episode with one gradient step per environment
  // step. Next observations pass through `filter` when given.
  EpisodeLogRow RunEpisode(const GridSpec& spec, int env_id,
                           const ObservationFilter* filter = nullptr);

  // TD targets r + gamma * max_a' Q_target(s', a'), no bootstrap on terminal
  // samples, packed for MaskedMseLoss.
  void BuildTdTargets(std::span<const ExperienceSample> batch,
                      Eigen::MatrixXd& inputs, Eigen::MatrixXd& targets,
                      Eigen::MatrixXd& mask) const;

  // One minibatch update; returns the TD loss, or nullopt during warmup.
  std::optional<double> TrainStep();

  // Preloads replay memory, e.g. with samples from an earlier run.
  void SeedReplay(std::span<const ExperienceSample> samples);

  const Mlp& net() const { return net_; }
  const Mlp& target_net() const { return target_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  const TrainConfig& config() const { return cfg_; }
  std::int64_t env_steps() const { return env_steps_; }
  std::int64_t gradient_steps() const { return gradient_steps_; }
  int episodes() const { return episodes_; }
  Rng& rng() { return rng_; }

 private:
  TrainConfig cfg_;
  Mlp net_;
  Mlp target_;
  AdamOptimizer adam_;
  ReplayBuffer buffer_;
  Rng rng_;
  std::int64_t env_steps_ = 0;
  std::int64_t gradient_steps_ = 0;
  int episodes_ = 0;
};

struct TrainResult {
  Mlp net;
  ReplayBuffer buffer;
  std::vector<EpisodeLogRow> log;
  std::int64_t gradient_steps = 0;
};

// Round-robin episodes over `envs` (episode k runs in environment k mod n).
// `env_ids` overrides the ids used to tag samples; by default 0..n-1.
TrainResult Train(const std::vector<GridSpec>& envs, const TrainConfig& cfg,
                  const std::vector<int>& env_ids = {});
TrainResult Train(const EnvironmentSet& envs, const TrainConfig& cfg);

struct NoiseRange {
  double lo = -0.1;
  double hi = 0.1;
};

struct EvalStats {
  double mean_steps = 0.0;
  double mean_reward = 0.0;
  double mean_collisions = 0.0;
  double success_rate = 0.0;
};

// Maps an observation to the agent's action. Evaluation, rollouts and the
// truth-ratio metric accept any policy, not just networks.
using PolicyFn = std::function<Action(const GridSpec& spec, Cell pos)>;

// The returned policy keeps its own copy of `net`.
PolicyFn GreedyPolicy(const Mlp& net);

// Greedy episodes from start cells drawn with `seed`. With `noise`, one
// randomly chosen component of the softmax action distribution is shifted by
// a uniform draw from the range, the distribution renormalized, and its
// argmax taken.
EvalStats Evaluate(const GridSpec& spec, const Mlp& net, int episodes,
                   std::uint64_t seed, std::optional<NoiseRange> noise = std::nullopt,
                   double temperature = 1.0);
EvalStats Evaluate(const GridSpec& spec, const PolicyFn& policy, int episodes,
                   std::uint64_t seed);

struct Rollout {
  std::vector<Cell> states;
  std::vector<Action> actions;
  double reward = 0.0;
  int collisions = 0;
  bool reached_target = false;
};

Rollout RunPolicy(const GridSpec& spec, const PolicyFn& policy, Cell start);

// Ordered (state, action) pairs observed in one environment.
struct Trajectory {
  int env_id = 0;
  std::vector<Cell> states;
  std::vector<Action> actions;

  std::size_t size() const { return actions.size(); }
  bool empty() const { return actions.empty(); }
};

Trajectory ToTrajectory(const Rollout& rollout, int env_id = 0);

// Binary sample files (little-endian doubles), for offline baselines.
void SaveSamples(const std::vector<ExperienceSample>& samples, const std::string& path);
std::vector<ExperienceSample> LoadSamples(const std::string& path);

// Uniform random actions from `start` for exactly `length` steps; the walk
// restarts at a fresh start cell if it reaches the target.
Trajectory RandomWalkTrajectory(const GridSpec& spec, int length, std::uint64_t seed,
                                int env_id = 0);

// Exactly m uniform-random transitions; episodes restart at a fresh start cell
// on termination or at the episode cap.
std::vector<ExperienceSample> RandomWalkCollect(const GridSpec& spec, int m,
                                                std::uint64_t seed, int env_id = 0);

}  // namespace rlu

#endif  // RLU_AGENT_HPP_
