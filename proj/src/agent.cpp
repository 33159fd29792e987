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

#include "rlu/agent.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <numeric>

namespace rlu {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw Error(ErrorCode::kConfig, "replay capacity must be positive");
}

void ReplayBuffer::Add(const ExperienceSample& sample) {
  if (samples_.size() < capacity_) {
    samples_.push_back(sample);
    return;
  }
  samples_[head_] = sample;
  head_ = (head_ + 1) % capacity_;
}

const ExperienceSample& ReplayBuffer::at(std::size_t i) const {
  return samples_[(head_ + i) % samples_.size()];
}

std::vector<ExperienceSample> ReplayBuffer::Samples() const {
  std::vector<ExperienceSample> out;
  out.reserve(samples_.size());
  for (std::size_t i = 0; i < samples_.size(); ++i) out.push_back(at(i));
  return out;
}

std::vector<ExperienceSample> ReplayBuffer::SamplesFor(int env_id) const {
  std::vector<ExperienceSample> out;
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    if (at(i).env_id == env_id) out.push_back(at(i));
  }
  return out;
}

std::vector<ExperienceSample> ReplayBuffer::SampleBatch(std::size_t n, Rng& rng) const {
  const std::size_t size = samples_.size();
  n = std::min(n, size);
  std::vector<ExperienceSample> out;
  out.reserve(n);
  // Floyd's algorithm: n distinct indices in O(n) draws.
  std::vector<std::size_t> chosen;
  chosen.reserve(n);
  for (std::size_t j = size - n; j < size; ++j) {
    const auto t = std::uniform_int_distribution<std::size_t>(0, j)(rng);
    if (std::find(chosen.begin(), chosen.end(), t) == chosen.end()) {
      chosen.push_back(t);
    } else {
      chosen.push_back(j);
    }
  }
  for (std::size_t idx : chosen) out.push_back(samples_[idx]);
  return out;
}

void TrainConfig::Validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw Error(ErrorCode::kConfig, "gamma must lie in (0,1)");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw Error(ErrorCode::kConfig, "epsilon must lie in [0,1]");
  if (episodes_per_env < 0) throw Error(ErrorCode::kConfig, "episodes_per_env must be >= 0");
  if (batch_size < 1) throw Error(ErrorCode::kConfig, "batch_size must be >= 1");
  if (target_sync_interval < 1) throw Error(ErrorCode::kConfig, "target_sync_interval must be >= 1");
  if (!(softmax_temperature > 0.0)) throw Error(ErrorCode::kConfig, "temperature must be > 0");
  if (!(learning_rate >= 0.0)) throw Error(ErrorCode::kConfig, "learning_rate must be >= 0");
  if (net_spec.layer_sizes.front() != kObservationSize ||
      net_spec.layer_sizes.back() != kNumActions) {
    throw Error(ErrorCode::kConfig, "Q-network must map 10 observation features to 4 actions");
  }
}

Action GreedyAction(const ActionValues& q) {
  int best = 0;
  for (int a = 1; a < kNumActions; ++a) {
    if (q[static_cast<std::size_t>(a)] > q[static_cast<std::size_t>(best)]) best = a;
  }
  return ActionFromIndex(best);
}

Action SelectAction(const ActionValues& q, double epsilon, Rng& rng) {
  const Action best = GreedyAction(q);
  if (epsilon <= 0.0 || Uniform01(rng) >= epsilon) return best;
  // One of the three non-greedy actions, uniformly.
  int k = UniformInt(rng, 0, kNumActions - 2);
  if (k >= ActionIndex(best)) ++k;
  return ActionFromIndex(k);
}

ActionValues QValues(const Mlp& net, const Observation& obs) {
  const Eigen::VectorXd q = net.Forward(obs);
  if (q.size() != kNumActions) {
    throw Error(ErrorCode::kDimensionMismatch, "network does not output 4 action values");
  }
  return {q[0], q[1], q[2], q[3]};
}

Action GreedyAction(const Mlp& net, const Observation& obs) {
  return GreedyAction(QValues(net, obs));
}

PolicyDist Softmax(const ActionValues& q, double temperature) {
  if (!(temperature > 0.0)) throw Error(ErrorCode::kConfig, "temperature must be > 0");
  const double m = *std::max_element(q.begin(), q.end());
  PolicyDist p{};
  double total = 0.0;
  for (std::size_t a = 0; a < p.size(); ++a) {
    p[a] = std::exp((q[a] - m) / temperature);
    total += p[a];
  }
  for (double& v : p) v /= total;
  return p;
}

PolicyDist PolicyDistribution(const Mlp& net, const Observation& obs, double temperature) {
  return Softmax(QValues(net, obs), temperature);
}

void WriteTrainingLogCsv(std::ostream& out, const std::vector<EpisodeLogRow>& log) {
  out << "episode,env_id,steps,reward,loss\n";
  for (const EpisodeLogRow& r : log) {
    out << r.episode << ',' << r.env_id << ',' << r.steps << ',' << r.reward << ','
        << r.loss << '\n';
  }
}

DqnTrainer::DqnTrainer(const TrainConfig& cfg, Mlp net)
    : cfg_(cfg),
      net_(std::move(net)),
      target_(net_),
      adam_(net_),
      buffer_(cfg.replay_capacity),
      rng_(MixSeed(cfg.seed, 0x64716e)) {
  cfg_.Validate();
}

DqnTrainer::DqnTrainer(const TrainConfig& cfg)
    : DqnTrainer(cfg, Mlp::Init(cfg.net_spec, MixSeed(cfg.seed, 0x696e6974))) {}

void DqnTrainer::BuildTdTargets(std::span<const ExperienceSample> batch,
                                Eigen::MatrixXd& inputs, Eigen::MatrixXd& targets,
                                Eigen::MatrixXd& mask) const {
  const auto n = static_cast<Eigen::Index>(batch.size());
  inputs.resize(kObservationSize, n);
  Eigen::MatrixXd next(kObservationSize, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const ExperienceSample& s = batch[static_cast<std::size_t>(i)];
    inputs.col(i) = Eigen::Map<const Eigen::VectorXd>(s.obs.data(), kObservationSize);
    next.col(i) = Eigen::Map<const Eigen::VectorXd>(s.next_obs.data(), kObservationSize);
  }
  const Eigen::MatrixXd next_q = target_.ForwardBatch(next);
  targets = Eigen::MatrixXd::Zero(kNumActions, n);
  mask = Eigen::MatrixXd::Zero(kNumActions, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const ExperienceSample& s = batch[static_cast<std::size_t>(i)];
    const double bootstrap = s.done ? 0.0 : cfg_.gamma * next_q.col(i).maxCoeff();
    const int a = ActionIndex(s.action);
    targets(a, i) = s.reward + bootstrap;
    mask(a, i) = 1.0;
  }
}

std::optional<double> DqnTrainer::TrainStep() {
  if (buffer_.size() < static_cast<std::size_t>(std::max(cfg_.warmup_samples, cfg_.batch_size))) {
    return std::nullopt;
  }
  const auto batch = buffer_.SampleBatch(static_cast<std::size_t>(cfg_.batch_size), rng_);
  Eigen::MatrixXd inputs, targets, mask;
  BuildTdTargets(batch, inputs, targets, mask);
  LossAndGradients lg = MaskedMseLoss(net_, inputs, targets, mask);
  adam_.Apply(net_, lg.grads, cfg_.learning_rate);
  ++gradient_steps_;
  if (gradient_steps_ % cfg_.target_sync_interval == 0) target_ = net_;
  return lg.loss;
}

EpisodeLogRow DqnTrainer::RunEpisode(const GridSpec& spec, int env_id,
                                     const ObservationFilter* filter) {
  const std::vector<Cell> starts = spec.StartCells();
  Cell pos = starts[static_cast<std::size_t>(UniformInt(rng_, 0, static_cast<int>(starts.size()) - 1))];
  Observation obs = Observe(spec, pos);
  EpisodeLogRow row;
  row.episode = episodes_++;
  row.env_id = env_id;
  double loss_sum = 0.0;
  int loss_count = 0;
  for (int t = 0; t < spec.episode_cap(); ++t) {
    const Action a = SelectAction(QValues(net_, obs), cfg_.epsilon, rng_);
    const StepResult r = Step(spec, pos, a);
    Observation next = Observe(spec, r.next_pos);
    if (filter) next = (*filter)(spec, r.next_pos, next);
    buffer_.Add({obs, a, r.reward, next, r.done, env_id});
    ++env_steps_;
    row.reward += r.reward;
    ++row.steps;
    if (auto loss = TrainStep()) {
      loss_sum += *loss;
      ++loss_count;
    }
    pos = r.next_pos;
    if (filter && !r.done) {
      const Cell shown = DecodeAgentCell(spec, next);
      if (spec.IsFree(shown) && shown != spec.target()) pos = shown;
    }
    obs = next;
    if (r.done) break;
  }
  row.loss = loss_count > 0 ? loss_sum / loss_count : 0.0;
  return row;
}

void DqnTrainer::SeedReplay(std::span<const ExperienceSample> samples) {
  for (const ExperienceSample& s : samples) buffer_.Add(s);
}

TrainResult Train(const std::vector<GridSpec>& envs, const TrainConfig& cfg,
                  const std::vector<int>& env_ids) {
  cfg.Validate();
  if (envs.empty()) throw Error(ErrorCode::kConfig, "training needs at least one environment");
  if (!env_ids.empty() && env_ids.size() != envs.size()) {
    throw Error(ErrorCode::kConfig, "env_ids must match the environment count");
  }
  DqnTrainer trainer(cfg);
  TrainResult result;
  const int n = static_cast<int>(envs.size());
  const int total = cfg.episodes_per_env * n;
  result.log.reserve(static_cast<std::size_t>(total));
  for (int k = 0; k < total; ++k) {
    const int e = k % n;
    const int id = env_ids.empty() ? e : env_ids[static_cast<std::size_t>(e)];
    result.log.push_back(trainer.RunEpisode(envs[static_cast<std::size_t>(e)], id));
  }
  result.net = trainer.net();
  result.buffer = trainer.buffer();
  result.gradient_steps = trainer.gradient_steps();
  return result;
}

TrainResult Train(const EnvironmentSet& envs, const TrainConfig& cfg) {
  envs.Validate();
  return Train(envs.environments, cfg);
}

namespace {

constexpr std::uint64_t kSampleMagic = 0x726c7573616d7031;  // "rlusamp1"
constexpr std::size_t kSampleDoubles = 2 * kObservationSize + 4;

}  // namespace

void SaveSamples(const std::vector<ExperienceSample>& samples, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  const std::uint64_t header[2] = {kSampleMagic, samples.size()};
  out.write(reinterpret_cast<const char*>(header), sizeof(header));
  std::array<double, kSampleDoubles> row{};
  for (const ExperienceSample& s : samples) {
    std::copy(s.obs.begin(), s.obs.end(), row.begin());
    std::copy(s.next_obs.begin(), s.next_obs.end(), row.begin() + kObservationSize);
    row[2 * kObservationSize] = ActionIndex(s.action);
    row[2 * kObservationSize + 1] = s.reward;
    row[2 * kObservationSize + 2] = s.done ? 1.0 : 0.0;
    row[2 * kObservationSize + 3] = s.env_id;
    out.write(reinterpret_cast<const char*>(row.data()), sizeof(row));
  }
  if (!out) throw Error(ErrorCode::kIo, "short write to " + path);
}

std::vector<ExperienceSample> LoadSamples(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path);
  std::uint64_t header[2] = {0, 0};
  in.read(reinterpret_cast<char*>(header), sizeof(header));
  if (!in || header[0] != kSampleMagic) throw Error(ErrorCode::kIo, "not a sample file: " + path);
  std::vector<ExperienceSample> samples(header[1]);
  std::array<double, kSampleDoubles> row{};
  for (ExperienceSample& s : samples) {
    in.read(reinterpret_cast<char*>(row.data()), sizeof(row));
    if (!in) throw Error(ErrorCode::kIo, "truncated sample file: " + path);
    std::copy(row.begin(), row.begin() + kObservationSize, s.obs.begin());
    std::copy(row.begin() + kObservationSize, row.begin() + 2 * kObservationSize, s.next_obs.begin());
    const int a = static_cast<int>(row[2 * kObservationSize]);
    if (a < 0 || a >= kNumActions) throw Error(ErrorCode::kIo, "bad action in sample file: " + path);
    s.action = ActionFromIndex(a);
    s.reward = row[2 * kObservationSize + 1];
    s.done = row[2 * kObservationSize + 2] != 0.0;
    s.env_id = static_cast<int>(row[2 * kObservationSize + 3]);
  }
  return samples;
}

PolicyFn GreedyPolicy(const Mlp& net) {
  return [net = std::make_shared<const Mlp>(net)](const GridSpec& spec, Cell pos) {
    return GreedyAction(*net, Observe(spec, pos));
  };
}

Rollout RunPolicy(const GridSpec& spec, const PolicyFn& policy, Cell start) {
  Rollout out;
  Cell pos = start;
  for (int t = 0; t < spec.episode_cap(); ++t) {
    const Action a = policy(spec, pos);
    out.states.push_back(pos);
    out.actions.push_back(a);
    const StepResult r = Step(spec, pos, a);
    out.reward += r.reward;
    out.collisions += r.collided ? 1 : 0;
    pos = r.next_pos;
    if (r.done) {
      out.reached_target = true;
      break;
    }
  }
  return out;
}

Trajectory ToTrajectory(const Rollout& rollout, int env_id) {
  return {env_id, rollout.states, rollout.actions};
}

Trajectory RandomWalkTrajectory(const GridSpec& spec, int length, std::uint64_t seed,
                                int env_id) {
  if (length < 1) throw Error(ErrorCode::kConfig, "trajectory length must be >= 1");
  Rng rng(MixSeed(seed, 0x74726a));
  const std::vector<Cell> starts = spec.StartCells();
  auto draw_start = [&] {
    return starts[static_cast<std::size_t>(UniformInt(rng, 0, static_cast<int>(starts.size()) - 1))];
  };
  Trajectory out;
  out.env_id = env_id;
  Cell pos = draw_start();
  for (int t = 0; t < length; ++t) {
    const Action a = ActionFromIndex(UniformInt(rng, 0, kNumActions - 1));
    out.states.push_back(pos);
    out.actions.push_back(a);
    const StepResult r = Step(spec, pos, a);
    pos = r.done ? draw_start() : r.next_pos;
  }
  return out;
}

namespace {

EvalStats Summarize(const std::vector<Rollout>& rollouts) {
  EvalStats s;
  for (const Rollout& r : rollouts) {
    s.mean_steps += static_cast<double>(r.actions.size());
    s.mean_reward += r.reward;
    s.mean_collisions += r.collisions;
    s.success_rate += r.reached_target ? 1.0 : 0.0;
  }
  const auto n = static_cast<double>(rollouts.size());
  s.mean_steps /= n;
  s.mean_reward /= n;
  s.mean_collisions /= n;
  s.success_rate /= n;
  return s;
}

std::vector<Cell> DrawStarts(const GridSpec& spec, int episodes, std::uint64_t seed) {
  if (episodes < 1) throw Error(ErrorCode::kConfig, "evaluation needs at least one episode");
  const std::vector<Cell> cells = spec.StartCells();
  Rng rng(MixSeed(seed, 0x6576616c));
  std::vector<Cell> starts;
  starts.reserve(static_cast<std::size_t>(episodes));
  for (int i = 0; i < episodes; ++i) {
    starts.push_back(cells[static_cast<std::size_t>(UniformInt(rng, 0, static_cast<int>(cells.size()) - 1))]);
  }
  return starts;
}

}  // namespace

EvalStats Evaluate(const GridSpec& spec, const PolicyFn& policy, int episodes,
                   std::uint64_t seed) {
  std::vector<Rollout> rollouts;
  for (const Cell& start : DrawStarts(spec, episodes, seed)) {
    rollouts.push_back(RunPolicy(spec, policy, start));
  }
  return Summarize(rollouts);
}

EvalStats Evaluate(const GridSpec& spec, const Mlp& net, int episodes,
                   std::uint64_t seed, std::optional<NoiseRange> noise,
                   double temperature) {
  if (!noise) return Evaluate(spec, GreedyPolicy(net), episodes, seed);
  Rng rng(MixSeed(seed, 0x6e6f6973));
  const NoiseRange range = *noise;
  PolicyFn noisy = [&](const GridSpec& s, Cell pos) {
    PolicyDist p = PolicyDistribution(net, Observe(s, pos), temperature);
    const auto k = static_cast<std::size_t>(UniformInt(rng, 0, kNumActions - 1));
    p[k] = std::max(0.0, p[k] + std::uniform_real_distribution<double>(range.lo, range.hi)(rng));
    const double total = std::accumulate(p.begin(), p.end(), 0.0);
    if (total > 0.0) {
      for (double& v : p) v /= total;
    }
    return GreedyAction(ActionValues{p[0], p[1], p[2], p[3]});
  };
  return Evaluate(spec, noisy, episodes, seed);
}

std::vector<ExperienceSample> RandomWalkCollect(const GridSpec& spec, int m,
                                                std::uint64_t seed, int env_id) {
  if (m < 1) throw Error(ErrorCode::kConfig, "random walk needs m >= 1");
  Rng rng(MixSeed(seed, 0x72776b));
  const std::vector<Cell> starts = spec.StartCells();
  auto draw_start = [&] {
    return starts[static_cast<std::size_t>(UniformInt(rng, 0, static_cast<int>(starts.size()) - 1))];
  };
  std::vector<ExperienceSample> out;
  out.reserve(static_cast<std::size_t>(m));
  Cell pos = draw_start();
  Observation obs = Observe(spec, pos);
  int t = 0;
  while (static_cast<int>(out.size()) < m) {
    const Action a = ActionFromIndex(UniformInt(rng, 0, kNumActions - 1));
    const StepResult r = Step(spec, pos, a);
    const Observation next = Observe(spec, r.next_pos);
    out.push_back({obs, a, r.reward, next, r.done, env_id});
    ++t;
    if (r.done || t >= spec.episode_cap()) {
      pos = draw_start();
      obs = Observe(spec, pos);
      t = 0;
    } else {
      pos = r.next_pos;
      obs = next;
    }
  }
  return out;
}

}  // namespace rlu
