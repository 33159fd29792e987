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

#include "rlu/decremental.hpp"

#include <algorithm>
#include <numeric>
#include <set>

namespace rlu {

namespace {

Eigen::MatrixXd ObservationMatrix(const std::vector<Observation>& obs) {
  Eigen::MatrixXd m(kObservationSize, static_cast<Eigen::Index>(obs.size()));
  for (std::size_t i = 0; i < obs.size(); ++i) {
    for (int k = 0; k < kObservationSize; ++k) m(k, static_cast<Eigen::Index>(i)) = obs[i][static_cast<std::size_t>(k)];
  }
  return m;
}

RetainProbe MakeProbe(const Mlp& reference, const GridSpec& spec, int env_id, Cell c) {
  RetainProbe p;
  p.env_id = env_id;
  p.cell = c;
  p.obs = Observe(spec, c);
  p.reference = QValues(reference, p.obs);
  for (Action a : kAllActions) {
    p.rewards[static_cast<std::size_t>(ActionIndex(a))] = Step(spec, c, a).reward;
  }
  return p;
}

// Index of max |v| in column `col`, first on ties.
Eigen::Index ArgMaxAbs(const Eigen::MatrixXd& v, Eigen::Index col) {
  Eigen::Index best = 0;
  for (Eigen::Index r = 1; r < v.rows(); ++r) {
    if (std::abs(v(r, col)) > std::abs(v(best, col))) best = r;
  }
  return best;
}

double Sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

RetainProbeSet RetainProbeSet::Build(const Mlp& reference, const EnvironmentSet& envs,
                                     int per_env, std::uint64_t seed) {
  envs.Validate();
  if (per_env < 1) throw Error(ErrorCode::kConfig, "probes per environment must be >= 1");
  RetainProbeSet set;
  for (int id : envs.RetainedIds()) {
    const GridSpec& spec = envs.environments[static_cast<std::size_t>(id)];
    std::vector<Cell> cells = spec.free_cells();
    Rng rng(MixSeed(seed, 0x70726f00 + static_cast<std::uint64_t>(id)));
    std::shuffle(cells.begin(), cells.end(), rng);
    cells.resize(std::min(cells.size(), static_cast<std::size_t>(per_env)));
    for (const Cell& c : cells) set.probes_.push_back(MakeProbe(reference, spec, id, c));
  }
  return set;
}

RetainProbeSet RetainProbeSet::FromCells(const Mlp& reference, const std::vector<GridSpec>& envs,
                                         const std::vector<std::pair<int, Cell>>& cells) {
  RetainProbeSet set;
  for (const auto& [id, c] : cells) {
    if (id < 0 || id >= static_cast<int>(envs.size())) {
      throw Error(ErrorCode::kInvalidPosition, "probe environment id out of range");
    }
    const GridSpec& spec = envs[static_cast<std::size_t>(id)];
    if (!spec.IsFree(c)) throw Error(ErrorCode::kInvalidPosition, "probe cell is not free");
    set.probes_.push_back(MakeProbe(reference, spec, id, c));
  }
  return set;
}

RetainProbeSet RetainProbeSet::Subset(const std::vector<std::size_t>& indices) const {
  RetainProbeSet set;
  for (std::size_t i : indices) set.probes_.push_back(probes_.at(i));
  return set;
}

Eigen::MatrixXd RetainProbeSet::InputMatrix() const {
  std::vector<Observation> obs;
  obs.reserve(probes_.size());
  for (const RetainProbe& p : probes_) obs.push_back(p.obs);
  return ObservationMatrix(obs);
}

Eigen::MatrixXd RetainProbeSet::ReferenceMatrix() const {
  Eigen::MatrixXd m(kNumActions, static_cast<Eigen::Index>(probes_.size()));
  for (std::size_t i = 0; i < probes_.size(); ++i) {
    for (int a = 0; a < kNumActions; ++a) {
      m(a, static_cast<Eigen::Index>(i)) = probes_[i].reference[static_cast<std::size_t>(a)];
    }
  }
  return m;
}

int DecrementalConfig::ResolvedM(const GridSpec& spec) const {
  return m > 0 ? m : 5 * spec.cell_count();
}

void DecrementalConfig::Validate() const {
  if (m < 0 || epochs < 0 || batch_size < 1 || probes_per_env < 1 || probe_batch < 0) {
    throw Error(ErrorCode::kConfig, "decremental counts out of range");
  }
  if (m > 0 && m < batch_size) throw Error(ErrorCode::kConfig, "m must be >= batch_size");
  if (!(w1 > 0.0) || !(w2 > 0.0)) throw Error(ErrorCode::kConfig, "term weights must be positive");
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::kConfig, "learning rate must be positive");
}

DecrementalLoss ComputeDecrementalLoss(const Mlp& net, const Eigen::MatrixXd& unlearn_inputs,
                                       const RetainProbeSet& probes, double w1, double w2) {
  if (unlearn_inputs.cols() == 0 || probes.empty()) {
    throw Error(ErrorCode::kEmptyInput, "decremental loss needs unlearning states and probes");
  }
  DecrementalLoss out;
  {
    const ForwardTrace trace = net.Trace(unlearn_inputs);
    const Eigen::MatrixXd& q = trace.outputs();
    const auto n = static_cast<double>(q.cols());
    Eigen::MatrixXd dq = Eigen::MatrixXd::Zero(q.rows(), q.cols());
    for (Eigen::Index j = 0; j < q.cols(); ++j) {
      const Eigen::Index a = ArgMaxAbs(q, j);
      out.terms.term1 += std::abs(q(a, j)) / n;
      dq(a, j) = w1 * Sign(q(a, j)) / n;
    }
    out.grads = net.Backpropagate(trace, dq);
  }
  {
    const ForwardTrace trace = net.Trace(probes.InputMatrix());
    const Eigen::MatrixXd diff = trace.outputs() - probes.ReferenceMatrix();
    const auto n = static_cast<double>(diff.cols());
    Eigen::MatrixXd dq = Eigen::MatrixXd::Zero(diff.rows(), diff.cols());
    for (Eigen::Index j = 0; j < diff.cols(); ++j) {
      const Eigen::Index a = ArgMaxAbs(diff, j);
      out.terms.term2 += std::abs(diff(a, j)) / n;
      dq(a, j) = w2 * Sign(diff(a, j)) / n;
    }
    out.grads.Add(net.Backpropagate(trace, dq));
  }
  out.terms.total = w1 * out.terms.term1 + w2 * out.terms.term2;
  return out;
}

void WriteLossTraceCsv(std::ostream& out, const LossTrace& trace) {
  out << "epoch,term1,term2,total\n";
  for (const LossTraceRow& r : trace) {
    out << r.epoch << ',' << r.terms.term1 << ',' << r.terms.term2 << ',' << r.terms.total << '\n';
  }
}

DecrementalResult UnlearnDecremental(const Mlp& net, const EnvironmentSet& envs,
                                     const DecrementalConfig& cfg, const EpochObserver& observer) {
  cfg.Validate();
  envs.Validate();
  if (envs.environments.size() < 2) {
    throw Error(ErrorCode::kConfig, "decremental unlearning needs a retained environment");
  }
  const GridSpec& target_env = envs.unlearn_env();
  DecrementalResult res;
  res.net = net;
  res.unlearn_samples = RandomWalkCollect(target_env, cfg.ResolvedM(target_env),
                                          MixSeed(cfg.seed, 0x64656331), envs.unlearn_index);
  res.probes = RetainProbeSet::Build(net, envs, cfg.probes_per_env, MixSeed(cfg.seed, 0x64656332));

  std::vector<Observation> states;
  states.reserve(res.unlearn_samples.size());
  for (const ExperienceSample& s : res.unlearn_samples) states.push_back(s.obs);
  const Eigen::MatrixXd all_states = ObservationMatrix(states);

  AdamOptimizer adam(res.net);
  Rng rng(MixSeed(cfg.seed, 0x64656333));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(all_states.cols()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  // Optional probe minibatches: a fixed partition of the probe set, cycled.
  std::vector<RetainProbeSet> probe_batches;
  std::size_t next_probe_batch = 0;
  if (cfg.probe_batch > 0 && static_cast<std::size_t>(cfg.probe_batch) < res.probes.size()) {
    std::vector<std::size_t> idx(res.probes.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t b = 0; b < idx.size(); b += static_cast<std::size_t>(cfg.probe_batch)) {
      const std::size_t e = std::min(idx.size(), b + static_cast<std::size_t>(cfg.probe_batch));
      std::vector<std::size_t> part(idx.begin() + static_cast<std::ptrdiff_t>(b), idx.begin() + static_cast<std::ptrdiff_t>(e));
      probe_batches.push_back(res.probes.Subset(part));
    }
  }
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(cfg.batch_size));
      Eigen::MatrixXd batch(kObservationSize, static_cast<Eigen::Index>(end - begin));
      for (std::size_t i = begin; i < end; ++i) {
        batch.col(static_cast<Eigen::Index>(i - begin)) = all_states.col(order[i]);
      }
      const DecrementalLoss loss =
          probe_batches.empty()
              ? ComputeDecrementalLoss(res.net, batch, res.probes, cfg.w1, cfg.w2)
              : ComputeDecrementalLoss(res.net, batch, probe_batches[next_probe_batch++ % probe_batches.size()],
                                       cfg.w1, cfg.w2);
      adam.Apply(res.net, loss.grads, cfg.learning_rate);
    }
    const DecrementalLoss full = ComputeDecrementalLoss(res.net, all_states, res.probes, cfg.w1, cfg.w2);
    res.trace.push_back({epoch, full.terms});
    if (observer) observer(epoch, res.net);
  }
  return res;
}

Mlp UnlearnTrajectory(const Mlp& net, const GridSpec& spec, const Trajectory& forget,
                      const std::vector<Trajectory>& keep, const DecrementalConfig& cfg) {
  cfg.Validate();
  if (forget.empty()) throw Error(ErrorCode::kEmptyInput, "trajectory to forget is empty");
  if (forget.states.size() != forget.actions.size()) {
    throw Error(ErrorCode::kInvalidSpec, "trajectory states and actions differ in length");
  }
  std::set<std::pair<Cell, int>> forget_pairs;
  for (std::size_t i = 0; i < forget.size(); ++i) {
    if (!spec.IsFree(forget.states[i])) throw Error(ErrorCode::kInvalidPosition, "trajectory leaves the free cells");
    forget_pairs.insert({forget.states[i], ActionIndex(forget.actions[i])});
  }
  std::set<std::pair<Cell, int>> keep_pairs;
  for (const Trajectory& t : keep) {
    for (std::size_t i = 0; i < t.size(); ++i) {
      const std::pair<Cell, int> key{t.states[i], ActionIndex(t.actions[i])};
      if (!forget_pairs.contains(key)) keep_pairs.insert(key);
    }
  }
  auto pack = [&](const std::set<std::pair<Cell, int>>& pairs, Eigen::MatrixXd& inputs,
                  std::vector<int>& actions) {
    std::vector<Observation> obs;
    for (const auto& [c, a] : pairs) {
      obs.push_back(Observe(spec, c));
      actions.push_back(a);
    }
    inputs = ObservationMatrix(obs);
  };
  Eigen::MatrixXd forget_inputs;
  Eigen::MatrixXd keep_inputs;
  std::vector<int> forget_actions;
  std::vector<int> keep_actions;
  pack(forget_pairs, forget_inputs, forget_actions);
  pack(keep_pairs, keep_inputs, keep_actions);
  const Eigen::MatrixXd keep_reference = net.ForwardBatch(keep_inputs);

  Mlp out = net;
  AdamOptimizer adam(out);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const ForwardTrace ft = out.Trace(forget_inputs);
    Eigen::MatrixXd dq = Eigen::MatrixXd::Zero(kNumActions, forget_inputs.cols());
    for (Eigen::Index j = 0; j < forget_inputs.cols(); ++j) {
      dq(forget_actions[static_cast<std::size_t>(j)], j) = cfg.w1 / static_cast<double>(forget_inputs.cols());
    }
    Gradients grads = out.Backpropagate(ft, dq);
    if (keep_inputs.cols() > 0) {
      const ForwardTrace kt = out.Trace(keep_inputs);
      Eigen::MatrixXd dk = Eigen::MatrixXd::Zero(kNumActions, keep_inputs.cols());
      for (Eigen::Index j = 0; j < keep_inputs.cols(); ++j) {
        const int a = keep_actions[static_cast<std::size_t>(j)];
        dk(a, j) = cfg.w2 * Sign(kt.outputs()(a, j) - keep_reference(a, j)) /
                   static_cast<double>(keep_inputs.cols());
      }
      grads.Add(out.Backpropagate(kt, dk));
    }
    adam.Apply(out, grads, cfg.learning_rate);
  }
  return out;
}

}  // namespace rlu
