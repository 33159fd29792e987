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

#include "rlu/poison.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace rlu {

namespace {

bool IsFlag(int c) { return c >= obs_index::kFlagUp && c <= obs_index::kFlagRight; }
bool IsCoordinate(int c) { return c >= obs_index::kAgentX && c <= obs_index::kTargetY; }

const char* RuleName(PoisonRule r) {
  switch (r) {
    case PoisonRule::kFlip: return "flip";
    case PoisonRule::kNudgePlus: return "plus";
    case PoisonRule::kNudgeMinus: return "minus";
  }
  return "?";
}

// Single edits in canonical order: flag flips, then +/- nudges per coordinate.
std::vector<PoisonEdit> SingleEdits() {
  std::vector<PoisonEdit> out;
  for (int c = obs_index::kFlagUp; c <= obs_index::kFlagRight; ++c) out.push_back({c, PoisonRule::kFlip});
  for (int c = obs_index::kAgentX; c <= obs_index::kTargetY; ++c) {
    out.push_back({c, PoisonRule::kNudgePlus});
    out.push_back({c, PoisonRule::kNudgeMinus});
  }
  return out;
}

void Combos(const std::vector<PoisonEdit>& singles, std::size_t from, int k,
            std::vector<PoisonEdit>& current, std::vector<PoisonAction>& out) {
  if (static_cast<int>(current.size()) == k) {
    out.push_back({current});
    return;
  }
  for (std::size_t i = from; i < singles.size(); ++i) {
    const bool clash = std::any_of(current.begin(), current.end(), [&](const PoisonEdit& e) {
      return e.component == singles[i].component;
    });
    if (clash) continue;
    current.push_back(singles[i]);
    Combos(singles, i + 1, k, current, out);
    current.pop_back();
  }
}

double CellStep(const GridSpec& spec, int component) {
  const bool x = component == obs_index::kAgentX || component == obs_index::kTargetX;
  const int n = x ? spec.width() : spec.height();
  return n > 1 ? 1.0 / static_cast<double>(n - 1) : 1.0;
}

}  // namespace

std::string PoisonAction::Name() const {
  if (edits.empty()) return "identity";
  std::ostringstream os;
  for (std::size_t i = 0; i < edits.size(); ++i) {
    if (i > 0) os << '+';
    os << RuleName(edits[i].rule) << edits[i].component;
  }
  return os.str();
}

void ValidatePoisonAction(const PoisonAction& g, int level) {
  if (static_cast<int>(g.edits.size()) > level) {
    throw Error(ErrorCode::kInvalidPattern, "pattern exceeds the poisoning level");
  }
  std::set<int> seen;
  for (const PoisonEdit& e : g.edits) {
    const bool ok = e.rule == PoisonRule::kFlip ? IsFlag(e.component) : IsCoordinate(e.component);
    if (!ok) throw Error(ErrorCode::kInvalidPattern, "rule does not suit component " + std::to_string(e.component));
    if (!seen.insert(e.component).second) {
      throw Error(ErrorCode::kInvalidPattern, "pattern repeats a component");
    }
  }
}

std::vector<PoisonAction> BuildPoisonActionSpace(int level, int cap) {
  if (level < 0 || level > kObservationSize) throw Error(ErrorCode::kConfig, "poison level must lie in [0, 10]");
  if (cap < 2) throw Error(ErrorCode::kConfig, "action space cap must be >= 2");
  std::vector<PoisonAction> space{PoisonAction{}};
  if (level == 0) return space;
  const std::vector<PoisonEdit> singles = SingleEdits();
  for (const PoisonEdit& e : singles) {
    if (static_cast<int>(space.size()) >= cap) return space;
    space.push_back({{e}});
  }
  // Compound sizes take turns; within a size the order is a fixed shuffle so
  // the few slots are not all spent on flag-only patterns.
  const int max_k = std::min(level, 8);
  std::vector<std::vector<PoisonAction>> by_size;
  for (int k = 2; k <= max_k; ++k) {
    std::vector<PoisonAction> combos;
    std::vector<PoisonEdit> current;
    Combos(singles, 0, k, current, combos);
    Rng rng(MixSeed(0x676d6170, static_cast<std::uint64_t>(k)));
    std::shuffle(combos.begin(), combos.end(), rng);
    by_size.push_back(std::move(combos));
  }
  std::vector<std::size_t> next(by_size.size(), 0);
  bool progressed = true;
  while (static_cast<int>(space.size()) < cap && progressed) {
    progressed = false;
    for (std::size_t s = 0; s < by_size.size() && static_cast<int>(space.size()) < cap; ++s) {
      if (next[s] < by_size[s].size()) {
        space.push_back(by_size[s][next[s]++]);
        progressed = true;
      }
    }
  }
  return space;
}

Observation ApplyEdits(const GridSpec& spec, const std::vector<PoisonEdit>& edits,
                       const Observation& obs) {
  Observation out = obs;
  for (const PoisonEdit& e : edits) {
    if (e.component < 0 || e.component >= kObservationSize) {
      throw Error(ErrorCode::kInvalidPattern, "component out of range");
    }
    double& v = out[static_cast<std::size_t>(e.component)];
    switch (e.rule) {
      case PoisonRule::kFlip:
        if (!IsFlag(e.component)) throw Error(ErrorCode::kInvalidPattern, "flip on a non-flag component");
        v = v > 0.5 ? 0.0 : 1.0;
        break;
      case PoisonRule::kNudgePlus:
      case PoisonRule::kNudgeMinus: {
        if (!IsCoordinate(e.component)) throw Error(ErrorCode::kInvalidPattern, "nudge on a non-coordinate component");
        const double step = CellStep(spec, e.component);
        v = std::clamp(v + (e.rule == PoisonRule::kNudgePlus ? step : -step), 0.0, 1.0);
        break;
      }
    }
  }
  return out;
}

Observation ApplyPoison(const GridSpec& spec, const PoisonAction& g, const Observation& s, Action a) {
  const Cell pos = DecodeAgentCell(spec, s);
  const StepResult r = Step(spec, pos, a);
  return ApplyEdits(spec, g.edits, Observe(spec, r.next_pos));
}

void PoisonWrap::Compose(const PoisonAction& g) {
  // Net effect per component, most recently touched last: flips cancel in
  // pairs, nudges add up.
  std::vector<std::pair<int, int>> net;  // (component, flip parity or nudge sum)
  auto touch = [&](const PoisonEdit& e) {
    int value = 0;
    for (auto it = net.begin(); it != net.end(); ++it) {
      if (it->first == e.component) {
        value = it->second;
        net.erase(it);
        break;
      }
    }
    if (e.rule == PoisonRule::kFlip) value ^= 1;
    else value += e.rule == PoisonRule::kNudgePlus ? 1 : -1;
    net.emplace_back(e.component, value);
  };
  for (const PoisonEdit& e : edits_) touch(e);
  for (const PoisonEdit& e : g.edits) touch(e);
  std::erase_if(net, [](const auto& p) { return p.second == 0; });
  while (static_cast<int>(net.size()) > level_) net.erase(net.begin());
  edits_.clear();
  for (const auto& [c, v] : net) {
    if (IsFlag(c)) {
      edits_.push_back({c, PoisonRule::kFlip});
      continue;
    }
    for (int k = 0; k < std::abs(v); ++k) {
      edits_.push_back({c, v > 0 ? PoisonRule::kNudgePlus : PoisonRule::kNudgeMinus});
    }
  }
}

ObservationFilter PoisonWrap::Filter() const {
  return [edits = edits_](const GridSpec& spec, Cell, const Observation& truth) {
    return ApplyEdits(spec, edits, truth);
  };
}

std::vector<Cell> SelectEmbeddingCells(const GridSpec& spec, int k, std::uint64_t seed) {
  if (k < 1) throw Error(ErrorCode::kConfig, "embedding needs at least one probe");
  std::vector<Cell> cells;
  for (const Cell& c : spec.free_cells()) {
    if (c != spec.target()) cells.push_back(c);
  }
  Rng rng(MixSeed(seed, 0x656d62));
  std::shuffle(cells.begin(), cells.end(), rng);
  cells.resize(std::min(cells.size(), static_cast<std::size_t>(k)));
  std::sort(cells.begin(), cells.end());
  return cells;
}

PolicyEmbedding EmbedPolicy(const Mlp& net, const GridSpec& spec, const std::vector<Cell>& cells,
                            double temperature) {
  PolicyEmbedding e(static_cast<Eigen::Index>(cells.size()) * kNumActions);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const PolicyDist p = PolicyDistribution(net, Observe(spec, cells[i]), temperature);
    for (int a = 0; a < kNumActions; ++a) {
      e[static_cast<Eigen::Index>(i) * kNumActions + a] = p[static_cast<std::size_t>(a)];
    }
  }
  return e;
}

double SmoothedKl(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size() || p.empty()) throw Error(ErrorCode::kMisalignedProbes, "distributions differ in size");
  constexpr double kSmooth = 1e-8;
  double zp = 0.0;
  double zq = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    zp += p[i] + kSmooth;
    zq += q[i] + kSmooth;
  }
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pi = (p[i] + kSmooth) / zp;
    const double qi = (q[i] + kSmooth) / zq;
    kl += pi * std::log(pi / qi);
  }
  return std::max(kl, 0.0);
}

PoisonReward ComputePoisonReward(const PolicyEmbedding& current, const PolicyEmbedding& reference,
                                 const Mlp& net, const RetainProbeSet& probes, double lambda1,
                                 double lambda2, double temperature) {
  if (current.size() != reference.size() || current.size() == 0 || current.size() % kNumActions != 0) {
    throw Error(ErrorCode::kMisalignedProbes, "policy embeddings are not aligned");
  }
  PoisonReward r;
  const Eigen::Index n = current.size() / kNumActions;
  for (Eigen::Index s = 0; s < n; ++s) {
    r.kl += SmoothedKl(std::span<const double>(current.data() + s * kNumActions, kNumActions),
                       std::span<const double>(reference.data() + s * kNumActions, kNumActions));
  }
  r.kl /= static_cast<double>(n);
  for (const RetainProbe& p : probes.probes()) {
    const PolicyDist pi = PolicyDistribution(net, p.obs, temperature);
    for (int a = 0; a < kNumActions; ++a) {
      r.retained += pi[static_cast<std::size_t>(a)] * p.rewards[static_cast<std::size_t>(a)];
    }
  }
  r.total = lambda1 * r.kl + lambda2 * r.retained;
  return r;
}

void PoisonConfig::Validate() const {
  if (poison_level < 0 || poison_level > kObservationSize) {
    throw Error(ErrorCode::kConfig, "poison level must lie in [0, 10]");
  }
  if (epochs < 0 || inner_episodes < 0 || retain_episodes < 0 || embedding_probes < 1 || probes_per_env < 1 ||
      strategy_batch < 1 || strategy_updates < 0 || action_space_cap < 2) {
    throw Error(ErrorCode::kConfig, "poisoning counts out of range");
  }
  if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) throw Error(ErrorCode::kConfig, "lambdas must be >= 0");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw Error(ErrorCode::kConfig, "epsilon must lie in [0, 1]");
  if (!(strategy_gamma >= 0.0 && strategy_gamma < 1.0)) {
    throw Error(ErrorCode::kConfig, "strategy gamma must lie in [0, 1)");
  }
}

PoisoningStrategy::PoisoningStrategy(int embedding_size, int action_count, const PoisonConfig& cfg)
    : cfg_(cfg),
      net_(Mlp::Init(MlpSpec{{embedding_size, 64, action_count}}, MixSeed(cfg.seed, 0x737472))),
      target_(net_),
      adam_(net_) {}

Eigen::VectorXd PoisoningStrategy::Values(const PolicyEmbedding& state) const {
  return net_.Forward(std::span<const double>(state.data(), static_cast<std::size_t>(state.size())));
}

int PoisoningStrategy::Select(const PolicyEmbedding& state, double epsilon, Rng& rng) const {
  const Eigen::VectorXd q = Values(state);
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < q.size(); ++i) {
    if (q[i] > q[best]) best = i;
  }
  const auto n = static_cast<int>(q.size());
  if (n > 1 && Uniform01(rng) < epsilon) {
    int other = UniformInt(rng, 0, n - 2);
    if (other >= best) ++other;
    return other;
  }
  return static_cast<int>(best);
}

double PoisoningStrategy::Update(const std::vector<PoisonRecord>& records, Rng& rng) {
  if (records.empty()) return 0.0;
  double loss = 0.0;
  const int in = net_.input_size();
  const int out = net_.output_size();
  for (int step = 0; step < cfg_.strategy_updates; ++step) {
    const int b = std::min<int>(cfg_.strategy_batch, static_cast<int>(records.size()));
    Eigen::MatrixXd inputs(in, b);
    Eigen::MatrixXd targets = Eigen::MatrixXd::Zero(out, b);
    Eigen::MatrixXd mask = Eigen::MatrixXd::Zero(out, b);
    for (int j = 0; j < b; ++j) {
      const PoisonRecord& r = records[static_cast<std::size_t>(UniformInt(rng, 0, static_cast<int>(records.size()) - 1))];
      inputs.col(j) = r.before;
      const Eigen::VectorXd next = target_.Forward(std::span<const double>(r.after.data(), static_cast<std::size_t>(r.after.size())));
      targets(r.action, j) = r.reward.total + cfg_.strategy_gamma * next.maxCoeff();
      mask(r.action, j) = 1.0;
    }
    const LossAndGradients lg = MaskedMseLoss(net_, inputs, targets, mask);
    adam_.Apply(net_, lg.grads, cfg_.strategy_learning_rate);
    loss = lg.loss;
  }
  target_ = net_;
  return loss;
}

void WritePoisonTraceCsv(std::ostream& out, const std::vector<PoisonTraceRow>& trace) {
  out << "epoch,action,reward,kl,retained\n";
  for (const PoisonTraceRow& r : trace) {
    out << r.epoch << ',' << r.action << ',' << r.reward.total << ',' << r.reward.kl << ','
        << r.reward.retained << '\n';
  }
}

PoisonSession::PoisonSession(const Mlp& net, const EnvironmentSet& env_set, const PoisonConfig& c,
                             const TrainConfig& train, const ReplayBuffer* memory)
    : envs(env_set),
      cfg(c),
      space(BuildPoisonActionSpace(c.poison_level, c.action_space_cap)),
      embedding_cells(SelectEmbeddingCells(env_set.unlearn_env(), c.embedding_probes, MixSeed(c.seed, 1))),
      reference(EmbedPolicy(net, env_set.unlearn_env(), embedding_cells, train.softmax_temperature)),
      probes(RetainProbeSet::Build(net, env_set, c.probes_per_env, MixSeed(c.seed, 2))),
      wrap(c.poison_level),
      trainer([&] {
        TrainConfig t = train;
        t.seed = MixSeed(c.seed, 3);
        return t;
      }(), net),
      strategy(static_cast<int>(reference.size()), static_cast<int>(space.size()), c),
      state(reference),
      rng(MixSeed(c.seed, 4)),
      temperature(train.softmax_temperature) {
  if (memory) {
    std::vector<ExperienceSample> kept;
    for (const ExperienceSample& e : memory->Samples()) {
      if (e.env_id != envs.unlearn_index) kept.push_back(e);
    }
    trainer.SeedReplay(kept);
  }
}

PoisonRecord PoisonEpoch(PoisonSession& s) {
  PoisonRecord rec;
  rec.before = s.state;
  rec.action = s.strategy.Select(s.state, s.cfg.epsilon, s.rng);
  s.wrap.Compose(s.space[static_cast<std::size_t>(rec.action)]);
  const ObservationFilter filter = s.wrap.Filter();
  const std::vector<int> retained = s.envs.RetainedIds();
  int u_left = s.cfg.inner_episodes;
  int r_left = s.cfg.retain_episodes;
  while (u_left > 0 || r_left > 0) {
    // Interleave in proportion to what remains of each budget.
    if (u_left > 0 && (r_left == 0 || u_left * s.cfg.retain_episodes >= r_left * s.cfg.inner_episodes)) {
      s.trainer.RunEpisode(s.envs.unlearn_env(), s.envs.unlearn_index, &filter);
      --u_left;
    } else {
      const int e = retained[s.retain_cursor++ % retained.size()];
      s.trainer.RunEpisode(s.envs.environments[static_cast<std::size_t>(e)], e);
      --r_left;
    }
  }
  const Mlp& net = s.trainer.net();
  rec.after = EmbedPolicy(net, s.envs.unlearn_env(), s.embedding_cells, s.temperature);
  rec.reward = ComputePoisonReward(rec.after, s.reference, net, s.probes, s.cfg.lambda1,
                                   s.cfg.lambda2, s.temperature);
  s.state = rec.after;
  return rec;
}

PoisonResult RunPoisoning(const Mlp& net, const EnvironmentSet& envs, const PoisonConfig& cfg,
                          const TrainConfig& train, const ReplayBuffer* memory,
                          const EpochObserver& observer) {
  cfg.Validate();
  train.Validate();
  envs.Validate();
  if (envs.environments.size() < 2) throw Error(ErrorCode::kConfig, "poisoning needs a retained environment");
  PoisonSession session(net, envs, cfg, train, memory);
  PoisonResult res;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    res.records.push_back(PoisonEpoch(session));
    res.trace.push_back({epoch, res.records.back().action, res.records.back().reward});
    session.strategy.Update(res.records, session.rng);
    if (observer) observer(epoch, session.trainer.net());
  }
  res.net = session.trainer.net();
  res.final_wrap = session.wrap.edits();
  return res;
}

}  // namespace rlu
