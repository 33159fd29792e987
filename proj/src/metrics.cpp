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


#include "rlu/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <memory>
#include <sstream>

namespace rlu {

Action CorrectAction(const GridSpec& spec, Cell pos, CorrectActionRule rule) {
  if (!spec.IsFree(pos)) throw Error(ErrorCode::kInvalidPosition, "position is not a free cell");
  std::vector<int> dist;
  if (rule == CorrectActionRule::kBfs) dist = DistancesTo(spec, spec.target());
  Action best = Action::kUp;
  int best_d = 0;
  bool have = false;
  for (Action a : kAllActions) {
    const Cell next = Move(pos, a);
    int d = 0;
    if (rule == CorrectActionRule::kBfs) {
      const Cell to = spec.IsFree(next) ? next : pos;
      d = dist[static_cast<std::size_t>(spec.Index(to))];
    } else {
      if (!spec.IsFree(next)) continue;
      d = std::abs(next.x - spec.target().x) + std::abs(next.y - spec.target().y);
    }
    if (!have || d < best_d) {
      best = a;
      best_d = d;
      have = true;
    }
  }
  return best;
}

PolicyDistFn SoftmaxPolicy(const Mlp& net, double temperature) {
  return [net = std::make_shared<const Mlp>(net), temperature](const GridSpec& spec, Cell pos) {
    return PolicyDistribution(*net, Observe(spec, pos), temperature);
  };
}

double TruthRatio(const PolicyDistFn& policy, const GridSpec& spec, std::span<const Cell> prefix,
                  CorrectActionRule rule) {
  if (prefix.empty()) throw Error(ErrorCode::kEmptyInput, "truth ratio needs a non-empty prefix");
  double wrong = 0.0;
  double correct = 0.0;
  for (const Cell& s : prefix) {
    const PolicyDist pi = policy(spec, s);
    const int c = ActionIndex(CorrectAction(spec, s, rule));
    double w = 0.0;
    for (int a = 0; a < kNumActions; ++a) {
      if (a != c) w += pi[static_cast<std::size_t>(a)];
    }
    wrong += w / (kNumActions - 1);
    correct += pi[static_cast<std::size_t>(c)];
  }
  if (correct < 1e-12) throw Error(ErrorCode::kDegenerateDenominator, "correct-action mass vanishes");
  return wrong / correct;
}

std::vector<double> TruthRatioSeries(const PolicyDistFn& policy, const GridSpec& spec,
                                     const Trajectory& trajectory, int n, CorrectActionRule rule) {
  if (n < 1) throw Error(ErrorCode::kEmptyInput, "truth-ratio series needs N >= 1");
  if (static_cast<int>(trajectory.states.size()) < n) {
    throw Error(ErrorCode::kEmptyInput, "trajectory shorter than the series length");
  }
  // Running sums give every prefix in one pass.
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n));
  double wrong = 0.0;
  double correct = 0.0;
  for (int i = 0; i < n; ++i) {
    const Cell s = trajectory.states[static_cast<std::size_t>(i)];
    const PolicyDist pi = policy(spec, s);
    const int c = ActionIndex(CorrectAction(spec, s, rule));
    double w = 0.0;
    for (int a = 0; a < kNumActions; ++a) {
      if (a != c) w += pi[static_cast<std::size_t>(a)];
    }
    wrong += w / (kNumActions - 1);
    correct += pi[static_cast<std::size_t>(c)];
    if (correct < 1e-12) throw Error(ErrorCode::kDegenerateDenominator, "correct-action mass vanishes");
    out.push_back(wrong / correct);
  }
  return out;
}

Ecdf::Ecdf(std::vector<double> sample) : sorted_(std::move(sample)) {
  if (sorted_.empty()) throw Error(ErrorCode::kEmptySample, "ECDF of an empty sample");
  std::sort(sorted_.begin(), sorted_.end());
}

double Ecdf::operator()(double x) const {
  const auto it = std::upper_bound(sorted_.begin(), sorted_.end(), x);
  return static_cast<double>(it - sorted_.begin()) / static_cast<double>(sorted_.size());
}

KsResult KsTwoSample(std::span<const double> x, std::span<const double> y) {
  if (x.empty() || y.empty()) throw Error(ErrorCode::kEmptySample, "KS test needs two non-empty samples");
  std::vector<double> a(x.begin(), x.end());
  std::vector<double> b(y.begin(), y.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  // Merge walk; both ECDFs are evaluated after consuming every copy of a value.
  double d = 0.0;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == v) ++i;
    while (j < b.size() && b[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  KsResult r;
  r.d = d;
  const double ne = na * nb / (na + nb);
  const double lambda = (std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * d;
  if (lambda <= 0.0) {
    r.p = 1.0;
    return r;
  }
  double sum = 0.0;
  for (int k = 1; k <= 1000; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? 1.0 : -1.0) * term;
    if (term < 1e-10) break;
  }
  r.p = std::clamp(2.0 * sum, 0.0, 1.0);
  return r;
}

std::vector<double> MinMaxNormalize(std::span<const double> values) {
  std::vector<double> out(values.begin(), values.end());
  if (out.empty()) return out;
  const auto [lo, hi] = std::minmax_element(out.begin(), out.end());
  const double min = *lo;
  const double range = *hi - *lo;
  for (double& v : out) v = range > 0.0 ? (v - min) / range : 0.0;
  return out;
}

ForgetQualityResult ForgetQuality(const Mlp& subject, const Mlp& retained, const GridSpec& spec,
                                  const ForgetQualityConfig& cfg) {
  if (cfg.trajectories < 1 || cfg.length < 1) {
    throw Error(ErrorCode::kEmptyInput, "forget quality needs trajectories and N >= 1");
  }
  const PolicyDistFn pa = SoftmaxPolicy(subject, cfg.temperature);
  const PolicyDistFn pb = SoftmaxPolicy(retained, cfg.temperature);
  std::vector<double> a;
  std::vector<double> b;
  for (int t = 0; t < cfg.trajectories; ++t) {
    const Trajectory tr = RandomWalkTrajectory(spec, cfg.length, MixSeed(cfg.seed, 0x66710000 + t));
    const std::vector<double> sa = TruthRatioSeries(pa, spec, tr, cfg.length, cfg.rule);
    const std::vector<double> sb = TruthRatioSeries(pb, spec, tr, cfg.length, cfg.rule);
    a.insert(a.end(), sa.begin(), sa.end());
    b.insert(b.end(), sb.begin(), sb.end());
  }
  std::vector<double> pooled = a;
  pooled.insert(pooled.end(), b.begin(), b.end());
  const std::vector<double> scaled = MinMaxNormalize(pooled);
  ForgetQualityResult r;
  r.subject.assign(scaled.begin(), scaled.begin() + static_cast<std::ptrdiff_t>(a.size()));
  r.reference.assign(scaled.begin() + static_cast<std::ptrdiff_t>(a.size()), scaled.end());
  r.ks = KsTwoSample(r.subject, r.reference);
  return r;
}

double ModelUtility(const Mlp& net, const EnvironmentSet& envs, int episodes, std::uint64_t seed) {
  envs.Validate();
  const std::vector<int> ids = envs.RetainedIds();
  if (ids.empty()) throw Error(ErrorCode::kEmptyInput, "no retained environment");
  double sum = 0.0;
  for (int id : ids) {
    sum += Evaluate(envs.environments[static_cast<std::size_t>(id)], net, episodes,
                    MixSeed(seed, static_cast<std::uint64_t>(id)))
               .mean_reward;
  }
  return sum / static_cast<double>(ids.size());
}

void WriteMetricsCsv(std::ostream& out, const std::vector<MetricRecord>& records) {
  out << kMetricsCsvHeader << '\n';
  std::ostringstream line;
  line << std::setprecision(10);
  for (const MetricRecord& r : records) {
    line.str("");
    line << r.replicate << ',' << r.setting << ',' << r.env_id << ',' << r.phase << ',' << r.steps << ',' << r.reward
         << ',' << r.collisions << ',' << r.similarity << ',' << r.p_value << ',' << r.utility << ','
         << r.wall_clock << '\n';
    out << line.str();
  }
}

std::vector<MetricRecord> ReadMetricsCsv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kMetricsCsvHeader) {
    throw Error(ErrorCode::kMissingData, "metrics CSV header missing or unexpected");
  }
  std::vector<MetricRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 11) throw Error(ErrorCode::kMissingData, "malformed metrics row: " + line);
    MetricRecord r;
    try {
      r.replicate = std::stoi(f[0]);
      r.setting = std::stoi(f[1]);
      r.env_id = std::stoi(f[2]);
      r.phase = f[3];
      r.steps = std::stod(f[4]);
      r.reward = std::stod(f[5]);
      r.collisions = std::stod(f[6]);
      r.similarity = std::stod(f[7]);
      r.p_value = std::stod(f[8]);
      r.utility = std::stod(f[9]);
      r.wall_clock = std::stod(f[10]);
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::kMissingData, "malformed metrics row: " + line);
    }
    out.push_back(std::move(r));
  }
  return out;
}

nlohmann::json ToJson(const MetricRecord& r) {
  return {{"replicate", r.replicate}, {"setting", r.setting}, {"env_id", r.env_id},         {"phase", r.phase},
          {"steps", r.steps},         {"reward", r.reward},         {"collisions", r.collisions},
          {"similarity", r.similarity}, {"p_value", r.p_value},     {"utility", r.utility},
          {"wall_clock", r.wall_clock}};
}

}  // namespace rlu
