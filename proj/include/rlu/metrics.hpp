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


#ifndef RLU_METRICS_HPP_
#define RLU_METRICS_HPP_

#include <ostream>
#include <string>
#include <vector>

#include "rlu/agent.hpp"

namespace rlu {

enum class CorrectActionRule {
  kBfs,        // shortest-path distance through free cells
  kManhattan,  // Manhattan distance among non-colliding moves
};

// The action whose successor is closest to the target. Colliding moves keep
// the agent in place. Ties go to the earliest action.
Action CorrectAction(const GridSpec& spec, Cell pos, CorrectActionRule rule = CorrectActionRule::kBfs);

// Mean wrong-action probability over the prefix divided by the correct-action
// probability, each summed over the prefix states. Throws kEmptyInput on an
// empty prefix and kDegenerateDenominator when the correct mass is below 1e-12.
using PolicyDistFn = std::function<PolicyDist(const GridSpec& spec, Cell pos)>;

// Holds a copy of `net`.
PolicyDistFn SoftmaxPolicy(const Mlp& net, double temperature = 1.0);

double TruthRatio(const PolicyDistFn& policy, const GridSpec& spec, std::span<const Cell> prefix,
                  CorrectActionRule rule = CorrectActionRule::kBfs);

// Values for the prefixes of length 1..n of `trajectory`.
std::vector<double> TruthRatioSeries(const PolicyDistFn& policy, const GridSpec& spec,
                                     const Trajectory& trajectory, int n,
                                     CorrectActionRule rule = CorrectActionRule::kBfs);

// Right-continuous empirical CDF.
class Ecdf {
 public:
  explicit Ecdf(std::vector<double> sample);

  double operator()(double x) const;
  const std::vector<double>& sorted() const { return sorted_; }
  std::size_t size() const { return sorted_.size(); }

 private:
  std::vector<double> sorted_;
};

struct KsResult {
  double d = 0.0;
  double p = 1.0;
};

// Two-sample KS test with the asymptotic Kolmogorov p-value and the
// small-sample correction on lambda. Throws kEmptySample.
KsResult KsTwoSample(std::span<const double> x, std::span<const double> y);

// Min-max scaled copy; constant input maps to all zeros.
std::vector<double> MinMaxNormalize(std::span<const double> values);

struct ForgetQualityConfig {
  int trajectories = 20;
  int length = 30;
  double temperature = 1.0;
  CorrectActionRule rule = CorrectActionRule::kBfs;
  std::uint64_t seed = 0;
};

struct ForgetQualityResult {
  KsResult ks;
  std::vector<double> subject;    // normalized series of the evaluated net
  std::vector<double> reference;  // normalized series of the retained net
};

// Truth-ratio series of both nets over the same random walks in `spec`,
// min-max normalized over the pooled values, compared by KS. The p-value is
// the forget quality; higher means closer to the never-exposed agent.
ForgetQualityResult ForgetQuality(const Mlp& subject, const Mlp& retained, const GridSpec& spec,
                                  const ForgetQualityConfig& cfg = {});

// Mean greedy reward over the retained environments.
double ModelUtility(const Mlp& net, const EnvironmentSet& envs, int episodes, std::uint64_t seed);

struct MetricRecord {
  int replicate = 0;
  int setting = 0;  // swept value (grid size, obstacle count, poison level), else 0
  int env_id = 0;   // ids past the training set denote unseen environments
  std::string phase;  // before, after or a baseline tag
  double steps = 0.0;
  double reward = 0.0;
  double collisions = 0.0;
  double similarity = 0.0;
  double p_value = 0.0;
  double utility = 0.0;
  double wall_clock = 0.0;
};

inline constexpr const char* kMetricsCsvHeader =
    "replicate,setting,env_id,phase,steps,reward,collisions,similarity,p_value,utility,wall_clock";

void WriteMetricsCsv(std::ostream& out, const std::vector<MetricRecord>& records);
std::vector<MetricRecord> ReadMetricsCsv(std::istream& in);
nlohmann::json ToJson(const MetricRecord& record);

}  // namespace rlu

#endif  // RLU_METRICS_HPP_
