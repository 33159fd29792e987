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


#ifndef RLU_INFERENCE_HPP_
#define RLU_INFERENCE_HPP_

#include <string>
#include <utility>
#include <vector>

#include "rlu/agent.hpp"

namespace rlu {

// What the adversary knows about the environment: dimensions, target, start
// rule, rewards and the nominal obstacle count.
struct Frame {
  int width = 0;
  int height = 0;
  Cell target;
  std::optional<Cell> start;
  int obstacles = 0;
  RewardParams rewards;
  int episode_cap = 0;
  Preset preset = Preset::kStandard;

  static Frame Of(const GridSpec& spec);
  // Throws kFrameMismatch when `spec` does not share this frame's geometry.
  void Check(const GridSpec& spec) const;
  GridSpec Build(std::vector<Cell> obstacles) const;
};

// A candidate is a full layout; its transitions follow from the grid rules.
using Candidate = GridSpec;

struct GaConfig {
  int population = 50;
  int generations = 200;
  double crossover_rate = 0.7;
  double mutation_rate = 0.05;
  int elitism = 2;
  double gamma = 0.9;  // for the candidate's optimal policy
  std::uint64_t seed = 0;

  void Validate() const;
};

// Fraction of the candidate's free non-target cells where its optimal greedy
// action matches `observed` queried on the candidate's observations.
double Fitness(const Candidate& cand, const PolicyFn& observed, double gamma = 0.9);
double Fitness(const Candidate& cand, const Mlp& observed, double gamma = 0.9);

// Uniform random layout in the frame with the nominal obstacle count.
Candidate RandomCandidate(const Frame& frame, Rng& rng);

// Restores the nominal obstacle count and connectivity. Cells other than the
// target and fixed start keep their flags where possible; disconnected
// layouts get single obstacles relocated until the free cells connect.
Candidate Repair(const Frame& frame, std::vector<std::uint8_t> blocked, Rng& rng);

Candidate Crossover(const Candidate& a, const Candidate& b, Rng& rng);
Candidate Mutate(const Candidate& cand, double rate, Rng& rng);

struct GaResult {
  Candidate best;
  double fitness = 0.0;
  std::vector<double> best_per_generation;  // index 0 is the initial population
};

GaResult RunGa(const PolicyFn& observed, const Frame& frame, const GaConfig& cfg);
GaResult RunGa(const Mlp& observed, const Frame& frame, const GaConfig& cfg);

// Cell-wise agreement of obstacle flags, in percent; throws kFrameMismatch.
double Similarity(const GridSpec& a, const GridSpec& b);
int L0Distance(const GridSpec& a, const GridSpec& b);

nlohmann::json ToJson(const GaResult& result);

}  // namespace rlu

#endif  // RLU_INFERENCE_HPP_
