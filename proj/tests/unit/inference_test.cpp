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

#include "rlu/inference.hpp"
#include "rlu/tabular.hpp"

namespace rlu {
namespace {

PolicyFn OptimalPolicyOf(const GridSpec& truth) {
  const std::vector<Action> best = OptimalActions(truth, 0.9);
  auto table = std::make_shared<TransitionTable>(truth);
  return [best, table](const GridSpec&, Cell pos) {
    return best[static_cast<std::size_t>(table->StateOf(pos))];
  };
}

bool Connected(const GridSpec& g) {
  try {
    GridSpec copy(g.width(), g.height(), g.obstacles(), g.target(), g.start());
    return true;
  } catch (const Error&) {
    return false;
  }
}

TEST(Fitness, TrueLayoutWithOptimalPolicyScoresOne) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const GridSpec truth = GenerateEnvironment(seed, 6, 6, 6);
    EXPECT_DOUBLE_EQ(Fitness(truth, OptimalPolicyOf(truth)), 1.0);
  }
}

TEST(Fitness, RandomPolicyNearQuarter) {
  const GridSpec truth = GenerateEnvironment(3, 10, 10, 10);
  Rng rng(1);
  double total = 0.0;
  for (int i = 0; i < 20; ++i) {
    auto draws = std::make_shared<Rng>(static_cast<std::uint64_t>(i) + 100);
    total += Fitness(truth, [draws](const GridSpec&, Cell) { return ActionFromIndex(UniformInt(*draws, 0, 3)); });
  }
  EXPECT_NEAR(total / 20, 0.25, 0.05);
}

TEST(Operators, CrossoverOfIdenticalParents) {
  const GridSpec a = GenerateEnvironment(1, 6, 6, 6);
  Rng rng(2);
  EXPECT_EQ(LayoutDifference(Crossover(a, a, rng), a), 0);
}

TEST(Operators, ChildrenStayValid) {
  const Frame frame = Frame::Of(GenerateEnvironment(1, 6, 6, 8));
  Rng rng(3);
  Candidate a = RandomCandidate(frame, rng);
  Candidate b = RandomCandidate(frame, rng);
  for (int i = 0; i < 1000; ++i) {
    const Candidate child = Crossover(a, b, rng);
    ASSERT_TRUE(Connected(child));
    ASSERT_EQ(static_cast<int>(child.obstacles().size()), frame.obstacles);
    EXPECT_EQ(child.target(), frame.target);
    if (i % 2) a = child;
    else b = Mutate(child, 0.2, rng);
  }
}

TEST(Operators, MutationRates) {
  const GridSpec a = GenerateEnvironment(1, 6, 6, 6);
  Rng rng(4);
  EXPECT_EQ(LayoutDifference(Mutate(a, 0.0, rng), a), 0);
  int moved = 0;
  for (int i = 0; i < 20; ++i) moved += LayoutDifference(Mutate(a, 1.0, rng), a) > 0;
  EXPECT_GE(moved, 19);
  EXPECT_THROW(Mutate(a, 1.5, rng), Error);
}

TEST(Ga, ZeroGenerationsAndMonotoneBest) {
  const GridSpec truth = GenerateEnvironment(2, 5, 5, 5);
  GaConfig cfg;
  cfg.population = 20;
  cfg.generations = 0;
  const GaResult zero = RunGa(OptimalPolicyOf(truth), Frame::Of(truth), cfg);
  EXPECT_EQ(zero.best_per_generation.size(), 1u);
  cfg.generations = 25;
  const GaResult r = RunGa(OptimalPolicyOf(truth), Frame::Of(truth), cfg);
  ASSERT_EQ(r.best_per_generation.size(), 26u);
  for (std::size_t g = 1; g < r.best_per_generation.size(); ++g) {
    EXPECT_GE(r.best_per_generation[g], r.best_per_generation[g - 1]);
  }
  EXPECT_DOUBLE_EQ(r.fitness, r.best_per_generation.back());
  EXPECT_DOUBLE_EQ(Fitness(r.best, OptimalPolicyOf(truth)), r.fitness);
}

TEST(Ga, Deterministic) {
  const GridSpec truth = GenerateEnvironment(2, 5, 5, 5);
  GaConfig cfg;
  cfg.population = 16;
  cfg.generations = 10;
  cfg.seed = 9;
  const GaResult a = RunGa(OptimalPolicyOf(truth), Frame::Of(truth), cfg);
  const GaResult b = RunGa(OptimalPolicyOf(truth), Frame::Of(truth), cfg);
  EXPECT_EQ(LayoutDifference(a.best, b.best), 0);
  EXPECT_EQ(a.best_per_generation, b.best_per_generation);
}

TEST(Ga, ConfigValidation) {
  GaConfig cfg;
  cfg.elitism = cfg.population + 1;
  EXPECT_THROW(cfg.Validate(), Error);
  cfg = GaConfig{};
  cfg.crossover_rate = -0.1;
  EXPECT_THROW(cfg.Validate(), Error);
}

TEST(Similarity, Cases) {
  const GridSpec a(10, 10, {}, {9, 9}, std::nullopt);
  EXPECT_DOUBLE_EQ(Similarity(a, a), 100.0);
  std::vector<Cell> six;
  for (int x = 0; x < 6; ++x) six.push_back({x, 5});
  std::vector<Cell> other;
  for (int x = 0; x < 6; ++x) other.push_back({x, 2});
  const GridSpec b(10, 10, six, {9, 9}, std::nullopt);
  const GridSpec c(10, 10, other, {9, 9}, std::nullopt);
  EXPECT_EQ(L0Distance(b, c), 12);
  EXPECT_DOUBLE_EQ(Similarity(b, c), 88.0);
  const GridSpec d(2, 2, {{0, 0}}, {1, 1}, std::nullopt);
  EXPECT_THROW(L0Distance(a, d), Error);
}

TEST(Similarity, CountsEveryCell) {
  const GridSpec a(2, 2, {{0, 0}}, {1, 1}, std::nullopt);
  const GridSpec b(2, 2, {{1, 0}}, {1, 1}, std::nullopt);
  EXPECT_EQ(L0Distance(a, b), 2);
  EXPECT_DOUBLE_EQ(Similarity(a, b), 50.0);
}

TEST(Json, ContainsLayout) {
  const GridSpec truth = GenerateEnvironment(2, 5, 5, 5);
  GaConfig cfg;
  cfg.population = 8;
  cfg.generations = 2;
  const nlohmann::json j = ToJson(RunGa(OptimalPolicyOf(truth), Frame::Of(truth), cfg));
  EXPECT_TRUE(j.contains("fitness"));
  EXPECT_TRUE(j.contains("best_per_generation"));
}

}  // namespace
}  // namespace rlu
