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


#include "rlu/inference.hpp"

#include <algorithm>
#include <numeric>

#include "rlu/tabular.hpp"

namespace rlu {

Frame Frame::Of(const GridSpec& spec) {
  Frame f;
  f.width = spec.width();
  f.height = spec.height();
  f.target = spec.target();
  f.start = spec.start();
  f.obstacles = static_cast<int>(spec.obstacles().size());
  f.rewards = spec.rewards();
  f.episode_cap = spec.episode_cap();
  f.preset = spec.preset();
  return f;
}

void Frame::Check(const GridSpec& spec) const {
  if (spec.width() != width || spec.height() != height || !(spec.target() == target)) {
    throw Error(ErrorCode::kFrameMismatch, "layout does not match the inference frame");
  }
}

GridSpec Frame::Build(std::vector<Cell> cells) const {
  return GridSpec(width, height, std::move(cells), target, start, rewards, episode_cap, preset);
}

void GaConfig::Validate() const {
  if (population < 2) throw Error(ErrorCode::kConfig, "GA population must be at least 2");
  if (elitism < 0 || elitism >= population) {
    throw Error(ErrorCode::kConfig, "GA elitism must lie in [0, population)");
  }
  if (generations < 0) throw Error(ErrorCode::kConfig, "GA generations must be non-negative");
  if (!(crossover_rate >= 0.0 && crossover_rate <= 1.0) ||
      !(mutation_rate >= 0.0 && mutation_rate <= 1.0)) {
    throw Error(ErrorCode::kConfig, "GA rates must lie in [0, 1]");
  }
  if (!(gamma >= 0.0 && gamma < 1.0)) throw Error(ErrorCode::kConfig, "GA gamma must lie in [0, 1)");
}

double Fitness(const Candidate& cand, const PolicyFn& observed, double gamma) {
  const TransitionTable table(cand);
  const std::vector<Action> optimal = OptimalActions(cand, gamma);
  int match = 0;
  int total = 0;
  for (std::size_t s = 0; s < table.cells().size(); ++s) {
    const Cell c = table.cells()[s];
    if (c == cand.target()) continue;
    ++total;
    if (observed(cand, c) == optimal[s]) ++match;
  }
  return total == 0 ? 0.0 : static_cast<double>(match) / total;
}

double Fitness(const Candidate& cand, const Mlp& observed, double gamma) {
  return Fitness(cand, GreedyPolicy(observed), gamma);
}

namespace {

bool Pinned(const Frame& f, Cell c) { return c == f.target || (f.start && c == *f.start); }

std::vector<Cell> CellsWhere(const Frame& f, const std::vector<std::uint8_t>& blocked, bool value) {
  std::vector<Cell> out;
  for (int i = 0; i < f.width * f.height; ++i) {
    const Cell c{i % f.width, i / f.width};
    if (Pinned(f, c)) continue;
    if ((blocked[static_cast<std::size_t>(i)] != 0) == value) out.push_back(c);
  }
  return out;
}

Cell Pick(const std::vector<Cell>& cells, Rng& rng) {
  return cells[static_cast<std::size_t>(UniformInt(rng, 0, static_cast<int>(cells.size()) - 1))];
}

std::vector<std::uint8_t> FlagsOf(const GridSpec& g) { return g.layout(); }

}  // namespace

Candidate RandomCandidate(const Frame& frame, Rng& rng) {
  std::vector<std::uint8_t> blocked(static_cast<std::size_t>(frame.width * frame.height), 0);
  return Repair(frame, std::move(blocked), rng);
}

Candidate Repair(const Frame& frame, std::vector<std::uint8_t> blocked, Rng& rng) {
  const int w = frame.width;
  for (int i = 0; i < w * frame.height; ++i) {
    if (Pinned(frame, {i % w, i / w})) blocked[static_cast<std::size_t>(i)] = 0;
  }
  std::vector<Cell> on = CellsWhere(frame, blocked, true);
  std::vector<Cell> off = CellsWhere(frame, blocked, false);
  if (frame.obstacles > static_cast<int>(on.size() + off.size())) {
    throw Error(ErrorCode::kImpossibleLayout, "frame holds too many obstacles");
  }
  while (static_cast<int>(on.size()) > frame.obstacles) {
    const auto k = static_cast<std::size_t>(UniformInt(rng, 0, static_cast<int>(on.size()) - 1));
    blocked[static_cast<std::size_t>(on[k].y * w + on[k].x)] = 0;
    off.push_back(on[k]);
    on.erase(on.begin() + static_cast<std::ptrdiff_t>(k));
  }
  while (static_cast<int>(on.size()) < frame.obstacles) {
    const auto k = static_cast<std::size_t>(UniformInt(rng, 0, static_cast<int>(off.size()) - 1));
    blocked[static_cast<std::size_t>(off[k].y * w + off[k].x)] = 1;
    on.push_back(off[k]);
    off.erase(off.begin() + static_cast<std::ptrdiff_t>(k));
  }
  // Local resampling: move one obstacle at a time until the layout connects.
  constexpr int kMoves = 10000;
  for (int move = 0; move < kMoves && !FreeCellsConnected(w, frame.height, blocked); ++move) {
    const auto from = static_cast<std::size_t>(UniformInt(rng, 0, static_cast<int>(on.size()) - 1));
    const auto to = static_cast<std::size_t>(UniformInt(rng, 0, static_cast<int>(off.size()) - 1));
    blocked[static_cast<std::size_t>(on[from].y * w + on[from].x)] = 0;
    blocked[static_cast<std::size_t>(off[to].y * w + off[to].x)] = 1;
    std::swap(on[from], off[to]);
  }
  if (!FreeCellsConnected(w, frame.height, blocked)) {
    throw Error(ErrorCode::kImpossibleLayout, "repair found no connected layout");
  }
  std::sort(on.begin(), on.end(), [](Cell a, Cell b) { return a.y != b.y ? a.y < b.y : a.x < b.x; });
  return frame.Build(std::move(on));
}

Candidate Crossover(const Candidate& a, const Candidate& b, Rng& rng) {
  const Frame frame = Frame::Of(a);
  frame.Check(b);
  std::vector<std::uint8_t> child = FlagsOf(a);
  const std::vector<std::uint8_t>& other = b.layout();
  for (std::size_t i = 0; i < child.size(); ++i) {
    if (Uniform01(rng) < 0.5) child[i] = other[i];
  }
  if (child == a.layout()) return a;
  return Repair(frame, std::move(child), rng);
}

Candidate Mutate(const Candidate& cand, double rate, Rng& rng) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw Error(ErrorCode::kConfig, "mutation rate must lie in [0, 1]");
  const Frame frame = Frame::Of(cand);
  std::vector<std::uint8_t> blocked = FlagsOf(cand);
  bool changed = false;
  for (const Cell& c : cand.obstacles()) {
    if (Uniform01(rng) >= rate) continue;
    const std::vector<Cell> open = CellsWhere(frame, blocked, false);
    if (open.empty()) break;
    const Cell to = Pick(open, rng);
    blocked[static_cast<std::size_t>(cand.Index(c))] = 0;
    blocked[static_cast<std::size_t>(cand.Index(to))] = 1;
    changed = true;
  }
  if (!changed) return cand;
  return Repair(frame, std::move(blocked), rng);
}

namespace {

std::size_t RouletteIndex(const std::vector<double>& fitness, double total, Rng& rng) {
  if (total <= 0.0) return static_cast<std::size_t>(UniformInt(rng, 0, static_cast<int>(fitness.size()) - 1));
  double u = Uniform01(rng) * total;
  for (std::size_t i = 0; i < fitness.size(); ++i) {
    u -= fitness[i];
    if (u < 0.0) return i;
  }
  return fitness.size() - 1;
}

std::vector<std::size_t> Ranking(const std::vector<double>& fitness) {
  std::vector<std::size_t> order(fitness.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return fitness[x] > fitness[y]; });
  return order;
}

}  // namespace

GaResult RunGa(const PolicyFn& observed, const Frame& frame, const GaConfig& cfg) {
  cfg.Validate();
  Rng rng(MixSeed(cfg.seed, 0x67610000));
  std::vector<Candidate> pop;
  pop.reserve(static_cast<std::size_t>(cfg.population));
  for (int i = 0; i < cfg.population; ++i) pop.push_back(RandomCandidate(frame, rng));
  auto score = [&](const std::vector<Candidate>& p) {
    std::vector<double> f;
    f.reserve(p.size());
    for (const Candidate& c : p) f.push_back(Fitness(c, observed, cfg.gamma));
    return f;
  };
  std::vector<double> fit = score(pop);
  GaResult result{pop[Ranking(fit)[0]], 0.0, {}};
  result.fitness = fit[Ranking(fit)[0]];
  result.best_per_generation.push_back(result.fitness);
  for (int gen = 0; gen < cfg.generations; ++gen) {
    const std::vector<std::size_t> order = Ranking(fit);
    const double total = std::accumulate(fit.begin(), fit.end(), 0.0);
    std::vector<Candidate> next;
    next.reserve(pop.size());
    for (int e = 0; e < cfg.elitism; ++e) next.push_back(pop[order[static_cast<std::size_t>(e)]]);
    while (static_cast<int>(next.size()) < cfg.population) {
      const Candidate& a = pop[RouletteIndex(fit, total, rng)];
      const Candidate& b = pop[RouletteIndex(fit, total, rng)];
      Candidate child = Uniform01(rng) < cfg.crossover_rate ? Crossover(a, b, rng) : a;
      next.push_back(Mutate(child, cfg.mutation_rate, rng));
    }
    pop = std::move(next);
    fit = score(pop);
    const std::size_t best = Ranking(fit)[0];
    result.best = pop[best];
    result.fitness = fit[best];
    result.best_per_generation.push_back(fit[best]);
  }
  return result;
}

GaResult RunGa(const Mlp& observed, const Frame& frame, const GaConfig& cfg) {
  return RunGa(GreedyPolicy(observed), frame, cfg);
}

double Similarity(const GridSpec& a, const GridSpec& b) {
  const int l0 = L0Distance(a, b);
  return 100.0 * (1.0 - static_cast<double>(l0) / a.cell_count());
}

int L0Distance(const GridSpec& a, const GridSpec& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw Error(ErrorCode::kFrameMismatch, "layouts have different dimensions");
  }
  return LayoutDifference(a, b);
}

nlohmann::json ToJson(const GaResult& result) {
  return {{"best", ToJson(result.best)},
          {"fitness", result.fitness},
          {"best_per_generation", result.best_per_generation},
          {"rendering", RenderText(result.best)}};
}

}  // namespace rlu
