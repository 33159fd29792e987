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

#include "rlu/gridworld.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <set>
#include <sstream>

namespace rlu {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kImpossibleLayout: return "impossible_layout";
    case ErrorCode::kInvalidPosition: return "invalid_position";
    case ErrorCode::kInvalidSpec: return "invalid_spec";
    case ErrorCode::kDimensionMismatch: return "dimension_mismatch";
    case ErrorCode::kEmptyBatch: return "empty_batch";
    case ErrorCode::kShapeMismatch: return "shape_mismatch";
    case ErrorCode::kConfig: return "config_error";
    case ErrorCode::kEmptyInput: return "empty_input";
    case ErrorCode::kMisalignedProbes: return "misaligned_probes";
    case ErrorCode::kInvalidPattern: return "invalid_pattern";
    case ErrorCode::kFrameMismatch: return "frame_mismatch";
    case ErrorCode::kEmptySample: return "empty_sample";
    case ErrorCode::kDegenerateDenominator: return "degenerate_denominator";
    case ErrorCode::kSingularSystem: return "singular_system";
    case ErrorCode::kMissingData: return "missing_data";
    case ErrorCode::kIo: return "io_error";
  }
  return "unknown";
}

std::uint64_t MixSeed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

const char* ActionName(Action a) {
  switch (a) {
    case Action::kUp: return "up";
    case Action::kDown: return "down";
    case Action::kLeft: return "left";
    case Action::kRight: return "right";
  }
  return "?";
}

Cell Move(Cell from, Action a) {
  switch (a) {
    case Action::kUp: return {from.x, from.y - 1};
    case Action::kDown: return {from.x, from.y + 1};
    case Action::kLeft: return {from.x - 1, from.y};
    case Action::kRight: return {from.x + 1, from.y};
  }
  return from;
}

const char* PresetName(Preset p) {
  return p == Preset::kAircraft ? "aircraft" : "standard";
}

Preset PresetFromName(const std::string& name) {
  if (name == "standard") return Preset::kStandard;
  if (name == "aircraft") return Preset::kAircraft;
  throw Error(ErrorCode::kInvalidSpec, "unknown preset '" + name + "'");
}

bool FreeCellsConnected(int width, int height,
                        const std::vector<std::uint8_t>& blocked) {
  const int n = width * height;
  int first = -1;
  int free_count = 0;
  for (int i = 0; i < n; ++i) {
    if (!blocked[static_cast<std::size_t>(i)]) {
      ++free_count;
      if (first < 0) first = i;
    }
  }
  if (free_count == 0) return false;
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(n), 0);
  std::deque<int> queue{first};
  seen[static_cast<std::size_t>(first)] = 1;
  int reached = 1;
  while (!queue.empty()) {
    const int i = queue.front();
    queue.pop_front();
    const Cell c{i % width, i / width};
    for (Action a : kAllActions) {
      const Cell d = Move(c, a);
      if (d.x < 0 || d.y < 0 || d.x >= width || d.y >= height) continue;
      const auto j = static_cast<std::size_t>(d.y * width + d.x);
      if (blocked[j] || seen[j]) continue;
      seen[j] = 1;
      ++reached;
      queue.push_back(static_cast<int>(j));
    }
  }
  return reached == free_count;
}

GridSpec::GridSpec(int width, int height, std::vector<Cell> obstacles,
                   Cell target, std::optional<Cell> start, RewardParams rewards,
                   int episode_cap, Preset preset)
    : width_(width),
      height_(height),
      target_(target),
      start_(start),
      rewards_(rewards),
      episode_cap_(episode_cap > 0 ? episode_cap : width * height),
      preset_(preset) {
  if (width < 1 || height < 1 || width * height < 2) {
    throw Error(ErrorCode::kInvalidSpec, "grid must have at least two cells");
  }
  blocked_.assign(static_cast<std::size_t>(width * height), 0);
  if (!InBounds(target)) {
    throw Error(ErrorCode::kInvalidSpec, "target outside the grid");
  }
  for (const Cell& c : obstacles) {
    if (!InBounds(c)) {
      throw Error(ErrorCode::kInvalidSpec, "obstacle outside the grid");
    }
    blocked_[static_cast<std::size_t>(Index(c))] = 1;
  }
  std::sort(obstacles.begin(), obstacles.end(), [&](Cell a, Cell b) {
    return Index(a) < Index(b);
  });
  obstacles.erase(std::unique(obstacles.begin(), obstacles.end()),
                  obstacles.end());
  obstacles_ = std::move(obstacles);
  if (static_cast<int>(obstacles_.size()) >= width * height - 2 &&
      !obstacles_.empty()) {
    throw Error(ErrorCode::kInvalidSpec, "too many obstacles");
  }
  if (IsObstacle(target)) {
    throw Error(ErrorCode::kInvalidSpec, "target on an obstacle");
  }
  if (start_) {
    if (!InBounds(*start_) || IsObstacle(*start_) || *start_ == target) {
      throw Error(ErrorCode::kInvalidSpec, "start must be a free non-target cell");
    }
  }
  if (!FreeCellsConnected(width, height, blocked_)) {
    throw Error(ErrorCode::kInvalidSpec, "layout has dead locations");
  }
  for (int i = 0; i < width * height; ++i) {
    if (!blocked_[static_cast<std::size_t>(i)]) free_cells_.push_back(CellAt(i));
  }
}

std::vector<Cell> GridSpec::StartCells() const {
  if (start_) return {*start_};
  std::vector<Cell> cells;
  cells.reserve(free_cells_.size());
  for (const Cell& c : free_cells_) {
    if (c != target_) cells.push_back(c);
  }
  return cells;
}

bool operator==(const GridSpec& a, const GridSpec& b) {
  return a.width_ == b.width_ && a.height_ == b.height_ &&
         a.blocked_ == b.blocked_ && a.target_ == b.target_ &&
         a.start_ == b.start_ && a.rewards_ == b.rewards_ &&
         a.episode_cap_ == b.episode_cap_ && a.preset_ == b.preset_;
}

std::vector<int> DistancesTo(const GridSpec& spec, Cell to) {
  std::vector<int> dist(static_cast<std::size_t>(spec.cell_count()), -1);
  if (!spec.IsFree(to)) return dist;
  std::deque<Cell> queue{to};
  dist[static_cast<std::size_t>(spec.Index(to))] = 0;
  while (!queue.empty()) {
    const Cell c = queue.front();
    queue.pop_front();
    const int d = dist[static_cast<std::size_t>(spec.Index(c))];
    for (Action a : kAllActions) {
      const Cell n = Move(c, a);
      if (!spec.IsFree(n)) continue;
      auto& slot = dist[static_cast<std::size_t>(spec.Index(n))];
      if (slot >= 0) continue;
      slot = d + 1;
      queue.push_back(n);
    }
  }
  return dist;
}

StepResult Step(const GridSpec& spec, Cell pos, Action action) {
  if (!spec.IsFree(pos)) {
    throw Error(ErrorCode::kInvalidPosition, "position is not a free cell");
  }
  const RewardParams& r = spec.rewards();
  const Cell next = Move(pos, action);
  if (!spec.IsFree(next)) {
    return {pos, r.collision_penalty, false, true};
  }
  if (next == spec.target()) {
    return {next, r.target_reward, true, false};
  }
  return {next, r.step_penalty, false, false};
}

Observation Observe(const GridSpec& spec, Cell pos) {
  if (!spec.IsFree(pos)) {
    throw Error(ErrorCode::kInvalidPosition, "position is not a free cell");
  }
  const double sx = std::max(spec.width() - 1, 1);
  const double sy = std::max(spec.height() - 1, 1);
  const Cell t = spec.target();
  Observation o{};
  o[obs_index::kAgentX] = pos.x / sx;
  o[obs_index::kAgentY] = pos.y / sy;
  o[obs_index::kTargetX] = t.x / sx;
  o[obs_index::kTargetY] = t.y / sy;
  for (Action a : kAllActions) {
    o[static_cast<std::size_t>(obs_index::kFlagUp + ActionIndex(a))] =
        spec.IsFree(Move(pos, a)) ? 0.0 : 1.0;
  }
  o[obs_index::kDeltaX] = (t.x - pos.x) / sx;
  o[obs_index::kDeltaY] = (t.y - pos.y) / sy;
  return o;
}

Cell DecodeAgentCell(const GridSpec& spec, const Observation& obs) {
  const double sx = std::max(spec.width() - 1, 1);
  const double sy = std::max(spec.height() - 1, 1);
  return {static_cast<int>(std::lround(obs[obs_index::kAgentX] * sx)),
          static_cast<int>(std::lround(obs[obs_index::kAgentY] * sy))};
}

TransitionTable::TransitionTable(const GridSpec& spec)
    : width_(spec.width()),
      cells_(spec.free_cells()),
      state_of_(static_cast<std::size_t>(spec.cell_count()), -1) {
  entries_.reserve(cells_.size() * kNumActions);
  for (std::size_t s = 0; s < cells_.size(); ++s) {
    state_of_[static_cast<std::size_t>(spec.Index(cells_[s]))] =
        static_cast<int>(s);
    for (Action a : kAllActions) {
      const StepResult r = Step(spec, cells_[s], a);
      entries_.push_back({r.next_pos, r.reward, r.done, r.collided});
    }
  }
}

namespace {

// Picks `count` distinct cells from `pool` (Fisher-Yates prefix).
std::vector<Cell> SampleCells(std::vector<Cell> pool, int count, Rng& rng) {
  for (int i = 0; i < count; ++i) {
    const int j = UniformInt(rng, i, static_cast<int>(pool.size()) - 1);
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
  }
  pool.resize(static_cast<std::size_t>(count));
  return pool;
}

}  // namespace

GridSpec GenerateEnvironment(std::uint64_t seed, int width, int height,
                             int n_obstacles, Preset preset,
                             RewardParams rewards, int episode_cap) {
  const int cells = width * height;
  if (width < 1 || height < 1 || n_obstacles < 0 ||
      (n_obstacles > 0 && n_obstacles >= cells - 2) || cells < 2) {
    throw Error(ErrorCode::kImpossibleLayout,
                "cannot place " + std::to_string(n_obstacles) +
                    " obstacles on a " + std::to_string(width) + "x" +
                    std::to_string(height) + " grid");
  }
  if (preset == Preset::kAircraft && height < 2) {
    throw Error(ErrorCode::kImpossibleLayout, "aircraft preset needs two rows");
  }
  Rng rng(MixSeed(seed, 0x67726964));
  constexpr int kAttempts = 1000;
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    Cell target;
    std::optional<Cell> start;
    if (preset == Preset::kAircraft) {
      target = {UniformInt(rng, 0, width - 1), height - 1};
      start = Cell{UniformInt(rng, 0, width - 1), 0};
    } else {
      const int t = UniformInt(rng, 0, cells - 1);
      target = {t % width, t / width};
    }
    std::vector<Cell> pool;
    pool.reserve(static_cast<std::size_t>(cells));
    for (int i = 0; i < cells; ++i) {
      const Cell c{i % width, i / width};
      if (c == target || (start && c == *start)) continue;
      pool.push_back(c);
    }
    if (static_cast<int>(pool.size()) < n_obstacles) break;
    std::vector<Cell> obstacles = SampleCells(std::move(pool), n_obstacles, rng);
    std::vector<std::uint8_t> blocked(static_cast<std::size_t>(cells), 0);
    for (const Cell& c : obstacles) {
      blocked[static_cast<std::size_t>(c.y * width + c.x)] = 1;
    }
    if (!FreeCellsConnected(width, height, blocked)) continue;
    return GridSpec(width, height, std::move(obstacles), target, start, rewards,
                    episode_cap, preset);
  }
  throw Error(ErrorCode::kImpossibleLayout,
              "no connected layout found within the resample budget");
}

void EnvironmentSet::Validate() const {
  if (environments.empty()) {
    throw Error(ErrorCode::kInvalidSpec, "environment set is empty");
  }
  if (unlearn_index < 0 ||
      unlearn_index >= static_cast<int>(environments.size())) {
    throw Error(ErrorCode::kInvalidSpec, "unlearn index out of range");
  }
  const int w = environments.front().width();
  const int h = environments.front().height();
  auto same = [&](const GridSpec& s) { return s.width() == w && s.height() == h; };
  if (!std::all_of(environments.begin(), environments.end(), same) ||
      !std::all_of(unseen.begin(), unseen.end(), same)) {
    throw Error(ErrorCode::kInvalidSpec, "environments differ in dimensions");
  }
}

std::vector<int> EnvironmentSet::RetainedIds() const {
  std::vector<int> ids;
  for (int i = 0; i < static_cast<int>(environments.size()); ++i) {
    if (i != unlearn_index) ids.push_back(i);
  }
  return ids;
}

EnvironmentSet GenerateEnvironmentSet(std::uint64_t seed, int n, int width,
                                      int height, int n_obstacles,
                                      int unlearn_index, int n_unseen,
                                      Preset preset) {
  EnvironmentSet set;
  set.unlearn_index = unlearn_index;
  if (unlearn_index < 0 || unlearn_index >= n) {
    throw Error(ErrorCode::kInvalidSpec, "unlearn index out of range");
  }
  // Targets are kept distinct while unused target cells remain; after that
  // only the unlearning environment's target stays exclusive.
  const int target_cells = preset == Preset::kAircraft ? width : width * height;
  std::set<Cell> used;
  std::optional<Cell> exclusive;
  for (int i = 0; i < n; ++i) {
    const int idx = i == 0 ? unlearn_index : (i <= unlearn_index ? i - 1 : i);
    for (std::uint64_t attempt = 0;; ++attempt) {
      GridSpec spec = GenerateEnvironment(
          MixSeed(seed, static_cast<std::uint64_t>(idx) + (attempt << 32)),
          width, height, n_obstacles, preset);
      const Cell t = spec.target();
      const bool clash = exclusive == t ||
                         (static_cast<int>(used.size()) < target_cells && used.contains(t));
      if (clash && attempt < 10000) continue;
      if (!exclusive) exclusive = t;
      used.insert(t);
      set.environments.push_back(std::move(spec));
      break;
    }
  }
  // Generated in unlearn-first order; restore index order.
  std::rotate(set.environments.begin(), set.environments.begin() + 1,
              set.environments.begin() + unlearn_index + 1);
  for (int i = 0; i < n_unseen; ++i) {
    set.unseen.push_back(GenerateEnvironment(
        MixSeed(seed, static_cast<std::uint64_t>(100000 + i)), width, height,
        n_obstacles, preset));
  }
  set.Validate();
  return set;
}

DynamicEnvironment MakeDynamic(const GridSpec& spec, int t, std::uint64_t seed,
                               int moves_per_step) {
  if (t < 1) throw Error(ErrorCode::kConfig, "dynamic environment needs t >= 1");
  DynamicEnvironment dyn;
  dyn.snapshots.push_back(spec);
  Rng rng(MixSeed(seed, 0x64796e));
  for (int k = 1; k < t; ++k) {
    const GridSpec& prev = dyn.snapshots.back();
    const int moves =
        std::min(moves_per_step, static_cast<int>(prev.obstacles().size()));
    bool placed = false;
    for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
      std::vector<Cell> obstacles = prev.obstacles();
      std::vector<std::uint8_t> blocked = prev.layout();
      for (int mv = 0; mv < moves; ++mv) {
        const int which = UniformInt(rng, 0, static_cast<int>(obstacles.size()) - 1);
        std::vector<Cell> candidates;
        for (const Cell& c : prev.free_cells()) {
          if (c == prev.target() || (prev.start() && c == *prev.start())) continue;
          if (blocked[static_cast<std::size_t>(prev.Index(c))]) continue;
          candidates.push_back(c);
        }
        if (candidates.empty()) break;
        const Cell to = candidates[static_cast<std::size_t>(
            UniformInt(rng, 0, static_cast<int>(candidates.size()) - 1))];
        Cell& from = obstacles[static_cast<std::size_t>(which)];
        blocked[static_cast<std::size_t>(prev.Index(from))] = 0;
        blocked[static_cast<std::size_t>(prev.Index(to))] = 1;
        from = to;
      }
      if (!FreeCellsConnected(prev.width(), prev.height(), blocked)) continue;
      dyn.snapshots.emplace_back(prev.width(), prev.height(), std::move(obstacles),
                                 prev.target(), prev.start(), prev.rewards(),
                                 prev.episode_cap(), prev.preset());
      placed = true;
    }
    if (!placed) {
      throw Error(ErrorCode::kImpossibleLayout,
                  "no connected dynamic snapshot within the resample budget");
    }
  }
  return dyn;
}

int LayoutDifference(const GridSpec& a, const GridSpec& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw Error(ErrorCode::kFrameMismatch, "layouts differ in dimensions");
  }
  int diff = 0;
  for (std::size_t i = 0; i < a.layout().size(); ++i) {
    diff += a.layout()[i] != b.layout()[i] ? 1 : 0;
  }
  return diff;
}

nlohmann::json ToJson(const GridSpec& spec) {
  nlohmann::json obstacles = nlohmann::json::array();
  for (const Cell& c : spec.obstacles()) obstacles.push_back({c.x, c.y});
  nlohmann::json j;
  j["width"] = spec.width();
  j["height"] = spec.height();
  j["obstacles"] = obstacles;
  j["target"] = {spec.target().x, spec.target().y};
  j["start"] = spec.start() ? nlohmann::json{spec.start()->x, spec.start()->y}
                            : nlohmann::json(nullptr);
  j["reward_params"] = {{"step_penalty", spec.rewards().step_penalty},
                        {"collision_penalty", spec.rewards().collision_penalty},
                        {"target_reward", spec.rewards().target_reward}};
  j["episode_cap"] = spec.episode_cap();
  j["preset"] = PresetName(spec.preset());
  return j;
}

GridSpec GridSpecFromJson(const nlohmann::json& j) {
  try {
    auto cell = [](const nlohmann::json& v) {
      return Cell{v.at(0).get<int>(), v.at(1).get<int>()};
    };
    std::vector<Cell> obstacles;
    for (const auto& o : j.at("obstacles")) obstacles.push_back(cell(o));
    std::optional<Cell> start;
    if (j.contains("start") && !j.at("start").is_null()) start = cell(j.at("start"));
    RewardParams r;
    if (j.contains("reward_params")) {
      const auto& rp = j.at("reward_params");
      r.step_penalty = rp.at("step_penalty").get<double>();
      r.collision_penalty = rp.at("collision_penalty").get<double>();
      r.target_reward = rp.at("target_reward").get<double>();
    }
    const int cap = j.value("episode_cap", 0);
    const Preset preset = PresetFromName(j.value("preset", std::string("standard")));
    return GridSpec(j.at("width").get<int>(), j.at("height").get<int>(),
                    std::move(obstacles), cell(j.at("target")), start, r, cap,
                    preset);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidSpec, std::string("malformed grid JSON: ") + e.what());
  }
}

nlohmann::json ToJson(const EnvironmentSet& envs) {
  nlohmann::json j;
  j["unlearn_index"] = envs.unlearn_index;
  j["environments"] = nlohmann::json::array();
  for (const GridSpec& g : envs.environments) j["environments"].push_back(ToJson(g));
  j["unseen"] = nlohmann::json::array();
  for (const GridSpec& g : envs.unseen) j["unseen"].push_back(ToJson(g));
  return j;
}

EnvironmentSet EnvironmentSetFromJson(const nlohmann::json& j) {
  EnvironmentSet envs;
  try {
    envs.unlearn_index = j.at("unlearn_index").get<int>();
    for (const auto& g : j.at("environments")) envs.environments.push_back(GridSpecFromJson(g));
    if (j.contains("unseen")) {
      for (const auto& g : j.at("unseen")) envs.unseen.push_back(GridSpecFromJson(g));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidSpec, std::string("malformed environment set JSON: ") + e.what());
  }
  envs.Validate();
  return envs;
}

std::string RenderText(const GridSpec& spec) {
  std::ostringstream out;
  for (int y = 0; y < spec.height(); ++y) {
    for (int x = 0; x < spec.width(); ++x) {
      const Cell c{x, y};
      char ch = '.';
      if (spec.IsObstacle(c)) ch = '#';
      else if (c == spec.target()) ch = 'T';
      else if (spec.start() && c == *spec.start()) ch = 'S';
      out << ch;
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace rlu
