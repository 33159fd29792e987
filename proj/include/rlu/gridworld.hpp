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

#ifndef RLU_GRIDWORLD_HPP_
#define RLU_GRIDWORLD_HPP_

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "rlu/common.hpp"

namespace rlu {

struct Cell {
  int x = 0;
  int y = 0;

  friend auto operator<=>(const Cell&, const Cell&) = default;
};

// Canonical order Up < Down < Left < Right is used for every tie-break.
// Row 0 is the top row, so Up decreases y.
enum class Action : int { kUp = 0, kDown = 1, kLeft = 2, kRight = 3 };

inline constexpr int kNumActions = 4;
inline constexpr std::array<Action, kNumActions> kAllActions = {
    Action::kUp, Action::kDown, Action::kLeft, Action::kRight};

inline int ActionIndex(Action a) { return static_cast<int>(a); }
inline Action ActionFromIndex(int i) { return static_cast<Action>(i); }
const char* ActionName(Action a);

Cell Move(Cell from, Action a);

struct RewardParams {
  double step_penalty = -1.0;
  double collision_penalty = -10.0;
  double target_reward = 100.0;

  friend bool operator==(const RewardParams&, const RewardParams&) = default;
};

enum class Preset { kStandard, kAircraft };

const char* PresetName(Preset p);
Preset PresetFromName(const std::string& name);

// Observation layout:
//   [0] agent_x  [1] agent_y  [2] target_x  [3] target_y   (normalized to [0,1])
//   [4..7] neighbor blocked flags in action order (off-grid counts as blocked)
//   [8] dx  [9] dy   signed normalized offsets to the target
inline constexpr int kObservationSize = 10;
using Observation = std::array<double, kObservationSize>;

namespace obs_index {
inline constexpr int kAgentX = 0;
inline constexpr int kAgentY = 1;
inline constexpr int kTargetX = 2;
inline constexpr int kTargetY = 3;
inline constexpr int kFlagUp = 4;
inline constexpr int kFlagRight = 7;
inline constexpr int kDeltaX = 8;
inline constexpr int kDeltaY = 9;
}  // namespace obs_index

// One environment of the grid-world family. Immutable once constructed; the
// constructor enforces the layout invariants (target and start free, obstacle
// count bounded, all free cells mutually reachable).
class GridSpec {
 public:
  GridSpec(int width, int height, std::vector<Cell> obstacles, Cell target,
           std::optional<Cell> start, RewardParams rewards = {},
           int episode_cap = 0, Preset preset = Preset::kStandard);

  int width() const { return width_; }
  int height() const { return height_; }
  int cell_count() const { return width_ * height_; }
  Cell target() const { return target_; }
  const std::optional<Cell>& start() const { return start_; }
  const RewardParams& rewards() const { return rewards_; }
  int episode_cap() const { return episode_cap_; }
  Preset preset() const { return preset_; }

  bool InBounds(Cell c) const {
    return c.x >= 0 && c.y >= 0 && c.x < width_ && c.y < height_;
  }
  bool IsObstacle(Cell c) const { return blocked_[Index(c)] != 0; }
  bool IsFree(Cell c) const { return InBounds(c) && !IsObstacle(c); }
  int Index(Cell c) const { return c.y * width_ + c.x; }
  Cell CellAt(int index) const { return {index % width_, index / width_}; }

  // Sorted row-major.
  const std::vector<Cell>& obstacles() const { return obstacles_; }
  const std::vector<Cell>& free_cells() const { return free_cells_; }
  // Free cells an episode may start from (free cells minus the target, or the
  // fixed start cell).
  std::vector<Cell> StartCells() const;
  // Per-cell obstacle flags, row-major.
  const std::vector<std::uint8_t>& layout() const { return blocked_; }

  friend bool operator==(const GridSpec& a, const GridSpec& b);

 private:
  int width_;
  int height_;
  std::vector<Cell> obstacles_;
  std::vector<Cell> free_cells_;
  std::vector<std::uint8_t> blocked_;
  Cell target_;
  std::optional<Cell> start_;
  RewardParams rewards_;
  int episode_cap_;
  Preset preset_;
};

// True when every free cell can reach every other free cell.
bool FreeCellsConnected(int width, int height,
                        const std::vector<std::uint8_t>& blocked);

// Breadth-first distances (in moves) from every cell to `to`; -1 for
// obstacles and unreachable cells. Indexed row-major.
std::vector<int> DistancesTo(const GridSpec& spec, Cell to);

struct StepResult {
  Cell next_pos;
  double reward = 0.0;
  bool done = false;
  bool collided = false;
};

// One transition. Off-grid moves and moves into obstacles leave the agent in
// place with the collision penalty; reaching the target ends the episode. The
// episode cap is enforced by the caller that tracks the step count.
StepResult Step(const GridSpec& spec, Cell pos, Action action);

Observation Observe(const GridSpec& spec, Cell pos);

// Recovers the agent cell encoded in an observation.
Cell DecodeAgentCell(const GridSpec& spec, const Observation& obs);

struct Transition {
  Cell next;
  double reward = 0.0;
  bool done = false;
  bool collided = false;
};

// Exact tabular view of Step over every (free cell, action) pair.
class TransitionTable {
 public:
  explicit TransitionTable(const GridSpec& spec);

  const std::vector<Cell>& cells() const { return cells_; }
  std::size_t size() const { return entries_.size(); }
  // Index of `c` within cells(), or -1.
  int StateOf(Cell c) const { return state_of_[c.y * width_ + c.x]; }
  const Transition& At(int state, Action a) const {
    return entries_[static_cast<std::size_t>(state) * kNumActions +
                    static_cast<std::size_t>(ActionIndex(a))];
  }
  const Transition& At(Cell c, Action a) const { return At(StateOf(c), a); }

 private:
  int width_;
  std::vector<Cell> cells_;
  std::vector<int> state_of_;
  std::vector<Transition> entries_;
};

// Random layout, deterministic in `seed`. Disconnected layouts are resampled
// up to 1000 times before kImpossibleLayout is raised. `episode_cap` 0 means
// width*height.
GridSpec GenerateEnvironment(std::uint64_t seed, int width, int height,
                             int n_obstacles, Preset preset = Preset::kStandard,
                             RewardParams rewards = {}, int episode_cap = 0);

struct EnvironmentSet {
  std::vector<GridSpec> environments;
  int unlearn_index = 0;
  std::vector<GridSpec> unseen;

  // Throws kInvalidSpec unless all environments share dimensions and the
  // unlearn index is valid.
  void Validate() const;
  const GridSpec& unlearn_env() const {
    return environments[static_cast<std::size_t>(unlearn_index)];
  }
  std::vector<int> RetainedIds() const;
};

EnvironmentSet GenerateEnvironmentSet(std::uint64_t seed, int n, int width,
                                      int height, int n_obstacles,
                                      int unlearn_index = 0, int n_unseen = 0,
                                      Preset preset = Preset::kStandard);

struct DynamicEnvironment {
  std::vector<GridSpec> snapshots;
};

// Snapshot 1 is `spec`; each later snapshot relocates `moves_per_step`
// obstacles of the previous one.
DynamicEnvironment MakeDynamic(const GridSpec& spec, int t, std::uint64_t seed,
                               int moves_per_step = 2);

// Count of cells whose obstacle flag differs.
int LayoutDifference(const GridSpec& a, const GridSpec& b);

nlohmann::json ToJson(const GridSpec& spec);
GridSpec GridSpecFromJson(const nlohmann::json& j);
nlohmann::json ToJson(const EnvironmentSet& envs);
EnvironmentSet EnvironmentSetFromJson(const nlohmann::json& j);

// '#' obstacle, 'T' target, 'S' fixed start, '.' free.
std::string RenderText(const GridSpec& spec);

}  // namespace rlu

#endif  // RLU_GRIDWORLD_HPP_
