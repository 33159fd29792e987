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


#ifndef RLU_EXPERIMENT_HPP_
#define RLU_EXPERIMENT_HPP_

#include <map>
#include <string>
#include <vector>

#include "rlu/baselines.hpp"
#include "rlu/decremental.hpp"
#include "rlu/inference.hpp"
#include "rlu/metrics.hpp"
#include "rlu/poison.hpp"

namespace rlu {

enum class ExperimentPreset {
  kOverall,
  kSizeSweep,
  kComplexitySweep,
  kPoisonSweep,
  kDynamic,
  kGeneralization,
  kRobustness,
  kTiming,
  kSafety,
  kSingleEnv,
  kInference,
};

enum class Method { kDecremental, kPoison, kLfs, kNonTransferLfs };

const char* PresetName(ExperimentPreset p);
ExperimentPreset ExperimentPresetFromName(const std::string& name);
const char* MethodName(Method m);
Method MethodFromName(const std::string& name);

// Everything a run needs. Module seeds are not configured directly; each
// replicate derives them from seed + replicate index.
struct ExperimentConfig {
  ExperimentPreset preset = ExperimentPreset::kOverall;
  std::vector<Method> methods = {Method::kDecremental};
  int envs = 20;
  int width = 10;
  int height = 10;
  int obstacles = 10;
  int unlearn_index = 0;
  int unseen = 0;
  int replicates = 10;
  std::uint64_t seed = 0;
  int eval_episodes = 50;

  TrainConfig train;
  DecrementalConfig decremental;
  PoisonConfig poison;
  OfflineConfig offline;
  GaConfig ga;
  ForgetQualityConfig forget;

  bool forget_quality = false;  // KS p-values against a freshly trained LFS agent
  bool inference = false;       // GA similarity before and after
  int utility_every = 0;        // epochs between model-utility samples; 0 = off
  bool record_timing = false;   // wall-clock column of metrics.csv
  int dynamic_snapshots = 5;
  int dynamic_moves = 2;
  bool noise = false;
  NoiseRange noise_range;
  std::vector<int> sweep;  // grid sizes, obstacle counts or poison levels by preset
  bool checkpoints = true;

  // Defaults of a named preset.
  static ExperimentConfig ForPreset(ExperimentPreset preset);

  // Flat key=value interface; throws kConfig on unknown keys or bad values.
  void Set(const std::string& key, const std::string& value);
  void Apply(const std::string& text);  // lines of key = value, '#' comments
  std::string ToText() const;
  static ExperimentConfig FromText(const std::string& text);

  void Validate() const;
};

// Documented key list, in ToText order.
std::vector<std::string> ExperimentConfigKeys();

struct ExperimentResult {
  std::string dir;
  std::vector<MetricRecord> records;
  nlohmann::json summary;
  // Decremental loss traces, one per (setting, replicate) in run order.
  std::vector<LossTrace> loss_traces;
};

// Runs the preset and writes config.txt, metrics.csv, summary.json, traces and
// checkpoints below `out_dir`. On failure error.json is written next to the
// partial artifacts and the error rethrown.
ExperimentResult RunExperiment(const ExperimentConfig& cfg, const std::string& out_dir);

nlohmann::json ErrorJson(const Error& e);

}  // namespace rlu

#endif  // RLU_EXPERIMENT_HPP_
