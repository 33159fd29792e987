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


#include "rlu/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <tuple>
#include <type_traits>

#include "rlu/plots.hpp"

namespace rlu {

namespace fs = std::filesystem;

namespace {

constexpr std::pair<ExperimentPreset, const char*> kPresetNames[] = {
    {ExperimentPreset::kOverall, "overall"},
    {ExperimentPreset::kSizeSweep, "size-sweep"},
    {ExperimentPreset::kComplexitySweep, "complexity-sweep"},
    {ExperimentPreset::kPoisonSweep, "poison-sweep"},
    {ExperimentPreset::kDynamic, "dynamic"},
    {ExperimentPreset::kGeneralization, "generalization"},
    {ExperimentPreset::kRobustness, "robustness"},
    {ExperimentPreset::kTiming, "timing"},
    {ExperimentPreset::kSafety, "safety"},
    {ExperimentPreset::kSingleEnv, "single-env"},
    {ExperimentPreset::kInference, "inference"},
};

constexpr std::pair<Method, const char*> kMethodNames[] = {
    {Method::kDecremental, "decremental"},
    {Method::kPoison, "poison"},
    {Method::kLfs, "lfs"},
    {Method::kNonTransferLfs, "non-transfer-lfs"},
};

}  // namespace

const char* PresetName(ExperimentPreset p) {
  for (const auto& [k, name] : kPresetNames) {
    if (k == p) return name;
  }
  return "unknown";
}

ExperimentPreset ExperimentPresetFromName(const std::string& name) {
  for (const auto& [k, n] : kPresetNames) {
    if (name == n) return k;
  }
  throw Error(ErrorCode::kConfig, "unknown preset: " + name);
}

const char* MethodName(Method m) {
  for (const auto& [k, name] : kMethodNames) {
    if (k == m) return name;
  }
  return "unknown";
}

Method MethodFromName(const std::string& name) {
  for (const auto& [k, n] : kMethodNames) {
    if (name == n) return k;
  }
  throw Error(ErrorCode::kConfig, "unknown method: " + name);
}

namespace {

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> SplitList(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  for (std::string item; std::getline(ss, item, ',');) {
    item = Trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
T ParseNumber(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    T v{};
    if constexpr (std::is_same_v<T, double>) {
      v = std::stod(value, &used);
    } else if constexpr (std::is_same_v<T, std::uint64_t>) {
      if (!value.empty() && value[0] == '-') throw std::invalid_argument("negative");
      v = std::stoull(value, &used);
    } else {
      const long long x = std::stoll(value, &used);
      if (x < std::numeric_limits<T>::min() || x > std::numeric_limits<T>::max()) throw std::out_of_range("range");
      v = static_cast<T>(x);
    }
    if (used != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::logic_error&) {
    throw Error(ErrorCode::kConfig, "bad value for " + key + ": '" + value + "'");
  }
}

bool ParseBool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw Error(ErrorCode::kConfig, "bad boolean for " + key + ": '" + value + "'");
}

std::string FormatDouble(double v) {
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}

struct KeyDef {
  const char* name;
  std::function<void(ExperimentConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define RLU_INT_KEY(NAME, FIELD)                                                                    \
  KeyDef {                                                                                          \
    NAME, [](ExperimentConfig& c, const std::string& k, const std::string& v) {                     \
      c.FIELD = ParseNumber<std::remove_reference_t<decltype(c.FIELD)>>(k, v);                      \
    },                                                                                              \
        [](const ExperimentConfig& c) { return std::to_string(c.FIELD); }                           \
  }
#define RLU_REAL_KEY(NAME, FIELD)                                                                   \
  KeyDef {                                                                                          \
    NAME, [](ExperimentConfig& c, const std::string& k, const std::string& v) {                     \
      c.FIELD = ParseNumber<double>(k, v);                                                          \
    },                                                                                              \
        [](const ExperimentConfig& c) { return FormatDouble(c.FIELD); }                             \
  }
#define RLU_BOOL_KEY(NAME, FIELD)                                                                   \
  KeyDef {                                                                                          \
    NAME, [](ExperimentConfig& c, const std::string& k, const std::string& v) {                     \
      c.FIELD = ParseBool(k, v);                                                                    \
    },                                                                                              \
        [](const ExperimentConfig& c) { return std::string(c.FIELD ? "true" : "false"); }           \
  }

const std::vector<KeyDef>& Keys() {
  static const std::vector<KeyDef> keys = {
      {"preset",
       [](ExperimentConfig& c, const std::string&, const std::string& v) {
         c.preset = ExperimentPresetFromName(v);
       },
       [](const ExperimentConfig& c) { return std::string(PresetName(c.preset)); }},
      {"methods",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.methods.clear();
         for (const std::string& m : SplitList(v)) c.methods.push_back(MethodFromName(m));
         if (c.methods.empty()) throw Error(ErrorCode::kConfig, k + " must name at least one method");
       },
       [](const ExperimentConfig& c) {
         std::string s;
         for (Method m : c.methods) s += (s.empty() ? "" : ",") + std::string(MethodName(m));
         return s;
       }},
      RLU_INT_KEY("envs", envs),
      RLU_INT_KEY("width", width),
      RLU_INT_KEY("height", height),
      RLU_INT_KEY("obstacles", obstacles),
      RLU_INT_KEY("unlearn_index", unlearn_index),
      RLU_INT_KEY("unseen", unseen),
      RLU_INT_KEY("replicates", replicates),
      RLU_INT_KEY("seed", seed),
      RLU_INT_KEY("eval_episodes", eval_episodes),
      RLU_INT_KEY("train.episodes_per_env", train.episodes_per_env),
      RLU_REAL_KEY("train.gamma", train.gamma),
      RLU_REAL_KEY("train.epsilon", train.epsilon),
      RLU_INT_KEY("train.batch_size", train.batch_size),
      RLU_INT_KEY("train.target_sync_interval", train.target_sync_interval),
      RLU_REAL_KEY("train.learning_rate", train.learning_rate),
      RLU_INT_KEY("train.warmup_samples", train.warmup_samples),
      RLU_REAL_KEY("train.softmax_temperature", train.softmax_temperature),
      RLU_INT_KEY("decremental.m", decremental.m),
      RLU_INT_KEY("decremental.epochs", decremental.epochs),
      RLU_INT_KEY("decremental.batch_size", decremental.batch_size),
      RLU_REAL_KEY("decremental.learning_rate", decremental.learning_rate),
      RLU_REAL_KEY("decremental.w1", decremental.w1),
      RLU_REAL_KEY("decremental.w2", decremental.w2),
      RLU_INT_KEY("decremental.probes_per_env", decremental.probes_per_env),
      RLU_INT_KEY("decremental.probe_batch", decremental.probe_batch),
      RLU_INT_KEY("poison.level", poison.poison_level),
      RLU_INT_KEY("poison.epochs", poison.epochs),
      RLU_REAL_KEY("poison.lambda1", poison.lambda1),
      RLU_REAL_KEY("poison.lambda2", poison.lambda2),
      RLU_INT_KEY("poison.inner_episodes", poison.inner_episodes),
      RLU_INT_KEY("poison.retain_episodes", poison.retain_episodes),
      RLU_REAL_KEY("poison.epsilon", poison.epsilon),
      RLU_INT_KEY("poison.embedding_probes", poison.embedding_probes),
      RLU_INT_KEY("poison.probes_per_env", poison.probes_per_env),
      RLU_INT_KEY("poison.action_space_cap", poison.action_space_cap),
      RLU_REAL_KEY("poison.strategy_gamma", poison.strategy_gamma),
      RLU_REAL_KEY("poison.strategy_learning_rate", poison.strategy_learning_rate),
      RLU_INT_KEY("poison.strategy_batch", poison.strategy_batch),
      RLU_INT_KEY("poison.strategy_updates", poison.strategy_updates),
      RLU_INT_KEY("offline.gradient_steps", offline.gradient_steps),
      RLU_REAL_KEY("offline.negated_clip", offline.negated_clip),
      RLU_INT_KEY("ga.population", ga.population),
      RLU_INT_KEY("ga.generations", ga.generations),
      RLU_REAL_KEY("ga.crossover_rate", ga.crossover_rate),
      RLU_REAL_KEY("ga.mutation_rate", ga.mutation_rate),
      RLU_INT_KEY("ga.elitism", ga.elitism),
      RLU_BOOL_KEY("forget.enabled", forget_quality),
      RLU_INT_KEY("forget.trajectories", forget.trajectories),
      RLU_INT_KEY("forget.length", forget.length),
      {"forget.rule",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         if (v == "bfs") {
           c.forget.rule = CorrectActionRule::kBfs;
         } else if (v == "manhattan") {
           c.forget.rule = CorrectActionRule::kManhattan;
         } else {
           throw Error(ErrorCode::kConfig, "bad value for " + k + ": '" + v + "'");
         }
       },
       [](const ExperimentConfig& c) {
         return std::string(c.forget.rule == CorrectActionRule::kBfs ? "bfs" : "manhattan");
       }},
      RLU_BOOL_KEY("inference.enabled", inference),
      RLU_INT_KEY("utility.every", utility_every),
      RLU_BOOL_KEY("timing.record", record_timing),
      RLU_INT_KEY("dynamic.snapshots", dynamic_snapshots),
      RLU_INT_KEY("dynamic.moves", dynamic_moves),
      RLU_BOOL_KEY("noise.enabled", noise),
      RLU_REAL_KEY("noise.lo", noise_range.lo),
      RLU_REAL_KEY("noise.hi", noise_range.hi),
      {"sweep",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.sweep.clear();
         for (const std::string& x : SplitList(v)) c.sweep.push_back(ParseNumber<int>(k, x));
       },
       [](const ExperimentConfig& c) {
         std::string s;
         for (int x : c.sweep) s += (s.empty() ? "" : ",") + std::to_string(x);
         return s;
       }},
      RLU_BOOL_KEY("checkpoints", checkpoints),
  };
  return keys;
}

#undef RLU_INT_KEY
#undef RLU_REAL_KEY
#undef RLU_BOOL_KEY

}  // namespace

std::vector<std::string> ExperimentConfigKeys() {
  std::vector<std::string> out;
  for (const KeyDef& k : Keys()) out.emplace_back(k.name);
  return out;
}

ExperimentConfig ExperimentConfig::ForPreset(ExperimentPreset preset) {
  ExperimentConfig c;
  c.preset = preset;
  // Heavier retention weight than the unweighted loss; with w2 = 1 the
  // retained environments collapse alongside the unlearning one.
  c.decremental.w2 = 3.0;
  c.methods = {Method::kDecremental, Method::kPoison};
  switch (preset) {
    case ExperimentPreset::kOverall:
      c.methods = {Method::kDecremental, Method::kPoison, Method::kLfs, Method::kNonTransferLfs};
      c.forget_quality = true;
      c.utility_every = 10;
      break;
    case ExperimentPreset::kSizeSweep:
      c.sweep = {5, 10, 15};
      break;
    case ExperimentPreset::kComplexitySweep:
      c.sweep = {10, 15, 20};
      break;
    case ExperimentPreset::kPoisonSweep:
      c.methods = {Method::kPoison};
      c.sweep = {1, 3, 5};
      break;
    case ExperimentPreset::kDynamic:
      break;
    case ExperimentPreset::kGeneralization:
      c.unseen = 5;
      break;
    case ExperimentPreset::kRobustness:
      c.noise = true;
      break;
    case ExperimentPreset::kTiming:
      c.methods = {Method::kDecremental, Method::kPoison, Method::kLfs, Method::kNonTransferLfs};
      c.record_timing = true;
      break;
    case ExperimentPreset::kSafety:
      break;
    case ExperimentPreset::kSingleEnv:
      c.methods = {Method::kDecremental};
      c.envs = 1;
      break;
    case ExperimentPreset::kInference:
      c.width = 5;
      c.height = 5;
      c.obstacles = 5;
      c.inference = true;
      break;
  }
  return c;
}

void ExperimentConfig::Set(const std::string& key, const std::string& value) {
  const std::string k = Trim(key);
  const std::string v = Trim(value);
  if (k == "size") {
    width = height = ParseNumber<int>(k, v);
    return;
  }
  if (k == "method") {
    Set("methods", v);
    return;
  }
  for (const KeyDef& def : Keys()) {
    if (k == def.name) {
      def.set(*this, k, v);
      return;
    }
  }
  throw Error(ErrorCode::kConfig, "unknown configuration key: " + k);
}

void ExperimentConfig::Apply(const std::string& text) {
  std::stringstream in(text);
  int line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = Trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::kConfig, "line " + std::to_string(line_no) + ": expected key = value");
    }
    Set(line.substr(0, eq), line.substr(eq + 1));
  }
}

std::string ExperimentConfig::ToText() const {
  std::string out;
  for (const KeyDef& k : Keys()) out += std::string(k.name) + " = " + k.get(*this) + "\n";
  return out;
}

ExperimentConfig ExperimentConfig::FromText(const std::string& text) {
  ExperimentConfig c;
  c.Apply(text);
  return c;
}

void ExperimentConfig::Validate() const {
  if (replicates < 1) throw Error(ErrorCode::kConfig, "replicates must be >= 1");
  if (methods.empty()) throw Error(ErrorCode::kConfig, "no unlearning method selected");
  if (envs < 1 || width < 1 || height < 1 || obstacles < 0 || unseen < 0) {
    throw Error(ErrorCode::kConfig, "environment parameters out of range");
  }
  if (preset != ExperimentPreset::kSingleEnv && envs < 2) {
    throw Error(ErrorCode::kConfig, "unlearning needs at least two environments");
  }
  if (unlearn_index < 0 || unlearn_index >= envs) throw Error(ErrorCode::kConfig, "unlearn_index out of range");
  if (eval_episodes < 1) throw Error(ErrorCode::kConfig, "eval_episodes must be >= 1");
  if (utility_every < 0) throw Error(ErrorCode::kConfig, "utility.every must be >= 0");
  if (dynamic_snapshots < 1 || dynamic_moves < 0) throw Error(ErrorCode::kConfig, "dynamic parameters out of range");
  if (!(noise_range.lo <= noise_range.hi)) throw Error(ErrorCode::kConfig, "noise range is empty");
  const bool sweeping = preset == ExperimentPreset::kSizeSweep ||
                        preset == ExperimentPreset::kComplexitySweep ||
                        preset == ExperimentPreset::kPoisonSweep;
  if (sweeping && sweep.empty()) throw Error(ErrorCode::kConfig, "sweep presets need sweep values");
  if (preset == ExperimentPreset::kGeneralization && unseen < 1) {
    throw Error(ErrorCode::kConfig, "generalization preset needs unseen environments");
  }
  if (preset == ExperimentPreset::kSingleEnv &&
      (methods.size() != 1 || methods[0] != Method::kDecremental)) {
    throw Error(ErrorCode::kConfig, "single-env preset supports the decremental method only");
  }
  train.Validate();
  decremental.Validate();
  poison.Validate();
  ga.Validate();
  if (forget.trajectories < 1 || forget.length < 1) throw Error(ErrorCode::kConfig, "forget-quality sizes must be >= 1");
  if (offline.gradient_steps < 0 || !(offline.negated_clip > 0.0)) {
    throw Error(ErrorCode::kConfig, "offline configuration out of range");
  }
}

nlohmann::json ErrorJson(const Error& e) {
  return {{"error", std::string(ErrorCodeName(e.code()))}, {"message", e.what()}};
}

namespace {

using Clock = std::chrono::steady_clock;

double Since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << text;
}

// Swept values change the environment family or the poisoning level.
ExperimentConfig ForSetting(const ExperimentConfig& cfg, int value) {
  ExperimentConfig c = cfg;
  switch (cfg.preset) {
    case ExperimentPreset::kSizeSweep:
      c.width = c.height = value;
      // Same obstacle density as the 10x10 / 10-obstacle reference.
      c.obstacles = static_cast<int>(std::lround(static_cast<double>(value * value) * cfg.obstacles / 100.0));
      break;
    case ExperimentPreset::kComplexitySweep:
      c.obstacles = value;
      break;
    case ExperimentPreset::kPoisonSweep:
      c.poison.poison_level = value;
      break;
    default:
      break;
  }
  return c;
}

struct PhaseKey {
  int replicate;
  int setting;
  std::string phase;
  friend bool operator<(const PhaseKey& a, const PhaseKey& b) {
    return std::tie(a.replicate, a.setting, a.phase) < std::tie(b.replicate, b.setting, b.phase);
  }
};

class Runner {
 public:
  Runner(const ExperimentConfig& cfg, fs::path dir) : cfg_(cfg), dir_(std::move(dir)) {}

  ExperimentResult Run();

 private:
  struct Trained {
    int width = -1, height = -1, obstacles = -1;
    EnvironmentSet envs;
    TrainResult result;
    double seconds = 0.0;
  };

  void RunUnit(const ExperimentConfig& c, int replicate, int setting);
  void RunSingleEnv(const ExperimentConfig& c, int replicate, int setting);
  std::vector<MetricRecord> EvaluateAll(const ExperimentConfig& c, const EnvironmentSet& envs,
                                        const std::vector<GridSpec>& snapshots, const Mlp& net,
                                        std::uint64_t seed) const;
  void Emit(std::vector<MetricRecord> rows, int replicate, int setting, const std::string& phase,
            double seconds, double similarity, double p_value, double utility);
  void Checkpoint(const Mlp& net, int replicate, int setting, const std::string& phase) const;
  nlohmann::json Summarize() const;

  ExperimentConfig cfg_;
  fs::path dir_;
  Trained cache_;
  int cache_replicate_ = -1;
  std::vector<MetricRecord> records_;
  std::map<PhaseKey, nlohmann::json> extras_;
  std::vector<LossTrace> loss_traces_;
  std::vector<std::string> utility_rows_;
  nlohmann::json forget_rows_ = nlohmann::json::array();
};

std::vector<MetricRecord> Runner::EvaluateAll(const ExperimentConfig& c, const EnvironmentSet& envs,
                                              const std::vector<GridSpec>& snapshots, const Mlp& net,
                                              std::uint64_t seed) const {
  auto eval = [&](const GridSpec& g, std::uint64_t s) {
    if (c.noise) return Evaluate(g, net, c.eval_episodes, s, c.noise_range, c.train.softmax_temperature);
    return Evaluate(g, net, c.eval_episodes, s);
  };
  std::vector<MetricRecord> rows;
  const int n = static_cast<int>(envs.environments.size());
  for (int id = 0; id < n + static_cast<int>(envs.unseen.size()); ++id) {
    MetricRecord r;
    r.env_id = id;
    const std::uint64_t s = MixSeed(seed, 0x6576616c00ULL + static_cast<std::uint64_t>(id));
    if (id == envs.unlearn_index && !snapshots.empty()) {
      // Dynamic unlearning env: average over its snapshots.
      for (std::size_t k = 0; k < snapshots.size(); ++k) {
        const EvalStats st = eval(snapshots[k], MixSeed(s, k));
        r.steps += st.mean_steps / static_cast<double>(snapshots.size());
        r.reward += st.mean_reward / static_cast<double>(snapshots.size());
        r.collisions += st.mean_collisions / static_cast<double>(snapshots.size());
      }
    } else {
      const GridSpec& g = id < n ? envs.environments[static_cast<std::size_t>(id)]
                                 : envs.unseen[static_cast<std::size_t>(id - n)];
      const EvalStats st = eval(g, s);
      r.steps = st.mean_steps;
      r.reward = st.mean_reward;
      r.collisions = st.mean_collisions;
    }
    rows.push_back(r);
  }
  return rows;
}

void Runner::Emit(std::vector<MetricRecord> rows, int replicate, int setting, const std::string& phase,
                  double seconds, double similarity, double p_value, double utility) {
  for (MetricRecord& r : rows) {
    r.replicate = replicate;
    r.setting = setting;
    r.phase = phase;
    r.wall_clock = cfg_.record_timing ? seconds : 0.0;
    r.utility = utility;
    if (r.env_id == cfg_.unlearn_index) {
      r.similarity = similarity;
      r.p_value = p_value;
    }
    records_.push_back(std::move(r));
  }
}

void Runner::Checkpoint(const Mlp& net, int replicate, int setting, const std::string& phase) const {
  if (!cfg_.checkpoints) return;
  const fs::path p = dir_ / "checkpoints" /
                     ("r" + std::to_string(replicate) + "_s" + std::to_string(setting) + "_" + phase + ".json");
  SaveCheckpoint(net, p.string());
}

void Runner::RunUnit(const ExperimentConfig& c, int replicate, int setting) {
  const std::uint64_t seed = cfg_.seed + static_cast<std::uint64_t>(replicate);
  const Preset family = c.preset == ExperimentPreset::kSafety ? Preset::kAircraft : Preset::kStandard;

  if (cache_replicate_ != replicate || cache_.width != c.width || cache_.height != c.height ||
      cache_.obstacles != c.obstacles) {
    cache_ = Trained();
    cache_.width = c.width;
    cache_.height = c.height;
    cache_.obstacles = c.obstacles;
    cache_.envs = GenerateEnvironmentSet(MixSeed(seed, 0x656e76), c.envs, c.width, c.height, c.obstacles,
                                         c.unlearn_index, c.unseen, family);
    TrainConfig t = c.train;
    t.seed = MixSeed(seed, 0x747261696e);
    const auto t0 = Clock::now();
    cache_.result = Train(cache_.envs, t);
    cache_.seconds = Since(t0);
    cache_replicate_ = replicate;
  }
  const EnvironmentSet& envs = cache_.envs;
  const Mlp& pre = cache_.result.net;
  const GridSpec& u = envs.unlearn_env();
  const std::uint64_t eval_seed = MixSeed(seed, 0x6576);

  std::vector<GridSpec> snapshots;
  if (c.preset == ExperimentPreset::kDynamic) {
    snapshots = MakeDynamic(u, c.dynamic_snapshots, MixSeed(seed, 0x64796e), c.dynamic_moves).snapshots;
  }

  // Retained-only reference agent for forget quality; reused as the LFS result.
  std::optional<Mlp> lfs;
  double lfs_seconds = 0.0;
  TrainConfig lfs_cfg = c.train;
  lfs_cfg.seed = MixSeed(seed, 0x6c6673);
  auto ensure_lfs = [&] {
    if (lfs) return;
    const auto t0 = Clock::now();
    lfs = Lfs(envs, lfs_cfg).net;
    lfs_seconds = Since(t0);
  };
  ForgetQualityConfig fq = c.forget;
  fq.seed = MixSeed(seed, 0x6671);
  GaConfig ga = c.ga;
  ga.seed = MixSeed(seed, 0x6761);
  const Frame frame = Frame::Of(u);

  auto similarity_of = [&](const Mlp& net, const std::string& phase) {
    if (!c.inference) return 0.0;
    const GaResult r = RunGa(net, frame, ga);
    extras_[{replicate, setting, phase}]["ga_fitness"] = r.fitness;
    return Similarity(r.best, u);
  };
  auto p_value_of = [&](const Mlp& net, const std::string& phase) {
    if (!c.forget_quality) return 0.0;
    ensure_lfs();
    const double p = ForgetQuality(net, *lfs, u, fq).ks.p;
    forget_rows_.push_back({{"replicate", replicate}, {"setting", setting}, {"phase", phase}, {"p_value", p}});
    return p;
  };
  const std::uint64_t utility_seed = MixSeed(seed, 0x7574);
  auto utility_of = [&](const Mlp& net) { return ModelUtility(net, envs, c.eval_episodes, utility_seed); };

  const double pre_utility = utility_of(pre);
  {
    const double sim = similarity_of(pre, "before");
    const double p = p_value_of(pre, "before");
    Emit(EvaluateAll(c, envs, snapshots, pre, eval_seed), replicate, setting, "before", cache_.seconds, sim, p,
         pre_utility);
    if (c.forget_quality) forget_rows_.back()["utility"] = pre_utility;
    Checkpoint(pre, replicate, setting, "before");
  }

  for (Method method : c.methods) {
    const std::string phase = std::string("after-") + MethodName(method);
    // Utility samples during unlearning; their cost is kept off the clock.
    double observer_seconds = 0.0;
    std::vector<std::pair<int, double>> utility_trace;
    EpochObserver observer;
    if (c.utility_every > 0) {
      utility_trace.push_back({0, pre_utility});
      observer = [&](int epoch, const Mlp& net) {
        if (epoch % c.utility_every != 0) return;
        const auto t0 = Clock::now();
        utility_trace.push_back({epoch, utility_of(net)});
        observer_seconds += Since(t0);
      };
    }
    Mlp post;
    const auto t0 = Clock::now();
    switch (method) {
      case Method::kDecremental: {
        DecrementalConfig d = c.decremental;
        d.seed = MixSeed(seed, 0x646563);
        const std::vector<GridSpec> stages = snapshots.empty() ? std::vector<GridSpec>{u} : snapshots;
        LossTrace trace;
        post = pre;
        int done = 0;
        for (std::size_t k = 0; k < stages.size(); ++k) {
          EnvironmentSet ek = envs;
          ek.environments[static_cast<std::size_t>(envs.unlearn_index)] = stages[k];
          DecrementalConfig dk = d;
          const int n = static_cast<int>(stages.size());
          dk.epochs = d.epochs / n + (static_cast<int>(k) < d.epochs % n ? 1 : 0);
          dk.seed = MixSeed(d.seed, k);
          const int offset = done;
          EpochObserver staged;
          if (observer) staged = [&, offset](int e, const Mlp& net) { observer(offset + e, net); };
          DecrementalResult r = UnlearnDecremental(post, ek, dk, staged);
          for (LossTraceRow row : r.trace) {
            row.epoch += offset;
            trace.push_back(row);
          }
          done += dk.epochs;
          post = std::move(r.net);
        }
        loss_traces_.push_back(trace);
        std::ofstream out(dir_ / "traces" /
                          ("loss_r" + std::to_string(replicate) + "_s" + std::to_string(setting) + ".csv"));
        WriteLossTraceCsv(out, trace);
        break;
      }
      case Method::kPoison: {
        PoisonConfig p = c.poison;
        p.seed = MixSeed(seed, 0x706f69);
        TrainConfig t = c.train;
        t.seed = MixSeed(seed, 0x706f7472);
        const std::vector<GridSpec> stages = snapshots.empty() ? std::vector<GridSpec>{u} : snapshots;
        post = pre;
        std::vector<PoisonTraceRow> trace;
        int done = 0;
        for (std::size_t k = 0; k < stages.size(); ++k) {
          EnvironmentSet ek = envs;
          ek.environments[static_cast<std::size_t>(envs.unlearn_index)] = stages[k];
          PoisonConfig pk = p;
          const int n = static_cast<int>(stages.size());
          pk.epochs = p.epochs / n + (static_cast<int>(k) < p.epochs % n ? 1 : 0);
          pk.seed = MixSeed(p.seed, k);
          const int offset = done;
          EpochObserver staged;
          if (observer) staged = [&, offset](int e, const Mlp& net) { observer(offset + e, net); };
          PoisonResult r = RunPoisoning(post, ek, pk, t, &cache_.result.buffer, staged);
          for (PoisonTraceRow row : r.trace) {
            row.epoch += offset;
            trace.push_back(row);
          }
          done += pk.epochs;
          post = std::move(r.net);
        }
        std::ofstream out(dir_ / "traces" /
                          ("poison_r" + std::to_string(replicate) + "_s" + std::to_string(setting) + ".csv"));
        WritePoisonTraceCsv(out, trace);
        break;
      }
      case Method::kLfs:
        ensure_lfs();
        post = *lfs;
        break;
      case Method::kNonTransferLfs: {
        TrainConfig t = c.train;
        t.seed = MixSeed(seed, 0x6e746c);
        post = NonTransferLfs(LabeledSampleStore(cache_.result.buffer), envs.unlearn_index, t, c.offline);
        break;
      }
    }
    double seconds = Since(t0) - observer_seconds;
    if (method == Method::kLfs) seconds = lfs_seconds;

    nlohmann::json& extra = extras_[{replicate, setting, phase}];
    if (!utility_trace.empty()) {
      double drift = 0.0;
      for (const auto& [epoch, value] : utility_trace) {
        utility_rows_.push_back(std::to_string(replicate) + "," + std::to_string(setting) + "," + phase + "," +
                                std::to_string(epoch) + "," + FormatDouble(value));
        drift = std::max(drift, std::abs(value - pre_utility) / std::max(std::abs(pre_utility), 1e-12));
      }
      extra["utility_drift"] = drift;
    }
    if (cfg_.record_timing) extra["seconds"] = seconds;
    const double sim = similarity_of(post, phase);
    const double p = p_value_of(post, phase);
    const double utility = utility_of(post);
    if (c.forget_quality) forget_rows_.back()["utility"] = utility;
    Emit(EvaluateAll(c, envs, snapshots, post, eval_seed), replicate, setting, phase, seconds, sim, p, utility);
    Checkpoint(post, replicate, setting, phase);
  }
}

void Runner::RunSingleEnv(const ExperimentConfig& c, int replicate, int setting) {
  const std::uint64_t seed = cfg_.seed + static_cast<std::uint64_t>(replicate);
  const GridSpec env = GenerateEnvironment(MixSeed(seed, 0x656e76), c.width, c.height, c.obstacles);
  TrainConfig t = c.train;
  t.seed = MixSeed(seed, 0x747261696e);
  auto t0 = Clock::now();
  const Mlp pre = Train(std::vector<GridSpec>{env}, t).net;
  const double train_seconds = Since(t0);

  // Greedy trajectories from every start cell; one becomes the forget set.
  std::vector<Trajectory> all;
  std::vector<Cell> starts;
  for (const Cell& s : env.StartCells()) {
    Trajectory tr = ToTrajectory(RunPolicy(env, GreedyPolicy(pre), s));
    if (tr.empty()) continue;
    all.push_back(std::move(tr));
    starts.push_back(s);
  }
  if (all.size() < 2) throw Error(ErrorCode::kEmptyInput, "single-env preset needs two non-empty trajectories");
  Rng rng(MixSeed(seed, 0x73696e67));
  const auto pick = static_cast<std::size_t>(UniformInt(rng, 0, static_cast<int>(all.size()) - 1));
  const Trajectory forget = all[pick];
  std::vector<Trajectory> keep;
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (i != pick) keep.push_back(all[i]);
  }
  DecrementalConfig d = c.decremental;
  d.seed = MixSeed(seed, 0x646563);
  t0 = Clock::now();
  const Mlp post = UnlearnTrajectory(pre, env, forget, keep, d);
  const double unlearn_seconds = Since(t0);

  auto rollout_row = [&](const Mlp& net) {
    const Rollout r = RunPolicy(env, GreedyPolicy(net), starts[pick]);
    MetricRecord m;
    m.env_id = 0;
    m.steps = static_cast<double>(r.actions.size());
    m.reward = r.reward;
    m.collisions = r.collisions;
    return std::vector<MetricRecord>{m};
  };
  // Relative mean absolute Q change on the kept pairs that the forget
  // trajectory does not visit.
  double diff = 0.0;
  double base = 0.0;
  double keep_before = 0.0;
  double keep_after = 0.0;
  std::size_t count = 0;
  std::set<std::pair<Cell, int>> forget_pairs;
  for (std::size_t i = 0; i < forget.size(); ++i) forget_pairs.insert({forget.states[i], ActionIndex(forget.actions[i])});
  for (std::size_t k = 0; k < keep.size(); ++k) {
    for (std::size_t i = 0; i < keep[k].size(); ++i) {
      const int a = ActionIndex(keep[k].actions[i]);
      if (forget_pairs.contains({keep[k].states[i], a})) continue;
      const Observation o = Observe(env, keep[k].states[i]);
      const double q0 = QValues(pre, o)[static_cast<std::size_t>(a)];
      const double q1 = QValues(post, o)[static_cast<std::size_t>(a)];
      diff += std::abs(q1 - q0);
      base += std::abs(q0);
      ++count;
    }
  }
  for (const Trajectory& k : keep) {
    const Cell s = k.states.front();
    keep_before += RunPolicy(env, GreedyPolicy(pre), s).reward / static_cast<double>(keep.size());
    keep_after += RunPolicy(env, GreedyPolicy(post), s).reward / static_cast<double>(keep.size());
  }
  Emit(rollout_row(pre), replicate, setting, "before", train_seconds, 0.0, 0.0, keep_before);
  Emit(rollout_row(post), replicate, setting, "after-decremental", unlearn_seconds, 0.0, 0.0, keep_after);
  nlohmann::json& extra = extras_[{replicate, setting, "after-decremental"}];
  extra["q_drift"] = count == 0 ? 0.0 : diff / std::max(base, 1e-12);
  extra["kept_pairs"] = count;
  extra["forget_length"] = forget.size();
  Checkpoint(pre, replicate, setting, "before");
  Checkpoint(post, replicate, setting, "after-decremental");
}

nlohmann::json Runner::Summarize() const {
  struct Acc {
    double steps = 0, reward = 0, collisions = 0;
    int n = 0;
    void Add(const MetricRecord& r) {
      steps += r.steps;
      reward += r.reward;
      collisions += r.collisions;
      ++n;
    }
    nlohmann::json Json() const {
      return {{"steps", steps / n}, {"reward", reward / n}, {"collisions", collisions / n}};
    }
  };
  // Per (replicate, setting, phase): group means, then per (setting, phase)
  // means over replicates.
  struct RunRow {
    Acc unlearn, retained, unseen;
    double similarity = 0, p_value = 0, utility = 0, wall_clock = 0;
  };
  std::map<PhaseKey, RunRow> runs;
  std::map<std::tuple<int, std::string, int>, Acc> per_env;
  for (const MetricRecord& r : records_) {
    RunRow& row = runs[{r.replicate, r.setting, r.phase}];
    if (r.env_id == cfg_.unlearn_index) {
      row.unlearn.Add(r);
      row.similarity = r.similarity;
      row.p_value = r.p_value;
    } else if (r.env_id < cfg_.envs) {
      row.retained.Add(r);
    } else {
      row.unseen.Add(r);
    }
    row.utility = r.utility;
    row.wall_clock = r.wall_clock;
    per_env[{r.setting, r.phase, r.env_id}].Add(r);
  }
  nlohmann::json run_list = nlohmann::json::array();
  std::map<std::pair<int, std::string>, std::vector<nlohmann::json>> grouped;
  for (const auto& [key, row] : runs) {
    nlohmann::json j = {{"replicate", key.replicate}, {"setting", key.setting}, {"phase", key.phase},
                        {"similarity", row.similarity}, {"p_value", row.p_value}, {"utility", row.utility},
                        {"wall_clock", row.wall_clock}};
    if (row.unlearn.n) j["unlearn"] = row.unlearn.Json();
    if (row.retained.n) j["retained"] = row.retained.Json();
    if (row.unseen.n) j["unseen"] = row.unseen.Json();
    const auto extra = extras_.find(key);
    if (extra != extras_.end()) j["extra"] = extra->second;
    run_list.push_back(j);
    grouped[{key.setting, key.phase}].push_back(j);
  }
  nlohmann::json settings = nlohmann::json::array();
  std::map<int, nlohmann::json> by_setting;
  for (const auto& [key, rows] : grouped) {
    nlohmann::json mean;
    // Mean over replicates and the normal-approximation 95% half-width.
    auto stats = [&](const std::string& group, const std::string& field) {
      std::vector<double> xs;
      for (const nlohmann::json& r : rows) {
        const nlohmann::json* v = &r;
        if (!group.empty()) {
          if (!r.contains(group)) continue;
          v = &r.at(group);
        }
        if (v->contains(field)) xs.push_back(v->at(field).get<double>());
      }
      if (xs.empty()) return std::optional<std::pair<double, double>>();
      const double n = static_cast<double>(xs.size());
      const double m = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
      double ss = 0.0;
      for (double x : xs) ss += (x - m) * (x - m);
      const double half = xs.size() > 1 ? 1.96 * std::sqrt(ss / (n - 1) / n) : 0.0;
      return std::optional<std::pair<double, double>>({m, half});
    };
    auto average = [&](const std::string& group, const std::string& field) {
      const auto st = stats(group, field);
      return st ? std::optional<double>(st->first) : std::nullopt;
    };
    for (const std::string group : {"unlearn", "retained", "unseen"}) {
      for (const std::string field : {"steps", "reward", "collisions"}) {
        if (auto v = stats(group, field)) {
          mean[group][field] = v->first;
          mean[group][field + "_ci95"] = v->second;
        }
      }
    }
    for (const std::string field : {"similarity", "p_value", "utility", "wall_clock"}) {
      if (auto v = average("", field)) mean[field] = *v;
    }
    for (const std::string field : {"utility_drift", "q_drift", "ga_fitness", "seconds"}) {
      if (auto v = average("extra", field)) mean[field] = *v;
    }
    nlohmann::json envs = nlohmann::json::array();
    for (const auto& [pk, acc] : per_env) {
      if (std::get<0>(pk) != key.first || std::get<1>(pk) != key.second) continue;
      nlohmann::json e = acc.Json();
      e["env_id"] = std::get<2>(pk);
      envs.push_back(e);
    }
    mean["per_env"] = envs;
    nlohmann::json& s = by_setting[key.first];
    s["setting"] = key.first;
    s["phases"][key.second] = mean;
  }
  for (auto& [value, s] : by_setting) settings.push_back(s);
  std::vector<std::string> methods;
  for (Method m : cfg_.methods) methods.emplace_back(MethodName(m));
  return {{"preset", PresetName(cfg_.preset)}, {"methods", methods}, {"replicates", cfg_.replicates},
          {"seed", cfg_.seed}, {"unlearn_index", cfg_.unlearn_index}, {"settings", settings}, {"runs", run_list}};
}

ExperimentResult Runner::Run() {
  fs::create_directories(dir_ / "checkpoints");
  fs::create_directories(dir_ / "traces");
  WriteText(dir_ / "config.txt", cfg_.ToText());
  const std::vector<int> settings = cfg_.sweep.empty() ? std::vector<int>{0} : cfg_.sweep;
  const bool sweeping = cfg_.preset == ExperimentPreset::kSizeSweep ||
                        cfg_.preset == ExperimentPreset::kComplexitySweep ||
                        cfg_.preset == ExperimentPreset::kPoisonSweep;
  for (int rep = 0; rep < cfg_.replicates; ++rep) {
    for (int value : sweeping ? settings : std::vector<int>{0}) {
      const ExperimentConfig c = ForSetting(cfg_, value);
      if (cfg_.preset == ExperimentPreset::kSingleEnv) {
        RunSingleEnv(c, rep, value);
      } else {
        RunUnit(c, rep, value);
      }
    }
  }
  std::sort(records_.begin(), records_.end(), [](const MetricRecord& a, const MetricRecord& b) {
    return std::tie(a.setting, a.replicate) < std::tie(b.setting, b.replicate);
  });
  {
    std::ofstream out(dir_ / "metrics.csv");
    if (!out) throw Error(ErrorCode::kIo, "cannot write metrics.csv");
    WriteMetricsCsv(out, records_);
  }
  if (!loss_traces_.empty()) {
    std::ofstream out(dir_ / "loss_trace.csv");
    WriteLossTraceCsv(out, loss_traces_.front());
  }
  if (!utility_rows_.empty()) {
    std::string text = "replicate,setting,phase,epoch,utility\n";
    for (const std::string& row : utility_rows_) text += row + "\n";
    WriteText(dir_ / "utility.csv", text);
  }
  if (!forget_rows_.empty()) WriteText(dir_ / "forget_quality.json", forget_rows_.dump(2) + "\n");
  ExperimentResult result;
  result.dir = dir_.string();
  result.summary = Summarize();
  WriteText(dir_ / "summary.json", result.summary.dump(2) + "\n");
  EmitPlots(dir_.string());
  result.records = records_;
  result.loss_traces = loss_traces_;
  return result;
}

}  // namespace

ExperimentResult RunExperiment(const ExperimentConfig& cfg, const std::string& out_dir) {
  const fs::path dir(out_dir);
  try {
    cfg.Validate();
    Runner runner(cfg, dir);
    return runner.Run();
  } catch (const Error& e) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    std::ofstream(dir / "error.json") << ErrorJson(e).dump(2) << '\n';
    throw;
  } catch (const std::exception& e) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    std::ofstream(dir / "error.json") << nlohmann::json{{"error", "internal"}, {"message", e.what()}}.dump(2) << '\n';
    throw;
  }
}

}  // namespace rlu
