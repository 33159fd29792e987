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


// Command-line front end: train, unlearn, evaluate, infer and experiment.
// Failures print {"error": <code>, "message": ...} on stderr and exit nonzero.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "rlu/experiment.hpp"

namespace fs = std::filesystem;
using namespace rlu;

namespace {

std::string ReadFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void WriteFile(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << text;
}

EnvironmentSet LoadEnvs(const fs::path& run) {
  try {
    return EnvironmentSetFromJson(nlohmann::json::parse(ReadFile((run / "envs.json").string())));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidSpec, std::string("cannot parse envs.json: ") + e.what());
  }
}

// Module settings for train/unlearn come from the experiment key list.
ExperimentConfig Settings(const std::string& config_file, const std::vector<std::string>& overrides) {
  ExperimentConfig c;
  if (!config_file.empty()) c.Apply(ReadFile(config_file));
  for (const std::string& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::kConfig, "--set expects key=value, got " + kv);
    c.Set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return c;
}

nlohmann::json EvalJson(const EnvironmentSet& envs, const Mlp& net, int episodes, std::uint64_t seed) {
  nlohmann::json rows = nlohmann::json::array();
  const int n = static_cast<int>(envs.environments.size());
  for (int id = 0; id < n + static_cast<int>(envs.unseen.size()); ++id) {
    const GridSpec& g = id < n ? envs.environments[static_cast<std::size_t>(id)]
                               : envs.unseen[static_cast<std::size_t>(id - n)];
    const EvalStats s = Evaluate(g, net, episodes, MixSeed(seed, static_cast<std::uint64_t>(id)));
    rows.push_back({{"env_id", id},
                    {"role", id == envs.unlearn_index ? "unlearn" : (id < n ? "retained" : "unseen")},
                    {"steps", s.mean_steps},
                    {"reward", s.mean_reward},
                    {"collisions", s.mean_collisions},
                    {"success_rate", s.success_rate}});
  }
  return rows;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reinforcement unlearning laboratory"};
  app.require_subcommand(1);

  std::string config_file;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  std::string out;
  std::string run;
  std::string net_file;

  auto* train = app.add_subcommand("train", "Generate an environment set and train a DQN agent on it");
  train->add_option("--config", config_file, "Flat key = value settings file");
  train->add_option("--set", overrides, "Override one setting (key=value)");
  train->add_option("--seed", seed, "Seed");
  train->add_option("--out", out, "Output directory")->required();

  std::string method;
  auto* unlearn = app.add_subcommand("unlearn", "Unlearn the designated environment of a trained run");
  unlearn->add_option("--method", method, "decremental | poison | lfs | non-transfer-lfs")->required();
  unlearn->add_option("--run", run, "Directory written by train")->required();
  unlearn->add_option("--config", config_file, "Flat key = value settings file");
  unlearn->add_option("--set", overrides, "Override one setting (key=value)");
  unlearn->add_option("--seed", seed, "Seed");
  unlearn->add_option("--out", out, "Output directory")->required();

  int episodes = 50;
  auto* evaluate = app.add_subcommand("evaluate", "Greedy evaluation on every environment of a run");
  evaluate->add_option("--run", run, "Directory written by train")->required();
  evaluate->add_option("--net", net_file, "Checkpoint to evaluate (default: the run's net.json)");
  evaluate->add_option("--episodes", episodes, "Episodes per environment");
  evaluate->add_option("--seed", seed, "Seed");

  int env_index = -1;
  auto* infer = app.add_subcommand("infer", "Genetic-algorithm inference of an environment layout");
  infer->add_option("--run", run, "Directory written by train")->required();
  infer->add_option("--net", net_file, "Observed agent (default: the run's net.json)");
  infer->add_option("--env", env_index, "Environment whose frame is attacked (default: the unlearning one)");
  infer->add_option("--config", config_file, "Flat key = value settings file (ga.* keys)");
  infer->add_option("--set", overrides, "Override one setting (key=value)");
  infer->add_option("--seed", seed, "Seed");
  infer->add_option("--out", out, "Write the result JSON here as well");

  std::string preset;
  auto* experiment = app.add_subcommand("experiment", "Run a named study end to end");
  experiment->add_option("--preset", preset, "Preset name")->required();
  experiment->add_option("--config", config_file, "Flat key = value settings file");
  experiment->add_option("--set", overrides, "Override one setting (key=value)");
  experiment->add_option("--seed", seed, "Seed");
  experiment->add_option("--out", out, "Run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << nlohmann::json{{"error", "usage"}, {"message", e.what()}}.dump() << '\n';
    return 2;
  }

  try {
    if (*train) {
      ExperimentConfig c = Settings(config_file, overrides);
      c.Validate();
      const fs::path dir(out);
      fs::create_directories(dir);
      const EnvironmentSet envs = GenerateEnvironmentSet(seed, c.envs, c.width, c.height, c.obstacles,
                                                         c.unlearn_index, c.unseen);
      TrainConfig t = c.train;
      t.seed = seed;
      const TrainResult r = Train(envs, t);
      WriteFile(dir / "envs.json", ToJson(envs).dump(2) + "\n");
      SaveCheckpoint(r.net, (dir / "net.json").string());
      SaveSamples(r.buffer.Samples(), (dir / "samples.bin").string());
      WriteFile(dir / "config.txt", c.ToText());
      std::ofstream log(dir / "training_log.csv");
      WriteTrainingLogCsv(log, r.log);
      std::cout << nlohmann::json{{"out", dir.string()},
                                  {"environments", envs.environments.size()},
                                  {"samples", r.buffer.size()},
                                  {"gradient_steps", r.gradient_steps}}
                       .dump(2)
                << '\n';
    } else if (*unlearn) {
      ExperimentConfig c = Settings(config_file, overrides);
      c.Validate();
      const fs::path src(run);
      const fs::path dir(out);
      fs::create_directories(dir);
      const EnvironmentSet envs = LoadEnvs(src);
      const Mlp net = LoadCheckpoint((src / "net.json").string());
      Mlp result;
      TrainConfig t = c.train;
      t.seed = seed;
      switch (MethodFromName(method)) {
        case Method::kDecremental: {
          DecrementalConfig d = c.decremental;
          d.seed = seed;
          DecrementalResult r = UnlearnDecremental(net, envs, d);
          std::ofstream trace(dir / "loss_trace.csv");
          WriteLossTraceCsv(trace, r.trace);
          result = std::move(r.net);
          break;
        }
        case Method::kPoison: {
          PoisonConfig p = c.poison;
          p.seed = seed;
          ReplayBuffer memory(std::max<std::size_t>(t.replay_capacity, 1));
          for (const ExperienceSample& s : LoadSamples((src / "samples.bin").string())) memory.Add(s);
          PoisonResult r = RunPoisoning(net, envs, p, t, &memory);
          std::ofstream trace(dir / "poison_trace.csv");
          WritePoisonTraceCsv(trace, r.trace);
          result = std::move(r.net);
          break;
        }
        case Method::kLfs:
          result = Lfs(envs, t).net;
          break;
        case Method::kNonTransferLfs:
          result = NonTransferLfs(LabeledSampleStore(LoadSamples((src / "samples.bin").string())),
                                  envs.unlearn_index, t, c.offline);
          break;
      }
      SaveCheckpoint(result, (dir / "net.json").string());
      WriteFile(dir / "envs.json", ToJson(envs).dump(2) + "\n");
      if (fs::exists(src / "samples.bin")) {
        fs::copy_file(src / "samples.bin", dir / "samples.bin", fs::copy_options::overwrite_existing);
      }
      std::cout << nlohmann::json{{"out", dir.string()}, {"method", method}}.dump(2) << '\n';
    } else if (*evaluate) {
      const fs::path src(run);
      const EnvironmentSet envs = LoadEnvs(src);
      const Mlp net = LoadCheckpoint(net_file.empty() ? (src / "net.json").string() : net_file);
      if (episodes < 1) throw Error(ErrorCode::kConfig, "--episodes must be >= 1");
      std::cout << EvalJson(envs, net, episodes, seed).dump(2) << '\n';
    } else if (*infer) {
      ExperimentConfig c = Settings(config_file, overrides);
      const fs::path src(run);
      const EnvironmentSet envs = LoadEnvs(src);
      const Mlp net = LoadCheckpoint(net_file.empty() ? (src / "net.json").string() : net_file);
      const int index = env_index < 0 ? envs.unlearn_index : env_index;
      if (index >= static_cast<int>(envs.environments.size())) {
        throw Error(ErrorCode::kConfig, "--env out of range");
      }
      const GridSpec& truth = envs.environments[static_cast<std::size_t>(index)];
      GaConfig g = c.ga;
      g.seed = seed;
      const GaResult r = RunGa(net, Frame::Of(truth), g);
      nlohmann::json j = ToJson(r);
      j["env_id"] = index;
      j["similarity"] = Similarity(r.best, truth);
      j["l0"] = L0Distance(r.best, truth);
      j.erase("best_per_generation");
      if (!out.empty()) WriteFile(out, j.dump(2) + "\n");
      std::cout << j.dump(2) << '\n';
    } else if (*experiment) {
      ExperimentConfig c = ExperimentConfig::ForPreset(ExperimentPresetFromName(preset));
      if (!config_file.empty()) c.Apply(ReadFile(config_file));
      for (const std::string& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw Error(ErrorCode::kConfig, "--set expects key=value, got " + kv);
        c.Set(kv.substr(0, eq), kv.substr(eq + 1));
      }
      c.preset = ExperimentPresetFromName(preset);
      if (experiment->count("--seed") > 0) c.seed = seed;
      const ExperimentResult r = RunExperiment(c, out);
      std::cout << nlohmann::json{{"out", r.dir}, {"records", r.records.size()}}.dump(2) << '\n';
    }
  } catch (const Error& e) {
    std::cerr << ErrorJson(e).dump() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"error", "internal"}, {"message", e.what()}}.dump() << '\n';
    return 1;
  }
  return 0;
}
