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

#include <filesystem>
#include <fstream>
#include <sstream>

#include "rlu/experiment.hpp"
#include "rlu/plots.hpp"

namespace rlu {
namespace {

namespace fs = std::filesystem;

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path Scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("rlu_experiment_test_" + name);
  fs::remove_all(p);
  return p;
}

ExperimentConfig Tiny() {
  ExperimentConfig cfg = ExperimentConfig::ForPreset(ExperimentPreset::kOverall);
  cfg.Apply(R"(
    envs = 3
    size = 5
    obstacles = 3
    replicates = 1
    eval_episodes = 2
    train.episodes_per_env = 8
    train.warmup_samples = 16
    decremental.epochs = 2
    poison.epochs = 1
    poison.inner_episodes = 2
    poison.retain_episodes = 2
    offline.gradient_steps = 10
    forget.trajectories = 2
    forget.length = 4
    utility.every = 1
  )");
  return cfg;
}

TEST(Config, TextRoundTrip) {
  for (ExperimentPreset p : {ExperimentPreset::kOverall, ExperimentPreset::kSizeSweep, ExperimentPreset::kInference}) {
    const ExperimentConfig cfg = ExperimentConfig::ForPreset(p);
    const std::string text = cfg.ToText();
    EXPECT_EQ(ExperimentConfig::FromText(text).ToText(), text);
  }
  const std::vector<std::string> keys = ExperimentConfigKeys();
  EXPECT_NE(std::find(keys.begin(), keys.end(), "decremental.w2"), keys.end());
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  ExperimentConfig cfg;
  EXPECT_THROW(cfg.Set("no.such.key", "1"), Error);
  EXPECT_THROW(cfg.Set("envs", "many"), Error);
  EXPECT_THROW(cfg.Apply("envs 3"), Error);
  cfg.Set("envs", "1");
  EXPECT_THROW(cfg.Validate(), Error);
  EXPECT_THROW(ExperimentPresetFromName("bogus"), Error);
  EXPECT_EQ(PresetName(ExperimentPresetFromName("poison-sweep")), "poison-sweep");
}

TEST(Config, PresetsUseTunedRetainWeight) {
  EXPECT_EQ(ExperimentConfig::ForPreset(ExperimentPreset::kOverall).decremental.w2, 3.0);
  EXPECT_EQ(DecrementalConfig{}.w2, 1.0);
}

TEST(Run, WritesArtifactsAndIsReproducible) {
  const fs::path a = Scratch("a");
  const fs::path b = Scratch("b");
  const ExperimentResult ra = RunExperiment(Tiny(), a.string());
  RunExperiment(Tiny(), b.string());
  for (const char* f : {"config.txt", "metrics.csv", "summary.json", "loss_trace.csv", "utility.csv",
                        "forget_quality.json", "unlearn_reward.svg"}) {
    EXPECT_TRUE(fs::exists(a / f)) << f;
  }
  EXPECT_EQ(Slurp(a / "metrics.csv"), Slurp(b / "metrics.csv"));
  // 3 envs x (before + 4 methods).
  EXPECT_EQ(ra.records.size(), 15u);
  std::ifstream in(a / "metrics.csv");
  const std::vector<MetricRecord> back = ReadMetricsCsv(in);
  EXPECT_EQ(back.size(), ra.records.size());
  EXPECT_EQ(ExperimentConfig::FromText(Slurp(a / "config.txt")).ToText(), Tiny().ToText());
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Run, FailureWritesErrorJson) {
  const fs::path dir = Scratch("err");
  ExperimentConfig cfg = Tiny();
  cfg.unlearn_index = 7;
  EXPECT_THROW(RunExperiment(cfg, dir.string()), Error);
  const nlohmann::json j = nlohmann::json::parse(Slurp(dir / "error.json"));
  EXPECT_TRUE(j.contains("error"));
  EXPECT_TRUE(j.contains("message"));
  fs::remove_all(dir);
}

TEST(Plots, MissingMetricsThrow) {
  const fs::path dir = Scratch("plots");
  fs::create_directories(dir);
  EXPECT_THROW(EmitPlots(dir.string()), Error);
  std::ofstream(dir / "metrics.csv") << kMetricsCsvHeader << "\n";
  EXPECT_THROW(EmitPlots(dir.string()), Error);
  fs::remove_all(dir);
}

TEST(Plots, SvgIsWellFormed) {
  const std::string svg = SvgLinePlot("t", "x", "y", {Series{"a", {0, 1, 2}, {1, 3, 2}}});
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
}

}  // namespace
}  // namespace rlu
