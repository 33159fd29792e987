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

#include <array>
#include <cstdio>
#include <filesystem>
#include <string>

#include "json.hpp"

namespace {

namespace fs = std::filesystem;

struct Outcome {
  int status = 0;
  std::string out;
};

// Runs the CLI with stderr folded into stdout.
Outcome Invoke(const std::string& args) {
  const std::string cmd = std::string(RLU_CLI_PATH) + " " + args + " 2>&1";
  Outcome o;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return {-1, ""};
  std::array<char, 4096> buf{};
  while (fgets(buf.data(), buf.size(), pipe) != nullptr) o.out += buf.data();
  const int raw = pclose(pipe);
  o.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return o;
}

nlohmann::json LastJsonLine(const std::string& text) {
  const auto end = text.find_last_not_of('\n');
  const auto start = text.rfind('\n', end);
  return nlohmann::json::parse(text.substr(start == std::string::npos ? 0 : start + 1, end + 1));
}

TEST(Cli, UnknownSubcommandIsUsageError) {
  const Outcome o = Invoke("frobnicate");
  EXPECT_EQ(o.status, 2);
  EXPECT_EQ(LastJsonLine(o.out)["error"], "usage");
}

TEST(Cli, BadConfigKeyReportsJson) {
  const fs::path dir = fs::temp_directory_path() / "rlu_cli_bad";
  const Outcome o = Invoke("train --set no.such=1 --out " + dir.string());
  EXPECT_EQ(o.status, 1);
  const nlohmann::json j = LastJsonLine(o.out);
  EXPECT_EQ(j["error"], "config_error");
  EXPECT_TRUE(j.contains("message"));
}

TEST(Cli, UnknownMethodRejected) {
  const Outcome o = Invoke("unlearn --method nonsense --run /nonexistent --out /tmp/rlu_cli_x");
  EXPECT_NE(o.status, 0);
  EXPECT_TRUE(LastJsonLine(o.out).contains("error"));
}

TEST(Cli, TrainUnlearnEvaluate) {
  const fs::path dir = fs::temp_directory_path() / "rlu_cli_run";
  const fs::path un = fs::temp_directory_path() / "rlu_cli_unlearn";
  fs::remove_all(dir);
  fs::remove_all(un);
  const std::string tiny = "--set envs=2 --set size=5 --set obstacles=3 --set train.episodes_per_env=5 ";
  Outcome o = Invoke("train " + tiny + "--seed 1 --out " + dir.string());
  ASSERT_EQ(o.status, 0) << o.out;
  EXPECT_TRUE(fs::exists(dir / "net.json"));
  EXPECT_TRUE(fs::exists(dir / "envs.json"));
  o = Invoke("unlearn --method decremental --set decremental.epochs=2 --run " + dir.string() + " --out " + un.string());
  ASSERT_EQ(o.status, 0) << o.out;
  EXPECT_TRUE(fs::exists(un / "net.json"));
  o = Invoke("evaluate --run " + un.string() + " --episodes 2");
  ASSERT_EQ(o.status, 0) << o.out;
  EXPECT_NO_THROW(nlohmann::json::parse(o.out));
  fs::remove_all(dir);
  fs::remove_all(un);
}

}  // namespace
