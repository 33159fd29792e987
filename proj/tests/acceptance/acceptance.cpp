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


// Acceptance suite: runs the experiment presets at desk scale and prints one
// PASS/FAIL line per criterion. Exit status is nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rlu/agent.hpp"
#include "rlu/experiment.hpp"
#include "rlu/nn.hpp"
#include "rlu/tabular.hpp"

namespace {

using nlohmann::json;
using rlu::ExperimentConfig;
using rlu::ExperimentPreset;
using rlu::ExperimentResult;
namespace fs = std::filesystem;

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string Fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

// post is at least `factor` times as bad as pre on a signed scale.
bool MoreNegative(double pre, double post, double factor) {
  return post <= pre - (factor - 1.0) * std::abs(pre);
}

bool Within(double pre, double post, double tol) { return std::abs(post - pre) <= tol * std::abs(pre); }

class Suite {
 public:
  Suite(fs::path out, int replicates) : out_(std::move(out)), replicates_(replicates) {}

  struct Run {
    ExperimentResult result;
    double seconds = 0.0;
    int replicates = 0;
  };

  const Run& Preset(ExperimentPreset p, const std::string& tag,
                    const std::function<void(ExperimentConfig&)>& tweak = nullptr) {
    auto it = runs_.find(tag);
    if (it != runs_.end()) return it->second;
    ExperimentConfig cfg = ExperimentConfig::ForPreset(p);
    if (replicates_ > 0) cfg.replicates = replicates_;
    if (tweak) tweak(cfg);
    std::cerr << "running preset " << rlu::PresetName(p) << " (" << tag << ")" << std::endl;
    const auto t0 = std::chrono::steady_clock::now();
    Run run;
    run.result = rlu::RunExperiment(cfg, (out_ / tag).string());
    run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    run.replicates = cfg.replicates;
    return runs_.emplace(tag, std::move(run)).first->second;
  }

 private:
  fs::path out_;
  int replicates_;
  std::map<std::string, Run> runs_;
};

const json& PhaseMean(const json& summary, int setting, const std::string& phase) {
  for (const json& s : summary.at("settings")) {
    if (s.at("setting").get<int>() == setting) return s.at("phases").at(phase);
  }
  throw rlu::Error(rlu::ErrorCode::kMissingData, "no setting " + std::to_string(setting));
}

double Get(const json& j, const std::string& group, const std::string& field) {
  return group.empty() ? j.at(field).get<double>() : j.at(group).at(field).get<double>();
}

// Per-replicate entries of `runs` for (setting, phase), ordered by replicate.
std::vector<json> Runs(const json& summary, int setting, const std::string& phase) {
  std::vector<json> out;
  for (const json& r : summary.at("runs")) {
    if (r.at("setting").get<int>() == setting && r.at("phase").get<std::string>() == phase) out.push_back(r);
  }
  std::sort(out.begin(), out.end(), [](const json& a, const json& b) { return a["replicate"] < b["replicate"]; });
  return out;
}

double ExtraOr(const json& run, const std::string& key, double fallback) {
  return run.contains("extra") && run["extra"].contains(key) ? run["extra"][key].get<double>() : fallback;
}

// Steps at least doubled, reward at least 3x more negative, retained reward
// within 10%.
Verdict Efficacy(const json& summary, int setting, const std::vector<std::string>& methods) {
  const json& pre = PhaseMean(summary, setting, "before");
  Verdict v{true, ""};
  for (const std::string& m : methods) {
    const json& post = PhaseMean(summary, setting, "after-" + m);
    const double s0 = Get(pre, "unlearn", "steps"), s1 = Get(post, "unlearn", "steps");
    const double r0 = Get(pre, "unlearn", "reward"), r1 = Get(post, "unlearn", "reward");
    const double k0 = Get(pre, "retained", "reward"), k1 = Get(post, "retained", "reward");
    const bool ok = s1 >= 2.0 * s0 && MoreNegative(r0, r1, 3.0) && Within(k0, k1, 0.10);
    v.pass = v.pass && ok;
    v.detail += m + ": u steps " + Fmt(s0) + "->" + Fmt(s1) + ", u reward " + Fmt(r0) + "->" + Fmt(r1) +
                ", retained " + Fmt(k0) + "->" + Fmt(k1) + (ok ? "" : " (miss)") + "; ";
  }
  return v;
}

double GapOf(const json& summary, int setting, const std::string& method) {
  return Get(PhaseMean(summary, setting, "before"), "unlearn", "reward") -
         Get(PhaseMean(summary, setting, "after-" + method), "unlearn", "reward");
}

const std::vector<std::string> kPair = {"decremental", "poison"};

Verdict C1(Suite& s) {
  const Suite::Run& run = s.Preset(ExperimentPreset::kOverall, "overall",
                                   [](ExperimentConfig& c) { c.record_timing = true; });
  Verdict v = Efficacy(run.result.summary, 0, kPair);
  const double per_rep = run.seconds / run.replicates;
  v.pass = v.pass && per_rep <= 600.0;
  v.detail += "runtime/replicate " + Fmt(per_rep) + "s";
  return v;
}

Verdict C2(Suite& s) {
  const json& sum = s.Preset(ExperimentPreset::kOverall, "overall").result.summary;
  const json& pre = PhaseMean(sum, 0, "before");
  const json& lfs = PhaseMean(sum, 0, "after-lfs");
  const json& nt = PhaseMean(sum, 0, "after-non-transfer-lfs");
  const double r0 = Get(pre, "unlearn", "reward"), s0 = Get(pre, "unlearn", "steps");
  const double rl = Get(lfs, "unlearn", "reward"), sl = Get(lfs, "unlearn", "steps");
  const double sn = Get(nt, "unlearn", "steps");
  const bool lfs_ok = Within(r0, rl, 0.20) && Within(s0, sl, 0.20);
  const bool nt_ok = sn >= 1.5 * s0;
  return {lfs_ok && nt_ok, "lfs u reward " + Fmt(r0) + "->" + Fmt(rl) + ", steps " + Fmt(s0) + "->" + Fmt(sl) +
                               "; nt-lfs u steps " + Fmt(s0) + "->" + Fmt(sn)};
}

Verdict C3(Suite& s) {
  const json& sum = s.Preset(ExperimentPreset::kOverall, "overall").result.summary;
  const double p0 = PhaseMean(sum, 0, "before").at("p_value").get<double>();
  Verdict v{true, "p before " + Fmt(p0) + "; "};
  for (const std::string& m : kPair) {
    const json& post = PhaseMean(sum, 0, "after-" + m);
    const double p1 = post.at("p_value").get<double>();
    const double drift = post.value("utility_drift", 0.0);
    const bool ok = p1 > p0 && drift < 0.10;
    v.pass = v.pass && ok;
    v.detail += m + ": p " + Fmt(p1) + ", utility drift " + Fmt(drift) + "; ";
  }
  return v;
}

Verdict C4(Suite& s) {
  const Suite::Run& run = s.Preset(ExperimentPreset::kInference, "inference");
  const json& sum = run.result.summary;
  const std::vector<json> before = Runs(sum, 0, "before");
  const double sim0 = PhaseMean(sum, 0, "before").at("similarity").get<double>();
  Verdict v{sim0 >= 40.0, "similarity before " + Fmt(sim0) + "; "};
  for (const std::string& m : kPair) {
    const std::vector<json> after = Runs(sum, 0, "after-" + m);
    const double sim1 = PhaseMean(sum, 0, "after-" + m).at("similarity").get<double>();
    int gaps = 0;
    for (std::size_t i = 0; i < std::min(before.size(), after.size()); ++i) {
      gaps += before[i]["similarity"].get<double>() > after[i]["similarity"].get<double>();
    }
    const bool ok = sim1 <= 30.0 && gaps * 10 >= 8 * run.replicates;
    v.pass = v.pass && ok;
    v.detail += m + ": after " + Fmt(sim1) + ", strict gap in " + std::to_string(gaps) + "/" +
                std::to_string(run.replicates) + "; ";
  }
  return v;
}

Verdict C5(Suite& s) {
  const json& sum = s.Preset(ExperimentPreset::kPoisonSweep, "poison-sweep").result.summary;
  Verdict v{true, "u reward after poisoning by level:"};
  double prev = INFINITY;
  for (int level : {1, 3, 5}) {
    const double r = Get(PhaseMean(sum, level, "after-poison"), "unlearn", "reward");
    v.pass = v.pass && r <= prev;
    prev = r;
    v.detail += " " + std::to_string(level) + "=" + Fmt(r);
  }
  return v;
}

Verdict C6(Suite& s) {
  const json& size = s.Preset(ExperimentPreset::kSizeSweep, "size-sweep").result.summary;
  const json& cx = s.Preset(ExperimentPreset::kComplexitySweep, "complexity-sweep").result.summary;
  Verdict v{true, ""};
  for (const std::string& m : kPair) {
    const double g5 = GapOf(size, 5, m), g10 = GapOf(size, 10, m), g15 = GapOf(size, 15, m);
    const bool ok = g5 < g10 && g10 < g15;
    v.pass = v.pass && ok;
    v.detail += m + " size gaps " + Fmt(g5) + "," + Fmt(g10) + "," + Fmt(g15) + "; ";
  }
  const double c10 = GapOf(cx, 10, "decremental"), c15 = GapOf(cx, 15, "decremental"),
               c20 = GapOf(cx, 20, "decremental");
  const bool ok = c15 > c10 && std::abs(c20 - c15) < 0.25 * std::abs(c15);
  v.pass = v.pass && ok;
  v.detail += "decremental obstacle gaps " + Fmt(c10) + "," + Fmt(c15) + "," + Fmt(c20);
  return v;
}

Verdict C7(Suite&) {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const rlu::TabularMdp m = rlu::RandomMdp(4, 4, 0.9, seed);
    const rlu::LemmaCheck c =
        rlu::PolicyDifferenceCheck(m, rlu::RandomPolicy(4, 4, 1000 + seed), rlu::RandomPolicy(4, 4, 2000 + seed));
    worst = std::max(worst, c.gap);
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {worst < 1e-8 && secs < 5.0, "max |lhs-rhs| " + Fmt(worst) + " in " + Fmt(secs) + "s"};
}

Verdict C8(Suite&) {
  rlu::Rng rng(8);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const rlu::Mlp net = rlu::Mlp::Init(rlu::MlpSpec{}, 500 + static_cast<std::uint64_t>(trial));
    const int b = rlu::UniformInt(rng, 1, 8);
    Eigen::MatrixXd x(rlu::kObservationSize, b), y(rlu::kNumActions, b);
    Eigen::MatrixXd mask = Eigen::MatrixXd::Zero(rlu::kNumActions, b);
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rlu::Uniform01(rng) * 2 - 1;
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = rlu::Uniform01(rng) * 20 - 10;
    for (int j = 0; j < b; ++j) mask(rlu::UniformInt(rng, 0, rlu::kNumActions - 1), j) = 1.0;
    const Eigen::VectorXd analytic = rlu::MaskedMseLoss(net, x, y, mask).grads.Flatten();
    const Eigen::VectorXd theta = net.FlatParameters();
    Eigen::VectorXd numeric(theta.size());
    rlu::Mlp probe = net;
    const auto pattern = [&x](const rlu::Mlp& m) {
      const rlu::ForwardTrace t = m.Trace(x);
      std::vector<bool> on;
      for (std::size_t l = 1; l + 1 < t.activations.size(); ++l) {
        for (Eigen::Index i = 0; i < t.activations[l].size(); ++i) on.push_back(t.activations[l](i) > 0.0);
      }
      return on;
    };
    const std::vector<bool> base = pattern(net);
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      // Central differences are meaningless across a ReLU kink; shrink the
      // step until neither probe flips a hidden unit.
      for (double h = 1e-6; h >= 1e-10; h /= 10) {
        Eigen::VectorXd p = theta;
        p(i) += h;
        probe.SetFlatParameters(p);
        const bool up_same = pattern(probe) == base;
        const double up = rlu::MaskedMseLoss(probe, x, y, mask).loss;
        p(i) -= 2 * h;
        probe.SetFlatParameters(p);
        const bool down_same = pattern(probe) == base;
        numeric(i) = (up - rlu::MaskedMseLoss(probe, x, y, mask).loss) / (2 * h);
        if (up_same && down_same) break;
      }
    }
    const double rel = (analytic - numeric).norm() / std::max({analytic.norm(), numeric.norm(), 1e-12});
    worst = std::max(worst, rel);
  }
  return {worst < 1e-4, "max relative error " + Fmt(worst) + " over 50 pairs"};
}

Verdict C9(Suite&) {
  const rlu::GridSpec g(5, 5, {}, {4, 4}, std::nullopt);
  rlu::TrainConfig cfg;
  cfg.episodes_per_env = 500;
  cfg.seed = 9;
  const rlu::Mlp net = rlu::Train(std::vector<rlu::GridSpec>{g}, cfg).net;
  // Value-iteration rollouts give the shortest path on this grid.
  const std::vector<rlu::Action> best = rlu::OptimalActions(g, cfg.gamma);
  const rlu::TransitionTable table(g);
  const rlu::PolicyFn oracle = [&](const rlu::GridSpec&, rlu::Cell p) {
    return best[static_cast<std::size_t>(table.StateOf(p))];
  };
  int worst_excess = 0;
  for (const rlu::Cell& c : g.StartCells()) {
    const rlu::Rollout r = rlu::RunPolicy(g, rlu::GreedyPolicy(net), c);
    const auto shortest = static_cast<int>(rlu::RunPolicy(g, oracle, c).actions.size());
    const int excess = r.reached_target ? static_cast<int>(r.actions.size()) - shortest : 1 << 20;
    worst_excess = std::max(worst_excess, excess);
  }
  return {worst_excess <= 2, "worst greedy excess over the shortest path: " + std::to_string(worst_excess)};
}

Verdict C10(Suite& s) {
  const ExperimentResult& r = s.Preset(ExperimentPreset::kOverall, "overall").result;
  int ok1 = 0, ok2 = 0;
  const int window = 20;
  for (const rlu::LossTrace& t : r.loss_traces) {
    auto monotone = [&](auto field) {
      double prev = INFINITY;
      for (std::size_t k = window; k <= t.size(); ++k) {
        double sum = 0.0;
        for (std::size_t i = k - window; i < k; ++i) sum += field(t[i].terms);
        const double avg = sum / window;
        if (avg > prev * (1 + 1e-12) + 1e-15) return false;
        prev = avg;
      }
      return true;
    };
    ok1 += monotone([](const rlu::DecrementalTerms& d) { return d.term1; });
    ok2 += monotone([](const rlu::DecrementalTerms& d) { return d.term2; });
  }
  const int n = static_cast<int>(r.loss_traces.size());
  return {n > 0 && ok1 == n && ok2 == n, "non-increasing moving averages: term1 " + std::to_string(ok1) + "/" +
                                             std::to_string(n) + ", term2 " + std::to_string(ok2) + "/" +
                                             std::to_string(n)};
}

Verdict C11(Suite& s) {
  const json& sum = s.Preset(ExperimentPreset::kOverall, "overall").result.summary;
  const std::vector<json> dec = Runs(sum, 0, "after-decremental"), poi = Runs(sum, 0, "after-poison"),
                          lfs = Runs(sum, 0, "after-lfs"), nt = Runs(sum, 0, "after-non-transfer-lfs");
  int ok = 0;
  double d = 0, p = 0, l = 0, n = 0;
  for (std::size_t i = 0; i < dec.size(); ++i) {
    const double td = ExtraOr(dec[i], "seconds", NAN), tp = ExtraOr(poi[i], "seconds", NAN),
                 tl = ExtraOr(lfs[i], "seconds", NAN), tn = ExtraOr(nt[i], "seconds", NAN);
    d += td, p += tp, l += tl, n += tn;
    ok += td < tp && tp < std::min(tl, tn) && std::max(tl, tn) <= 2.0 * std::min(tl, tn);
  }
  const auto k = static_cast<double>(dec.size());
  return {!dec.empty() && ok == static_cast<int>(dec.size()),
          "ordering held in " + std::to_string(ok) + "/" + std::to_string(dec.size()) + "; mean seconds dec " +
              Fmt(d / k) + ", poison " + Fmt(p / k) + ", lfs " + Fmt(l / k) + ", nt-lfs " + Fmt(n / k)};
}

Verdict C12(Suite& s) {
  const json& sum = s.Preset(ExperimentPreset::kSafety, "safety").result.summary;
  const double c0 = Get(PhaseMean(sum, 0, "before"), "unlearn", "collisions");
  Verdict v{true, "u collisions before " + Fmt(c0) + "; "};
  for (const std::string& m : kPair) {
    const double c1 = Get(PhaseMean(sum, 0, "after-" + m), "unlearn", "collisions");
    const bool ok = c1 >= 2.0 * c0 && c1 > c0;
    v.pass = v.pass && ok;
    v.detail += m + " " + Fmt(c1) + "; ";
  }
  return v;
}

Verdict C13(Suite& s) {
  const json& dyn = s.Preset(ExperimentPreset::kDynamic, "dynamic").result.summary;
  const json& gen = s.Preset(ExperimentPreset::kGeneralization, "generalization").result.summary;
  Verdict v = Efficacy(dyn, 0, kPair);
  v.detail = "dynamic " + v.detail;
  const double u0 = Get(PhaseMean(gen, 0, "before"), "unseen", "reward");
  v.detail += "unseen reward before " + Fmt(u0);
  for (const std::string& m : kPair) {
    const double u1 = Get(PhaseMean(gen, 0, "after-" + m), "unseen", "reward");
    v.pass = v.pass && Within(u0, u1, 0.15);
    v.detail += ", " + m + " " + Fmt(u1);
  }
  return v;
}

Verdict C14(Suite& s) {
  const json& sum = s.Preset(ExperimentPreset::kSingleEnv, "single-env").result.summary;
  const double r0 = Get(PhaseMean(sum, 0, "before"), "unlearn", "reward");
  const double r1 = Get(PhaseMean(sum, 0, "after-decremental"), "unlearn", "reward");
  const double drift = PhaseMean(sum, 0, "after-decremental").at("q_drift").get<double>();
  return {r1 <= r0 - 0.5 * std::abs(r0) && drift < 0.10,
          "forget-trajectory reward " + Fmt(r0) + "->" + Fmt(r1) + ", kept Q drift " + Fmt(drift)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string out = "acceptance_runs";
  int replicates = 0;
  std::vector<int> only;
  app.add_option("--out", out, "Directory for experiment artifacts");
  app.add_option("--replicates", replicates, "Override the preset replicate count (0 keeps it)");
  app.add_option("--only", only, "Criterion numbers to run");
  CLI11_PARSE(app, argc, argv);

  Suite suite(out, replicates);
  const std::vector<std::pair<std::string, std::function<Verdict(Suite&)>>> criteria = {
      {"unlearning efficacy", C1},       {"baseline contrast", C2},     {"forget quality", C3},
      {"environment inference", C4},     {"poison-level monotonicity", C5}, {"size and complexity trends", C6},
      {"policy difference identity", C7}, {"gradient correctness", C8}, {"agent competence", C9},
      {"loss convergence", C10},         {"timing ordering", C11},      {"safety", C12},
      {"dynamic and generalization", C13}, {"single-environment unlearning", C14}};
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Verdict v;
    try {
      v = criteria[i].second(suite);
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    failures += !v.pass;
    std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << criteria[i].first << "): " << v.detail
              << std::endl;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
