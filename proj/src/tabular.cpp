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

#include "rlu/tabular.hpp"

#include <cmath>

namespace rlu {

void TabularMdp::Validate() const {
  const int n = state_count();
  if (n < 1 || action_count() < 1 ||
      transitions.size() != static_cast<std::size_t>(action_count())) {
    throw Error(ErrorCode::kInvalidSpec, "MDP shape mismatch");
  }
  if (!(gamma >= 0.0 && gamma < 1.0)) {
    throw Error(ErrorCode::kInvalidSpec, "gamma must lie in [0, 1)");
  }
  for (const Eigen::MatrixXd& p : transitions) {
    if (p.rows() != n || p.cols() != n) {
      throw Error(ErrorCode::kInvalidSpec, "transition matrix shape mismatch");
    }
    if ((p.array() < 0.0).any() ||
        ((p.rowwise().sum().array() - 1.0).abs() > 1e-12).any()) {
      throw Error(ErrorCode::kInvalidSpec, "transition rows must be distributions");
    }
  }
  if (d0.size() != n || (d0.array() < 0.0).any() || std::abs(d0.sum() - 1.0) > 1e-12) {
    throw Error(ErrorCode::kInvalidSpec, "d0 must be a distribution");
  }
}

TabularMdp MdpFromGrid(const GridSpec& spec, double gamma) {
  const TransitionTable table(spec);
  const auto n = static_cast<Eigen::Index>(table.cells().size());
  TabularMdp mdp;
  mdp.gamma = gamma;
  mdp.reward = Eigen::MatrixXd::Zero(n, kNumActions);
  mdp.transitions.assign(kNumActions, Eigen::MatrixXd::Zero(n, n));
  const int target = table.StateOf(spec.target());
  for (Eigen::Index s = 0; s < n; ++s) {
    for (Action a : kAllActions) {
      const int ai = ActionIndex(a);
      if (s == target) {
        mdp.transitions[static_cast<std::size_t>(ai)](s, s) = 1.0;
        continue;
      }
      const Transition& t = table.At(static_cast<int>(s), a);
      mdp.reward(s, ai) = t.reward;
      mdp.transitions[static_cast<std::size_t>(ai)](s, table.StateOf(t.next)) = 1.0;
    }
  }
  mdp.d0 = Eigen::VectorXd::Zero(n);
  const std::vector<Cell> starts = spec.StartCells();
  for (const Cell& c : starts) mdp.d0[table.StateOf(c)] += 1.0 / static_cast<double>(starts.size());
  return mdp;
}

namespace {

Eigen::VectorXd Dirichlet(int k, Rng& rng) {
  std::exponential_distribution<double> exp1(1.0);
  Eigen::VectorXd v(k);
  for (int i = 0; i < k; ++i) v[i] = exp1(rng);
  return v / v.sum();
}

}  // namespace

TabularMdp RandomMdp(int states, int actions, double gamma, std::uint64_t seed) {
  Rng rng(MixSeed(seed, 0x6d6470));
  TabularMdp mdp;
  mdp.gamma = gamma;
  for (int a = 0; a < actions; ++a) {
    Eigen::MatrixXd p(states, states);
    for (int s = 0; s < states; ++s) p.row(s) = Dirichlet(states, rng).transpose();
    mdp.transitions.push_back(std::move(p));
  }
  std::uniform_real_distribution<double> r(-1.0, 1.0);
  mdp.reward.resize(states, actions);
  for (int s = 0; s < states; ++s) {
    for (int a = 0; a < actions; ++a) mdp.reward(s, a) = r(rng);
  }
  mdp.d0 = Dirichlet(states, rng);
  return mdp;
}

TabularPolicy RandomPolicy(int states, int actions, std::uint64_t seed) {
  Rng rng(MixSeed(seed, 0x706f6c));
  TabularPolicy pi(states, actions);
  for (int s = 0; s < states; ++s) pi.row(s) = Dirichlet(actions, rng).transpose();
  return pi;
}

TabularPolicy GreedyPolicyFromQ(const QTable& q) {
  TabularPolicy pi = TabularPolicy::Zero(q.rows(), q.cols());
  for (Eigen::Index s = 0; s < q.rows(); ++s) {
    Eigen::Index best = 0;
    for (Eigen::Index a = 1; a < q.cols(); ++a) {
      if (q(s, a) > q(s, best)) best = a;
    }
    pi(s, best) = 1.0;
  }
  return pi;
}

QTable ValueIteration(const TabularMdp& mdp, double tol) {
  mdp.Validate();
  if (!(tol > 0.0)) throw Error(ErrorCode::kConfig, "tolerance must be positive");
  const int n = mdp.state_count();
  const int m = mdp.action_count();
  QTable q = QTable::Zero(n, m);
  for (;;) {
    const Eigen::VectorXd v = q.rowwise().maxCoeff();
    QTable next(n, m);
    for (int a = 0; a < m; ++a) {
      next.col(a) = mdp.reward.col(a) + mdp.gamma * (mdp.transitions[static_cast<std::size_t>(a)] * v);
    }
    const double residual = (next - q).cwiseAbs().maxCoeff();
    q = std::move(next);
    if (residual < tol) break;
  }
  return q;
}

namespace {

Eigen::MatrixXd PolicyTransition(const TabularMdp& mdp, const TabularPolicy& pi) {
  const int n = mdp.state_count();
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
  for (int a = 0; a < mdp.action_count(); ++a) {
    p += pi.col(a).asDiagonal() * mdp.transitions[static_cast<std::size_t>(a)];
  }
  return p;
}

void CheckPolicy(const TabularMdp& mdp, const TabularPolicy& pi) {
  if (pi.rows() != mdp.state_count() || pi.cols() != mdp.action_count()) {
    throw Error(ErrorCode::kShapeMismatch, "policy shape does not match the MDP");
  }
  if ((pi.array() < 0.0).any() || ((pi.rowwise().sum().array() - 1.0).abs() > 1e-9).any()) {
    throw Error(ErrorCode::kInvalidSpec, "policy rows must be distributions");
  }
}

}  // namespace

QTable PolicyEvaluation(const TabularMdp& mdp, const TabularPolicy& pi) {
  mdp.Validate();
  CheckPolicy(mdp, pi);
  const int n = mdp.state_count();
  const Eigen::MatrixXd p = PolicyTransition(mdp, pi);
  const Eigen::VectorXd r_pi = mdp.reward.cwiseProduct(pi).rowwise().sum();
  const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n) - mdp.gamma * p;
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  if (!lu.isInvertible()) throw Error(ErrorCode::kSingularSystem, "policy evaluation system is singular");
  const Eigen::VectorXd v = lu.solve(r_pi);
  QTable q(n, mdp.action_count());
  for (int act = 0; act < mdp.action_count(); ++act) {
    q.col(act) = mdp.reward.col(act) + mdp.gamma * (mdp.transitions[static_cast<std::size_t>(act)] * v);
  }
  return q;
}

Eigen::VectorXd StateDistribution(const TabularMdp& mdp, const TabularPolicy& pi) {
  mdp.Validate();
  CheckPolicy(mdp, pi);
  const int n = mdp.state_count();
  const Eigen::MatrixXd p = PolicyTransition(mdp, pi);
  const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n) - mdp.gamma * p.transpose();
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  if (!lu.isInvertible()) throw Error(ErrorCode::kSingularSystem, "flow system is singular");
  Eigen::VectorXd mu = lu.solve((1.0 - mdp.gamma) * mdp.d0);
  return mu.cwiseMax(0.0);
}

double PolicyScore(const TabularMdp& mdp, const TabularPolicy& pi) {
  const Eigen::VectorXd mu = StateDistribution(mdp, pi);
  return mu.dot(mdp.reward.cwiseProduct(pi).rowwise().sum());
}

LemmaCheck PolicyDifferenceCheck(const TabularMdp& mdp, const TabularPolicy& pi,
                                 const TabularPolicy& pi_prime) {
  LemmaCheck c;
  c.lhs = PolicyScore(mdp, pi) - PolicyScore(mdp, pi_prime);
  const QTable q = PolicyEvaluation(mdp, pi);
  const Eigen::VectorXd mu_prime = StateDistribution(mdp, pi_prime);
  const Eigen::VectorXd advantage =
      q.cwiseProduct(pi).rowwise().sum() - q.cwiseProduct(pi_prime).rowwise().sum();
  c.rhs = mu_prime.dot(advantage);
  c.gap = std::abs(c.lhs - c.rhs);
  return c;
}

std::vector<Action> OptimalActions(const GridSpec& spec, double gamma, double tol) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw Error(ErrorCode::kInvalidSpec, "gamma must lie in [0, 1)");
  const TransitionTable table(spec);
  const std::size_t n = table.cells().size();
  const int target = table.StateOf(spec.target());
  std::vector<double> v(n, 0.0);
  std::vector<double> next(n, 0.0);
  auto q = [&](std::size_t s, Action a) {
    const Transition& t = table.At(static_cast<int>(s), a);
    return t.reward + (t.done ? 0.0 : gamma * v[static_cast<std::size_t>(table.StateOf(t.next))]);
  };
  for (;;) {
    double residual = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      if (static_cast<int>(s) == target) continue;
      double best = q(s, kAllActions[0]);
      for (int a = 1; a < kNumActions; ++a) best = std::max(best, q(s, kAllActions[static_cast<std::size_t>(a)]));
      next[s] = best;
      residual = std::max(residual, std::abs(best - v[s]));
    }
    v.swap(next);
    if (residual < tol) break;
  }
  std::vector<Action> out(n, Action::kUp);
  for (std::size_t s = 0; s < n; ++s) {
    if (static_cast<int>(s) == target) continue;
    double best = q(s, kAllActions[0]);
    for (Action a : kAllActions) {
      if (q(s, a) > best) {
        best = q(s, a);
        out[s] = a;
      }
    }
  }
  return out;
}

double Span(const Eigen::MatrixXd& q) {
  if (q.size() == 0) throw Error(ErrorCode::kEmptyInput, "span of an empty table");
  return q.maxCoeff() - q.minCoeff();
}

}  // namespace rlu
