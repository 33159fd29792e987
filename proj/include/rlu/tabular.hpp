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

#ifndef RLU_TABULAR_HPP_
#define RLU_TABULAR_HPP_

#include <vector>

#include <Eigen/Dense>

#include "rlu/gridworld.hpp"

namespace rlu {

// Finite MDP with dense transition matrices. transitions[a](s, s') is the
// probability of moving from s to s' under action a.
struct TabularMdp {
  std::vector<Eigen::MatrixXd> transitions;
  Eigen::MatrixXd reward;  // states x actions
  Eigen::VectorXd d0;
  double gamma = 0.9;

  int state_count() const { return static_cast<int>(reward.rows()); }
  int action_count() const { return static_cast<int>(reward.cols()); }

  // Throws kInvalidSpec on malformed rows (tolerance 1e-12), d0 not summing
  // to one, or gamma outside [0, 1).
  void Validate() const;
};

// Rows are per-state action distributions.
using TabularPolicy = Eigen::MatrixXd;
using QTable = Eigen::MatrixXd;  // states x actions

// Grid environment as a degenerate-stochastic MDP over its free cells (state
// order = TransitionTable::cells()). The target is absorbing with zero reward
// so a terminal transition contributes its reward once. d0 is uniform over
// the start cells.
TabularMdp MdpFromGrid(const GridSpec& spec, double gamma);

// Random MDP with Dirichlet(1,...,1) transition rows, uniform rewards in
// [-1, 1] and a Dirichlet initial distribution.
TabularMdp RandomMdp(int states, int actions, double gamma, std::uint64_t seed);

// Random stochastic policy with Dirichlet(1,...,1) rows.
TabularPolicy RandomPolicy(int states, int actions, std::uint64_t seed);
TabularPolicy GreedyPolicyFromQ(const QTable& q);

// Iterates the Bellman optimality operator until the sup-norm residual is
// below `tol`.
QTable ValueIteration(const TabularMdp& mdp, double tol = 1e-10);

// Exact Q_pi from a linear solve of (I - gamma P_pi) V = r_pi.
QTable PolicyEvaluation(const TabularMdp& mdp, const TabularPolicy& policy);

// Discounted occupancy mu_pi = (1 - gamma) d0 + gamma P_pi^T mu_pi, solved
// directly.
Eigen::VectorXd StateDistribution(const TabularMdp& mdp, const TabularPolicy& policy);

// rho_pi = sum_s mu_pi(s) sum_a pi(a|s) r(s, a).
double PolicyScore(const TabularMdp& mdp, const TabularPolicy& policy);

struct LemmaCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  double gap = 0.0;
};

// Compares rho_pi - rho_pi' with sum_s mu_pi'(s) (Q_pi(s, pi) - Q_pi(s, pi')).
LemmaCheck PolicyDifferenceCheck(const TabularMdp& mdp, const TabularPolicy& pi,
                                 const TabularPolicy& pi_prime);

// max entry - min entry.
double Span(const Eigen::MatrixXd& q);

// Greedy optimal action per free cell (TransitionTable::cells() order) from
// value iteration on the transition table, the target treated as absorbing.
// Same fixed point as ValueIteration(MdpFromGrid(spec, gamma)) without the
// dense matrices. Ties go to the earliest action.
std::vector<Action> OptimalActions(const GridSpec& spec, double gamma, double tol = 1e-10);

}  // namespace rlu

#endif  // RLU_TABULAR_HPP_
