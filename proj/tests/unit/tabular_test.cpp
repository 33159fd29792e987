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

#include "rlu/tabular.hpp"

namespace rlu {
namespace {

TabularMdp SingleState(double reward, double gamma) {
  TabularMdp m;
  m.transitions = {Eigen::MatrixXd::Ones(1, 1)};
  m.reward = Eigen::MatrixXd::Constant(1, 1, reward);
  m.d0 = Eigen::VectorXd::Ones(1);
  m.gamma = gamma;
  return m;
}

TEST(ValueIteration, Corridor) {
  const GridSpec g(3, 1, {}, {2, 0}, std::nullopt);
  const TabularMdp mdp = MdpFromGrid(g, 0.9);
  const QTable q = ValueIteration(mdp);
  const TransitionTable t(g);
  const int left = t.StateOf({0, 0});
  const int mid = t.StateOf({1, 0});
  EXPECT_NEAR(q(mid, ActionIndex(Action::kRight)), 100.0, 1e-8);
  EXPECT_NEAR(q(left, ActionIndex(Action::kRight)), 89.0, 1e-8);
}

TEST(ValueIteration, MyopicAndZeroReward) {
  TabularMdp mdp = RandomMdp(4, 3, 0.0, 1);
  EXPECT_LT((ValueIteration(mdp) - mdp.reward).cwiseAbs().maxCoeff(), 1e-12);
  mdp.gamma = 0.9;
  mdp.reward.setZero();
  EXPECT_EQ(ValueIteration(mdp).cwiseAbs().maxCoeff(), 0.0);
}

TEST(ValueIteration, UpperBoundsEvaluatedPolicies) {
  const GridSpec g = GenerateEnvironment(3, 5, 5, 4);
  const TabularMdp mdp = MdpFromGrid(g, 0.9);
  const QTable q = ValueIteration(mdp);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const QTable qp = PolicyEvaluation(mdp, RandomPolicy(mdp.state_count(), 4, seed));
    EXPECT_LE((qp - q).maxCoeff(), 1e-8);
  }
  const QTable greedy = PolicyEvaluation(mdp, GreedyPolicyFromQ(q));
  EXPECT_LT((greedy - q).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(OptimalActions, AgreesWithDenseSolver) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const GridSpec g = GenerateEnvironment(seed, 6, 6, 6);
    const QTable q = ValueIteration(MdpFromGrid(g, 0.9));
    const std::vector<Action> a = OptimalActions(g, 0.9);
    const TransitionTable t(g);
    for (std::size_t s = 0; s < t.cells().size(); ++s) {
      if (t.cells()[s] == g.target()) continue;
      const int chosen = ActionIndex(a[s]);
      EXPECT_NEAR(q(static_cast<Eigen::Index>(s), chosen), q.row(static_cast<Eigen::Index>(s)).maxCoeff(), 1e-6);
    }
  }
}

TEST(StateDistribution, SingleAbsorbingState) {
  const TabularMdp m = SingleState(1.0, 0.9);
  const Eigen::VectorXd mu = StateDistribution(m, Eigen::MatrixXd::Ones(1, 1));
  EXPECT_NEAR(mu(0), 1.0, 1e-12);
}

TEST(StateDistribution, FlowResidualAndSeries) {
  const TabularMdp m = RandomMdp(4, 4, 0.9, 7);
  const TabularPolicy pi = RandomPolicy(4, 4, 8);
  const Eigen::VectorXd mu = StateDistribution(m, pi);
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(4, 4);
  for (int a = 0; a < 4; ++a) p += pi.col(a).asDiagonal() * m.transitions[static_cast<std::size_t>(a)];
  const Eigen::VectorXd residual = mu - (1 - m.gamma) * m.d0 - m.gamma * p.transpose() * mu;
  EXPECT_LT(residual.cwiseAbs().maxCoeff(), 1e-10);
  Eigen::VectorXd series = Eigen::VectorXd::Zero(4);
  Eigen::VectorXd term = m.d0;
  for (int t = 0; t < 10000; ++t) {
    series += term;
    term = m.gamma * p.transpose() * term;
  }
  series *= 1 - m.gamma;
  EXPECT_LT((series - mu).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(PolicyScore, Anchors) {
  TabularMdp m = RandomMdp(4, 4, 0.9, 3);
  const TabularPolicy pi = RandomPolicy(4, 4, 4);
  m.reward.setZero();
  EXPECT_EQ(PolicyScore(m, pi), 0.0);
  EXPECT_NEAR(PolicyScore(SingleState(1.0, 0.9), Eigen::MatrixXd::Ones(1, 1)), 1.0, 1e-12);
}

TEST(PolicyScore, RelabelingInvariant) {
  const TabularMdp m = RandomMdp(4, 3, 0.8, 9);
  const TabularPolicy pi = RandomPolicy(4, 3, 10);
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(4);
  perm.indices() << 2, 0, 3, 1;
  TabularMdp q = m;
  for (std::size_t a = 0; a < m.transitions.size(); ++a) {
    q.transitions[a] = perm * m.transitions[a] * perm.transpose();
  }
  q.reward = perm * m.reward;
  q.d0 = perm * m.d0;
  EXPECT_NEAR(PolicyScore(m, pi), PolicyScore(q, perm * pi), 1e-12);
}

TEST(Lemma, IdenticalPoliciesGiveZero) {
  const TabularMdp m = RandomMdp(4, 4, 0.9, 1);
  const TabularPolicy pi = RandomPolicy(4, 4, 2);
  const LemmaCheck c = PolicyDifferenceCheck(m, pi, pi);
  EXPECT_NEAR(c.lhs, 0.0, 1e-12);
  EXPECT_NEAR(c.rhs, 0.0, 1e-12);
}

TEST(Lemma, RandomMdps) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const TabularMdp m = RandomMdp(4, 4, 0.9, seed);
    const LemmaCheck c = PolicyDifferenceCheck(m, RandomPolicy(4, 4, seed + 1000), RandomPolicy(4, 4, seed + 2000));
    EXPECT_LT(c.gap, 1e-8) << "seed " << seed;
  }
}

TEST(Lemma, HandComputedTwoStateMdp) {
  // State 0 --a0--> state 0 (reward 1), --a1--> state 1 (reward 0); state 1 absorbing with reward 0.
  TabularMdp m;
  m.gamma = 0.5;
  Eigen::MatrixXd stay(2, 2), move(2, 2);
  stay << 1, 0, 0, 1;
  move << 0, 1, 0, 1;
  m.transitions = {stay, move};
  m.reward = Eigen::MatrixXd::Zero(2, 2);
  m.reward(0, 0) = 1.0;
  m.d0 = Eigen::Vector2d(1.0, 0.0);
  Eigen::MatrixXd pi(2, 2), pi_prime(2, 2);
  pi << 1, 0, 1, 0;        // always a0: stays in state 0 collecting 1
  pi_prime << 0, 1, 1, 0;  // leaves state 0 at once
  // rho = sum_s mu(s) r_pi(s) with mu normalized by (1 - gamma): rho_pi = 1, rho_pi' = 0.5 * 0 = 0.
  EXPECT_NEAR(PolicyScore(m, pi), 1.0, 1e-12);
  EXPECT_NEAR(PolicyScore(m, pi_prime), 0.0, 1e-12);
  const LemmaCheck c = PolicyDifferenceCheck(m, pi, pi_prime);
  EXPECT_NEAR(c.lhs, 1.0, 1e-12);
  EXPECT_LT(c.gap, 1e-10);
}

TEST(Span, Values) {
  EXPECT_EQ(Span(Eigen::MatrixXd::Constant(3, 2, 4.0)), 0.0);
  Eigen::MatrixXd q(1, 2);
  q << -1, 3;
  EXPECT_EQ(Span(q), 4.0);
  EXPECT_DOUBLE_EQ(Span(q.array() + 17.5), 4.0);
  EXPECT_THROW(Span(Eigen::MatrixXd(0, 0)), Error);
}

TEST(Span, BoundAfterConvergence) {
  const TabularMdp m = RandomMdp(5, 3, 0.9, 4);
  EXPECT_LE(Span(ValueIteration(m)), 2.0 * 1.0 / (1 - m.gamma) + 1e-9);
}

TEST(Validate, RejectsBadRows) {
  TabularMdp m = RandomMdp(3, 2, 0.9, 1);
  m.transitions[0](0, 0) += 0.1;
  EXPECT_THROW(m.Validate(), Error);
}

}  // namespace
}  // namespace rlu
