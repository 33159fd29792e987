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

#include <cmath>
#include <filesystem>

#include "rlu/common.hpp"
#include "rlu/nn.hpp"

namespace rlu {
namespace {

Eigen::MatrixXd RandomMatrix(int rows, int cols, Rng& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = Uniform01(rng) * 2.0 - 1.0;
  }
  return m;
}

TEST(Init, DeterministicAndZeroBias) {
  const Mlp a = Mlp::Init(MlpSpec{}, 3);
  const Mlp b = Mlp::Init(MlpSpec{}, 3);
  EXPECT_TRUE(a == b);
  EXPECT_FALSE(a == Mlp::Init(MlpSpec{}, 4));
  for (const DenseLayer& l : a.layers()) EXPECT_EQ(l.bias.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Init, ParameterCount) { EXPECT_EQ(Mlp::Init(MlpSpec{}, 1).ParameterCount(), 2916u); }

TEST(Forward, ZeroNetGivesZero) {
  Mlp net(MlpSpec{});
  const std::vector<double> obs(10, 0.5);
  const Eigen::VectorXd q = net.Forward(obs);
  ASSERT_EQ(q.size(), 4);
  EXPECT_EQ(q.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Forward, IdentityLayer) {
  Mlp net(MlpSpec{{2, 2}});
  net.layers()[0].weights = Eigen::MatrixXd::Identity(2, 2);
  const std::vector<double> obs = {0.3, 0.7};
  const Eigen::VectorXd q = net.Forward(obs);
  EXPECT_DOUBLE_EQ(q(0), 0.3);
  EXPECT_DOUBLE_EQ(q(1), 0.7);
}

TEST(Forward, WrongInputSizeThrows) {
  const Mlp net = Mlp::Init(MlpSpec{}, 1);
  const std::vector<double> obs(9, 0.0);
  EXPECT_THROW(net.Forward(obs), Error);
}

TEST(Loss, ZeroWhenTargetsMatch) {
  Rng rng(5);
  const Mlp net = Mlp::Init(MlpSpec{}, 2);
  const Eigen::MatrixXd x = RandomMatrix(10, 6, rng);
  const Eigen::MatrixXd y = net.ForwardBatch(x);
  const LossAndGradients lg = MaskedMseLoss(net, x, y, Eigen::MatrixXd::Ones(4, 6));
  EXPECT_EQ(lg.loss, 0.0);
  EXPECT_EQ(lg.grads.Norm(), 0.0);
}

TEST(Loss, MeanOverBatch) {
  Mlp net(MlpSpec{{1, 1}});
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(1, 2);
  Eigen::MatrixXd y(1, 2);
  y << 1.0, std::sqrt(3.0);
  const LossAndGradients lg = MaskedMseLoss(net, x, y, Eigen::MatrixXd::Ones(1, 2));
  EXPECT_NEAR(lg.loss, 2.0, 1e-12);
}

TEST(Loss, MaskSelectsTakenAction) {
  const Mlp net = Mlp::Init(MlpSpec{}, 2);
  Rng rng(1);
  const Eigen::MatrixXd x = RandomMatrix(10, 1, rng);
  Eigen::MatrixXd y = net.ForwardBatch(x);
  y(2, 0) += 1.0;
  Eigen::MatrixXd mask = Eigen::MatrixXd::Zero(4, 1);
  EXPECT_EQ(MaskedMseLoss(net, x, y, mask).loss, 0.0);
  mask(2, 0) = 1.0;
  EXPECT_NEAR(MaskedMseLoss(net, x, y, mask).loss, 1.0, 1e-12);
}

// Central differences on the flat parameter vector.
double MaxRelativeError(const Mlp& net, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                        const Eigen::MatrixXd& mask) {
  const Eigen::VectorXd analytic = MaskedMseLoss(net, x, y, mask).grads.Flatten();
  Mlp probe = net;
  const Eigen::VectorXd theta = net.FlatParameters();
  const double h = 1e-5;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    Eigen::VectorXd p = theta;
    p(i) += h;
    probe.SetFlatParameters(p);
    const double up = MaskedMseLoss(probe, x, y, mask).loss;
    p(i) -= 2 * h;
    probe.SetFlatParameters(p);
    const double down = MaskedMseLoss(probe, x, y, mask).loss;
    const double numeric = (up - down) / (2 * h);
    const double scale = std::max({std::abs(numeric), std::abs(analytic(i)), 1e-4});
    worst = std::max(worst, std::abs(numeric - analytic(i)) / scale);
  }
  return worst;
}

TEST(Backward, FiniteDifferences) {
  Rng rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    const Mlp net = Mlp::Init(MlpSpec{}, 100 + trial);
    const Eigen::MatrixXd x = RandomMatrix(10, 4, rng);
    const Eigen::MatrixXd y = RandomMatrix(4, 4, rng);
    Eigen::MatrixXd mask = Eigen::MatrixXd::Zero(4, 4);
    for (int j = 0; j < 4; ++j) mask(UniformInt(rng, 0, 3), j) = 1.0;
    EXPECT_LT(MaxRelativeError(net, x, y, mask), 1e-4);
  }
}

TEST(Adam, ZeroGradientOrRateLeavesWeights) {
  Mlp net = Mlp::Init(MlpSpec{}, 1);
  const Mlp before = net;
  AdamOptimizer adam(net);
  adam.Apply(net, net.ZeroGradients(), 1e-3);
  EXPECT_TRUE(net == before);
  Gradients g = net.ZeroGradients();
  g.layers[0].weights.setOnes();
  adam.Apply(net, g, 0.0);
  EXPECT_TRUE(net == before);
}

TEST(Adam, QuadraticStepShrinks) {
  Mlp net(MlpSpec{{1, 1}});
  net.layers()[0].weights(0, 0) = 1.0;
  AdamOptimizer adam(net);
  Gradients g = net.ZeroGradients();
  g.layers[0].weights(0, 0) = 2.0;  // d(w^2)/dw at w = 1
  adam.Apply(net, g, 0.1);
  EXPECT_LT(std::abs(net.layers()[0].weights(0, 0)), 1.0);
}

TEST(Adam, ShapeMismatchThrows) {
  Mlp net = Mlp::Init(MlpSpec{}, 1);
  AdamOptimizer adam(net);
  const Mlp other = Mlp::Init(MlpSpec{{10, 8, 4}}, 1);
  try {
    adam.Apply(net, other.ZeroGradients(), 1e-3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kShapeMismatch);
  }
}

TEST(Checkpoint, RoundTrip) {
  const Mlp net = Mlp::Init(MlpSpec{}, 8);
  const std::string path = (std::filesystem::temp_directory_path() / "rlu_nn_test.json").string();
  SaveCheckpoint(net, path);
  EXPECT_TRUE(LoadCheckpoint(path) == net);
  std::filesystem::remove(path);
  EXPECT_THROW(LoadCheckpoint(path), Error);
}

TEST(Finiteness, LargeInputsStayFinite) {
  const Mlp net = Mlp::Init(MlpSpec{}, 3);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Constant(10, 3, 1e6);
  EXPECT_TRUE(net.ForwardBatch(x).allFinite());
}

}  // namespace
}  // namespace rlu
