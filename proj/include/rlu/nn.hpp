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

#ifndef RLU_NN_HPP_
#define RLU_NN_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "rlu/common.hpp"

namespace rlu {

// Layer widths from input to output. Hidden layers use ReLU, the output layer
// is linear. The default is the 10-64-32-4 grid-world Q-network.
struct MlpSpec {
  std::vector<int> layer_sizes = {10, 64, 32, 4};

  friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

struct DenseLayer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd bias;     // out
};

// Same shapes as the network's layers.
struct Gradients {
  std::vector<DenseLayer> layers;

  Eigen::VectorXd Flatten() const;
  double Norm() const;
  void Scale(double factor);
  void Add(const Gradients& other);
};

// Activations cached by a batched forward pass, consumed by Backpropagate.
struct ForwardTrace {
  std::vector<Eigen::MatrixXd> activations;  // [0] = inputs, back() = outputs
  const Eigen::MatrixXd& outputs() const { return activations.back(); }
};

// Fully connected network. Inputs and outputs are column-major batches
// (features x batch).
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(const MlpSpec& spec);

  // Uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
  static Mlp Init(const MlpSpec& spec, std::uint64_t seed);

  const MlpSpec& spec() const { return spec_; }
  int input_size() const { return spec_.layer_sizes.front(); }
  int output_size() const { return spec_.layer_sizes.back(); }
  std::size_t ParameterCount() const;

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  Eigen::VectorXd Forward(std::span<const double> input) const;
  Eigen::MatrixXd ForwardBatch(const Eigen::MatrixXd& inputs) const;
  ForwardTrace Trace(const Eigen::MatrixXd& inputs) const;

  // Exact gradients of a scalar loss given dLoss/dOutputs for a traced batch.
  Gradients Backpropagate(const ForwardTrace& trace,
                          const Eigen::MatrixXd& output_grad) const;

  Gradients ZeroGradients() const;
  Eigen::VectorXd FlatParameters() const;
  void SetFlatParameters(const Eigen::VectorXd& flat);
  bool AllFinite() const;

  friend bool operator==(const Mlp& a, const Mlp& b);

 private:
  void CheckInput(Eigen::Index rows) const;

  MlpSpec spec_;
  std::vector<DenseLayer> layers_;
};

using QNetwork = Mlp;

// One regression row: only the outputs with a nonzero mask contribute.
struct MaskedTarget {
  Eigen::VectorXd input;
  Eigen::VectorXd target;
  Eigen::VectorXd mask;
};

struct LossAndGradients {
  double loss = 0.0;
  Gradients grads;
};

// Mean over the batch of the masked squared error sum_a mask_a (Q_a - y_a)^2.
LossAndGradients MaskedMseLoss(const Mlp& net, std::span<const MaskedTarget> batch);

// Same loss on pre-assembled matrices (inputs x B, targets/mask outputs x B).
LossAndGradients MaskedMseLoss(const Mlp& net, const Eigen::MatrixXd& inputs,
                               const Eigen::MatrixXd& targets,
                               const Eigen::MatrixXd& mask);

class AdamOptimizer {
 public:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-8;

  AdamOptimizer() = default;
  explicit AdamOptimizer(const Mlp& net);

  // Throws kShapeMismatch when `grads` does not match `net`.
  void Apply(Mlp& net, const Gradients& grads, double learning_rate);

  std::int64_t steps() const { return t_; }

 private:
  std::vector<DenseLayer> m_;
  std::vector<DenseLayer> v_;
  std::int64_t t_ = 0;
};

nlohmann::json ToJson(const Mlp& net);
Mlp MlpFromJson(const nlohmann::json& j);

void SaveCheckpoint(const Mlp& net, const std::string& path);
Mlp LoadCheckpoint(const std::string& path);

}  // namespace rlu

#endif  // RLU_NN_HPP_
