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

#include "rlu/nn.hpp"

#include <cmath>
#include <fstream>

namespace rlu {

namespace {

bool SameShape(const std::vector<DenseLayer>& a, const std::vector<DenseLayer>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].weights.rows() != b[i].weights.rows() ||
        a[i].weights.cols() != b[i].weights.cols() ||
        a[i].bias.size() != b[i].bias.size()) {
      return false;
    }
  }
  return true;
}

std::vector<DenseLayer> ZerosLike(const std::vector<DenseLayer>& layers) {
  std::vector<DenseLayer> out;
  out.reserve(layers.size());
  for (const DenseLayer& l : layers) {
    out.push_back({Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()),
                   Eigen::VectorXd::Zero(l.bias.size())});
  }
  return out;
}

}  // namespace

Eigen::VectorXd Gradients::Flatten() const {
  Eigen::Index n = 0;
  for (const DenseLayer& l : layers) n += l.weights.size() + l.bias.size();
  Eigen::VectorXd flat(n);
  Eigen::Index k = 0;
  for (const DenseLayer& l : layers) {
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) flat[k++] = l.weights(r, c);
    }
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) flat[k++] = l.bias[i];
  }
  return flat;
}

double Gradients::Norm() const {
  double sq = 0.0;
  for (const DenseLayer& l : layers) {
    sq += l.weights.squaredNorm() + l.bias.squaredNorm();
  }
  return std::sqrt(sq);
}

void Gradients::Scale(double factor) {
  for (DenseLayer& l : layers) {
    l.weights *= factor;
    l.bias *= factor;
  }
}

void Gradients::Add(const Gradients& other) {
  if (!SameShape(layers, other.layers)) {
    throw Error(ErrorCode::kShapeMismatch, "gradient shapes differ");
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    layers[i].weights += other.layers[i].weights;
    layers[i].bias += other.layers[i].bias;
  }
}

Mlp::Mlp(const MlpSpec& spec) : spec_(spec) {
  if (spec.layer_sizes.size() < 2) {
    throw Error(ErrorCode::kShapeMismatch, "an MLP needs at least two layer sizes");
  }
  for (int s : spec.layer_sizes) {
    if (s < 1) throw Error(ErrorCode::kShapeMismatch, "layer sizes must be positive");
  }
  for (std::size_t i = 0; i + 1 < spec.layer_sizes.size(); ++i) {
    layers_.push_back({Eigen::MatrixXd::Zero(spec.layer_sizes[i + 1], spec.layer_sizes[i]),
                       Eigen::VectorXd::Zero(spec.layer_sizes[i + 1])});
  }
}

Mlp Mlp::Init(const MlpSpec& spec, std::uint64_t seed) {
  Mlp net(spec);
  Rng rng(MixSeed(seed, 0x6d6c70));
  for (DenseLayer& l : net.layers_) {
    const double limit = std::sqrt(6.0 / static_cast<double>(l.weights.rows() + l.weights.cols()));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) l.weights(r, c) = dist(rng);
    }
  }
  return net;
}

std::size_t Mlp::ParameterCount() const {
  std::size_t n = 0;
  for (const DenseLayer& l : layers_) {
    n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
  }
  return n;
}

void Mlp::CheckInput(Eigen::Index rows) const {
  if (rows != input_size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "input has " + std::to_string(rows) + " features, network expects " +
                    std::to_string(input_size()));
  }
}

Eigen::VectorXd Mlp::Forward(std::span<const double> input) const {
  CheckInput(static_cast<Eigen::Index>(input.size()));
  Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(input.data(),
                                                         static_cast<Eigen::Index>(input.size()));
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Eigen::VectorXd z = layers_[i].weights * a + layers_[i].bias;
    if (i + 1 < layers_.size()) z = z.cwiseMax(0.0);
    a = std::move(z);
  }
  return a;
}

Eigen::MatrixXd Mlp::ForwardBatch(const Eigen::MatrixXd& inputs) const {
  CheckInput(inputs.rows());
  Eigen::MatrixXd a = inputs;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Eigen::MatrixXd z = layers_[i].weights * a;
    z.colwise() += layers_[i].bias;
    if (i + 1 < layers_.size()) z = z.cwiseMax(0.0);
    a = std::move(z);
  }
  return a;
}

ForwardTrace Mlp::Trace(const Eigen::MatrixXd& inputs) const {
  CheckInput(inputs.rows());
  ForwardTrace trace;
  trace.activations.reserve(layers_.size() + 1);
  trace.activations.push_back(inputs);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Eigen::MatrixXd z = layers_[i].weights * trace.activations.back();
    z.colwise() += layers_[i].bias;
    if (i + 1 < layers_.size()) z = z.cwiseMax(0.0);
    trace.activations.push_back(std::move(z));
  }
  return trace;
}

Gradients Mlp::Backpropagate(const ForwardTrace& trace,
                             const Eigen::MatrixXd& output_grad) const {
  if (output_grad.rows() != output_size() ||
      output_grad.cols() != trace.outputs().cols()) {
    throw Error(ErrorCode::kShapeMismatch, "output gradient shape mismatch");
  }
  Gradients g;
  g.layers.resize(layers_.size());
  Eigen::MatrixXd delta = output_grad;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    const Eigen::MatrixXd& input = trace.activations[i];
    g.layers[i].weights = delta * input.transpose();
    g.layers[i].bias = delta.rowwise().sum();
    if (i > 0) {
      Eigen::MatrixXd back = layers_[i].weights.transpose() * delta;
      // ReLU derivative: the stored post-activation is positive exactly where
      // the unit was active.
      delta = back.cwiseProduct((input.array() > 0.0).cast<double>().matrix());
    }
  }
  return g;
}

Gradients Mlp::ZeroGradients() const { return {ZerosLike(layers_)}; }

Eigen::VectorXd Mlp::FlatParameters() const {
  Gradients view{layers_};
  return view.Flatten();
}

void Mlp::SetFlatParameters(const Eigen::VectorXd& flat) {
  if (static_cast<std::size_t>(flat.size()) != ParameterCount()) {
    throw Error(ErrorCode::kShapeMismatch, "flat parameter vector has the wrong size");
  }
  Eigen::Index k = 0;
  for (DenseLayer& l : layers_) {
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) l.weights(r, c) = flat[k++];
    }
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias[i] = flat[k++];
  }
}

bool Mlp::AllFinite() const {
  for (const DenseLayer& l : layers_) {
    if (!l.weights.allFinite() || !l.bias.allFinite()) return false;
  }
  return true;
}

bool operator==(const Mlp& a, const Mlp& b) {
  if (a.spec_ != b.spec_) return false;
  for (std::size_t i = 0; i < a.layers_.size(); ++i) {
    if (a.layers_[i].weights != b.layers_[i].weights ||
        a.layers_[i].bias != b.layers_[i].bias) {
      return false;
    }
  }
  return true;
}

LossAndGradients MaskedMseLoss(const Mlp& net, const Eigen::MatrixXd& inputs,
                               const Eigen::MatrixXd& targets,
                               const Eigen::MatrixXd& mask) {
  if (inputs.cols() == 0) throw Error(ErrorCode::kEmptyBatch, "empty batch");
  const ForwardTrace trace = net.Trace(inputs);
  if (targets.rows() != net.output_size() || targets.cols() != inputs.cols() ||
      mask.rows() != targets.rows() || mask.cols() != targets.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "target/mask shape mismatch");
  }
  const auto batch = static_cast<double>(inputs.cols());
  const Eigen::MatrixXd err = (trace.outputs() - targets).cwiseProduct(mask);
  LossAndGradients out;
  out.loss = err.squaredNorm() / batch;
  out.grads = net.Backpropagate(trace, (2.0 / batch) * err);
  return out;
}

LossAndGradients MaskedMseLoss(const Mlp& net, std::span<const MaskedTarget> batch) {
  if (batch.empty()) throw Error(ErrorCode::kEmptyBatch, "empty batch");
  const auto n = static_cast<Eigen::Index>(batch.size());
  Eigen::MatrixXd inputs(net.input_size(), n);
  Eigen::MatrixXd targets(net.output_size(), n);
  Eigen::MatrixXd mask(net.output_size(), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const MaskedTarget& row = batch[static_cast<std::size_t>(i)];
    if (row.input.size() != net.input_size()) {
      throw Error(ErrorCode::kDimensionMismatch, "input dimension mismatch");
    }
    if (row.target.size() != net.output_size() || row.mask.size() != net.output_size()) {
      throw Error(ErrorCode::kDimensionMismatch, "target/mask dimension mismatch");
    }
    inputs.col(i) = row.input;
    targets.col(i) = row.target;
    mask.col(i) = row.mask;
  }
  return MaskedMseLoss(net, inputs, targets, mask);
}

AdamOptimizer::AdamOptimizer(const Mlp& net)
    : m_(ZerosLike(net.layers())), v_(ZerosLike(net.layers())) {}

void AdamOptimizer::Apply(Mlp& net, const Gradients& grads, double learning_rate) {
  if (m_.empty()) {
    m_ = ZerosLike(net.layers());
    v_ = ZerosLike(net.layers());
  }
  if (!SameShape(net.layers(), grads.layers) || !SameShape(net.layers(), m_)) {
    throw Error(ErrorCode::kShapeMismatch, "gradient shapes do not match the network");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
  auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = kBeta1 * m + (1.0 - kBeta1) * g;
    v = kBeta2 * v + (1.0 - kBeta2) * g.cwiseProduct(g);
    param.array() -= learning_rate * (m.array() / c1) /
                     ((v.array() / c2).sqrt() + kEpsilon);
  };
  for (std::size_t i = 0; i < grads.layers.size(); ++i) {
    update(net.layers()[i].weights, m_[i].weights, v_[i].weights, grads.layers[i].weights);
    update(net.layers()[i].bias, m_[i].bias, v_[i].bias, grads.layers[i].bias);
  }
}

nlohmann::json ToJson(const Mlp& net) {
  nlohmann::json j;
  j["layer_sizes"] = net.spec().layer_sizes;
  nlohmann::json layers = nlohmann::json::array();
  for (const DenseLayer& l : net.layers()) {
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(l.weights.size()));
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) w.push_back(l.weights(r, c));
    }
    std::vector<double> b(l.bias.data(), l.bias.data() + l.bias.size());
    layers.push_back({{"weights", w}, {"bias", b}});
  }
  j["layers"] = layers;
  return j;
}

Mlp MlpFromJson(const nlohmann::json& j) {
  try {
    MlpSpec spec;
    spec.layer_sizes = j.at("layer_sizes").get<std::vector<int>>();
    Mlp net(spec);
    const auto& layers = j.at("layers");
    if (layers.size() != net.layers().size()) {
      throw Error(ErrorCode::kShapeMismatch, "checkpoint layer count mismatch");
    }
    for (std::size_t i = 0; i < layers.size(); ++i) {
      DenseLayer& l = net.layers()[i];
      const auto w = layers[i].at("weights").get<std::vector<double>>();
      const auto b = layers[i].at("bias").get<std::vector<double>>();
      if (w.size() != static_cast<std::size_t>(l.weights.size()) ||
          b.size() != static_cast<std::size_t>(l.bias.size())) {
        throw Error(ErrorCode::kShapeMismatch, "checkpoint layer shape mismatch");
      }
      std::size_t k = 0;
      for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
        for (Eigen::Index c = 0; c < l.weights.cols(); ++c) l.weights(r, c) = w[k++];
      }
      for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias[r] = b[static_cast<std::size_t>(r)];
    }
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kShapeMismatch, std::string("malformed checkpoint: ") + e.what());
  }
}

void SaveCheckpoint(const Mlp& net, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out << ToJson(net).dump() << '\n';
}

Mlp LoadCheckpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kIo, std::string("cannot parse checkpoint: ") + e.what());
  }
  return MlpFromJson(j);
}

}  // namespace rlu
