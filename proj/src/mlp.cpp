// Copyright 2026 The DKMGP Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dkmgp/mlp.hpp"

#include <cmath>
#include <random>

#include "dkmgp/errors.hpp"
#include "dkmgp/simd/kernels.hpp"

namespace dkmgp {

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::kTanh:
      return "tanh";
    case Activation::kRelu:
      return "relu";
    case Activation::kIdentity:
      return "identity";
  }
  return "tanh";
}

Activation activation_from_name(const std::string& name) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "relu") return Activation::kRelu;
  if (name == "identity") return Activation::kIdentity;
  throw ConfigError("unknown activation '" + name + "'");
}

void MlpConfig::validate() const {
  if (layer_sizes.size() < 2) throw ConfigError("mlp.layers needs at least input and output");
  if (layer_sizes.front() != 9) throw ConfigError("mlp.layers must start with 9 inputs");
  for (int s : layer_sizes) {
    if (s < 1) throw ConfigError("mlp.layers entries must be >= 1");
  }
}

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (const DenseLayer& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

MlpParams MlpParams::zeros_like() const {
  MlpParams z;
  z.activation = activation;
  for (const DenseLayer& l : layers) {
    z.layers.push_back({RowMatrix::Zero(l.weight.rows(), l.weight.cols()),
                        Vector::Zero(l.bias.size())});
  }
  return z;
}

MlpParams mlp_init(const MlpConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  MlpParams p;
  p.activation = config.activation;
  for (std::size_t l = 0; l + 1 < config.layer_sizes.size(); ++l) {
    const int fan_in = config.layer_sizes[l];
    const int fan_out = config.layer_sizes[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    DenseLayer layer{RowMatrix(fan_out, fan_in), Vector::Zero(fan_out)};
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = dist(rng);
    }
    p.layers.push_back(std::move(layer));
  }
  return p;
}

namespace {

void activate(Activation a, Vector& v) {
  switch (a) {
    case Activation::kTanh:
      v = v.array().tanh();
      break;
    case Activation::kRelu:
      v = v.array().max(0.0);
      break;
    case Activation::kIdentity:
      break;
  }
}

// Derivative expressed through the post-activation value.
void scale_by_activation_grad(Activation a, const Vector& post, Vector& g) {
  switch (a) {
    case Activation::kTanh:
      g.array() *= 1.0 - post.array().square();
      break;
    case Activation::kRelu:
      g = (post.array() > 0.0).select(g, 0.0);
      break;
    case Activation::kIdentity:
      break;
  }
}

}  // namespace

MlpTape mlp_forward_tape(const MlpParams& params, const Vector& d) {
  if (d.size() != params.input_dim()) {
    throw DimensionMismatch("mlp input has " + std::to_string(d.size()) + " entries, expected " +
                            std::to_string(params.input_dim()));
  }
  const simd::KernelTable& k = simd::kernels();
  MlpTape tape;
  tape.values.reserve(params.layers.size() + 1);
  tape.values.push_back(d);
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const DenseLayer& layer = params.layers[l];
    Vector z(layer.weight.rows());
    k.affine(layer.weight.data(), tape.values.back().data(), layer.bias.data(),
             static_cast<std::size_t>(layer.weight.rows()),
             static_cast<std::size_t>(layer.weight.cols()), z.data());
    if (l + 1 < params.layers.size()) activate(params.activation, z);
    tape.values.push_back(std::move(z));
  }
  return tape;
}

Vector mlp_forward(const MlpParams& params, const Vector& d) {
  return mlp_forward_tape(params, d).output();
}

Vector mlp_backward_accumulate(const MlpParams& params, const MlpTape& tape,
                               const Vector& upstream, MlpParams& grad) {
  if (upstream.size() != params.output_dim()) {
    throw DimensionMismatch("mlp upstream gradient has " + std::to_string(upstream.size()) +
                            " entries, expected " + std::to_string(params.output_dim()));
  }
  const simd::KernelTable& k = simd::kernels();
  Vector g = upstream;
  for (std::size_t l = params.layers.size(); l-- > 0;) {
    const DenseLayer& layer = params.layers[l];
    DenseLayer& out = grad.layers[l];
    const Vector& prev = tape.values[l];
    const auto rows = static_cast<std::size_t>(layer.weight.rows());
    const auto cols = static_cast<std::size_t>(layer.weight.cols());
    Vector g_prev = Vector::Zero(layer.weight.cols());
    for (std::size_t r = 0; r < rows; ++r) {
      const double gr = g(static_cast<Eigen::Index>(r));
      if (gr == 0.0) continue;
      k.axpy(gr, prev.data(), out.weight.data() + r * cols, cols);
      k.axpy(gr, layer.weight.data() + r * cols, g_prev.data(), cols);
    }
    out.bias += g;
    if (l > 0) scale_by_activation_grad(params.activation, prev, g_prev);
    g = std::move(g_prev);
  }
  return g;
}

MlpGradient mlp_backward(const MlpParams& params, const Vector& d, const Vector& upstream) {
  const MlpTape tape = mlp_forward_tape(params, d);
  MlpGradient result{params.zeros_like(), Vector()};
  result.input = mlp_backward_accumulate(params, tape, upstream, result.params);
  return result;
}

}  // namespace dkmgp
