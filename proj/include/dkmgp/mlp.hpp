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

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dkmgp/linalg.hpp"

namespace dkmgp {

enum class Activation { kTanh, kRelu, kIdentity };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& name);

/// Feature extractor layout. layer_sizes = {9, hidden..., features}.
struct MlpConfig {
  std::vector<int> layer_sizes{9, 256, 64, 5};
  Activation activation = Activation::kTanh;
  std::uint64_t seed = 0;

  void validate() const;
  int input_dim() const { return layer_sizes.front(); }
  int output_dim() const { return layer_sizes.back(); }
};

struct DenseLayer {
  RowMatrix weight;  // out x in
  Vector bias;       // out
};

/// Hidden layers apply `activation`; the output layer is linear.
struct MlpParams {
  Activation activation = Activation::kTanh;
  std::vector<DenseLayer> layers;

  std::size_t parameter_count() const;
  int input_dim() const { return static_cast<int>(layers.front().weight.cols()); }
  int output_dim() const { return static_cast<int>(layers.back().weight.rows()); }
  /// Same shapes, all zeros.
  MlpParams zeros_like() const;
};

/// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)) from mt19937_64(seed); biases 0.
MlpParams mlp_init(const MlpConfig& config);

/// Post-activation values of every layer, input first. Needed by backward.
struct MlpTape {
  std::vector<Vector> values;
  const Vector& output() const { return values.back(); }
};

Vector mlp_forward(const MlpParams& params, const Vector& d);
MlpTape mlp_forward_tape(const MlpParams& params, const Vector& d);

struct MlpGradient {
  MlpParams params;  // d(loss)/d(weights, biases)
  Vector input;      // d(loss)/d(d)
};

MlpGradient mlp_backward(const MlpParams& params, const Vector& d, const Vector& upstream);

/// Accumulates parameter gradients into `grad` and returns the input gradient.
Vector mlp_backward_accumulate(const MlpParams& params, const MlpTape& tape,
                               const Vector& upstream, MlpParams& grad);

}  // namespace dkmgp
