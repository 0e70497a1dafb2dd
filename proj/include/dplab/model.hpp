// Copyright 2026 The dplab Authors
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

#ifndef DPLAB_MODEL_HPP_
#define DPLAB_MODEL_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dplab/autograd.hpp"
#include "dplab/tensor.hpp"

namespace dplab {

enum class Activation : std::uint8_t { kIdentity = 0, kRelu = 1, kTanh = 2 };

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);

/// One fully-connected layer: y = act(x @ W^T + b). The optional binary mask
/// is congruent with the weight; masked positions hold exactly 0 and receive
/// no updates or noise. Biases are never masked.
struct LinearLayer {
  std::string name;
  Tensor weight;  // (out, in)
  std::optional<Tensor> bias;
  Activation activation = Activation::kIdentity;
  std::optional<Tensor> weight_mask;  // entries are exactly 0.0 or 1.0
};

/// Ordered stack of linear layers. Parameter order is declaration order
/// (layer0 weight, layer0 bias, layer1 weight, ...); flatten/unflatten and
/// checkpoints rely on that ordering being stable.
struct Model {
  std::size_t input_dim = 0;
  std::vector<LinearLayer> layers;

  std::size_t parameter_count() const;
  std::size_t output_dim() const;

  std::vector<const Tensor*> parameters() const;
  std::vector<Tensor*> parameters();
};

enum class InitScheme : std::uint8_t {
  kFanInUniform = 0,  // uniform in +-sqrt(1/fan_in), the default
  kGaussian = 1,
  kBalancedLinear = 2,  // two-layer linear models only
};

struct InitSpec {
  InitScheme scheme = InitScheme::kFanInUniform;
  double gaussian_mean = 0.0;
  double gaussian_stddev = 1.0;
  double balanced_scale = 0.5;  // must be > 0; zero init degenerates the flow
  std::uint64_t seed = 0;
};

/// Rank-1 balanced construction: sample a row w2 in R^m scaled to norm
/// `scale` and a unit row b in R^d, then W1 = w2^T b and W2 = w2, so that
/// W1 W1^T = w2^T w2 = W2^T W2 holds to rounding error. Returns (W1, W2).
std::pair<Tensor, Tensor> balanced_init(std::size_t m, std::size_t d, double scale,
                                        std::uint64_t seed);

/// f(x) = W2 W1 x with W1 (m x (d_s + d_n)) and W2 (1 x m); no biases, no
/// activations. The first d_s columns of W1 connect to the signal block.
Model build_two_layer_linear(std::size_t d_s, std::size_t d_n, std::size_t m,
                             const InitSpec& init);

/// Standard fully-connected classifier/regressor; `sizes` lists layer widths
/// starting with the input dimension, activation applied to all but the last
/// layer.
Model build_mlp(const std::vector<std::size_t>& sizes, Activation activation,
                const InitSpec& init);

/// Frobenius norm of W1 W1^T - W2^T W2 for a two-layer linear model.
double balancedness_residual(const Tensor& w1, const Tensor& w2);

std::vector<double> flatten(const Model& model);
/// Inverse of flatten; rejects a vector whose length does not match.
void unflatten(std::span<const double> theta, Model& model);

/// Zeroes masked weight entries in place. Idempotent.
void apply_masks(Model& model);

/// Runs the forward pass on a caller-provided tape, registering parameters
/// as leaves. Shape mismatches are rejected with the offending layer named.
struct TapedForward {
  Tape::NodeId output = -1;
  std::vector<Tape::NodeId> parameter_nodes;  // flatten order
};
TapedForward forward_on_tape(const Model& model, Tape& tape, const Tensor& inputs);

/// Convenience forward without gradient bookkeeping.
Tensor forward(const Model& model, const Tensor& inputs);

/// Self-describing little-endian checkpoint container (layer names, shapes,
/// mask flags, raw f64 data). Byte-identical for byte-identical models.
void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

}  // namespace dplab

#endif  // DPLAB_MODEL_HPP_
