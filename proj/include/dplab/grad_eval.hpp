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

#ifndef DPLAB_GRAD_EVAL_HPP_
#define DPLAB_GRAD_EVAL_HPP_

#include <span>
#include <vector>

#include "dplab/data.hpp"
#include "dplab/gradient_batch.hpp"
#include "dplab/model.hpp"

namespace dplab {

/// Attaches the dataset's loss (MSE for regression targets, softmax cross
/// entropy for class labels) to a taped forward output.
Tape::NodeId loss_on_tape(Tape& tape, Tape::NodeId output, const Dataset& data,
                          std::span<const std::size_t> batch);

/// Mean loss of the model over the given examples (whole dataset if `batch`
/// is empty).
double batch_loss(const Model& model, const Dataset& data,
                  std::span<const std::size_t> batch = {});

struct LossAccuracy {
  double loss = 0.0;
  double accuracy = 0.0;  // argmax match for class labels, sign match for +-1 targets
};
LossAccuracy evaluate(const Model& model, const Dataset& data);

/// Gradient of the batch-mean loss, flattened in parameter order.
std::vector<double> full_batch_gradient(const Model& model, const Dataset& data,
                                        std::span<const std::size_t> batch = {});

/// Per-example gradients: row i is the gradient of the loss on example
/// batch[i] alone. The parallel kernel fans examples out across OpenMP
/// threads, each with its own tape, and writes into disjoint row slots, so
/// the result is bit-identical to the serial reference at any thread count.
/// `losses`, when non-null, receives the per-example loss values.
GradientBatch per_example_gradients(const Model& model, const Dataset& data,
                                    std::span<const std::size_t> batch,
                                    std::vector<double>* losses = nullptr);

/// Serial reference implementation, kept for testing and benchmarking.
GradientBatch per_example_gradients_serial(const Model& model, const Dataset& data,
                                           std::span<const std::size_t> batch,
                                           std::vector<double>* losses = nullptr);

/// Flat-coordinate ranges of each layer's weight inside the flattened
/// parameter vector, in declaration order.
struct FlatRange {
  std::size_t offset = 0;
  std::size_t length = 0;
};
std::vector<FlatRange> weight_ranges(const Model& model);

/// Indices of all masked (weight mask == 0) flat coordinates.
std::vector<std::size_t> masked_coordinates(const Model& model);

}  // namespace dplab

#endif  // DPLAB_GRAD_EVAL_HPP_
