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

#include "dplab/grad_eval.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace dplab {

namespace {

std::vector<std::size_t> all_indices(const Dataset& data) {
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

Tensor gather_inputs(const Dataset& data, std::span<const std::size_t> batch) {
  Tensor x({batch.size(), data.dim()});
  for (std::size_t i = 0; i < batch.size(); ++i) {
    auto src = data.inputs.row(batch[i]);
    std::copy(src.begin(), src.end(), x.row(i).begin());
  }
  return x;
}

/// Computes loss and flattened gradient for one slice of examples; the tape
/// is reset and reused by the caller.
double slice_gradient(Tape& tape, const Model& model, const Dataset& data,
                      std::span<const std::size_t> batch, std::span<double> grad_out) {
  tape.reset();
  TapedForward fw = forward_on_tape(model, tape, gather_inputs(data, batch));
  Tape::NodeId loss = loss_on_tape(tape, fw.output, data, batch);
  std::vector<Tensor> grads = tape.gradients(loss, fw.parameter_nodes);
  std::size_t off = 0;
  for (const Tensor& g : grads) {
    std::copy(g.flat().begin(), g.flat().end(), grad_out.begin() + off);
    off += g.numel();
  }
  return tape.value(loss)[0];
}

}  // namespace

Tape::NodeId loss_on_tape(Tape& tape, Tape::NodeId output, const Dataset& data,
                          std::span<const std::size_t> batch) {
  if (data.kind == LabelKind::kRegression) {
    std::size_t out_dim = tape.value(output).cols();
    if (out_dim != 1) {
      throw std::invalid_argument("regression loss expects 1-D model output, got width " +
                                  std::to_string(out_dim));
    }
    Tensor target({batch.size(), 1});
    for (std::size_t i = 0; i < batch.size(); ++i) target[i] = data.targets[batch[i]];
    return tape.mse(output, tape.leaf(std::move(target)));
  }
  std::vector<int> labels(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) labels[i] = data.labels[batch[i]];
  return tape.softmax_cross_entropy(output, std::move(labels));
}

double batch_loss(const Model& model, const Dataset& data,
                  std::span<const std::size_t> batch) {
  std::vector<std::size_t> all;
  if (batch.empty()) {
    all = all_indices(data);
    batch = all;
  }
  Tape tape;
  TapedForward fw = forward_on_tape(model, tape, gather_inputs(data, batch));
  return tape.value(loss_on_tape(tape, fw.output, data, batch))[0];
}

LossAccuracy evaluate(const Model& model, const Dataset& data) {
  std::vector<std::size_t> all = all_indices(data);
  Tape tape;
  TapedForward fw = forward_on_tape(model, tape, gather_inputs(data, all));
  const Tensor& pred = tape.value(fw.output);
  LossAccuracy out;
  out.loss = tape.value(loss_on_tape(tape, fw.output, data, all))[0];
  std::size_t hits = 0;
  if (data.kind == LabelKind::kRegression) {
    for (std::size_t i = 0; i < data.size(); ++i) {
      if ((pred[i] >= 0.0) == (data.targets[i] >= 0.0)) ++hits;
    }
  } else {
    for (std::size_t i = 0; i < data.size(); ++i) {
      std::size_t arg = 0;
      for (std::size_t j = 1; j < pred.cols(); ++j) {
        if (pred.at(i, j) > pred.at(i, arg)) arg = j;
      }
      if (arg == static_cast<std::size_t>(data.labels[i])) ++hits;
    }
  }
  out.accuracy = static_cast<double>(hits) / static_cast<double>(data.size());
  return out;
}

std::vector<double> full_batch_gradient(const Model& model, const Dataset& data,
                                        std::span<const std::size_t> batch) {
  std::vector<std::size_t> all;
  if (batch.empty()) {
    all = all_indices(data);
    batch = all;
  }
  std::vector<double> grad(model.parameter_count());
  Tape tape;
  slice_gradient(tape, model, data, batch, grad);
  return grad;
}

GradientBatch per_example_gradients_serial(const Model& model, const Dataset& data,
                                           std::span<const std::size_t> batch,
                                           std::vector<double>* losses) {
  if (batch.empty()) throw std::invalid_argument("per_example_gradients: empty batch");
  GradientBatch out(batch.size(), model.parameter_count());
  if (losses) losses->assign(batch.size(), 0.0);
  Tape tape;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    std::size_t one[1] = {batch[i]};
    double loss = slice_gradient(tape, model, data, std::span<const std::size_t>(one, 1),
                                 out.row(i));
    if (losses) (*losses)[i] = loss;
  }
  return out;
}

GradientBatch per_example_gradients(const Model& model, const Dataset& data,
                                    std::span<const std::size_t> batch,
                                    std::vector<double>* losses) {
  if (batch.empty()) throw std::invalid_argument("per_example_gradients: empty batch");
  GradientBatch out(batch.size(), model.parameter_count());
  if (losses) losses->assign(batch.size(), 0.0);
  const std::int64_t n = static_cast<std::int64_t>(batch.size());
  std::exception_ptr err = nullptr;  // exceptions must not cross the omp region
#pragma omp parallel
  {
    Tape tape;  // one tape per thread, reused across its examples
#pragma omp for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
      try {
        std::size_t one[1] = {batch[static_cast<std::size_t>(i)]};
        double loss = slice_gradient(tape, model, data,
                                     std::span<const std::size_t>(one, 1),
                                     out.row(static_cast<std::size_t>(i)));
        if (losses) (*losses)[static_cast<std::size_t>(i)] = loss;
      } catch (...) {
#pragma omp critical
        if (!err) err = std::current_exception();
      }
    }
  }
  if (err) std::rethrow_exception(err);
  return out;
}

std::vector<FlatRange> weight_ranges(const Model& model) {
  std::vector<FlatRange> ranges;
  std::size_t off = 0;
  for (const auto& layer : model.layers) {
    ranges.push_back({off, layer.weight.numel()});
    off += layer.weight.numel();
    if (layer.bias) off += layer.bias->numel();
  }
  return ranges;
}

std::vector<std::size_t> masked_coordinates(const Model& model) {
  std::vector<std::size_t> out;
  std::size_t off = 0;
  for (const auto& layer : model.layers) {
    if (layer.weight_mask) {
      const Tensor& m = *layer.weight_mask;
      for (std::size_t i = 0; i < m.numel(); ++i) {
        if (m[i] == 0.0) out.push_back(off + i);
      }
    }
    off += layer.weight.numel();
    if (layer.bias) off += layer.bias->numel();
  }
  return out;
}

}  // namespace dplab
