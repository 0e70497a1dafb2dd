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

#ifndef DPLAB_AUTOGRAD_HPP_
#define DPLAB_AUTOGRAD_HPP_

#include <vector>

#include "dplab/tensor.hpp"

namespace dplab {

/// Reverse-mode tape over dense tensors. Nodes are appended in evaluation
/// order, so parents always precede children and a single reverse sweep
/// visits each node exactly once.
///
/// Supported primitives: linear (x @ W^T), add_bias, relu, tanh, scalar
/// scale, tensor add, mean squared error and softmax cross entropy. That set
/// is fixed; convolutions are out of scope.
///
/// Tapes are single-owner and not shareable across threads. They can be
/// reset and reused to avoid reallocating node storage in per-example loops.
class Tape {
 public:
  using NodeId = int;

  Tape() = default;

  /// Drops all nodes but keeps the allocation, for reuse in tight loops.
  void reset() { nodes_.clear(); }

  std::size_t size() const { return nodes_.size(); }

  /// Registers a leaf value (input or parameter).
  NodeId leaf(Tensor value);

  /// y = x @ W^T where x is (n, in) and W is (out, in); y is (n, out).
  NodeId linear(NodeId x, NodeId weight);

  /// Adds a length-k bias row vector to every row of an (n, k) matrix.
  NodeId add_bias(NodeId x, NodeId bias);

  NodeId relu(NodeId x);
  NodeId tanh_op(NodeId x);

  /// y = s * x (scalar constant, not a tape node).
  NodeId scale(NodeId x, double s);

  /// Elementwise sum of two same-shape nodes.
  NodeId add(NodeId a, NodeId b);

  /// (1/n) * sum_i 0.5 * ||pred_i - target_i||^2 over the n rows.
  /// A row here is one example; the 0.5 matches the squared-error objective
  /// used for the regression tasks.
  NodeId mse(NodeId pred, NodeId target);

  /// (1/n) * sum_i (logsumexp(logits_i) - logits_i[label_i]).
  NodeId softmax_cross_entropy(NodeId logits, std::vector<int> labels);

  const Tensor& value(NodeId id) const { return nodes_[id].value; }

  /// Backward pass from a scalar loss node. Returns gradients aligned with
  /// `wrt`, each with the shape of the corresponding node's value. The tape
  /// contents are left intact but gradient slots are consumed; rejects a
  /// non-scalar loss.
  std::vector<Tensor> gradients(NodeId loss, const std::vector<NodeId>& wrt);

 private:
  enum class Op {
    kLeaf,
    kLinear,
    kAddBias,
    kRelu,
    kTanh,
    kScale,
    kAdd,
    kMse,
    kSoftmaxXent,
  };

  struct Node {
    Op op;
    NodeId a = -1;
    NodeId b = -1;
    double scalar = 0.0;
    Tensor value;
    std::vector<int> labels;  // kSoftmaxXent only
  };

  NodeId push(Node node) {
    nodes_.push_back(std::move(node));
    return static_cast<NodeId>(nodes_.size() - 1);
  }
  const Node& node(NodeId id) const { return nodes_[id]; }

  std::vector<Node> nodes_;
};

}  // namespace dplab

#endif  // DPLAB_AUTOGRAD_HPP_
