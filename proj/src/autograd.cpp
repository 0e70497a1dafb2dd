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

#include "dplab/autograd.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dplab {

namespace {

void require_matrix(const Tensor& t, const char* what) {
  if (t.rank() != 2) {
    throw std::invalid_argument(std::string(what) + ": expected rank-2 tensor, got " +
                                t.shape_string());
  }
}

}  // namespace

Tape::NodeId Tape::leaf(Tensor value) {
  Node n;
  n.op = Op::kLeaf;
  n.value = std::move(value);
  return push(std::move(n));
}

Tape::NodeId Tape::linear(NodeId x, NodeId weight) {
  const Tensor& xv = node(x).value;
  const Tensor& wv = node(weight).value;
  require_matrix(xv, "linear input");
  require_matrix(wv, "linear weight");
  if (xv.cols() != wv.cols()) {
    throw std::invalid_argument("linear: input width " + std::to_string(xv.cols()) +
                                " does not match weight fan-in " +
                                std::to_string(wv.cols()));
  }
  std::size_t n = xv.rows(), in = xv.cols(), out = wv.rows();
  Tensor y({n, out});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t o = 0; o < out; ++o) {
      double s = 0.0;
      const double* xr = xv.data() + i * in;
      const double* wr = wv.data() + o * in;
      for (std::size_t k = 0; k < in; ++k) s += xr[k] * wr[k];
      y.at(i, o) = s;
    }
  }
  Node nd;
  nd.op = Op::kLinear;
  nd.a = x;
  nd.b = weight;
  nd.value = std::move(y);
  return push(std::move(nd));
}

Tape::NodeId Tape::add_bias(NodeId x, NodeId bias) {
  const Tensor& xv = node(x).value;
  const Tensor& bv = node(bias).value;
  require_matrix(xv, "add_bias input");
  if (bv.numel() != xv.cols()) {
    throw std::invalid_argument("add_bias: bias length " + std::to_string(bv.numel()) +
                                " does not match width " + std::to_string(xv.cols()));
  }
  Tensor y = xv;
  for (std::size_t i = 0; i < y.rows(); ++i) {
    for (std::size_t j = 0; j < y.cols(); ++j) y.at(i, j) += bv[j];
  }
  Node nd;
  nd.op = Op::kAddBias;
  nd.a = x;
  nd.b = bias;
  nd.value = std::move(y);
  return push(std::move(nd));
}

Tape::NodeId Tape::relu(NodeId x) {
  Tensor y = node(x).value;
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] = y[i] > 0.0 ? y[i] : 0.0;
  Node nd;
  nd.op = Op::kRelu;
  nd.a = x;
  nd.value = std::move(y);
  return push(std::move(nd));
}

Tape::NodeId Tape::tanh_op(NodeId x) {
  Tensor y = node(x).value;
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] = std::tanh(y[i]);
  Node nd;
  nd.op = Op::kTanh;
  nd.a = x;
  nd.value = std::move(y);
  return push(std::move(nd));
}

Tape::NodeId Tape::scale(NodeId x, double s) {
  Tensor y = node(x).value;
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] *= s;
  Node nd;
  nd.op = Op::kScale;
  nd.a = x;
  nd.scalar = s;
  nd.value = std::move(y);
  return push(std::move(nd));
}

Tape::NodeId Tape::add(NodeId a, NodeId b) {
  const Tensor& av = node(a).value;
  const Tensor& bv = node(b).value;
  if (!av.same_shape(bv)) {
    throw std::invalid_argument("add: shape mismatch " + av.shape_string() + " vs " +
                                bv.shape_string());
  }
  Tensor y = av;
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] += bv[i];
  Node nd;
  nd.op = Op::kAdd;
  nd.a = a;
  nd.b = b;
  nd.value = std::move(y);
  return push(std::move(nd));
}

Tape::NodeId Tape::mse(NodeId pred, NodeId target) {
  const Tensor& pv = node(pred).value;
  const Tensor& tv = node(target).value;
  if (!pv.same_shape(tv)) {
    throw std::invalid_argument("mse: prediction shape " + pv.shape_string() +
                                " does not match target " + tv.shape_string());
  }
  require_matrix(pv, "mse prediction");
  double n = static_cast<double>(pv.rows());
  double s = 0.0;
  for (std::size_t i = 0; i < pv.numel(); ++i) {
    double d = pv[i] - tv[i];
    s += d * d;
  }
  Node nd;
  nd.op = Op::kMse;
  nd.a = pred;
  nd.b = target;
  nd.value = Tensor::scalar(0.5 * s / n);
  return push(std::move(nd));
}

Tape::NodeId Tape::softmax_cross_entropy(NodeId logits, std::vector<int> labels) {
  const Tensor& lv = node(logits).value;
  require_matrix(lv, "softmax_cross_entropy logits");
  if (labels.size() != lv.rows()) {
    throw std::invalid_argument("softmax_cross_entropy: " + std::to_string(labels.size()) +
                                " labels for " + std::to_string(lv.rows()) + " rows");
  }
  std::size_t k = lv.cols();
  double n = static_cast<double>(lv.rows());
  double total = 0.0;
  for (std::size_t i = 0; i < lv.rows(); ++i) {
    int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= k) {
      throw std::invalid_argument("softmax_cross_entropy: label " + std::to_string(y) +
                                  " out of range for " + std::to_string(k) + " classes");
    }
    double mx = lv.at(i, 0);
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, lv.at(i, j));
    double se = 0.0;
    for (std::size_t j = 0; j < k; ++j) se += std::exp(lv.at(i, j) - mx);
    total += mx + std::log(se) - lv.at(i, static_cast<std::size_t>(y));
  }
  Node nd;
  nd.op = Op::kSoftmaxXent;
  nd.a = logits;
  nd.labels = std::move(labels);
  nd.value = Tensor::scalar(total / n);
  return push(std::move(nd));
}

std::vector<Tensor> Tape::gradients(NodeId loss, const std::vector<NodeId>& wrt) {
  if (loss < 0 || static_cast<std::size_t>(loss) >= nodes_.size()) {
    throw std::invalid_argument("gradients: loss node out of range");
  }
  if (nodes_[loss].value.numel() != 1) {
    throw std::invalid_argument("gradients: loss must be a scalar, got shape " +
                                nodes_[loss].value.shape_string());
  }

  std::vector<Tensor> grads(nodes_.size());
  std::vector<bool> live(nodes_.size(), false);
  auto ensure = [&](NodeId id) -> Tensor& {
    if (!live[id]) {
      grads[id] = Tensor(nodes_[id].value.shape());
      live[id] = true;
    }
    return grads[id];
  };

  ensure(loss)[0] = 1.0;

  for (NodeId id = loss; id >= 0; --id) {
    if (!live[id]) continue;
    const Node& nd = nodes_[id];
    const Tensor& g = grads[id];
    switch (nd.op) {
      case Op::kLeaf:
        break;
      case Op::kLinear: {
        const Tensor& xv = nodes_[nd.a].value;
        const Tensor& wv = nodes_[nd.b].value;
        Tensor& gx = ensure(nd.a);
        Tensor& gw = ensure(nd.b);
        std::size_t n = xv.rows(), in = xv.cols(), out = wv.rows();
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t o = 0; o < out; ++o) {
            double go = g.at(i, o);
            if (go == 0.0) continue;
            const double* wr = wv.data() + o * in;
            const double* xr = xv.data() + i * in;
            double* gxr = gx.data() + i * in;
            double* gwr = gw.data() + o * in;
            for (std::size_t c = 0; c < in; ++c) {
              gxr[c] += go * wr[c];
              gwr[c] += go * xr[c];
            }
          }
        }
        break;
      }
      case Op::kAddBias: {
        Tensor& gx = ensure(nd.a);
        Tensor& gb = ensure(nd.b);
        std::size_t cols = nodes_[nd.a].value.cols();
        for (std::size_t i = 0; i < g.rows(); ++i) {
          for (std::size_t j = 0; j < cols; ++j) {
            gx.at(i, j) += g.at(i, j);
            gb[j] += g.at(i, j);
          }
        }
        break;
      }
      case Op::kRelu: {
        Tensor& gx = ensure(nd.a);
        const Tensor& xv = nodes_[nd.a].value;
        for (std::size_t i = 0; i < g.numel(); ++i) {
          if (xv[i] > 0.0) gx[i] += g[i];
        }
        break;
      }
      case Op::kTanh: {
        Tensor& gx = ensure(nd.a);
        const Tensor& yv = nd.value;
        for (std::size_t i = 0; i < g.numel(); ++i) {
          gx[i] += g[i] * (1.0 - yv[i] * yv[i]);
        }
        break;
      }
      case Op::kScale: {
        Tensor& gx = ensure(nd.a);
        for (std::size_t i = 0; i < g.numel(); ++i) gx[i] += g[i] * nd.scalar;
        break;
      }
      case Op::kAdd: {
        Tensor& ga = ensure(nd.a);
        Tensor& gb = ensure(nd.b);
        for (std::size_t i = 0; i < g.numel(); ++i) {
          ga[i] += g[i];
          gb[i] += g[i];
        }
        break;
      }
      case Op::kMse: {
        const Tensor& pv = nodes_[nd.a].value;
        const Tensor& tv = nodes_[nd.b].value;
        Tensor& gp = ensure(nd.a);
        double go = g[0] / static_cast<double>(pv.rows());
        for (std::size_t i = 0; i < pv.numel(); ++i) {
          gp[i] += go * (pv[i] - tv[i]);
        }
        break;
      }
      case Op::kSoftmaxXent: {
        const Tensor& lv = nodes_[nd.a].value;
        Tensor& gl = ensure(nd.a);
        std::size_t k = lv.cols();
        double go = g[0] / static_cast<double>(lv.rows());
        for (std::size_t i = 0; i < lv.rows(); ++i) {
          double mx = lv.at(i, 0);
          for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, lv.at(i, j));
          double se = 0.0;
          for (std::size_t j = 0; j < k; ++j) se += std::exp(lv.at(i, j) - mx);
          for (std::size_t j = 0; j < k; ++j) {
            double p = std::exp(lv.at(i, j) - mx) / se;
            double ind = (static_cast<std::size_t>(nd.labels[i]) == j) ? 1.0 : 0.0;
            gl.at(i, j) += go * (p - ind);
          }
        }
        break;
      }
    }
  }

  std::vector<Tensor> out;
  out.reserve(wrt.size());
  for (NodeId id : wrt) {
    if (live[id]) {
      out.push_back(std::move(grads[id]));
    } else {
      out.push_back(Tensor(nodes_[id].value.shape()));
    }
  }
  return out;
}

}  // namespace dplab
