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

#include "dplab/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "dplab/random.hpp"

namespace dplab {

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::kIdentity: return "identity";
    case Activation::kRelu: return "relu";
    case Activation::kTanh: return "tanh";
  }
  return "identity";
}

Activation activation_from_name(const std::string& name) {
  if (name == "identity") return Activation::kIdentity;
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  throw std::invalid_argument("unknown activation: " + name);
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers) {
    n += layer.weight.numel();
    if (layer.bias) n += layer.bias->numel();
  }
  return n;
}

std::size_t Model::output_dim() const {
  if (layers.empty()) throw std::logic_error("Model has no layers");
  return layers.back().weight.rows();
}

std::vector<const Tensor*> Model::parameters() const {
  std::vector<const Tensor*> out;
  for (const auto& layer : layers) {
    out.push_back(&layer.weight);
    if (layer.bias) out.push_back(&*layer.bias);
  }
  return out;
}

std::vector<Tensor*> Model::parameters() {
  std::vector<Tensor*> out;
  for (auto& layer : layers) {
    out.push_back(&layer.weight);
    if (layer.bias) out.push_back(&*layer.bias);
  }
  return out;
}

namespace {

void fill_init(Tensor& w, const InitSpec& init, RandomStream& rng) {
  switch (init.scheme) {
    case InitScheme::kFanInUniform: {
      double bound = std::sqrt(1.0 / static_cast<double>(w.cols()));
      for (std::size_t i = 0; i < w.numel(); ++i) {
        w[i] = (2.0 * rng.uniform() - 1.0) * bound;
      }
      break;
    }
    case InitScheme::kGaussian:
      for (std::size_t i = 0; i < w.numel(); ++i) {
        w[i] = init.gaussian_mean + init.gaussian_stddev * rng.gaussian();
      }
      break;
    case InitScheme::kBalancedLinear:
      throw std::invalid_argument("balanced init applies only to two-layer linear models");
  }
}

}  // namespace

std::pair<Tensor, Tensor> balanced_init(std::size_t m, std::size_t d, double scale,
                                        std::uint64_t seed) {
  if (m < 1 || d < 1) throw std::invalid_argument("balanced_init: m and d must be >= 1");
  if (!(scale > 0.0)) {
    throw std::invalid_argument("balanced_init: scale must be positive (zero init degenerates the flow)");
  }
  RandomStream rng(seed);
  std::vector<double> w2(m), b(d);
  // Degenerate all-zero draws have probability ~0 but the loop keeps the
  // construction total.
  double n2 = 0.0;
  do {
    for (auto& x : w2) x = rng.gaussian();
    n2 = l2_norm(w2);
  } while (n2 == 0.0);
  for (auto& x : w2) x *= scale / n2;
  double nb = 0.0;
  do {
    for (auto& x : b) x = rng.gaussian();
    nb = l2_norm(b);
  } while (nb == 0.0);
  for (auto& x : b) x /= nb;

  Tensor w1({m, d});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < d; ++j) w1.at(i, j) = w2[i] * b[j];
  }
  Tensor w2t({1, m}, std::move(w2));
  return {std::move(w1), std::move(w2t)};
}

Model build_two_layer_linear(std::size_t d_s, std::size_t d_n, std::size_t m,
                             const InitSpec& init) {
  std::size_t d = d_s + d_n;
  if (d < 1) throw std::invalid_argument("build_two_layer_linear: d_s + d_n must be >= 1");
  if (m < 1) throw std::invalid_argument("build_two_layer_linear: m must be >= 1");

  Model model;
  model.input_dim = d;
  LinearLayer l1{"W1", Tensor({m, d}), std::nullopt, Activation::kIdentity, std::nullopt};
  LinearLayer l2{"W2", Tensor({1, m}), std::nullopt, Activation::kIdentity, std::nullopt};

  if (init.scheme == InitScheme::kBalancedLinear) {
    auto [w1, w2] = balanced_init(m, d, init.balanced_scale, init.seed);
    l1.weight = std::move(w1);
    l2.weight = std::move(w2);
  } else {
    RandomStream rng(init.seed);
    fill_init(l1.weight, init, rng);
    fill_init(l2.weight, init, rng);
  }
  model.layers.push_back(std::move(l1));
  model.layers.push_back(std::move(l2));
  return model;
}

Model build_mlp(const std::vector<std::size_t>& sizes, Activation activation,
                const InitSpec& init) {
  if (sizes.size() < 2) {
    throw std::invalid_argument("build_mlp: need at least input and output sizes");
  }
  if (init.scheme == InitScheme::kBalancedLinear) {
    throw std::invalid_argument("balanced init applies only to two-layer linear models");
  }
  Model model;
  model.input_dim = sizes[0];
  RandomStream rng(init.seed);
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    LinearLayer layer;
    layer.name = "layer" + std::to_string(i);
    layer.weight = Tensor({sizes[i + 1], sizes[i]});
    layer.bias = Tensor({sizes[i + 1]});
    layer.activation = (i + 2 < sizes.size()) ? activation : Activation::kIdentity;
    fill_init(layer.weight, init, rng);
    // biases start at zero
    model.layers.push_back(std::move(layer));
  }
  return model;
}

double balancedness_residual(const Tensor& w1, const Tensor& w2) {
  std::size_t m = w1.rows();
  if (w2.cols() != m || w2.rows() != 1) {
    throw std::invalid_argument("balancedness_residual: W2 must be (1, m)");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      double g = dot(w1.row(i), w1.row(j)) - w2[i] * w2[j];
      s += g * g;
    }
  }
  return std::sqrt(s);
}

std::vector<double> flatten(const Model& model) {
  std::vector<double> theta;
  theta.reserve(model.parameter_count());
  for (const Tensor* p : model.parameters()) {
    theta.insert(theta.end(), p->flat().begin(), p->flat().end());
  }
  return theta;
}

void unflatten(std::span<const double> theta, Model& model) {
  if (theta.size() != model.parameter_count()) {
    throw std::invalid_argument("unflatten: expected " +
                                std::to_string(model.parameter_count()) + " values, got " +
                                std::to_string(theta.size()));
  }
  std::size_t off = 0;
  for (Tensor* p : model.parameters()) {
    std::copy(theta.begin() + off, theta.begin() + off + p->numel(), p->flat().begin());
    off += p->numel();
  }
}

void apply_masks(Model& model) {
  for (auto& layer : model.layers) {
    if (!layer.weight_mask) continue;
    const Tensor& m = *layer.weight_mask;
    for (std::size_t i = 0; i < m.numel(); ++i) {
      if (m[i] == 0.0) layer.weight[i] = 0.0;
    }
  }
}

TapedForward forward_on_tape(const Model& model, Tape& tape, const Tensor& inputs) {
  if (inputs.rank() != 2 || inputs.cols() != model.input_dim) {
    throw std::invalid_argument("forward: inputs " + inputs.shape_string() +
                                " do not match model input dimension " +
                                std::to_string(model.input_dim));
  }
  TapedForward fw;
  Tape::NodeId x = tape.leaf(inputs);
  for (const auto& layer : model.layers) {
    if (layer.weight.cols() != tape.value(x).cols()) {
      throw std::invalid_argument("forward: layer '" + layer.name + "' expects width " +
                                  std::to_string(layer.weight.cols()) + ", got " +
                                  std::to_string(tape.value(x).cols()));
    }
    Tape::NodeId w = tape.leaf(layer.weight);
    fw.parameter_nodes.push_back(w);
    x = tape.linear(x, w);
    if (layer.bias) {
      Tape::NodeId b = tape.leaf(*layer.bias);
      fw.parameter_nodes.push_back(b);
      x = tape.add_bias(x, b);
    }
    switch (layer.activation) {
      case Activation::kIdentity: break;
      case Activation::kRelu: x = tape.relu(x); break;
      case Activation::kTanh: x = tape.tanh_op(x); break;
    }
  }
  fw.output = x;
  return fw;
}

Tensor forward(const Model& model, const Tensor& inputs) {
  Tape tape;
  return tape.value(forward_on_tape(model, tape, inputs).output);
}

// ---------------------------------------------------------------------------
// Checkpoint container. Little-endian throughout; magic "DPLABCK1".
// ---------------------------------------------------------------------------

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& out, double d) {
  std::uint64_t v;
  std::memcpy(&v, &d, 8);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  explicit Reader(std::string bytes) : bytes_(std::move(bytes)) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }

  std::uint32_t u32() {
    const char* p = take(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<std::uint8_t>(p[i]);
    return v;
  }

  double f64() {
    const char* p = take(8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<std::uint8_t>(p[i]);
    double d;
    std::memcpy(&d, &v, 8);
    return d;
  }

  std::string str(std::size_t n) { return std::string(take(n), n); }

 private:
  const char* take(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw std::runtime_error("checkpoint: truncated file");
    const char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

  std::string bytes_;
  std::size_t pos_ = 0;
};

constexpr char kMagic[] = "DPLABCK1";

}  // namespace

void save_checkpoint(const Model& model, const std::string& path) {
  std::string out;
  out.append(kMagic, 8);
  put_u32(out, static_cast<std::uint32_t>(model.input_dim));
  put_u32(out, static_cast<std::uint32_t>(model.layers.size()));
  for (const auto& layer : model.layers) {
    put_u32(out, static_cast<std::uint32_t>(layer.name.size()));
    out += layer.name;
    out.push_back(static_cast<char>(layer.activation));
    out.push_back(layer.bias ? 1 : 0);
    out.push_back(layer.weight_mask ? 1 : 0);
    put_u32(out, static_cast<std::uint32_t>(layer.weight.rows()));
    put_u32(out, static_cast<std::uint32_t>(layer.weight.cols()));
    for (double d : layer.weight.flat()) put_f64(out, d);
    if (layer.bias) {
      for (double d : layer.bias->flat()) put_f64(out, d);
    }
    if (layer.weight_mask) {
      for (double d : layer.weight_mask->flat()) {
        out.push_back(d != 0.0 ? 1 : 0);
      }
    }
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw std::runtime_error("checkpoint: write failed for " + path);
}

Model load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader r(std::move(bytes));
  if (r.str(8) != kMagic) throw std::runtime_error("checkpoint: bad magic in " + path);
  Model model;
  model.input_dim = r.u32();
  std::uint32_t n_layers = r.u32();
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    LinearLayer layer;
    layer.name = r.str(r.u32());
    layer.activation = static_cast<Activation>(r.u8());
    bool has_bias = r.u8() != 0;
    bool has_mask = r.u8() != 0;
    std::size_t rows = r.u32(), cols = r.u32();
    layer.weight = Tensor({rows, cols});
    for (std::size_t k = 0; k < rows * cols; ++k) layer.weight[k] = r.f64();
    if (has_bias) {
      layer.bias = Tensor({rows});
      for (std::size_t k = 0; k < rows; ++k) (*layer.bias)[k] = r.f64();
    }
    if (has_mask) {
      layer.weight_mask = Tensor({rows, cols});
      for (std::size_t k = 0; k < rows * cols; ++k) {
        (*layer.weight_mask)[k] = r.u8() != 0 ? 1.0 : 0.0;
      }
    }
    model.layers.push_back(std::move(layer));
  }
  return model;
}

}  // namespace dplab
