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

#include <doctest.h>

#include <cmath>

#include "dplab/autograd.hpp"
#include "dplab/data.hpp"
#include "dplab/grad_eval.hpp"
#include "dplab/model.hpp"
#include "dplab/random.hpp"
#include "oracles.hpp"

using namespace dplab;

namespace {

Model identity_linear(std::size_t d) {
  Model m;
  m.input_dim = d;
  LinearLayer layer{"id", Tensor({d, d}), std::nullopt, Activation::kIdentity, std::nullopt};
  for (std::size_t i = 0; i < d; ++i) layer.weight.at(i, i) = 1.0;
  m.layers.push_back(std::move(layer));
  return m;
}

Dataset regression_data(Tensor inputs, std::vector<double> targets) {
  Dataset d;
  d.kind = LabelKind::kRegression;
  d.inputs = std::move(inputs);
  d.targets = std::move(targets);
  return d;
}

// Random MLP + random regression batch, for gradient-check sweeps.
struct Instance {
  Model model;
  Dataset data;
};

Instance random_instance(std::uint64_t seed, bool classification) {
  RandomStream rng(seed);
  std::size_t in = 2 + rng.uniform_int(0, 4);
  std::size_t hidden = 2 + rng.uniform_int(0, 5);
  std::size_t out = classification ? 2 + rng.uniform_int(0, 2) : 1;
  std::size_t n = 1 + rng.uniform_int(0, 6);

  InitSpec init;
  init.scheme = InitScheme::kGaussian;
  init.gaussian_stddev = 0.7;
  init.seed = rng.next_u64();
  Activation act = (rng.next_u64() & 1) ? Activation::kTanh : Activation::kRelu;
  Instance inst{build_mlp({in, hidden, out}, act, init), Dataset{}};

  inst.data.inputs = Tensor({n, in});
  for (std::size_t i = 0; i < n * in; ++i) inst.data.inputs[i] = rng.gaussian();
  if (classification) {
    inst.data.kind = LabelKind::kClass;
    inst.data.labels.resize(n);
    for (auto& l : inst.data.labels) l = static_cast<int>(rng.uniform_int(0, out - 1));
  } else {
    inst.data.kind = LabelKind::kRegression;
    inst.data.targets.resize(n);
    for (auto& t : inst.data.targets) t = rng.gaussian();
  }
  return inst;
}

}  // namespace

TEST_CASE("identity model forwards its input") {
  Model m = identity_linear(3);
  Tensor y = forward(m, Tensor::from_rows({{1, 2, 3}}));
  CHECK(y[0] == 1.0);
  CHECK(y[1] == 2.0);
  CHECK(y[2] == 3.0);
}

TEST_CASE("two-layer hand expansion") {
  Model m;
  m.input_dim = 2;
  m.layers.push_back({"W1", Tensor::from_rows({{1, 0}, {0, 1}}), std::nullopt,
                      Activation::kIdentity, std::nullopt});
  m.layers.push_back({"W2", Tensor::from_rows({{1, 1}}), std::nullopt,
                      Activation::kIdentity, std::nullopt});
  Tensor y = forward(m, Tensor::from_rows({{2, 3}}));
  CHECK(y[0] == 5.0);
}

TEST_CASE("forward matches the tape-free oracle") {
  InitSpec init;
  init.seed = 42;
  Model m = build_mlp({4, 6, 3}, Activation::kTanh, init);
  RandomStream rng(7);
  std::vector<double> x(4);
  for (auto& v : x) v = rng.gaussian();
  Tensor batch({1, 4}, x);
  Tensor y = forward(m, batch);
  std::vector<double> expected = oracle::plain_forward(m, x);
  for (std::size_t i = 0; i < 3; ++i) CHECK(y[i] == doctest::Approx(expected[i]).epsilon(1e-15));
}

TEST_CASE("forward rejects a width mismatch naming the layer") {
  InitSpec init;
  Model m = build_mlp({4, 6, 3}, Activation::kRelu, init);
  m.layers[1].weight = Tensor({3, 7});  // corrupt fan-in
  try {
    forward(m, Tensor({2, 4}));
    FAIL("expected a shape diagnostic");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("layer1") != std::string::npos);
  }
  CHECK_THROWS_AS(forward(build_mlp({4, 3}, Activation::kRelu, init), Tensor({2, 5})),
                  std::invalid_argument);
}

TEST_CASE("gradient of theta^2 at theta=3 is 6") {
  Tape tape;
  auto theta = tape.leaf(Tensor::from_rows({{3.0}}));
  auto loss = tape.scale(tape.mse(theta, tape.leaf(Tensor::from_rows({{0.0}}))), 2.0);
  CHECK(tape.value(loss)[0] == doctest::Approx(9.0));
  auto grads = tape.gradients(loss, {theta});
  CHECK(grads[0][0] == doctest::Approx(6.0));
}

TEST_CASE("two-layer linear MSE gradient matches the analytic expression") {
  // L = 0.5 (W2 W1 x - y)^2; dL/dW1 = W2^T (Wx - y) x^T.
  RandomStream rng(11);
  std::size_t d = 4, m = 3;
  InitSpec init;
  init.scheme = InitScheme::kGaussian;
  init.seed = 5;
  Model model = build_two_layer_linear(d, 0, m, init);
  Tensor x({1, d});
  for (std::size_t i = 0; i < d; ++i) x[i] = rng.gaussian();
  double y = 0.7;

  Dataset data = regression_data(x, {y});
  std::vector<double> grad = full_batch_gradient(model, data);

  const Tensor& w1 = model.layers[0].weight;
  const Tensor& w2 = model.layers[1].weight;
  double pred = 0.0;
  std::vector<double> h(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    h[i] = dot(w1.row(i), x.flat());
    pred += w2[i] * h[i];
  }
  double resid = pred - y;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      double analytic = w2[i] * resid * x[j];
      CHECK(grad[i * d + j] == doctest::Approx(analytic).epsilon(1e-12));
    }
  }
  // dL/dW2 = (Wx - y) h^T
  for (std::size_t i = 0; i < m; ++i) {
    CHECK(grad[m * d + i] == doctest::Approx(resid * h[i]).epsilon(1e-12));
  }
}

TEST_CASE("autodiff matches central finite differences") {
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    Instance inst = random_instance(1000 + seed, seed % 3 == 0);
    std::vector<double> grad = full_batch_gradient(inst.model, inst.data);
    auto loss_fn = [&](const Model& m) { return batch_loss(m, inst.data); };
    std::vector<double> fd = oracle::finite_difference_gradient(inst.model, loss_fn);
    for (std::size_t i = 0; i < grad.size(); ++i) {
      double denom = std::max({std::abs(grad[i]), std::abs(fd[i]), 1e-4});
      CHECK(std::abs(grad[i] - fd[i]) / denom <= 1e-5);
    }
  }
}

TEST_CASE("gradients are linear in the loss") {
  Instance inst = random_instance(77, false);
  Tape tape;
  TapedForward fw = forward_on_tape(inst.model, tape, inst.data.inputs);
  std::vector<std::size_t> all(inst.data.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  auto l1 = loss_on_tape(tape, fw.output, inst.data, all);
  // A second, different loss on the same predictions: squared error to zero.
  Tensor zeros({inst.data.size(), 1});
  auto l2 = tape.mse(fw.output, tape.leaf(zeros));
  const double a = 1.7, b = -0.6;
  auto combined = tape.add(tape.scale(l1, a), tape.scale(l2, b));

  auto g1 = tape.gradients(l1, fw.parameter_nodes);
  auto g2 = tape.gradients(l2, fw.parameter_nodes);
  auto gc = tape.gradients(combined, fw.parameter_nodes);
  for (std::size_t t = 0; t < gc.size(); ++t) {
    for (std::size_t i = 0; i < gc[t].numel(); ++i) {
      CHECK(gc[t][i] == doctest::Approx(a * g1[t][i] + b * g2[t][i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("gradients reject a non-scalar loss") {
  Tape tape;
  auto x = tape.leaf(Tensor::from_rows({{1.0, 2.0}}));
  auto y = tape.relu(x);
  CHECK_THROWS_AS(tape.gradients(y, {x}), std::invalid_argument);
}

TEST_CASE("per-example rows: batch of one and identical examples") {
  Instance inst = random_instance(300, false);
  std::vector<std::size_t> one{0};
  GradientBatch g = per_example_gradients(inst.model, inst.data, one);
  std::vector<double> full = full_batch_gradient(inst.model, inst.data, one);
  for (std::size_t i = 0; i < full.size(); ++i) CHECK(g.row(0)[i] == full[i]);

  // duplicate one example four times
  Dataset dup;
  dup.kind = LabelKind::kRegression;
  dup.inputs = Tensor({4, inst.data.dim()});
  dup.targets.assign(4, inst.data.targets[0]);
  for (int r = 0; r < 4; ++r) {
    auto src = inst.data.inputs.row(0);
    std::copy(src.begin(), src.end(), dup.inputs.row(r).begin());
  }
  std::vector<std::size_t> idx{0, 1, 2, 3};
  GradientBatch gd = per_example_gradients(inst.model, dup, idx);
  for (int r = 1; r < 4; ++r) {
    for (std::size_t i = 0; i < gd.dim(); ++i) CHECK(gd.row(r)[i] == gd.row(0)[i]);
  }
}

TEST_CASE("mean of per-example rows equals the full-batch gradient") {
  Instance inst = random_instance(42, false);
  std::vector<std::size_t> all(inst.data.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  GradientBatch g = per_example_gradients(inst.model, inst.data, all);
  std::vector<double> mean = g.mean();
  std::vector<double> full = full_batch_gradient(inst.model, inst.data);
  for (std::size_t i = 0; i < mean.size(); ++i) {
    CHECK(std::abs(mean[i] - full[i]) <= 1e-12 * (1.0 + std::abs(full[i])));
  }
}

TEST_CASE("forward and backward are deterministic for a fixed seed") {
  Instance a = random_instance(123, true);
  Instance b = random_instance(123, true);
  std::vector<double> ga = full_batch_gradient(a.model, a.data);
  std::vector<double> gb = full_batch_gradient(b.model, b.data);
  CHECK(ga == gb);
}
