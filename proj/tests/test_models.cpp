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

#include <cstdio>
#include <filesystem>

#include "dplab/model.hpp"
#include "dplab/random.hpp"
#include "oracles.hpp"

using namespace dplab;

TEST_CASE("two-layer linear shapes") {
  InitSpec init;
  Model m = build_two_layer_linear(2, 3, 4, init);
  CHECK(m.layers[0].weight.rows() == 4);
  CHECK(m.layers[0].weight.cols() == 5);
  CHECK(m.layers[1].weight.rows() == 1);
  CHECK(m.layers[1].weight.cols() == 4);
  CHECK_THROWS_AS(build_two_layer_linear(2, 3, 0, init), std::invalid_argument);
  CHECK_THROWS_AS(build_two_layer_linear(0, 0, 4, init), std::invalid_argument);
}

TEST_CASE("balanced init satisfies the balance identity") {
  for (std::uint64_t seed : {1ull, 2ull, 99ull}) {
    auto [w1, w2] = balanced_init(16, 100, 0.5, seed);
    CHECK(balancedness_residual(w1, w2) <= 1e-14);
  }
  auto [w1, w2] = balanced_init(1, 1, 1.0, 3);
  CHECK(std::abs(std::abs(w1[0]) - 1.0) <= 1e-15);
  CHECK(std::abs(std::abs(w2[0]) - 1.0) <= 1e-15);
  CHECK(balancedness_residual(w1, w2) <= 1e-15);
  CHECK_THROWS_AS(balanced_init(4, 4, 0.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(balanced_init(4, 4, -1.0, 1), std::invalid_argument);
}

TEST_CASE("balanced init is rank one with singular value = scale") {
  auto [w1, w2] = balanced_init(3, 4, 0.1, 21);
  // SVD oracle: eigenvalues of W1 W1^T are the squared singular values.
  Tensor gram({3, 3});
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) gram.at(i, j) = dot(w1.row(i), w1.row(j));
  }
  std::vector<double> eig = oracle::symmetric_eigenvalues(gram);
  CHECK(std::abs(eig[2] - 0.01) <= 1e-14);  // 0.1^2
  CHECK(std::abs(eig[0]) <= 1e-14);
  CHECK(std::abs(eig[1]) <= 1e-14);
}

TEST_CASE("balanced scheme is rejected for MLPs") {
  InitSpec init;
  init.scheme = InitScheme::kBalancedLinear;
  CHECK_THROWS_AS(build_mlp({2, 3, 2}, Activation::kRelu, init), std::invalid_argument);
}

TEST_CASE("mlp parameter count") {
  InitSpec init;
  Model m = build_mlp({2, 4, 2}, Activation::kRelu, init);
  CHECK(m.parameter_count() == 2 * 4 + 4 + 4 * 2 + 2);
  CHECK_THROWS_AS(build_mlp({5}, Activation::kRelu, init), std::invalid_argument);
}

TEST_CASE("identity-weight square mlp forwards its input") {
  InitSpec init;
  Model m = build_mlp({3, 3, 3}, Activation::kIdentity, init);
  for (auto& layer : m.layers) {
    for (std::size_t i = 0; i < layer.weight.numel(); ++i) layer.weight[i] = 0.0;
    for (std::size_t i = 0; i < 3; ++i) layer.weight.at(i, i) = 1.0;
  }
  Tensor y = forward(m, Tensor::from_rows({{1.5, -2.0, 0.25}}));
  CHECK(y[0] == 1.5);
  CHECK(y[1] == -2.0);
  CHECK(y[2] == 0.25);
}

TEST_CASE("seed-fixed init reproduces its flatten norm") {
  InitSpec init;
  init.seed = 909;
  Model a = build_mlp({6, 8, 2}, Activation::kTanh, init);
  Model b = build_mlp({6, 8, 2}, Activation::kTanh, init);
  CHECK(flatten(a) == flatten(b));
  CHECK(l2_norm(flatten(a)) == l2_norm(flatten(b)));
}

TEST_CASE("flatten ordering and round trip") {
  Model m;
  m.input_dim = 2;
  m.layers.push_back({"a", Tensor::from_rows({{1, 2}}), std::nullopt,
                      Activation::kIdentity, std::nullopt});
  m.layers.push_back({"b", Tensor::from_rows({{3}}), std::nullopt, Activation::kIdentity,
                      std::nullopt});
  std::vector<double> theta = flatten(m);
  CHECK(theta == std::vector<double>{1, 2, 3});

  RandomStream rng(4);
  std::vector<double> fresh(theta.size());
  for (auto& x : fresh) x = rng.gaussian();
  unflatten(fresh, m);
  CHECK(flatten(m) == fresh);
  CHECK_THROWS_AS(unflatten(std::vector<double>{1.0}, m), std::invalid_argument);

  double per_tensor = 0.0;
  for (const Tensor* p : m.parameters()) per_tensor += squared_l2_norm(p->flat());
  CHECK(l2_norm(flatten(m)) == doctest::Approx(std::sqrt(per_tensor)).epsilon(1e-15));
}

TEST_CASE("masked entries do not affect the forward pass") {
  InitSpec init;
  init.seed = 31;
  Model m = build_mlp({4, 5, 1}, Activation::kTanh, init);
  Tensor mask(m.layers[0].weight.shape());
  for (std::size_t i = 0; i < mask.numel(); ++i) mask[i] = (i % 3 == 0) ? 0.0 : 1.0;
  m.layers[0].weight_mask = mask;
  apply_masks(m);

  Tensor x({2, 4});
  RandomStream rng(5);
  for (std::size_t i = 0; i < x.numel(); ++i) x[i] = rng.gaussian();
  Tensor before = forward(m, x);

  // Perturb the stored values at masked positions, then restore the mask
  // contract; the output must not move.
  for (std::size_t i = 0; i < mask.numel(); ++i) {
    if (mask[i] == 0.0) m.layers[0].weight[i] = rng.gaussian();
  }
  apply_masks(m);
  Tensor after = forward(m, x);
  for (std::size_t i = 0; i < before.numel(); ++i) CHECK(before[i] == after[i]);
}

TEST_CASE("checkpoint round trip is bit exact") {
  InitSpec init;
  init.seed = 8;
  Model m = build_mlp({3, 4, 2}, Activation::kRelu, init);
  Tensor mask(m.layers[1].weight.shape());
  for (std::size_t i = 0; i < mask.numel(); ++i) mask[i] = (i % 2) ? 1.0 : 0.0;
  m.layers[1].weight_mask = mask;
  apply_masks(m);

  auto dir = std::filesystem::temp_directory_path() / "dplab_ckpt_test";
  std::filesystem::create_directories(dir);
  std::string path = (dir / "model.ckpt").string();
  save_checkpoint(m, path);
  Model loaded = load_checkpoint(path);

  CHECK(loaded.input_dim == m.input_dim);
  CHECK(flatten(loaded) == flatten(m));
  REQUIRE(loaded.layers[1].weight_mask.has_value());
  for (std::size_t i = 0; i < mask.numel(); ++i) {
    CHECK((*loaded.layers[1].weight_mask)[i] == mask[i]);
  }
  CHECK(loaded.layers[0].activation == Activation::kRelu);
  CHECK(loaded.layers[0].bias.has_value());

  std::string path2 = (dir / "model2.ckpt").string();
  save_checkpoint(loaded, path2);
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(b1 == b2);

  std::remove(path.c_str());
  std::remove(path2.c_str());
}

TEST_CASE("checkpoint loader rejects bad input") {
  auto dir = std::filesystem::temp_directory_path() / "dplab_ckpt_test";
  std::filesystem::create_directories(dir);
  std::string path = (dir / "bad.ckpt").string();
  {
    std::ofstream f(path, std::ios::binary);
    f << "NOTMAGIC";
  }
  CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);
  CHECK_THROWS_AS(load_checkpoint((dir / "missing.ckpt").string()), std::runtime_error);
  std::remove(path.c_str());
}
