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

#include "dplab/tensor.hpp"

using namespace dplab;

TEST_CASE("tensor shape and storage agree") {
  Tensor t({2, 3});
  CHECK(t.numel() == 6);
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  t.at(1, 2) = 5.0;
  CHECK(t[5] == 5.0);
}

TEST_CASE("tensor rejects inconsistent construction") {
  CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0}), std::invalid_argument);
  CHECK_THROWS_AS(Tensor({0, 3}), std::invalid_argument);
  CHECK_THROWS_AS(Tensor::from_rows({{1.0, 2.0}, {3.0}}), std::invalid_argument);
}

TEST_CASE("from_rows is row major") {
  Tensor t = Tensor::from_rows({{1, 2}, {3, 4}});
  CHECK(t.at(0, 1) == 2.0);
  CHECK(t.at(1, 0) == 3.0);
}

TEST_CASE("norm helpers") {
  std::vector<double> v{3.0, 4.0};
  CHECK(l2_norm(v) == doctest::Approx(5.0));
  CHECK(squared_l2_norm(v) == doctest::Approx(25.0));
  CHECK(dot(v, v) == doctest::Approx(25.0));
  Tensor a = Tensor::from_rows({{1, 0}, {0, 1}});
  Tensor b = Tensor::from_rows({{0, 0}, {0, 0}});
  CHECK(frobenius_distance(a, b) == doctest::Approx(std::sqrt(2.0)));
  CHECK_THROWS_AS(frobenius_distance(a, Tensor({1, 2})), std::invalid_argument);
}
