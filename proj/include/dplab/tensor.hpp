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

#ifndef DPLAB_TENSOR_HPP_
#define DPLAB_TENSOR_HPP_

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dplab {

/// Dense row-major tensor of 64-bit floats. Carrier for parameters,
/// activations and gradients; rank 1 and 2 cover everything this library
/// needs.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> shape)
      : shape_(std::move(shape)), data_(checked_numel(shape_), 0.0) {}

  Tensor(std::vector<std::size_t> shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (checked_numel(shape_) != data_.size()) {
      throw std::invalid_argument("Tensor: shape/data size mismatch");
    }
  }

  static Tensor zeros(std::size_t rows, std::size_t cols) {
    return Tensor({rows, cols});
  }
  static Tensor vector_of(std::vector<double> values) {
    std::size_t n = values.size();
    return Tensor({n}, std::move(values));
  }
  static Tensor scalar(double value) { return Tensor({1}, {value}); }

  /// Row-major 2-D constructor from nested braces, for tests and fixtures.
  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    std::size_t r = rows.size();
    std::size_t c = r == 0 ? 0 : rows.begin()->size();
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
      if (row.size() != c) throw std::invalid_argument("Tensor: ragged rows");
      data.insert(data.end(), row.begin(), row.end());
    }
    return Tensor({r, c}, std::move(data));
  }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t numel() const { return data_.size(); }

  std::size_t rows() const { return dim(0); }
  std::size_t cols() const { return rank() >= 2 ? dim(1) : 1; }
  std::size_t dim(std::size_t i) const {
    if (i >= shape_.size()) throw std::out_of_range("Tensor::dim");
    return shape_[i];
  }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  std::span<double> flat() { return data_; }
  std::span<const double> flat() const { return data_; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(data_.data() + r * cols(), cols());
  }
  std::span<double> row(std::size_t r) {
    return std::span<double>(data_.data() + r * cols(), cols());
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  std::string shape_string() const {
    std::string s = "(";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(shape_[i]);
    }
    return s + ")";
  }

 private:
  static std::size_t checked_numel(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) {
      if (e == 0) throw std::invalid_argument("Tensor: zero extent");
      if (n > static_cast<std::size_t>(-1) / e) {
        throw std::invalid_argument("Tensor: extent overflow");
      }
      n *= e;
    }
    return shape.empty() ? 0 : n;
  }

  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

double l2_norm(std::span<const double> v);
double squared_l2_norm(std::span<const double> v);
double dot(std::span<const double> a, std::span<const double> b);
/// Frobenius norm of the elementwise difference; shapes must match.
double frobenius_distance(const Tensor& a, const Tensor& b);

}  // namespace dplab

#endif  // DPLAB_TENSOR_HPP_
