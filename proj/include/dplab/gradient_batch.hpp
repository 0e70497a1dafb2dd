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

#ifndef DPLAB_GRADIENT_BATCH_HPP_
#define DPLAB_GRADIENT_BATCH_HPP_

#include <span>
#include <stdexcept>
#include <vector>

#include "dplab/tensor.hpp"

namespace dplab {

/// Per-example gradient vectors for one minibatch: n rows of dimension d,
/// plus the derived aggregates the clipping analysis needs.
class GradientBatch {
 public:
  GradientBatch(std::size_t n, std::size_t d)
      : n_(n), d_(d), rows_(n * d, 0.0) {
    if (n == 0) throw std::invalid_argument("GradientBatch: batch must be nonempty");
    if (d == 0) throw std::invalid_argument("GradientBatch: dimension must be positive");
  }

  static GradientBatch from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) throw std::invalid_argument("GradientBatch: batch must be nonempty");
    GradientBatch b(rows.size(), rows[0].size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != b.d_) {
        throw std::invalid_argument("GradientBatch: rows have mixed dimensions");
      }
      std::copy(rows[i].begin(), rows[i].end(), b.row(i).begin());
    }
    return b;
  }

  std::size_t size() const { return n_; }
  std::size_t dim() const { return d_; }

  std::span<double> row(std::size_t i) { return {rows_.data() + i * d_, d_}; }
  std::span<const double> row(std::size_t i) const { return {rows_.data() + i * d_, d_}; }

  /// Mean over rows, accumulated in index order.
  std::vector<double> mean() const {
    std::vector<double> m(d_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
      auto r = row(i);
      for (std::size_t j = 0; j < d_; ++j) m[j] += r[j];
    }
    for (double& x : m) x /= static_cast<double>(n_);
    return m;
  }

  std::vector<double> row_norms() const {
    std::vector<double> norms(n_);
    for (std::size_t i = 0; i < n_; ++i) norms[i] = l2_norm(row(i));
    return norms;
  }

 private:
  std::size_t n_, d_;
  std::vector<double> rows_;
};

}  // namespace dplab

#endif  // DPLAB_GRADIENT_BATCH_HPP_
