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

#ifndef DPLAB_DATA_HPP_
#define DPLAB_DATA_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "dplab/tensor.hpp"

namespace dplab {

/// Signal/noise synthetic task: the first d_s input coordinates carry the
/// +-1 label through the vector v plus Gaussian noise, the remaining d_n
/// coordinates are pure Gaussian noise.
struct SyntheticSpec {
  std::vector<double> v;  // signal vector, length d_s
  double sigma = 0.5;     // noise scale, >= 0
  std::size_t d_n = 0;
  std::size_t n = 0;  // sample count
  std::uint64_t seed = 0;

  std::size_t d_s() const { return v.size(); }
  std::size_t dim() const { return v.size() + d_n; }
  void validate() const;

  /// The desk-scale defaults: d_s=10, d_n=90, sigma=0.5, ||v||=1 (random
  /// unit direction from the seed), n=4096.
  static SyntheticSpec defaults(std::uint64_t seed);
};

/// Random unit vector of the given length; used for the default signal v.
std::vector<double> random_unit_vector(std::size_t dim, std::uint64_t seed);

enum class LabelKind { kRegression, kClass };

struct Dataset {
  Tensor inputs;                 // (n, d)
  std::vector<double> targets;   // regression targets (+-1), kRegression
  std::vector<int> labels;       // class indices, kClass
  LabelKind kind = LabelKind::kRegression;

  std::size_t size() const { return inputs.rank() == 0 ? 0 : inputs.rows(); }
  std::size_t dim() const { return inputs.cols(); }
};

/// Draws n examples: y uniform on {-1,+1}, x_s ~ N(y v, sigma^2 I),
/// x_n ~ N(0, sigma^2 I). Per example the draw order is label, the d_s
/// signal coordinates, then the d_n noise coordinates.
Dataset sample_synthetic(const SyntheticSpec& spec);

struct PopulationMoments {
  Tensor second_moment;    // Sigma = E[x x^T], (d, d)
  std::vector<double> cross;  // c = E[y x], length d
};

/// Exact population moments: Sigma = blockdiag(v v^T + sigma^2 I, sigma^2 I)
/// and c = (v, 0).
PopulationMoments population_second_moments(const SyntheticSpec& spec);

/// Gaussian blobs around k random class centers; toy classification data for
/// the landscape experiments.
Dataset make_blobs(std::size_t classes, std::size_t per_class, std::size_t dim,
                   double center_scale, double spread, std::uint64_t seed);

/// IDX-format loaders (big-endian magic + dims + raw bytes). Pixels are
/// scaled to [0,1], images flattened row-major. Bad magic, truncation and
/// dimension overflow each produce a distinct diagnostic.
Tensor load_idx_images(const std::string& path);
std::vector<int> load_idx_labels(const std::string& path);
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

/// Fixture/round-trip writers, bit-exact IDX layout.
void write_idx_images(const std::string& path, std::size_t count, std::size_t rows,
                      std::size_t cols, const std::vector<std::uint8_t>& pixels);
void write_idx_labels(const std::string& path, const std::vector<std::uint8_t>& labels);

/// floor(fraction * n) examples chosen without replacement, deterministic
/// per seed. Rejects an empty result.
Dataset subsample(const Dataset& dataset, double fraction, std::uint64_t seed);

/// Deterministic shuffle-split into (train, test); both parts nonempty.
std::pair<Dataset, Dataset> split_dataset(const Dataset& dataset, double test_fraction,
                                          std::uint64_t seed);

/// CSV export with header row y,x_0,...,x_{d-1}.
void write_dataset_csv(const Dataset& dataset, const std::string& path);

}  // namespace dplab

#endif  // DPLAB_DATA_HPP_
