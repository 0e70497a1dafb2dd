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

#include "dplab/data.hpp"

#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "dplab/random.hpp"

namespace dplab {

void SyntheticSpec::validate() const {
  if (v.empty() && d_n == 0) throw std::invalid_argument("SyntheticSpec: d_s + d_n must be >= 1");
  if (sigma < 0.0) throw std::invalid_argument("SyntheticSpec: sigma must be >= 0");
  if (n == 0) throw std::invalid_argument("SyntheticSpec: n must be >= 1");
}

std::vector<double> random_unit_vector(std::size_t dim, std::uint64_t seed) {
  RandomStream rng(seed);
  std::vector<double> v(dim);
  double norm = 0.0;
  do {
    for (auto& x : v) x = rng.gaussian();
    norm = l2_norm(v);
  } while (norm == 0.0);
  for (auto& x : v) x /= norm;
  return v;
}

SyntheticSpec SyntheticSpec::defaults(std::uint64_t seed) {
  SyntheticSpec spec;
  spec.v = random_unit_vector(10, RandomStream::derive(seed, 0x5157));
  spec.sigma = 0.5;
  spec.d_n = 90;
  spec.n = 4096;
  spec.seed = seed;
  return spec;
}

Dataset sample_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  std::size_t d_s = spec.d_s(), d = spec.dim();
  Dataset ds;
  ds.kind = LabelKind::kRegression;
  ds.inputs = Tensor({spec.n, d});
  ds.targets.resize(spec.n);
  RandomStream rng(spec.seed);
  for (std::size_t i = 0; i < spec.n; ++i) {
    double y = rng.rademacher();
    ds.targets[i] = y;
    double* row = ds.inputs.data() + i * d;
    for (std::size_t j = 0; j < d_s; ++j) {
      row[j] = y * spec.v[j] + spec.sigma * rng.gaussian();
    }
    for (std::size_t j = d_s; j < d; ++j) {
      row[j] = spec.sigma * rng.gaussian();
    }
  }
  return ds;
}

PopulationMoments population_second_moments(const SyntheticSpec& spec) {
  std::size_t d_s = spec.d_s(), d = spec.dim();
  PopulationMoments pm;
  pm.second_moment = Tensor({d, d});
  pm.cross.assign(d, 0.0);
  double s2 = spec.sigma * spec.sigma;
  for (std::size_t i = 0; i < d_s; ++i) {
    for (std::size_t j = 0; j < d_s; ++j) {
      pm.second_moment.at(i, j) = spec.v[i] * spec.v[j];
    }
    pm.second_moment.at(i, i) += s2;
    pm.cross[i] = spec.v[i];
  }
  for (std::size_t i = d_s; i < d; ++i) pm.second_moment.at(i, i) = s2;
  return pm;
}

Dataset make_blobs(std::size_t classes, std::size_t per_class, std::size_t dim,
                   double center_scale, double spread, std::uint64_t seed) {
  if (classes < 2) throw std::invalid_argument("make_blobs: need >= 2 classes");
  if (per_class == 0 || dim == 0) throw std::invalid_argument("make_blobs: empty dataset");
  RandomStream rng(seed);
  std::vector<std::vector<double>> centers(classes, std::vector<double>(dim));
  for (auto& c : centers) {
    for (auto& x : c) x = center_scale * rng.gaussian();
  }
  Dataset ds;
  ds.kind = LabelKind::kClass;
  ds.inputs = Tensor({classes * per_class, dim});
  ds.labels.resize(classes * per_class);
  std::size_t row = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t i = 0; i < per_class; ++i, ++row) {
      ds.labels[row] = static_cast<int>(c);
      double* p = ds.inputs.data() + row * dim;
      for (std::size_t j = 0; j < dim; ++j) p[j] = centers[c][j] + spread * rng.gaussian();
    }
  }
  return ds;
}

// ---------------------------------------------------------------------------
// IDX format
// ---------------------------------------------------------------------------

namespace {

constexpr std::uint32_t kIdxLabelMagic = 0x00000801;
constexpr std::uint32_t kIdxImageMagic = 0x00000803;

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("idx: cannot open " + path);
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

std::uint32_t read_be32(const std::string& bytes, std::size_t off, const std::string& path) {
  if (off + 4 > bytes.size()) throw std::runtime_error("idx: truncated header in " + path);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v = (v << 8) | static_cast<std::uint8_t>(bytes[off + i]);
  return v;
}

void write_be32(std::ofstream& f, std::uint32_t v) {
  char buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<char>((v >> (8 * (3 - i))) & 0xFF);
  f.write(buf, 4);
}

}  // namespace

Tensor load_idx_images(const std::string& path) {
  std::string bytes = read_file(path);
  std::uint32_t magic = read_be32(bytes, 0, path);
  if (magic != kIdxImageMagic) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "0x%08X", magic);
    throw std::runtime_error("idx: bad image magic " + std::string(buf) + " in " + path);
  }
  std::uint64_t count = read_be32(bytes, 4, path);
  std::uint64_t rows = read_be32(bytes, 8, path);
  std::uint64_t cols = read_be32(bytes, 12, path);
  if (rows == 0 || cols == 0 || count == 0 || rows > 65536 || cols > 65536 ||
      count > (std::uint64_t(1) << 32) / (rows * cols + 1)) {
    throw std::runtime_error("idx: dimension overflow in " + path);
  }
  std::uint64_t need = 16 + count * rows * cols;
  if (bytes.size() < need) throw std::runtime_error("idx: truncated image data in " + path);
  Tensor out({static_cast<std::size_t>(count), static_cast<std::size_t>(rows * cols)});
  for (std::size_t i = 0; i < out.numel(); ++i) {
    out[i] = static_cast<std::uint8_t>(bytes[16 + i]) / 255.0;
  }
  return out;
}

std::vector<int> load_idx_labels(const std::string& path) {
  std::string bytes = read_file(path);
  std::uint32_t magic = read_be32(bytes, 0, path);
  if (magic != kIdxLabelMagic) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "0x%08X", magic);
    throw std::runtime_error("idx: bad label magic " + std::string(buf) + " in " + path);
  }
  std::uint64_t count = read_be32(bytes, 4, path);
  if (bytes.size() < 8 + count) throw std::runtime_error("idx: truncated label data in " + path);
  std::vector<int> labels(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    labels[i] = static_cast<std::uint8_t>(bytes[8 + i]);
  }
  return labels;
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  Dataset ds;
  ds.kind = LabelKind::kClass;
  ds.inputs = load_idx_images(images_path);
  ds.labels = load_idx_labels(labels_path);
  if (ds.labels.size() != ds.inputs.rows()) {
    throw std::runtime_error("idx: image count " + std::to_string(ds.inputs.rows()) +
                             " does not match label count " + std::to_string(ds.labels.size()));
  }
  return ds;
}

void write_idx_images(const std::string& path, std::size_t count, std::size_t rows,
                      std::size_t cols, const std::vector<std::uint8_t>& pixels) {
  if (pixels.size() != count * rows * cols) {
    throw std::invalid_argument("write_idx_images: pixel count mismatch");
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("idx: cannot open " + path + " for writing");
  write_be32(f, kIdxImageMagic);
  write_be32(f, static_cast<std::uint32_t>(count));
  write_be32(f, static_cast<std::uint32_t>(rows));
  write_be32(f, static_cast<std::uint32_t>(cols));
  f.write(reinterpret_cast<const char*>(pixels.data()),
          static_cast<std::streamsize>(pixels.size()));
}

void write_idx_labels(const std::string& path, const std::vector<std::uint8_t>& labels) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("idx: cannot open " + path + " for writing");
  write_be32(f, kIdxLabelMagic);
  write_be32(f, static_cast<std::uint32_t>(labels.size()));
  f.write(reinterpret_cast<const char*>(labels.data()),
          static_cast<std::streamsize>(labels.size()));
}

Dataset subsample(const Dataset& dataset, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0) || fraction > 1.0) {
    throw std::invalid_argument("subsample: fraction must be in (0, 1]");
  }
  std::size_t n = dataset.size();
  std::size_t k = static_cast<std::size_t>(fraction * static_cast<double>(n));
  if (k == 0) throw std::invalid_argument("subsample: empty result");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  RandomStream rng(seed);
  shuffle_indices(idx, rng);
  idx.resize(k);

  Dataset out;
  out.kind = dataset.kind;
  out.inputs = Tensor({k, dataset.dim()});
  if (dataset.kind == LabelKind::kRegression) out.targets.resize(k);
  if (dataset.kind == LabelKind::kClass) out.labels.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    auto src = dataset.inputs.row(idx[i]);
    std::copy(src.begin(), src.end(), out.inputs.row(i).begin());
    if (dataset.kind == LabelKind::kRegression) out.targets[i] = dataset.targets[idx[i]];
    if (dataset.kind == LabelKind::kClass) out.labels[i] = dataset.labels[idx[i]];
  }
  return out;
}

namespace {

Dataset take_rows(const Dataset& dataset, std::span<const std::size_t> idx) {
  Dataset out;
  out.kind = dataset.kind;
  out.inputs = Tensor({idx.size(), dataset.dim()});
  if (dataset.kind == LabelKind::kRegression) out.targets.resize(idx.size());
  if (dataset.kind == LabelKind::kClass) out.labels.resize(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    auto src = dataset.inputs.row(idx[i]);
    std::copy(src.begin(), src.end(), out.inputs.row(i).begin());
    if (dataset.kind == LabelKind::kRegression) out.targets[i] = dataset.targets[idx[i]];
    if (dataset.kind == LabelKind::kClass) out.labels[i] = dataset.labels[idx[i]];
  }
  return out;
}

}  // namespace

std::pair<Dataset, Dataset> split_dataset(const Dataset& dataset, double test_fraction,
                                          std::uint64_t seed) {
  if (!(test_fraction > 0.0) || !(test_fraction < 1.0)) {
    throw std::invalid_argument("split_dataset: test_fraction must be in (0, 1)");
  }
  std::size_t n = dataset.size();
  std::size_t n_test = static_cast<std::size_t>(test_fraction * static_cast<double>(n));
  if (n_test == 0 || n_test == n) {
    throw std::invalid_argument("split_dataset: both parts must be nonempty");
  }
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  RandomStream rng(seed);
  shuffle_indices(idx, rng);
  return {take_rows(dataset, std::span<const std::size_t>(idx).subspan(n_test)),
          take_rows(dataset, std::span<const std::size_t>(idx).first(n_test))};
}

void write_dataset_csv(const Dataset& dataset, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("csv: cannot open " + path + " for writing");
  f << "y";
  for (std::size_t j = 0; j < dataset.dim(); ++j) f << ",x_" << j;
  f << "\n";
  char buf[32];
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (dataset.kind == LabelKind::kRegression) {
      std::snprintf(buf, sizeof(buf), "%.17g", dataset.targets[i]);
      f << buf;
    } else {
      f << dataset.labels[i];
    }
    for (double x : dataset.inputs.row(i)) {
      std::snprintf(buf, sizeof(buf), "%.17g", x);
      f << ',' << buf;
    }
    f << "\n";
  }
}

}  // namespace dplab
