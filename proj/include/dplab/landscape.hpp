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

#ifndef DPLAB_LANDSCAPE_HPP_
#define DPLAB_LANDSCAPE_HPP_

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dplab/model.hpp"

namespace dplab {

/// Linear interpolation that is exact at the endpoints, returns `a` bit for
/// bit when a == b, and is symmetric under (a, b, t) -> (b, a, 1-t).
double lerp_sym(double a, double b, double t);

/// Parameter-wise convex combination (1-alpha) * theta0 + alpha * theta1.
/// Architectures must match; alpha must be in [0, 1]. Masks are carried over
/// when both endpoints agree on them.
Model interpolate_models(const Model& theta0, const Model& theta1, double alpha);

using LossFn = std::function<double(const Model&)>;
struct LossAcc {
  double loss = 0.0;
  double accuracy = 0.0;
};
using EvalFn = std::function<LossAcc(const Model&)>;

/// Uniform alpha grid with `points` values including 0 and 1.
std::vector<double> uniform_grid(std::size_t points);

/// Loss/accuracy along the segment between two models, evaluated at each
/// grid alpha (grid order; evaluation is parallel across alphas). The
/// instability is max-over-grid loss minus the mean endpoint loss and may be
/// negative when the segment dips.
struct InterpolationProfile {
  std::vector<double> alphas;
  std::vector<double> losses;
  std::vector<double> accuracies;
  double instability = 0.0;
};

InterpolationProfile interpolation_profile(const Model& theta0, const Model& theta1,
                                           const EvalFn& eval,
                                           std::span<const double> alphas);

/// Grid must contain both endpoints and at least 3 points.
double instability(const Model& theta0, const Model& theta1, const LossFn& loss,
                   std::span<const double> alphas);

/// n independent standard Gaussian directions normalized to unit norm,
/// one row per direction.
std::vector<std::vector<double>> random_unit_directions(std::size_t n_dirs,
                                                        std::size_t dim,
                                                        std::uint64_t seed);

/// Largest |cosine| over all direction pairs. OpenMP kernel; the serial
/// reference is kept for testing.
double max_pairwise_abs_cosine(const std::vector<std::vector<double>>& dirs);
double max_pairwise_abs_cosine_serial(const std::vector<std::vector<double>>& dirs);

/// Loss curves along `distance * direction` from theta0 for n_dirs random
/// unit directions, all sharing the alpha grid, plus the pairwise cosine
/// diagnostic.
struct ProbeResult {
  std::vector<double> alphas;
  std::vector<std::vector<double>> losses;  // [direction][alpha]
  double max_abs_cosine = 0.0;
};
ProbeResult random_direction_probe(const Model& theta0, double distance,
                                   std::size_t n_dirs, const LossFn& loss,
                                   std::span<const double> alphas, std::uint64_t seed);

/// L2 distance of the parameter vector from the origin plus fixed-bin
/// per-layer weight histograms (bins span [-limit, limit] where limit is the
/// largest |w| in the layer).
struct LayerHistogram {
  std::string layer;
  double lo = 0.0, hi = 0.0;
  std::vector<std::size_t> counts;
};
struct ParamStats {
  double l2_from_origin = 0.0;
  std::vector<LayerHistogram> histograms;
};
ParamStats param_stats(const Model& model, std::size_t bins = 64);

/// Profile CSV: metadata header line naming the endpoints and grid size,
/// then alpha,loss,accuracy rows.
std::string profile_csv(const InterpolationProfile& profile, const std::string& endpoint0,
                        const std::string& endpoint1);

}  // namespace dplab

#endif  // DPLAB_LANDSCAPE_HPP_
