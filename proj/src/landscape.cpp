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

#include "dplab/landscape.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "dplab/random.hpp"

namespace dplab {

double lerp_sym(double a, double b, double t) {
  if (a == b) return a;
  if (t == 0.0) return a;
  if (t == 1.0) return b;
  return (1.0 - t) * a + t * b;
}

namespace {

void require_same_architecture(const Model& a, const Model& b) {
  bool ok = a.input_dim == b.input_dim && a.layers.size() == b.layers.size();
  for (std::size_t i = 0; ok && i < a.layers.size(); ++i) {
    ok = a.layers[i].weight.same_shape(b.layers[i].weight) &&
         a.layers[i].bias.has_value() == b.layers[i].bias.has_value() &&
         a.layers[i].activation == b.layers[i].activation;
  }
  if (!ok) throw std::invalid_argument("interpolate_models: architecture mismatch");
}

}  // namespace

Model interpolate_models(const Model& theta0, const Model& theta1, double alpha) {
  require_same_architecture(theta0, theta1);
  if (alpha < 0.0 || alpha > 1.0) {
    throw std::invalid_argument("interpolate_models: alpha must be in [0, 1]");
  }
  Model out = theta0;
  std::vector<const Tensor*> p1 = theta1.parameters();
  std::vector<Tensor*> po = out.parameters();
  for (std::size_t t = 0; t < po.size(); ++t) {
    for (std::size_t i = 0; i < po[t]->numel(); ++i) {
      (*po[t])[i] = lerp_sym((*po[t])[i], (*p1[t])[i], alpha);
    }
  }
  return out;
}

std::vector<double> uniform_grid(std::size_t points) {
  if (points < 2) throw std::invalid_argument("uniform_grid: need at least 2 points");
  std::vector<double> g(points);
  for (std::size_t i = 0; i < points; ++i) {
    g[i] = static_cast<double>(i) / static_cast<double>(points - 1);
  }
  g.front() = 0.0;
  g.back() = 1.0;
  return g;
}

InterpolationProfile interpolation_profile(const Model& theta0, const Model& theta1,
                                           const EvalFn& eval,
                                           std::span<const double> alphas) {
  if (alphas.size() < 2) throw std::invalid_argument("interpolation_profile: grid too small");
  InterpolationProfile prof;
  prof.alphas.assign(alphas.begin(), alphas.end());
  prof.losses.assign(alphas.size(), 0.0);
  prof.accuracies.assign(alphas.size(), 0.0);

  const std::int64_t k = static_cast<std::int64_t>(alphas.size());
  std::exception_ptr err = nullptr;  // user eval may throw; keep it out of the omp region
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < k; ++i) {
    try {
      Model m = interpolate_models(theta0, theta1, alphas[static_cast<std::size_t>(i)]);
      LossAcc la = eval(m);
      prof.losses[static_cast<std::size_t>(i)] = la.loss;
      prof.accuracies[static_cast<std::size_t>(i)] = la.accuracy;
    } catch (...) {
#pragma omp critical
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);

  auto it0 = std::find(prof.alphas.begin(), prof.alphas.end(), 0.0);
  auto it1 = std::find(prof.alphas.begin(), prof.alphas.end(), 1.0);
  if (it0 == prof.alphas.end() || it1 == prof.alphas.end()) {
    throw std::invalid_argument("interpolation_profile: grid must include 0 and 1");
  }
  double l0 = prof.losses[static_cast<std::size_t>(it0 - prof.alphas.begin())];
  double l1 = prof.losses[static_cast<std::size_t>(it1 - prof.alphas.begin())];
  double sup = *std::max_element(prof.losses.begin(), prof.losses.end());
  prof.instability = sup - 0.5 * (l0 + l1);
  return prof;
}

double instability(const Model& theta0, const Model& theta1, const LossFn& loss,
                   std::span<const double> alphas) {
  if (alphas.size() < 3) throw std::invalid_argument("instability: grid needs >= 3 points");
  EvalFn eval = [&loss](const Model& m) { return LossAcc{loss(m), 0.0}; };
  return interpolation_profile(theta0, theta1, eval, alphas).instability;
}

std::vector<std::vector<double>> random_unit_directions(std::size_t n_dirs,
                                                        std::size_t dim,
                                                        std::uint64_t seed) {
  if (n_dirs < 1 || dim < 1) {
    throw std::invalid_argument("random_unit_directions: need n_dirs >= 1 and dim >= 1");
  }
  std::vector<std::vector<double>> dirs(n_dirs, std::vector<double>(dim));
  // One derived stream per direction so generation parallelizes without
  // changing the result.
  const std::int64_t n = static_cast<std::int64_t>(n_dirs);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    RandomStream rng(RandomStream::derive(seed, static_cast<std::uint64_t>(i)));
    auto& d = dirs[static_cast<std::size_t>(i)];
    double norm = 0.0;
    do {
      for (auto& x : d) x = rng.gaussian();
      norm = l2_norm(d);
    } while (norm == 0.0);
    for (auto& x : d) x /= norm;
  }
  return dirs;
}

double max_pairwise_abs_cosine_serial(const std::vector<std::vector<double>>& dirs) {
  double best = 0.0;
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    for (std::size_t j = i + 1; j < dirs.size(); ++j) {
      double c = std::abs(dot(dirs[i], dirs[j]) / (l2_norm(dirs[i]) * l2_norm(dirs[j])));
      best = std::max(best, c);
    }
  }
  return best;
}

double max_pairwise_abs_cosine(const std::vector<std::vector<double>>& dirs) {
  const std::int64_t n = static_cast<std::int64_t>(dirs.size());
  std::vector<double> norms(dirs.size());
  for (std::size_t i = 0; i < dirs.size(); ++i) norms[i] = l2_norm(dirs[i]);
  double best = 0.0;
#pragma omp parallel for schedule(dynamic) reduction(max : best)
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = i + 1; j < n; ++j) {
      double c = std::abs(dot(dirs[static_cast<std::size_t>(i)],
                              dirs[static_cast<std::size_t>(j)]) /
                          (norms[static_cast<std::size_t>(i)] *
                           norms[static_cast<std::size_t>(j)]));
      best = std::max(best, c);
    }
  }
  return best;
}

ProbeResult random_direction_probe(const Model& theta0, double distance,
                                   std::size_t n_dirs, const LossFn& loss,
                                   std::span<const double> alphas, std::uint64_t seed) {
  if (!(distance > 0.0)) throw std::invalid_argument("random_direction_probe: distance > 0");
  std::vector<double> theta = flatten(theta0);
  auto dirs = random_unit_directions(n_dirs, theta.size(), seed);

  ProbeResult result;
  result.alphas.assign(alphas.begin(), alphas.end());
  result.losses.assign(n_dirs, std::vector<double>(alphas.size(), 0.0));
  result.max_abs_cosine = n_dirs > 1 ? max_pairwise_abs_cosine(dirs) : 0.0;

  const std::int64_t n = static_cast<std::int64_t>(n_dirs);
  std::exception_ptr err = nullptr;
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      Model probe = theta0;
      std::vector<double> moved(theta.size());
      const auto& dir = dirs[static_cast<std::size_t>(i)];
      for (std::size_t a = 0; a < result.alphas.size(); ++a) {
        double step = result.alphas[a] * distance;
        for (std::size_t j = 0; j < theta.size(); ++j) moved[j] = theta[j] + step * dir[j];
        unflatten(moved, probe);
        result.losses[static_cast<std::size_t>(i)][a] = loss(probe);
      }
    } catch (...) {
#pragma omp critical
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
  return result;
}

ParamStats param_stats(const Model& model, std::size_t bins) {
  if (bins == 0) throw std::invalid_argument("param_stats: bins must be >= 1");
  ParamStats stats;
  stats.l2_from_origin = l2_norm(flatten(model));
  for (const auto& layer : model.layers) {
    LayerHistogram h;
    h.layer = layer.name;
    double limit = 0.0;
    for (double w : layer.weight.flat()) limit = std::max(limit, std::abs(w));
    if (limit == 0.0) limit = 1.0;
    h.lo = -limit;
    h.hi = limit;
    h.counts.assign(bins, 0);
    for (double w : layer.weight.flat()) {
      double u = (w - h.lo) / (h.hi - h.lo);
      std::size_t b = std::min(bins - 1, static_cast<std::size_t>(u * static_cast<double>(bins)));
      ++h.counts[b];
    }
    stats.histograms.push_back(std::move(h));
  }
  return stats;
}

std::string profile_csv(const InterpolationProfile& profile, const std::string& endpoint0,
                        const std::string& endpoint1) {
  std::string out = "# endpoints=" + endpoint0 + "," + endpoint1 +
                    " grid=" + std::to_string(profile.alphas.size()) + "\n";
  out += "alpha,loss,accuracy\n";
  char buf[128];
  for (std::size_t i = 0; i < profile.alphas.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", profile.alphas[i],
                  profile.losses[i], profile.accuracies[i]);
    out += buf;
  }
  return out;
}

}  // namespace dplab
