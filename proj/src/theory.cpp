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

#include "dplab/theory.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "dplab/dp_optimizer.hpp"
#include "dplab/grad_eval.hpp"

namespace dplab {

double ratio_R(const GradientBatch& batch) {
  std::vector<double> mean = batch.mean();
  double denom = squared_l2_norm(mean);
  if (denom == 0.0) {
    throw std::invalid_argument("ratio_R: mean gradient is zero, R is undefined");
  }
  double num = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    auto row = batch.row(i);
    for (std::size_t j = 0; j < batch.dim(); ++j) {
      double d = row[j] - mean[j];
      num += d * d;
    }
  }
  return num / static_cast<double>(batch.size()) / denom;
}

std::vector<double> clipped_gradient_true(const GradientBatch& batch, double clip_norm) {
  if (!(clip_norm > 0.0)) throw std::invalid_argument("clipped_gradient_true: C > 0 required");
  std::vector<double> acc(batch.dim(), 0.0);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    auto row = batch.row(i);
    double norm = l2_norm(row);
    double s = norm > clip_norm ? clip_norm / norm : 1.0;
    for (std::size_t j = 0; j < batch.dim(); ++j) acc[j] += s * row[j];
  }
  for (double& x : acc) x /= static_cast<double>(batch.size());
  return acc;
}

std::vector<double> clipped_gradient_surrogate(const GradientBatch& batch,
                                               double clip_norm) {
  if (!(clip_norm > 0.0)) {
    throw std::invalid_argument("clipped_gradient_surrogate: C > 0 required");
  }
  std::vector<double> acc(batch.dim(), 0.0);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    auto row = batch.row(i);
    double norm = l2_norm(row);
    if (norm == 0.0) {
      throw std::invalid_argument("clipped_gradient_surrogate: row " + std::to_string(i) +
                                  " is zero");
    }
    for (std::size_t j = 0; j < batch.dim(); ++j) acc[j] += row[j] / norm;
  }
  for (double& x : acc) x *= clip_norm / static_cast<double>(batch.size());
  return acc;
}

Theorem1Check check_alignment_bound(const GradientBatch& batch, double clip_norm) {
  Theorem1Check out;
  out.ratio = ratio_R(batch);
  std::vector<double> mean = batch.mean();
  double mean_norm = l2_norm(mean);
  std::vector<double> c = clipped_gradient_surrogate(batch, clip_norm);
  out.lhs = dot(c, mean) / mean_norm;
  out.true_lhs = dot(clipped_gradient_true(batch, clip_norm), mean) / mean_norm;
  out.rhs = clip_norm * (1.0 - 0.5 * out.ratio);
  out.holds = out.lhs >= out.rhs - 1e-9;
  return out;
}

double population_loss(std::span<const double> w, const PopulationMoments& moments) {
  std::size_t d = w.size();
  double quad = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    quad += w[i] * dot(moments.second_moment.row(i), w);
  }
  return 0.5 * (quad - 2.0 * dot(w, moments.cross) + 1.0);
}

namespace {

/// Cholesky solve of A x = b for symmetric positive definite A (row-major).
std::vector<double> cholesky_solve(const Tensor& a, std::span<const double> b) {
  std::size_t n = a.rows();
  std::vector<double> l(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = a.at(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l[i * n + k] * l[j * n + k];
      if (i == j) {
        if (s <= 0.0) throw std::runtime_error("cholesky_solve: matrix not positive definite");
        l[i * n + i] = std::sqrt(s);
      } else {
        l[i * n + j] = s / l[j * n + j];
      }
    }
  }
  std::vector<double> y(n), x(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= l[i * n + k] * y[k];
    y[i] = s / l[i * n + i];
  }
  for (std::size_t ii = n; ii-- > 0;) {
    double s = y[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= l[k * n + ii] * x[k];
    x[ii] = s / l[ii * n + ii];
  }
  return x;
}

}  // namespace

std::vector<double> closed_form_optimum(const SyntheticSpec& spec) {
  std::size_t d_s = spec.d_s(), d = spec.dim();
  if (spec.sigma == 0.0) {
    double v2 = squared_l2_norm(spec.v);
    if (v2 == 0.0) {
      throw std::invalid_argument("closed_form_optimum: sigma = 0 with v = 0 is degenerate");
    }
    std::vector<double> w(d, 0.0);
    for (std::size_t i = 0; i < d_s; ++i) w[i] = spec.v[i] / v2;
    return w;
  }
  PopulationMoments pm = population_second_moments(spec);
  return cholesky_solve(pm.second_moment, pm.cross);
}

std::vector<double> FlowResult::product() const {
  std::size_t m = w1.rows(), d = w1.cols();
  std::vector<double> w(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) s += w2[i] * w1.at(i, j);
    w[j] = s;
  }
  return w;
}

FlowResult population_gradient_flow(const Model& two_layer_model,
                                    const SyntheticSpec& spec,
                                    const FlowOptions& options) {
  if (two_layer_model.layers.size() != 2 || two_layer_model.layers[0].bias ||
      two_layer_model.layers[1].bias ||
      two_layer_model.layers[0].activation != Activation::kIdentity ||
      two_layer_model.layers[1].activation != Activation::kIdentity) {
    throw std::invalid_argument("population_gradient_flow: model must be two-layer linear");
  }
  if (!(options.dt > 0.0)) throw std::invalid_argument("population_gradient_flow: dt > 0");
  if (two_layer_model.input_dim != spec.dim()) {
    throw std::invalid_argument("population_gradient_flow: model width " +
                                std::to_string(two_layer_model.input_dim) +
                                " does not match task dimension " +
                                std::to_string(spec.dim()));
  }

  PopulationMoments pm = population_second_moments(spec);
  const std::size_t d_s = spec.d_s();

  FlowResult result;
  result.w1 = two_layer_model.layers[0].weight;
  result.w2 = two_layer_model.layers[1].weight;
  Tensor& w1 = result.w1;
  Tensor& w2 = result.w2;
  const std::size_t m = w1.rows(), d = w1.cols();

  // The norm-equalizing projection is only a conservation-law restorer when
  // the start is balanced; from an unbalanced start the exact flow preserves
  // the imbalance, so fall back to raw Euler there.
  double init_scale = std::max(squared_l2_norm(w1.flat()), squared_l2_norm(w2.flat()));
  bool project = options.rebalance &&
                 balancedness_residual(w1, w2) <= 1e-10 * std::max(init_scale, 1.0);

  std::vector<double> w(d), dir(d), g1(m * d), g2(m);
  auto log_state = [&](double t, double loss, double gnorm) {
    FlowState st;
    st.time = t;
    st.loss = loss;
    st.grad_norm = gnorm;
    st.balance_residual = balancedness_residual(w1, w2);
    double wn = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = d_s; j < d; ++j) wn += w1.at(i, j) * w1.at(i, j);
    }
    st.noise_block_norm = std::sqrt(wn);
    result.trajectory.push_back(st);
  };

  const std::size_t max_steps =
      static_cast<std::size_t>(std::ceil(options.max_time / options.dt));
  double prev_loss = std::numeric_limits<double>::infinity();
  std::size_t rising = 0;

  for (std::size_t step = 0;; ++step) {
    // W = W2 W1, the end-to-end row vector.
    for (std::size_t j = 0; j < d; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < m; ++i) s += w2[i] * w1.at(i, j);
      w[j] = s;
    }
    // dir = W Sigma - c^T, the gradient of the population risk in W.
    for (std::size_t j = 0; j < d; ++j) {
      dir[j] = dot(pm.second_moment.row(j), w) - pm.cross[j];
    }
    double loss = population_loss(w, pm);

    // grad W1 = W2^T dir, grad W2 = dir W1^T.
    double gsq = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        double g = w2[i] * dir[j];
        g1[i * d + j] = g;
        gsq += g * g;
        s += dir[j] * w1.at(i, j);
      }
      g2[i] = s;
      gsq += s * s;
    }
    double gnorm = std::sqrt(gsq);
    if (step % options.log_every == 0) log_state(step * options.dt, loss, gnorm);

    if (gnorm < options.tol) {
      result.converged = true;
      result.steps = step;
      break;
    }
    if (step >= max_steps) {
      result.steps = step;
      break;
    }
    char dt_buf[64];
    std::snprintf(dt_buf, sizeof(dt_buf), "%g", options.dt);
    if (!std::isfinite(loss)) {
      throw std::runtime_error("population_gradient_flow: loss is not finite, dt=" +
                               std::string(dt_buf) + " is too large");
    }
    if (loss > prev_loss) {
      if (++rising >= 100) {
        throw std::runtime_error(
            "population_gradient_flow: loss rose for 100 consecutive steps, dt=" +
            std::string(dt_buf) + " is too large");
      }
    } else {
      rising = 0;
    }
    prev_loss = loss;

    for (std::size_t i = 0; i < m * d; ++i) w1[i] -= options.dt * g1[i];
    for (std::size_t i = 0; i < m; ++i) w2[i] -= options.dt * g2[i];

    if (project) {
      double f1 = squared_l2_norm(w1.flat());
      double f2 = squared_l2_norm(w2.flat());
      if (f1 > 0.0 && f2 > 0.0) {
        double gamma = std::sqrt(std::sqrt(f2 / f1));
        for (std::size_t i = 0; i < m * d; ++i) w1[i] *= gamma;
        for (std::size_t i = 0; i < m; ++i) w2[i] /= gamma;
      }
    }
  }
  return result;
}

std::string flow_csv(const FlowResult& result) {
  std::string out = "t,loss,balance_residual,norm_Wn\n";
  char buf[160];
  for (const FlowState& st : result.trajectory) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g\n", st.time, st.loss,
                  st.balance_residual, st.noise_block_norm);
    out += buf;
  }
  return out;
}

namespace {

/// R over surviving first-layer coordinates of per-example gradients; masked
/// coordinates are zeroed, matching what the DP mechanism would clip and
/// noise.
double first_layer_ratio(const Model& model, const Dataset& data) {
  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), 0);
  GradientBatch full = per_example_gradients(model, data, all);
  FlatRange w1_range = weight_ranges(model)[0];

  GradientBatch first(full.size(), w1_range.length);
  const Tensor* mask = model.layers[0].weight_mask ? &*model.layers[0].weight_mask : nullptr;
  for (std::size_t i = 0; i < full.size(); ++i) {
    auto src = full.row(i);
    auto dst = first.row(i);
    for (std::size_t j = 0; j < w1_range.length; ++j) {
      double g = src[w1_range.offset + j];
      dst[j] = (mask && (*mask)[j] == 0.0) ? 0.0 : g;
    }
  }
  return ratio_R(first);
}

}  // namespace

std::vector<RPruningPoint> R_under_pruning(const SyntheticSpec& spec,
                                           const std::vector<double>& keep_fractions,
                                           const RPruningOptions& options,
                                           std::uint64_t seed) {
  Dataset data = sample_synthetic(spec);
  InitSpec init;
  init.scheme = InitScheme::kBalancedLinear;
  init.balanced_scale = 0.5;
  init.seed = RandomStream::derive(seed, 0x1417);
  Model init_model = build_two_layer_linear(spec.d_s(), spec.d_n, 16, init);

  std::vector<RPruningPoint> out;
  for (double keep : keep_fractions) {
    PruneSpec pspec;
    pspec.keep_fraction = keep;
    pspec.pretrain_epochs = options.pretrain_epochs;
    Model masked = keep >= 1.0
                       ? init_model
                       : prune_pipeline(init_model, data, pspec, options.train_cfg,
                                        RandomStream::derive(seed, 0x9137));

    RPruningPoint point;
    point.keep_fraction = keep;

    // R is a ratio of the gradient spread to the mean gradient norm, and
    // the mean shrinks fast near the optimum, so models have to be matched
    // at step (not epoch) granularity: stop at the first step whose
    // full-dataset train loss reaches the target.
    const DpConfig& cfg = options.train_cfg;
    std::size_t batch_size = std::min(cfg.batch_size, data.size());
    RandomStream noise_rng(RandomStream::derive(seed, 0xE417));
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    double best_loss = std::numeric_limits<double>::infinity();
    for (std::size_t epoch = 0; epoch < options.train_epoch_cap && !point.reached_match;
         ++epoch) {
      RandomStream shuffle_rng(RandomStream::derive(RandomStream::derive(seed, 0xE417), epoch));
      shuffle_indices(order, shuffle_rng);
      for (std::size_t start = 0; start < order.size(); start += batch_size) {
        std::size_t len = std::min(batch_size, order.size() - start);
        dp_step(masked, data, std::span<const std::size_t>(order.data() + start, len), cfg,
                noise_rng);
        double loss = batch_loss(masked, data);
        best_loss = std::min(best_loss, loss);
        if (loss <= options.loss_match) {
          point.reached_match = true;
          point.matched_loss = loss;
          break;
        }
      }
    }
    if (!point.reached_match) point.matched_loss = best_loss;
    point.ratio = first_layer_ratio(masked, data);
    out.push_back(point);
  }
  return out;
}

}  // namespace dplab
