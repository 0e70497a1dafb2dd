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

#ifndef DPLAB_THEORY_HPP_
#define DPLAB_THEORY_HPP_

#include <cstdint>
#include <vector>

#include "dplab/data.hpp"
#include "dplab/gradient_batch.hpp"
#include "dplab/model.hpp"
#include "dplab/pruning.hpp"

namespace dplab {

/// R = Tr(Cov(G)) / ||mean||^2 = (1/n) sum_i ||g_i - mean||^2 / ||mean||^2.
/// Small R means the clipped aggregate stays aligned with the true gradient
/// direction. Rejects a zero mean gradient.
double ratio_R(const GradientBatch& batch);

/// Mean of the per-example clipped gradients g_i * min(1, C/||g_i||).
std::vector<double> clipped_gradient_true(const GradientBatch& batch, double clip_norm);

/// The analysis surrogate (C/n) sum_i g_i/||g_i||, exact whenever every
/// ||g_i|| >= C. Rejects any zero row.
std::vector<double> clipped_gradient_surrogate(const GradientBatch& batch,
                                               double clip_norm);

/// Alignment bound check: lhs = c . mean/||mean|| with the surrogate c,
/// rhs = C (1 - R/2); holds when lhs >= rhs - 1e-9. true_lhs carries the
/// same projection for the true clipped gradient, of interest when some
/// ||g_i|| < C and the surrogate stops being exact.
struct Theorem1Check {
  double lhs = 0.0;
  double true_lhs = 0.0;
  double rhs = 0.0;
  double ratio = 0.0;  // R
  bool holds = false;
};
Theorem1Check check_alignment_bound(const GradientBatch& batch, double clip_norm);

/// Population risk 0.5 * (w Sigma w^T - 2 w.c + 1) of a linear predictor w
/// on the signal/noise task (E[y^2] = 1).
double population_loss(std::span<const double> w, const PopulationMoments& moments);

/// Optimal linear predictor: solves Sigma W^T = c (Cholesky). For sigma = 0
/// the singular system is resolved by the pseudo-inverse on the signal
/// block: W = (v / ||v||^2, 0).
std::vector<double> closed_form_optimum(const SyntheticSpec& spec);

/// One logged point of the gradient-flow trajectory.
struct FlowState {
  double time = 0.0;
  double loss = 0.0;
  double balance_residual = 0.0;  // ||W1 W1^T - W2^T W2||_F
  double noise_block_norm = 0.0;  // ||W_n||_F, columns d_s..d-1 of W1
  double grad_norm = 0.0;
};

struct FlowOptions {
  double dt = 1e-2;
  double tol = 1e-8;        // stop when the gradient norm drops below this
  double max_time = 1000.0;
  /// Explicit Euler alone lets the balancedness invariant drift at O(dt) per
  /// unit time; the rebalancing projection rescales (W1, W2) after each step
  /// (leaving the product W2 W1 unchanged) to hold the invariant at rounding
  /// level. Disable to observe the raw Euler drift.
  bool rebalance = true;
  std::size_t log_every = 1;
};

struct FlowResult {
  std::vector<FlowState> trajectory;
  Tensor w1;  // final
  Tensor w2;
  bool converged = false;
  std::size_t steps = 0;
  /// Product W2 W1 at the final point.
  std::vector<double> product() const;
};

/// Integrates dW/dt = -grad L over the exact population moments (no
/// sampling) for a two-layer linear model; model layers must be the W1/W2
/// pair. Reports divergence (loss rising 100 consecutive steps) with the
/// offending dt.
FlowResult population_gradient_flow(const Model& two_layer_model,
                                    const SyntheticSpec& spec,
                                    const FlowOptions& options);

/// trajectory CSV: t,loss,balance_residual,norm_Wn.
std::string flow_csv(const FlowResult& result);

/// Runs the prune pipeline on the signal/noise task for each keep fraction
/// and reports R over surviving first-layer coordinates at matched training
/// loss (first epoch whose train loss reaches loss_match, else the best
/// reached within the epoch cap).
struct RPruningPoint {
  double keep_fraction = 0.0;
  double ratio = 0.0;        // R at the matched-loss point
  double matched_loss = 0.0; // train loss actually reached
  bool reached_match = false;
};
struct RPruningOptions {
  std::size_t pretrain_epochs = 20;
  std::size_t train_epoch_cap = 60;
  double loss_match = 0.3;
  DpConfig train_cfg;  // plain SGD by default
};
std::vector<RPruningPoint> R_under_pruning(const SyntheticSpec& spec,
                                           const std::vector<double>& keep_fractions,
                                           const RPruningOptions& options,
                                           std::uint64_t seed);

}  // namespace dplab

#endif  // DPLAB_THEORY_HPP_
