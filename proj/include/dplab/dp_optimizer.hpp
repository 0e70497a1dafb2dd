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

#ifndef DPLAB_DP_OPTIMIZER_HPP_
#define DPLAB_DP_OPTIMIZER_HPP_

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dplab/data.hpp"
#include "dplab/grad_eval.hpp"
#include "dplab/model.hpp"
#include "dplab/random.hpp"

namespace dplab {

enum class OptimizerMode { kSgd, kClipOnly, kNoiseOnly, kDpsgd };

const char* optimizer_mode_name(OptimizerMode mode);
OptimizerMode optimizer_mode_from_name(const std::string& name);

/// Configuration of one optimizer phase.
///
/// dpsgd: per-example gradients clipped at C, summed in index order, one
/// Gaussian draw with per-coordinate std sigma*C added to the sum, the
/// result divided by the batch size.
/// clip_only: the same with sigma = 0. noise_only: unclipped mean gradient
/// plus noise of per-coordinate std sigma*noise_reference_norm/batch_size.
/// sgd: plain mean-gradient step.
struct DpConfig {
  OptimizerMode mode = OptimizerMode::kSgd;
  std::optional<double> clip_norm;     // C, required for dpsgd/clip_only
  double noise_multiplier = 0.0;       // sigma, required for dpsgd/noise_only
  double learning_rate = 0.1;
  std::size_t batch_size = 128;
  double noise_reference_norm = 1.0;   // C_ref for noise_only
  std::string epsilon_label;           // bookkeeping only; no accountant

  void validate() const;
};

struct StepMetrics {
  std::size_t epoch = 0;
  std::size_t step = 0;            // global step index
  double loss = 0.0;               // batch-mean loss before the update
  double mean_grad_norm = 0.0;     // mean per-example gradient norm, pre-clip
  double clipped_fraction = 0.0;   // fraction of examples with ||g|| > C
  double param_l2 = 0.0;           // post-update parameter norm
};

struct EpochSummary {
  std::size_t epoch = 0;
  std::string mode;
  double train_loss = 0.0;  // mean of step losses in the epoch
  double test_loss = 0.0;   // NaN when no eval set
  double test_accuracy = 0.0;
  double mean_grad_norm = 0.0;
  double param_l2 = 0.0;
};

/// In-place L2 clip: g <- g / max(1, ||g||/C). Vectors with ||g|| <= C are
/// left untouched (bit-identical); the zero vector passes through.
void clip_to_norm(std::span<double> g, double clip_norm);

/// One optimizer step over the given examples. The noise stream advances by
/// one draw per parameter coordinate whenever the mode adds noise with
/// sigma > 0, independent of masks. Masked coordinates receive no update
/// and no noise.
StepMetrics dp_step(Model& model, const Dataset& data,
                    std::span<const std::size_t> batch, const DpConfig& cfg,
                    RandomStream& noise_rng);

/// Training schedule: phase1 for epochs [0, switch_epoch), phase2 for
/// [switch_epoch, total_epochs).
struct PhasePlan {
  std::size_t switch_epoch = 0;  // k
  std::size_t total_epochs = 0;  // T
  DpConfig phase1;
  DpConfig phase2;

  void validate() const;
  const DpConfig& config_for_epoch(std::size_t epoch) const {
    return epoch < switch_epoch ? phase1 : phase2;
  }
};

struct TrainOptions {
  std::uint64_t seed = 0;  // root seed: shuffling and noise derive from it
  const Dataset* eval_data = nullptr;
  /// Called after each epoch (0-based) completes, before the next shuffle.
  std::function<void(std::size_t epoch, const Model&)> on_epoch_end;
  bool record_steps = true;
};

struct TrainResult {
  std::vector<StepMetrics> steps;
  std::vector<EpochSummary> epochs;
};

/// Runs the phase plan. Shuffling is seeded per epoch from the root seed, so
/// two runs sharing a root seed and phase-1 config produce bit-identical
/// parameters at the switch epoch regardless of their phase-2 configs.
TrainResult train(Model& model, const Dataset& data, const PhasePlan& plan,
                  const TrainOptions& options);

void write_metrics_jsonl(const std::vector<StepMetrics>& steps, const std::string& path);
/// Columns: epoch,mode,train_loss,test_loss,test_acc,mean_grad_norm,param_l2.
std::string epoch_summary_csv(const std::vector<EpochSummary>& epochs);

}  // namespace dplab

#endif  // DPLAB_DP_OPTIMIZER_HPP_
