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

#include "dplab/dp_optimizer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace dplab {

const char* optimizer_mode_name(OptimizerMode mode) {
  switch (mode) {
    case OptimizerMode::kSgd: return "sgd";
    case OptimizerMode::kClipOnly: return "clip_only";
    case OptimizerMode::kNoiseOnly: return "noise_only";
    case OptimizerMode::kDpsgd: return "dpsgd";
  }
  return "sgd";
}

OptimizerMode optimizer_mode_from_name(const std::string& name) {
  if (name == "sgd") return OptimizerMode::kSgd;
  if (name == "clip_only") return OptimizerMode::kClipOnly;
  if (name == "noise_only") return OptimizerMode::kNoiseOnly;
  if (name == "dpsgd") return OptimizerMode::kDpsgd;
  throw std::invalid_argument("unknown optimizer mode: " + name);
}

void DpConfig::validate() const {
  bool needs_clip = mode == OptimizerMode::kDpsgd || mode == OptimizerMode::kClipOnly;
  bool needs_noise = mode == OptimizerMode::kDpsgd || mode == OptimizerMode::kNoiseOnly;
  if (needs_clip) {
    if (!clip_norm) {
      throw std::invalid_argument(std::string(optimizer_mode_name(mode)) +
                                  " requires a clipping norm C");
    }
    if (!(*clip_norm > 0.0)) throw std::invalid_argument("clip norm C must be positive");
  }
  if (needs_noise && noise_multiplier < 0.0) {
    throw std::invalid_argument("noise multiplier sigma must be >= 0");
  }
  if (mode == OptimizerMode::kNoiseOnly && !(noise_reference_norm > 0.0)) {
    throw std::invalid_argument("noise_only requires a positive reference norm");
  }
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (batch_size == 0) throw std::invalid_argument("batch size must be >= 1");
}

void PhasePlan::validate() const {
  if (switch_epoch > total_epochs) {
    throw std::invalid_argument("PhasePlan: switch epoch k must satisfy 0 <= k <= T");
  }
  phase1.validate();
  phase2.validate();
}

void clip_to_norm(std::span<double> g, double clip_norm) {
  if (!(clip_norm > 0.0)) throw std::invalid_argument("clip_to_norm: C must be positive");
  double norm = l2_norm(g);
  if (norm <= clip_norm) return;  // unchanged, bit for bit
  double s = clip_norm / norm;
  for (double& x : g) x *= s;
}

StepMetrics dp_step(Model& model, const Dataset& data,
                    std::span<const std::size_t> batch, const DpConfig& cfg,
                    RandomStream& noise_rng) {
  cfg.validate();
  if (batch.empty()) throw std::invalid_argument("dp_step: batch must be nonempty");

  std::vector<double> losses;
  GradientBatch grads = per_example_gradients(model, data, batch, &losses);
  const std::size_t n = grads.size();
  const std::size_t d = grads.dim();

  StepMetrics metrics;
  for (double l : losses) metrics.loss += l;
  metrics.loss /= static_cast<double>(n);

  std::vector<double> norms = grads.row_norms();
  for (double v : norms) metrics.mean_grad_norm += v;
  metrics.mean_grad_norm /= static_cast<double>(n);

  const bool clips = cfg.mode == OptimizerMode::kDpsgd || cfg.mode == OptimizerMode::kClipOnly;
  if (clips) {
    double c = *cfg.clip_norm;
    std::size_t over = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (norms[i] > c) {
        ++over;
        clip_to_norm(grads.row(i), c);
      }
    }
    metrics.clipped_fraction = static_cast<double>(over) / static_cast<double>(n);
  }

  // Sum in index order so results do not depend on thread count.
  std::vector<double> update(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = grads.row(i);
    for (std::size_t j = 0; j < d; ++j) update[j] += row[j];
  }

  // dpsgd noises the sum at std sigma*C, noise_only noises the mean at std
  // sigma*C_ref/batch; sigma == 0 must leave bits untouched, so skip the add.
  if (cfg.mode == OptimizerMode::kDpsgd && cfg.noise_multiplier > 0.0) {
    double s = cfg.noise_multiplier * *cfg.clip_norm;
    for (std::size_t j = 0; j < d; ++j) update[j] += s * noise_rng.gaussian();
  }
  double inv_n = 1.0 / static_cast<double>(n);
  for (double& x : update) x *= inv_n;
  if (cfg.mode == OptimizerMode::kNoiseOnly && cfg.noise_multiplier > 0.0) {
    double s = cfg.noise_multiplier * cfg.noise_reference_norm / static_cast<double>(n);
    for (std::size_t j = 0; j < d; ++j) update[j] += s * noise_rng.gaussian();
  }

  std::vector<double> theta = flatten(model);
  for (std::size_t j = 0; j < d; ++j) theta[j] -= cfg.learning_rate * update[j];
  for (std::size_t j : masked_coordinates(model)) theta[j] = 0.0;
  unflatten(theta, model);

  metrics.param_l2 = l2_norm(theta);
  return metrics;
}

TrainResult train(Model& model, const Dataset& data, const PhasePlan& plan,
                  const TrainOptions& options) {
  plan.validate();
  TrainResult result;
  // One noise stream for the whole run, advanced only here; shuffles use
  // per-epoch derived seeds so phase-2 settings cannot perturb phase 1.
  RandomStream noise_rng(RandomStream::derive(options.seed, 0xD015E));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  std::size_t global_step = 0;
  for (std::size_t epoch = 0; epoch < plan.total_epochs; ++epoch) {
    const DpConfig& cfg = plan.config_for_epoch(epoch);
    std::size_t batch_size = std::min(cfg.batch_size, data.size());
    RandomStream shuffle_rng(RandomStream::derive(options.seed, epoch));
    shuffle_indices(order, shuffle_rng);

    double loss_sum = 0.0, grad_norm_sum = 0.0;
    std::size_t steps_in_epoch = 0;
    double last_param_l2 = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      std::size_t len = std::min(batch_size, order.size() - start);
      std::span<const std::size_t> batch(order.data() + start, len);
      StepMetrics m = dp_step(model, data, batch, cfg, noise_rng);
      m.epoch = epoch;
      m.step = global_step++;
      loss_sum += m.loss;
      grad_norm_sum += m.mean_grad_norm;
      last_param_l2 = m.param_l2;
      ++steps_in_epoch;
      if (options.record_steps) result.steps.push_back(m);
    }

    EpochSummary summary;
    summary.epoch = epoch;
    summary.mode = optimizer_mode_name(cfg.mode);
    summary.train_loss = loss_sum / static_cast<double>(steps_in_epoch);
    summary.mean_grad_norm = grad_norm_sum / static_cast<double>(steps_in_epoch);
    summary.param_l2 = last_param_l2;
    if (options.eval_data != nullptr) {
      LossAccuracy eval = evaluate(model, *options.eval_data);
      summary.test_loss = eval.loss;
      summary.test_accuracy = eval.accuracy;
    } else {
      summary.test_loss = std::numeric_limits<double>::quiet_NaN();
      summary.test_accuracy = std::numeric_limits<double>::quiet_NaN();
    }
    result.epochs.push_back(summary);
    if (options.on_epoch_end) options.on_epoch_end(epoch, model);
  }
  return result;
}

void write_metrics_jsonl(const std::vector<StepMetrics>& steps, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("metrics: cannot open " + path + " for writing");
  for (const StepMetrics& m : steps) {
    nlohmann::json j{{"epoch", m.epoch},
                     {"step", m.step},
                     {"loss", m.loss},
                     {"mean_grad_norm", m.mean_grad_norm},
                     {"clipped_fraction", m.clipped_fraction},
                     {"param_l2", m.param_l2}};
    f << j.dump() << "\n";
  }
}

std::string epoch_summary_csv(const std::vector<EpochSummary>& epochs) {
  std::string out = "epoch,mode,train_loss,test_loss,test_acc,mean_grad_norm,param_l2\n";
  char buf[160];
  for (const EpochSummary& e : epochs) {
    std::snprintf(buf, sizeof(buf), "%zu,%s,%.17g,%.17g,%.17g,%.17g,%.17g\n", e.epoch,
                  e.mode.c_str(), e.train_loss, e.test_loss, e.test_accuracy,
                  e.mean_grad_norm, e.param_l2);
    out += buf;
  }
  return out;
}

}  // namespace dplab
