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

#include "dplab/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace dplab {

double PruneSpec::keep_for(const std::string& layer_name) const {
  auto it = per_layer_keep.find(layer_name);
  return it == per_layer_keep.end() ? keep_fraction : it->second;
}

void PruneSpec::validate() const {
  auto check = [](double k) {
    if (!(k > 0.0) || k > 1.0) {
      throw std::invalid_argument("PruneSpec: keep_fraction must be in (0, 1]");
    }
  };
  check(keep_fraction);
  for (const auto& [name, k] : per_layer_keep) check(k);
}

Tensor magnitude_mask(const Tensor& weights, double keep_fraction) {
  if (weights.numel() == 0) throw std::invalid_argument("magnitude_mask: empty tensor");
  if (!(keep_fraction > 0.0) || keep_fraction > 1.0) {
    throw std::invalid_argument("magnitude_mask: keep_fraction must be in (0, 1]");
  }
  std::size_t size = weights.numel();
  std::size_t keep = static_cast<std::size_t>(
      std::ceil(keep_fraction * static_cast<double>(size)));
  keep = std::min(keep, size);

  std::vector<std::size_t> order(size);
  std::iota(order.begin(), order.end(), 0);
  // Stable sort by descending magnitude keeps ties in flat-index order, so
  // masks nest across keep fractions.
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(weights[a]) > std::abs(weights[b]);
  });

  Tensor mask(weights.shape());
  for (std::size_t i = 0; i < keep; ++i) mask[order[i]] = 1.0;
  return mask;
}

Model prune_pipeline(const Model& init_model, const Dataset& pretrain_data,
                     const PruneSpec& spec, const DpConfig& pretrain_cfg,
                     std::uint64_t seed) {
  spec.validate();
  pretrain_cfg.validate();

  Model pretrained = init_model;
  if (spec.pretrain_epochs > 0) {
    PhasePlan plan;
    plan.switch_epoch = 0;
    plan.total_epochs = spec.pretrain_epochs;
    plan.phase1 = pretrain_cfg;
    plan.phase2 = pretrain_cfg;
    TrainOptions options;
    options.seed = seed;
    options.record_steps = false;
    train(pretrained, pretrain_data, plan, options);
  }

  Model masked = init_model;  // rewind: survivors keep their init bits
  for (std::size_t li = 0; li < masked.layers.size(); ++li) {
    masked.layers[li].weight_mask =
        magnitude_mask(pretrained.layers[li].weight,
                       spec.keep_for(masked.layers[li].name));
  }
  apply_masks(masked);
  return masked;
}

Model cross_dataset_prune(const Model& init_model, const Dataset& proxy_data,
                          const PruneSpec& spec, const DpConfig& pretrain_cfg,
                          std::uint64_t seed) {
  if (proxy_data.dim() != init_model.input_dim) {
    throw std::invalid_argument("cross_dataset_prune: proxy dimension " +
                                std::to_string(proxy_data.dim()) +
                                " does not match model input " +
                                std::to_string(init_model.input_dim));
  }
  return prune_pipeline(init_model, proxy_data, spec, pretrain_cfg, seed);
}

}  // namespace dplab
