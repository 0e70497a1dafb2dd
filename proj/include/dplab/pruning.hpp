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

#ifndef DPLAB_PRUNING_HPP_
#define DPLAB_PRUNING_HPP_

#include <cstdint>
#include <map>
#include <string>

#include "dplab/dp_optimizer.hpp"
#include "dplab/model.hpp"

namespace dplab {

/// Magnitude-pruning pipeline: pretrain a copy, pick per-layer masks by
/// weight magnitude, rewind survivors to their initialization values.
/// keep_fraction is the fraction RETAINED per layer; biases are never
/// pruned.
struct PruneSpec {
  double keep_fraction = 1.0;                    // applies to every layer...
  std::map<std::string, double> per_layer_keep;  // ...unless overridden by name
  std::size_t pretrain_epochs = 20;

  double keep_for(const std::string& layer_name) const;
  void validate() const;
};

/// Binary mask with exactly ceil(keep_fraction * size) ones at the
/// largest-|w| positions; ties broken by lowest flat index. Rejects an empty
/// tensor.
Tensor magnitude_mask(const Tensor& weights, double keep_fraction);

/// Pretrains a copy of init_model on pretrain_data with plain SGD, selects
/// masks from the pretrained weights, applies them to the ORIGINAL init
/// weights and returns the rewound masked model. pretrain_epochs == 0 means
/// masks come from the init weights themselves.
Model prune_pipeline(const Model& init_model, const Dataset& pretrain_data,
                     const PruneSpec& spec, const DpConfig& pretrain_cfg,
                     std::uint64_t seed);

/// Same pipeline but pretraining on a proxy dataset; rejects an input
/// dimension mismatch.
Model cross_dataset_prune(const Model& init_model, const Dataset& proxy_data,
                          const PruneSpec& spec, const DpConfig& pretrain_cfg,
                          std::uint64_t seed);

}  // namespace dplab

#endif  // DPLAB_PRUNING_HPP_
