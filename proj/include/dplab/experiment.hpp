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

#ifndef DPLAB_EXPERIMENT_HPP_
#define DPLAB_EXPERIMENT_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace dplab {

/// Experiment kinds the runner understands. Each reproduces one experiment
/// family at desk scale from a single JSON config and emits plot-ready
/// CSV/JSONL artifacts plus a manifest of content hashes.
///   phase-switch         four phase-1/phase-2 optimizer combinations
///   lmc-instability      interpolation profile between two phase-2 replicas
///   random-probe         loss along random unit directions from a model
///   clip-noise-ablation  sgd / clip_only / noise_only / dpsgd side by side
///   prune-sweep          train after magnitude pruning at several densities
///   theorem1-check       randomized clipped-gradient alignment bound trials
///   theorem2-flow        population gradient flow on the signal/noise task
///   r-under-pruning      ratio R versus keep fraction at matched loss
extern const std::vector<std::string> kExperimentKinds;

/// Environment variable that, when set, prefixes relative output
/// directories.
extern const char* const kOutputRootEnvVar;

/// Parses a config file; throws std::runtime_error with a line/position
/// diagnostic on malformed JSON.
nlohmann::json load_config_file(const std::string& path);

/// Fills defaults and normalizes the config. Does not validate.
nlohmann::json resolve_defaults(const nlohmann::json& config);

/// Returns every constraint violation, each naming the offending field.
/// Empty means the config is runnable.
std::vector<std::string> validate_config(const nlohmann::json& config);

struct RunResult {
  std::filesystem::path output_dir;
  /// artifact name -> fnv1a64 content hash, as written to manifest.json.
  std::map<std::string, std::string> manifest;
};

/// Validates, runs the experiment for every seed, writes artifacts
/// atomically and finishes with manifest.json. On failure all partial
/// artifacts are removed and no manifest is written. Reruns with the same
/// config produce byte-identical artifacts.
RunResult run_experiment(const nlohmann::json& config);

/// The `prune` subcommand: one pipeline run, saving the rewound masked
/// checkpoint and a mask-density report.
RunResult run_prune(const nlohmann::json& config, std::optional<double> keep_override);

/// FNV-1a 64-bit hash (not cryptographic; manifest integrity only).
std::uint64_t fnv1a64(std::string_view bytes);
std::string hash_file(const std::filesystem::path& path);

}  // namespace dplab

#endif  // DPLAB_EXPERIMENT_HPP_
