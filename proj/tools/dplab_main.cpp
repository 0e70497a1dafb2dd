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

// dplab: config-driven experiment runner for the DP optimization lab.
//
// Subcommands:
//   run <config.json>       run an experiment, write artifacts + manifest
//   validate <config.json>  report config diagnostics without running
//   prune <config.json>     run the magnitude-pruning pipeline, save masks
//   check-theorems          quick alignment-bound and flow verification
//
// Exit codes: 0 ok, 1 validation failure, 2 runtime failure.

#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "dplab/data.hpp"
#include "dplab/experiment.hpp"
#include "dplab/model.hpp"
#include "dplab/parallel.hpp"
#include "dplab/theory.hpp"

namespace {

int cmd_validate(const std::string& path) {
  nlohmann::json config = dplab::load_config_file(path);
  std::vector<std::string> problems = dplab::validate_config(config);
  if (problems.empty()) {
    std::printf("ok: %s\n", path.c_str());
    return 0;
  }
  for (const std::string& p : problems) std::fprintf(stderr, "invalid: %s\n", p.c_str());
  return 1;
}

int cmd_run(const std::string& path) {
  nlohmann::json config = dplab::load_config_file(path);
  std::vector<std::string> problems = dplab::validate_config(config);
  if (!problems.empty()) {
    for (const std::string& p : problems) std::fprintf(stderr, "invalid: %s\n", p.c_str());
    return 1;
  }
  dplab::RunResult result = dplab::run_experiment(config);
  std::printf("wrote %zu artifacts to %s\n", result.manifest.size(),
              result.output_dir.string().c_str());
  return 0;
}

int cmd_prune(const std::string& path, double keep, bool keep_set) {
  nlohmann::json config = dplab::load_config_file(path);
  dplab::RunResult result = dplab::run_prune(
      config, keep_set ? std::optional<double>(keep) : std::nullopt);
  std::printf("wrote %zu artifacts to %s\n", result.manifest.size(),
              result.output_dir.string().c_str());
  return 0;
}

int cmd_check_theorems(std::size_t trials, std::uint64_t seed) {
  using namespace dplab;
  // Alignment bound over random batches with every ||g_i|| >= C.
  std::size_t holds = 0;
  double min_slack = 1e300;
  for (std::size_t trial = 0; trial < trials; ++trial) {
    RandomStream rng(RandomStream::derive(seed, trial));
    std::size_t n = static_cast<std::size_t>(rng.uniform_int(2, 32));
    std::size_t d = static_cast<std::size_t>(rng.uniform_int(2, 64));
    const double c_values[3] = {0.1, 0.5, 1.0};
    double c = c_values[rng.uniform_int(0, 2)];
    GradientBatch batch(n, d);
    for (std::size_t i = 0; i < n; ++i) {
      auto row = batch.row(i);
      double norm = 0.0;
      do {
        rng.fill_gaussian(row);
        norm = l2_norm(row);
      } while (norm == 0.0);
      double target = c * (1.0 + rng.uniform());
      for (double& x : row) x *= target / norm;
    }
    Theorem1Check check = check_alignment_bound(batch, c);
    if (check.holds) ++holds;
    min_slack = std::min(min_slack, check.lhs - check.rhs);
  }
  std::printf("alignment bound: %zu/%zu batches hold (min slack %.3e)\n", holds, trials,
              min_slack);

  // Gradient flow on the signal/noise task, 5 seeds.
  bool flow_ok = true;
  for (std::uint64_t s = 0; s < 5; ++s) {
    std::uint64_t run_seed = RandomStream::derive(seed, 0xF10 + s);
    SyntheticSpec spec = SyntheticSpec::defaults(run_seed);
    InitSpec init;
    init.scheme = InitScheme::kBalancedLinear;
    init.balanced_scale = 0.5;
    init.seed = RandomStream::derive(run_seed, 0xA11);
    Model model = build_two_layer_linear(spec.d_s(), spec.d_n, 16, init);
    FlowResult flow = population_gradient_flow(model, spec, FlowOptions{});
    std::vector<double> w = flow.product();
    std::vector<double> w_star = closed_form_optimum(spec);
    double dist2 = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) {
      dist2 += (w[j] - w_star[j]) * (w[j] - w_star[j]);
    }
    double max_resid = 0.0;
    for (const FlowState& st : flow.trajectory) {
      max_resid = std::max(max_resid, st.balance_residual);
    }
    double wn = flow.trajectory.back().noise_block_norm;
    bool ok = flow.converged && wn <= 1e-6 && std::sqrt(dist2) <= 1e-6 && max_resid <= 1e-8;
    flow_ok = flow_ok && ok;
    std::printf(
        "flow seed %llu: %s  ||W_n||=%.2e  ||W2W1-W*||=%.2e  max residual=%.2e (%zu steps)\n",
        static_cast<unsigned long long>(s), ok ? "ok" : "FAIL", wn, std::sqrt(dist2),
        max_resid, flow.steps);
  }
  bool all_ok = holds == trials && flow_ok;
  std::printf("%s\n", all_ok ? "all checks passed" : "CHECKS FAILED");
  return all_ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dplab: differentially private optimization laboratory"};
  app.require_subcommand(1);

  int threads = 0;
  app.add_option("--threads", threads, "Cap worker threads (0 = library default)");

  std::string config_path;
  auto* run = app.add_subcommand("run", "Run an experiment config");
  run->add_option("config", config_path, "JSON config file")->required();

  auto* validate = app.add_subcommand("validate", "Validate a config without running");
  validate->add_option("config", config_path, "JSON config file")->required();

  double keep = 0.7;
  auto* prune = app.add_subcommand("prune", "Run the pruning pipeline from a config");
  prune->add_option("config", config_path, "JSON config file")->required();
  auto* keep_opt = prune->add_option("--keep-fraction", keep,
                                     "Fraction of weights to retain per layer");

  std::size_t trials = 10000;
  std::uint64_t seed = 1;
  auto* check = app.add_subcommand("check-theorems", "Run the theory verification suite");
  check->add_option("--trials", trials, "Random batches for the alignment bound");
  check->add_option("--seed", seed, "Root seed");

  CLI11_PARSE(app, argc, argv);
  dplab::set_num_threads(threads);

  try {
    if (*run) return cmd_run(config_path);
    if (*validate) return cmd_validate(config_path);
    if (*prune) return cmd_prune(config_path, keep, keep_opt->count() > 0);
    if (*check) return cmd_check_theorems(trials, seed);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "invalid: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
