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

#include <doctest.h>

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>

#include "dplab/dp_optimizer.hpp"

using namespace dplab;

namespace {

Dataset toy_regression(std::size_t n, std::size_t d, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.v = random_unit_vector(d / 2, seed + 1);
  spec.sigma = 0.4;
  spec.d_n = d - d / 2;
  spec.n = n;
  spec.seed = seed;
  return sample_synthetic(spec);
}

Model toy_model(std::size_t d, std::uint64_t seed) {
  InitSpec init;
  init.seed = seed;
  return build_two_layer_linear(d, 0, 4, init);
}

std::vector<std::size_t> iota_batch(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

}  // namespace

TEST_CASE("clip_to_norm hand cases") {
  std::vector<double> g{3.0, 4.0};
  clip_to_norm(g, 1.0);
  CHECK(g[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(g[1] == doctest::Approx(0.8).epsilon(1e-15));

  std::vector<double> small{0.3, 0.4};
  std::vector<double> copy = small;
  clip_to_norm(small, 1.0);
  CHECK(small == copy);  // bit-identical below the threshold

  std::vector<double> zero{0.0, 0.0, 0.0};
  clip_to_norm(zero, 0.5);
  CHECK(zero == std::vector<double>{0.0, 0.0, 0.0});

  CHECK_THROWS_AS(clip_to_norm(g, 0.0), std::invalid_argument);
}

TEST_CASE("clipping is positively homogeneous") {
  RandomStream rng(12);
  for (int rep = 0; rep < 50; ++rep) {
    std::size_t d = 1 + rng.uniform_int(0, 7);
    double c = 0.1 + rng.uniform();
    double alpha = 0.05 + 3.0 * rng.uniform();
    std::vector<double> g(d), scaled(d);
    for (std::size_t i = 0; i < d; ++i) {
      g[i] = 2.0 * rng.gaussian();
      scaled[i] = alpha * g[i];
    }
    clip_to_norm(g, c);
    clip_to_norm(scaled, alpha * c);
    for (std::size_t i = 0; i < d; ++i) {
      CHECK(scaled[i] == doctest::Approx(alpha * g[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("per-example norms never exceed C after clipping") {
  Dataset data = toy_regression(64, 8, 3);
  Model model = toy_model(8, 4);
  GradientBatch g = per_example_gradients(model, data, iota_batch(16));
  for (std::size_t i = 0; i < g.size(); ++i) clip_to_norm(g.row(i), 0.2);
  for (double norm : g.row_norms()) CHECK(norm <= 0.2 + 1e-12);
}

TEST_CASE("dpsgd with sigma=0 equals clip_only bit for bit") {
  Dataset data = toy_regression(32, 6, 9);
  Model a = toy_model(6, 10);
  Model b = a;
  DpConfig dp;
  dp.mode = OptimizerMode::kDpsgd;
  dp.clip_norm = 0.5;
  dp.noise_multiplier = 0.0;
  dp.learning_rate = 0.1;
  DpConfig clip = dp;
  clip.mode = OptimizerMode::kClipOnly;
  RandomStream r1(1), r2(1);
  dp_step(a, data, iota_batch(32), dp, r1);
  dp_step(b, data, iota_batch(32), clip, r2);
  CHECK(flatten(a) == flatten(b));
}

TEST_CASE("dpsgd with generous C and sigma=0 is exactly the sgd step") {
  Dataset data = toy_regression(32, 6, 29);
  Model a = toy_model(6, 30);
  Model b = a;
  DpConfig dp;
  dp.mode = OptimizerMode::kDpsgd;
  dp.clip_norm = 1e9;  // far above any per-example norm
  dp.noise_multiplier = 0.0;
  dp.learning_rate = 0.1;
  DpConfig sgd;
  sgd.mode = OptimizerMode::kSgd;
  sgd.learning_rate = 0.1;
  RandomStream r1(1), r2(1);
  dp_step(a, data, iota_batch(32), dp, r1);
  dp_step(b, data, iota_batch(32), sgd, r2);
  CHECK(flatten(a) == flatten(b));
}

TEST_CASE("dp_step noise has the declared scale") {
  // Deviation of the noisy update from the sigma=0 update, times batch size,
  // should be N(0, (sigma C)^2) per coordinate.
  Dataset data = toy_regression(8, 6, 40);
  Model model = toy_model(6, 41);
  const double c = 0.3, sigma = 1.3;
  const std::size_t batch = 8;

  DpConfig base;
  base.mode = OptimizerMode::kDpsgd;
  base.clip_norm = c;
  base.noise_multiplier = 0.0;
  base.learning_rate = 1.0;
  Model m0 = model;
  RandomStream r0(2);
  dp_step(m0, data, iota_batch(batch), base, r0);
  std::vector<double> theta0 = flatten(model);
  std::vector<double> u0 = flatten(m0);
  for (std::size_t i = 0; i < u0.size(); ++i) u0[i] = theta0[i] - u0[i];  // lr = 1

  DpConfig noisy = base;
  noisy.noise_multiplier = sigma;
  const std::size_t d = u0.size();
  const std::size_t reps = 100000 / d + 1;
  RandomStream noise_rng(77);
  double sum = 0.0, sum_sq = 0.0, sq_dev_sum = 0.0, cross01 = 0.0;
  std::size_t draws = 0;
  for (std::size_t rep = 0; rep < reps; ++rep) {
    Model m = model;
    dp_step(m, data, iota_batch(batch), noisy, noise_rng);
    std::vector<double> u = flatten(m);
    double sq_dev = 0.0;
    std::array<double, 2> first{0.0, 0.0};
    for (std::size_t i = 0; i < d; ++i) {
      double dev = (theta0[i] - u[i]) - u0[i];  // noise * sigma*C / batch
      double scaled = dev * static_cast<double>(batch);
      if (i < 2) first[i] = scaled;
      sum += scaled;
      sum_sq += scaled * scaled;
      sq_dev += dev * dev;
      ++draws;
    }
    cross01 += first[0] * first[1];
    sq_dev_sum += sq_dev;
  }
  double mean = sum / static_cast<double>(draws);
  double std_dev = std::sqrt(sum_sq / static_cast<double>(draws) - mean * mean);
  CHECK(std::abs(mean) <= 4.0 * sigma * c / std::sqrt(static_cast<double>(draws)));
  CHECK(std::abs(std_dev - sigma * c) <= 0.01 * sigma * c);

  // adjacent coordinates are uncorrelated
  double corr01 = cross01 / static_cast<double>(reps) / (sigma * c * sigma * c);
  CHECK(std::abs(corr01) <= 3.0 / std::sqrt(static_cast<double>(reps)));

  // E||update - clipped mean||^2 = d (sigma C / batch)^2, within 2%
  double want = static_cast<double>(d) * std::pow(sigma * c / batch, 2);
  double got = sq_dev_sum / static_cast<double>(reps);
  CHECK(std::abs(got - want) <= 0.02 * want);
}

TEST_CASE("noise is uncorrelated across steps") {
  Dataset data = toy_regression(4, 4, 50);
  Model model = toy_model(4, 51);
  DpConfig cfg;
  cfg.mode = OptimizerMode::kDpsgd;
  cfg.clip_norm = 1.0;
  cfg.noise_multiplier = 1.0;
  cfg.learning_rate = 1.0;
  DpConfig quiet = cfg;
  quiet.noise_multiplier = 0.0;

  Model m0 = model;
  RandomStream r0(3);
  dp_step(m0, data, iota_batch(4), quiet, r0);
  double base = flatten(m0)[0];

  const std::size_t steps = 10000;
  std::vector<double> series(steps);
  RandomStream noise_rng(99);
  for (std::size_t t = 0; t < steps; ++t) {
    Model m = model;  // frozen model isolates the noise sequence
    dp_step(m, data, iota_batch(4), cfg, noise_rng);
    series[t] = flatten(m)[0] - base;
  }
  double mean = 0.0;
  for (double x : series) mean += x;
  mean /= static_cast<double>(steps);
  double num = 0.0, den = 0.0;
  for (std::size_t t = 0; t + 1 < steps; ++t) {
    num += (series[t] - mean) * (series[t + 1] - mean);
  }
  for (double x : series) den += (x - mean) * (x - mean);
  CHECK(std::abs(num / den) <= 3.0 / std::sqrt(static_cast<double>(steps)));
}

TEST_CASE("masked coordinates stay exactly zero through dp steps") {
  Dataset data = toy_regression(32, 6, 60);
  Model model = toy_model(6, 61);
  Tensor mask(model.layers[0].weight.shape());
  for (std::size_t i = 0; i < mask.numel(); ++i) mask[i] = (i % 2) ? 1.0 : 0.0;
  model.layers[0].weight_mask = mask;
  apply_masks(model);

  DpConfig cfg;
  cfg.mode = OptimizerMode::kDpsgd;
  cfg.clip_norm = 0.5;
  cfg.noise_multiplier = 1.0;
  cfg.learning_rate = 0.2;
  RandomStream rng(5);
  for (int step = 0; step < 20; ++step) {
    dp_step(model, data, iota_batch(32), cfg, rng);
    for (std::size_t i = 0; i < mask.numel(); ++i) {
      if (mask[i] == 0.0) CHECK(model.layers[0].weight[i] == 0.0);
    }
  }
}

TEST_CASE("config invariants are enforced") {
  DpConfig cfg;
  cfg.mode = OptimizerMode::kDpsgd;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);  // no C
  cfg.clip_norm = 1.0;
  cfg.noise_multiplier = -0.1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.noise_multiplier = 0.5;
  CHECK_NOTHROW(cfg.validate());

  DpConfig clip;
  clip.mode = OptimizerMode::kClipOnly;
  CHECK_THROWS_AS(clip.validate(), std::invalid_argument);

  PhasePlan plan;
  plan.switch_epoch = 5;
  plan.total_epochs = 3;
  plan.phase1 = cfg;
  plan.phase2 = cfg;
  CHECK_THROWS_AS(plan.validate(), std::invalid_argument);
}

TEST_CASE("phase plan boundary cases use one mode throughout") {
  Dataset data = toy_regression(64, 6, 70);
  DpConfig sgd;
  sgd.mode = OptimizerMode::kSgd;
  sgd.learning_rate = 0.05;
  sgd.batch_size = 32;
  DpConfig clip = sgd;
  clip.mode = OptimizerMode::kClipOnly;
  clip.clip_norm = 0.5;

  PhasePlan plan;
  plan.total_epochs = 3;
  plan.phase1 = sgd;
  plan.phase2 = clip;

  plan.switch_epoch = 0;
  Model a = toy_model(6, 71);
  TrainOptions options;
  options.seed = 1;
  TrainResult r0 = train(a, data, plan, options);
  for (const auto& e : r0.epochs) CHECK(e.mode == "clip_only");

  plan.switch_epoch = 3;
  Model b = toy_model(6, 71);
  TrainResult rT = train(b, data, plan, options);
  for (const auto& e : rT.epochs) CHECK(e.mode == "sgd");
}

TEST_CASE("runs sharing phase 1 agree bit for bit at the switch epoch") {
  Dataset data = toy_regression(96, 6, 80);
  DpConfig sgd;
  sgd.mode = OptimizerMode::kSgd;
  sgd.learning_rate = 0.05;
  sgd.batch_size = 32;
  DpConfig dpsgd;
  dpsgd.mode = OptimizerMode::kDpsgd;
  dpsgd.clip_norm = 0.8;
  dpsgd.noise_multiplier = 0.6;
  dpsgd.learning_rate = 0.1;
  dpsgd.batch_size = 48;

  const std::size_t k = 2, T = 5;
  std::map<std::string, std::vector<double>> at_switch;
  for (const auto& [name1, cfg1] : std::map<std::string, DpConfig>{{"sgd", sgd}, {"dpsgd", dpsgd}}) {
    for (const auto& [name2, cfg2] : std::map<std::string, DpConfig>{{"sgd", sgd}, {"dpsgd", dpsgd}}) {
      Model model = toy_model(6, 81);
      PhasePlan plan;
      plan.switch_epoch = k;
      plan.total_epochs = T;
      plan.phase1 = cfg1;
      plan.phase2 = cfg2;
      TrainOptions options;
      options.seed = 13;
      std::vector<double> snapshot;
      options.on_epoch_end = [&](std::size_t epoch, const Model& m) {
        if (epoch + 1 == k) snapshot = flatten(m);
      };
      train(model, data, plan, options);
      std::string combo = name1 + "-" + name2;
      at_switch[combo] = snapshot;
    }
  }
  CHECK(at_switch["sgd-sgd"] == at_switch["sgd-dpsgd"]);
  CHECK(at_switch["dpsgd-sgd"] == at_switch["dpsgd-dpsgd"]);
  CHECK(at_switch["sgd-sgd"] != at_switch["dpsgd-dpsgd"]);
}

TEST_CASE("metrics writers emit the documented formats") {
  std::vector<StepMetrics> steps(2);
  steps[1].epoch = 1;
  steps[1].step = 7;
  steps[1].loss = 0.25;
  auto dir = std::filesystem::temp_directory_path() / "dplab_opt_test";
  std::filesystem::create_directories(dir);
  std::string path = (dir / "m.jsonl").string();
  write_metrics_jsonl(steps, path);
  std::ifstream f(path);
  std::string line;
  std::size_t lines = 0;
  while (std::getline(f, line)) {
    ++lines;
    CHECK(line.find("\"loss\"") != std::string::npos);
    CHECK(line.find("\"clipped_fraction\"") != std::string::npos);
  }
  CHECK(lines == 2);
  std::remove(path.c_str());

  std::vector<EpochSummary> epochs(1);
  epochs[0].mode = "sgd";
  std::string csv = epoch_summary_csv(epochs);
  CHECK(csv.rfind("epoch,mode,train_loss,test_loss,test_acc,mean_grad_norm,param_l2\n", 0) ==
        0);
}

TEST_CASE("clipped fraction stays in range and is reported") {
  Dataset data = toy_regression(32, 6, 90);
  Model model = toy_model(6, 91);
  DpConfig cfg;
  cfg.mode = OptimizerMode::kClipOnly;
  cfg.clip_norm = 1e-4;  // clip everything
  cfg.learning_rate = 0.01;
  RandomStream rng(1);
  StepMetrics m = dp_step(model, data, iota_batch(32), cfg, rng);
  CHECK(m.clipped_fraction >= 0.0);
  CHECK(m.clipped_fraction <= 1.0);
  CHECK(m.clipped_fraction == 1.0);
  CHECK(m.mean_grad_norm > 0.0);
  CHECK(m.param_l2 > 0.0);
}
