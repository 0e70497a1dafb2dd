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

#include <cmath>
#include <numeric>

#include "dplab/dp_optimizer.hpp"
#include "dplab/theory.hpp"

using namespace dplab;

namespace {

GradientBatch batch_of(std::vector<std::vector<double>> rows) {
  return GradientBatch::from_rows(rows);
}

GradientBatch random_batch(std::size_t n, std::size_t d, std::uint64_t seed,
                           double min_norm = 0.0) {
  RandomStream rng(seed);
  GradientBatch b(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = b.row(i);
    double norm = 0.0;
    do {
      rng.fill_gaussian(row);
      norm = l2_norm(row);
    } while (norm == 0.0);
    if (min_norm > 0.0) {
      double target = min_norm * (1.0 + rng.uniform());
      for (double& x : row) x *= target / norm;
    }
  }
  return b;
}

}  // namespace

TEST_CASE("ratio R hand cases") {
  CHECK(ratio_R(batch_of({{2.0, 1.0}, {2.0, 1.0}, {2.0, 1.0}})) == 0.0);
  CHECK(ratio_R(batch_of({{1.0, 0.0}, {0.0, 1.0}})) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(ratio_R(batch_of({{1.0, 2.0}, {-1.0, -2.0}})), std::invalid_argument);
}

TEST_CASE("ratio R is invariant under rescaling and rotation") {
  GradientBatch b = random_batch(12, 5, 31);
  double base = ratio_R(b);

  GradientBatch scaled(12, 5);
  for (std::size_t i = 0; i < 12; ++i) {
    for (std::size_t j = 0; j < 5; ++j) scaled.row(i)[j] = 2.7 * b.row(i)[j];
  }
  CHECK(ratio_R(scaled) == doctest::Approx(base).epsilon(1e-12));

  // Rotate every row by the same Givens rotations.
  GradientBatch rotated = b;
  RandomStream rng(32);
  for (int g = 0; g < 8; ++g) {
    std::size_t p = rng.uniform_int(0, 4), q = 0;
    do { q = rng.uniform_int(0, 4); } while (q == p);
    double angle = 2.0 * rng.uniform() - 1.0;
    double c = std::cos(angle), s = std::sin(angle);
    for (std::size_t i = 0; i < 12; ++i) {
      double xp = rotated.row(i)[p], xq = rotated.row(i)[q];
      rotated.row(i)[p] = c * xp - s * xq;
      rotated.row(i)[q] = s * xp + c * xq;
    }
  }
  CHECK(ratio_R(rotated) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("true clipped gradient") {
  GradientBatch small = batch_of({{0.1, 0.0}, {0.0, 0.2}});
  std::vector<double> mean = small.mean();
  CHECK(clipped_gradient_true(small, 1.0) == mean);

  std::vector<double> c = clipped_gradient_true(batch_of({{3.0, 0.0}, {0.0, 3.0}}), 1.0);
  CHECK(c[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(c[1] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("true clipped gradient agrees with the optimizer's clip") {
  GradientBatch b = random_batch(10, 6, 41);
  std::vector<double> via_theory = clipped_gradient_true(b, 0.7);
  std::vector<double> acc(6, 0.0);
  for (std::size_t i = 0; i < b.size(); ++i) {
    std::vector<double> row(b.row(i).begin(), b.row(i).end());
    clip_to_norm(row, 0.7);
    for (std::size_t j = 0; j < 6; ++j) acc[j] += row[j];
  }
  for (double& x : acc) x /= 10.0;
  for (std::size_t j = 0; j < 6; ++j) {
    CHECK(via_theory[j] == doctest::Approx(acc[j]).epsilon(1e-14));
  }
}

TEST_CASE("surrogate clipped gradient") {
  GradientBatch one = batch_of({{3.0, 4.0}});
  std::vector<double> c = clipped_gradient_surrogate(one, 2.0);
  CHECK(c[0] == doctest::Approx(2.0 * 0.6).epsilon(1e-15));
  CHECK(c[1] == doctest::Approx(2.0 * 0.8).epsilon(1e-15));

  std::vector<double> pair = clipped_gradient_surrogate(batch_of({{3.0, 0.0}, {0.0, 3.0}}), 1.0);
  CHECK(pair[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(pair[1] == doctest::Approx(0.5).epsilon(1e-15));

  CHECK_THROWS_AS(clipped_gradient_surrogate(batch_of({{1.0, 0.0}, {0.0, 0.0}}), 1.0),
                  std::invalid_argument);
}

TEST_CASE("surrogate equals the true clipped gradient when all norms >= C") {
  GradientBatch b = random_batch(9, 4, 51, /*min_norm=*/0.5);
  std::vector<double> t = clipped_gradient_true(b, 0.5);
  std::vector<double> s = clipped_gradient_surrogate(b, 0.5);
  for (std::size_t j = 0; j < 4; ++j) CHECK(std::abs(t[j] - s[j]) <= 1e-12);
}

TEST_CASE("surrogate discrepancy below C equals the sum of per-row differences") {
  GradientBatch b = batch_of({{0.2, 0.0}, {0.0, 3.0}, {1.0, 1.0}});
  const double C = 1.0;
  std::vector<double> t = clipped_gradient_true(b, C);
  std::vector<double> s = clipped_gradient_surrogate(b, C);
  // Per-row difference between surrogate term C g/||g|| and true clipped
  // term g min(1, C/||g||), averaged.
  std::vector<double> want(2, 0.0);
  for (std::size_t i = 0; i < b.size(); ++i) {
    auto row = b.row(i);
    double norm = l2_norm(row);
    double true_scale = std::min(1.0, C / norm);
    for (std::size_t j = 0; j < 2; ++j) {
      want[j] += (C * row[j] / norm - true_scale * row[j]) / 3.0;
    }
  }
  for (std::size_t j = 0; j < 2; ++j) {
    CHECK(s[j] - t[j] == doctest::Approx(want[j]).epsilon(1e-14));
  }
}

TEST_CASE("alignment bound: equality at zero variance") {
  GradientBatch b = batch_of({{1.0, 2.0}, {1.0, 2.0}, {1.0, 2.0}});
  Theorem1Check check = check_alignment_bound(b, 0.8);
  CHECK(check.ratio == 0.0);
  CHECK(std::abs(check.lhs - check.rhs) <= 1e-12);
  CHECK(std::abs(check.lhs - 0.8) <= 1e-12);
  CHECK(check.holds);
}

TEST_CASE("alignment bound: hand-evaluated orthogonal pair") {
  GradientBatch b = batch_of({{1.0, 0.0}, {0.0, 1.0}});
  Theorem1Check check = check_alignment_bound(b, 0.5);
  CHECK(check.lhs == doctest::Approx(0.5 / std::sqrt(2.0)).epsilon(1e-15));
  CHECK(check.rhs == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(check.holds);
  // rows have norm 1 >= C, so the surrogate and true projections agree
  CHECK(check.true_lhs == doctest::Approx(check.lhs).epsilon(1e-14));

  // below C clipping is a no-op, so the true projection is shorter than the
  // surrogate's C-scaled one
  GradientBatch small = batch_of({{0.1, 0.0}, {0.0, 0.1}});
  Theorem1Check below = check_alignment_bound(small, 0.5);
  CHECK(below.true_lhs < below.lhs);
}

TEST_CASE("alignment bound holds over random batches") {
  RandomStream rng(61);
  for (int trial = 0; trial < 1000; ++trial) {
    std::size_t n = 2 + rng.uniform_int(0, 30);
    std::size_t d = 2 + rng.uniform_int(0, 62);
    double c = (trial % 3 == 0) ? 0.1 : (trial % 3 == 1 ? 0.5 : 1.0);
    GradientBatch b = random_batch(n, d, rng.next_u64(), c);
    Theorem1Check check = check_alignment_bound(b, c);
    CHECK(check.holds);
  }
}

TEST_CASE("closed-form optimum hand cases") {
  SyntheticSpec spec;
  spec.v = {1.0};
  spec.sigma = 1.0;
  spec.d_n = 1;
  spec.n = 1;
  std::vector<double> w = closed_form_optimum(spec);
  CHECK(w[0] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(std::abs(w[1]) <= 1e-14);
}

TEST_CASE("closed-form optimum in the noiseless limit") {
  SyntheticSpec spec;
  spec.v = {1.0, 0.0};
  spec.sigma = 0.0;
  spec.d_n = 2;
  spec.n = 1;
  std::vector<double> w = closed_form_optimum(spec);
  CHECK(w == std::vector<double>{1.0, 0.0, 0.0, 0.0});
  // Noiseless inputs are x = (y v, 0): predictions are exactly +-1.
  for (double y : {1.0, -1.0}) {
    std::vector<double> x{y * 1.0, 0.0, 0.0, 0.0};
    CHECK(dot(w, x) == y);
  }
}

TEST_CASE("closed-form optimum satisfies the normal equations") {
  for (std::uint64_t seed : {1ull, 9ull}) {
    SyntheticSpec spec = SyntheticSpec::defaults(seed);
    std::vector<double> w = closed_form_optimum(spec);
    PopulationMoments pm = population_second_moments(spec);
    for (std::size_t i = 0; i < spec.dim(); ++i) {
      double lhs = dot(pm.second_moment.row(i), w);
      CHECK(std::abs(lhs - pm.cross[i]) <= 1e-10);
    }
  }
}

TEST_CASE("pure-noise flow decays toward zero") {
  SyntheticSpec spec;
  spec.v = {0.0, 0.0};
  spec.sigma = 0.5;
  spec.d_n = 6;
  spec.n = 1;
  InitSpec init;
  init.scheme = InitScheme::kBalancedLinear;
  init.balanced_scale = 1.0;
  init.seed = 3;
  Model model = build_two_layer_linear(2, 6, 4, init);
  FlowOptions options;
  options.tol = 1e-12;
  options.max_time = 600.0;
  options.log_every = 100;
  FlowResult flow = population_gradient_flow(model, spec, options);
  double initial = 1.0;  // scale^2
  CHECK(l2_norm(flow.product()) < 0.01 * initial);
  CHECK(flow.trajectory.back().loss < flow.trajectory.front().loss);
}

TEST_CASE("flow converges to the closed-form optimum with conserved balance") {
  SyntheticSpec spec = SyntheticSpec::defaults(71);
  InitSpec init;
  init.scheme = InitScheme::kBalancedLinear;
  init.balanced_scale = 0.5;
  init.seed = 72;
  Model model = build_two_layer_linear(spec.d_s(), spec.d_n, 16, init);
  FlowResult flow = population_gradient_flow(model, spec, FlowOptions{});
  CHECK(flow.converged);
  CHECK(flow.trajectory.back().noise_block_norm <= 1e-6);

  std::vector<double> w = flow.product();
  std::vector<double> w_star = closed_form_optimum(spec);
  double dist2 = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) dist2 += (w[j] - w_star[j]) * (w[j] - w_star[j]);
  CHECK(std::sqrt(dist2) <= 1e-6);

  for (const FlowState& st : flow.trajectory) CHECK(st.balance_residual <= 1e-8);
}

TEST_CASE("raw Euler drift stays within the first-order error bound") {
  SyntheticSpec spec = SyntheticSpec::defaults(81);
  InitSpec init;
  init.scheme = InitScheme::kBalancedLinear;
  init.balanced_scale = 0.5;
  init.seed = 82;
  Model model = build_two_layer_linear(spec.d_s(), spec.d_n, 16, init);
  FlowOptions options;
  options.rebalance = false;
  FlowResult flow = population_gradient_flow(model, spec, options);
  double res0 = flow.trajectory.front().balance_residual;
  double loss_drop = flow.trajectory.front().loss - flow.trajectory.back().loss;
  double max_resid = 0.0;
  for (const FlowState& st : flow.trajectory) {
    max_resid = std::max(max_resid, st.balance_residual);
  }
  // Per-step drift is dt^2 (||G1||^2 - ||G2||^2)-shaped; summed along the
  // trajectory it is bounded by dt * (loss drop). Factor 10 of slack.
  CHECK(max_resid <= res0 + 10.0 * options.dt * loss_drop);
  CHECK(max_resid > 1e-8);  // raw Euler genuinely drifts; the projection is load-bearing
}

TEST_CASE("flow reports divergence with the offending dt") {
  SyntheticSpec spec = SyntheticSpec::defaults(91);
  InitSpec init;
  init.scheme = InitScheme::kBalancedLinear;
  init.balanced_scale = 0.5;
  init.seed = 92;
  Model model = build_two_layer_linear(spec.d_s(), spec.d_n, 16, init);
  FlowOptions options;
  options.dt = 5.0;  // way past the stability limit
  try {
    population_gradient_flow(model, spec, options);
    FAIL("expected divergence");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("dt=5") != std::string::npos);
  }
}

TEST_CASE("flow rejects non-two-layer models") {
  InitSpec init;
  Model mlp = build_mlp({4, 4, 1}, Activation::kTanh, init);
  SyntheticSpec spec;
  spec.v = {1.0, 0.0};
  spec.d_n = 2;
  spec.n = 1;
  CHECK_THROWS_AS(population_gradient_flow(mlp, spec, FlowOptions{}), std::invalid_argument);
}

TEST_CASE("an oracle mask over the noise columns strictly lowers R") {
  // Zeroing the noise-column coordinates of the first-layer rows removes
  // variance without touching the signal mean, so R must drop.
  SyntheticSpec spec = SyntheticSpec::defaults(101);
  spec.n = 512;
  Dataset data = sample_synthetic(spec);
  InitSpec init;
  init.seed = 102;
  Model model = build_two_layer_linear(spec.d_s(), spec.d_n, 8, init);

  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), 0);
  GradientBatch full = per_example_gradients(model, data, all);
  std::size_t m = model.layers[0].weight.rows(), d = spec.dim();

  GradientBatch w1_rows(full.size(), m * d), masked_rows(full.size(), m * d);
  for (std::size_t i = 0; i < full.size(); ++i) {
    for (std::size_t j = 0; j < m * d; ++j) {
      double g = full.row(i)[j];  // W1 block leads the flat layout
      w1_rows.row(i)[j] = g;
      masked_rows.row(i)[j] = (j % d < spec.d_s()) ? g : 0.0;
    }
  }
  CHECK(ratio_R(masked_rows) < ratio_R(w1_rows));
}

TEST_CASE("R under pruning drops for the 0.3 keep fraction") {
  RPruningOptions options;
  options.pretrain_epochs = 10;
  options.train_epoch_cap = 40;
  options.loss_match = 0.3;
  options.train_cfg.mode = OptimizerMode::kSgd;
  options.train_cfg.learning_rate = 0.1;
  options.train_cfg.batch_size = 128;

  SyntheticSpec spec = SyntheticSpec::defaults(111);
  spec.n = 1024;
  std::vector<RPruningPoint> points = R_under_pruning(spec, {1.0, 0.3}, options, 112);
  REQUIRE(points.size() == 2);
  CHECK(points[0].keep_fraction == 1.0);
  CHECK(points[1].ratio < points[0].ratio);
}
