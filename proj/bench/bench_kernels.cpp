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

// Benchmarks the OpenMP kernels against their serial references and verifies
// bit-identical results while at it.
//
//   ./dplab_bench [repeats]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <numeric>

#include "dplab/grad_eval.hpp"
#include "dplab/landscape.hpp"
#include "dplab/parallel.hpp"
#include "dplab/random.hpp"

using namespace dplab;

namespace {

double time_of(const std::function<void()>& f, int repeats) {
  auto t0 = std::chrono::steady_clock::now();
  for (int r = 0; r < repeats; ++r) f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() /
         repeats;
}

}  // namespace

int main(int argc, char** argv) {
  int repeats = argc > 1 ? std::atoi(argv[1]) : 5;
  std::printf("threads available: %d, repeats per timing: %d\n", max_threads(), repeats);

  // Per-example gradients on an MLP batch.
  InitSpec init;
  init.seed = 1;
  Model model = build_mlp({64, 48, 10}, Activation::kTanh, init);
  Dataset data;
  data.kind = LabelKind::kClass;
  data.inputs = Tensor({512, 64});
  RandomStream rng(2);
  for (std::size_t i = 0; i < data.inputs.numel(); ++i) data.inputs[i] = rng.gaussian();
  data.labels.resize(512);
  for (auto& l : data.labels) l = static_cast<int>(rng.uniform_int(0, 9));
  std::vector<std::size_t> batch(512);
  std::iota(batch.begin(), batch.end(), 0);

  double serial = time_of([&] { per_example_gradients_serial(model, data, batch); }, repeats);
  double parallel = time_of([&] { per_example_gradients(model, data, batch); }, repeats);
  GradientBatch a = per_example_gradients_serial(model, data, batch);
  GradientBatch b = per_example_gradients(model, data, batch);
  bool identical = true;
  for (std::size_t i = 0; i < a.size() && identical; ++i) {
    for (std::size_t j = 0; j < a.dim(); ++j) {
      if (a.row(i)[j] != b.row(i)[j]) {
        identical = false;
        break;
      }
    }
  }
  std::printf("per_example_gradients  512x%zu params: serial %8.2f ms  parallel %8.2f ms  "
              "speedup %.2fx  bit-identical: %s\n",
              model.parameter_count(), serial * 1e3, parallel * 1e3, serial / parallel,
              identical ? "yes" : "NO");

  // Pairwise cosine kernel.
  auto dirs = random_unit_directions(100, 50000, 3);
  double cos_serial = time_of([&] { max_pairwise_abs_cosine_serial(dirs); }, repeats);
  double cos_parallel = time_of([&] { max_pairwise_abs_cosine(dirs); }, repeats);
  bool cos_same = max_pairwise_abs_cosine_serial(dirs) == max_pairwise_abs_cosine(dirs);
  std::printf("max_pairwise_abs_cosine 100x50000:    serial %8.2f ms  parallel %8.2f ms  "
              "speedup %.2fx  bit-identical: %s\n",
              cos_serial * 1e3, cos_parallel * 1e3, cos_serial / cos_parallel,
              cos_same ? "yes" : "NO");
  return identical && cos_same ? 0 : 1;
}
