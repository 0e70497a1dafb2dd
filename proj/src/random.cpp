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

#include "dplab/random.hpp"

#include <cmath>
#include <numbers>

namespace dplab {

double RandomStream::gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // u1 in (0, 1] keeps the log finite; u2 in [0, 1).
  double u1 = 1.0 - uniform();
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double angle = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(angle);
  has_spare_ = true;
  return r * std::cos(angle);
}

std::uint64_t RandomStream::derive(std::uint64_t root, std::uint64_t stream_id) {
  // splitmix64 finalizer applied to root advanced by stream_id + 1 steps of
  // the golden-ratio increment.
  std::uint64_t z = root + (stream_id + 1) * 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

void shuffle_indices(std::span<std::size_t> indices, RandomStream& rng) {
  if (indices.empty()) return;
  for (std::size_t i = indices.size() - 1; i > 0; --i) {
    std::size_t j = static_cast<std::size_t>(rng.uniform_int(0, i));
    std::swap(indices[i], indices[j]);
  }
}

}  // namespace dplab
