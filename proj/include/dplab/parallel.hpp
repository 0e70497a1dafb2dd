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

#ifndef DPLAB_PARALLEL_HPP_
#define DPLAB_PARALLEL_HPP_

namespace dplab {

/// Caps the OpenMP worker count (no-op in serial builds). All parallel
/// kernels in this library write into per-item slots and reduce in index
/// order, so results are bit-identical at any thread count; the cap exists
/// for benchmarking and for the single-threaded reproducibility guarantee.
void set_num_threads(int n);
int max_threads();

}  // namespace dplab

#endif  // DPLAB_PARALLEL_HPP_
