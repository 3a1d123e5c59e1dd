// Copyright 2026 The ptgan Authors
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

#ifndef PTGAN_DPSGD_HPP_
#define PTGAN_DPSGD_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "ptgan/nn.hpp"
#include "ptgan/rng.hpp"

namespace ptgan::dpsgd {

struct ClipNoiseConfig {
  double clip_bound = 1.0;        // R > 0
  double noise_multiplier = 0.0;  // z >= 0 (0 = noiseless, for testing)
  std::int64_t batch_size = 0;    // divisor of the released average
};

// L2 clipping: g * min(1, R/||g||). Inputs already within the bound are
// returned bit-exact. When a vector is rescaled, the recomputed
// floating-point norm is guaranteed <= R (the scale carries a ~dim*eps
// shave so rounding cannot push it back over).
std::vector<double> clip_to_bound(std::span<const double> grad,
                                  double clip_bound);
nn::PerExampleGrads clip_per_example(const nn::PerExampleGrads& grads,
                                     double clip_bound);

// The DPSGD release: (sum of clipped per-example gradients
// + N(0, (z*R)^2 * I)) / batch_size. Noise is added to the sum, before the
// average, so the L2 sensitivity of the noised sum is exactly R under
// remove-one adjacency. grads.batch_size must equal cfg.batch_size.
// If noise_out is non-null, the exact noise vector added is copied there
// (empty when z == 0, which draws nothing).
std::vector<double> dpsgd_gradient(const nn::PerExampleGrads& grads,
                                   const ClipNoiseConfig& cfg, RngStream& rng,
                                   std::vector<double>* noise_out = nullptr);

}  // namespace ptgan::dpsgd

#endif  // PTGAN_DPSGD_HPP_
