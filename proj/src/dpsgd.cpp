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

#include "ptgan/dpsgd.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace ptgan::dpsgd {

std::vector<double> clip_to_bound(std::span<const double> grad,
                                  double clip_bound) {
  if (!(clip_bound > 0.0) || !std::isfinite(clip_bound)) {
    throw std::invalid_argument("clip_bound must be positive and finite");
  }
  std::vector<double> out(grad.begin(), grad.end());
  const double norm = nn::l2_norm(grad);
  if (!std::isfinite(norm)) {
    throw std::invalid_argument("gradient norm is not finite");
  }
  if (norm <= clip_bound || norm == 0.0) {
    return out;  // unchanged, bit-exact
  }
  // Shave the scale by ~4*dim*eps so the norm recomputed in floating point
  // stays <= clip_bound despite per-component rounding; the bound must hold
  // exactly, not just up to rounding.
  const double shave = 4.0 * std::numeric_limits<double>::epsilon() *
                       static_cast<double>(grad.size() + 2);
  const double scale = (clip_bound / norm) * (1.0 - shave);
  for (double& x : out) x *= scale;
  return out;
}

nn::PerExampleGrads clip_per_example(const nn::PerExampleGrads& grads,
                                     double clip_bound) {
  nn::PerExampleGrads out;
  out.batch_size = grads.batch_size;
  out.param_count = grads.param_count;
  out.grads.reserve(grads.grads.size());
  for (const std::vector<double>& g : grads.grads) {
    out.grads.push_back(clip_to_bound(g, clip_bound));
  }
  return out;
}

std::vector<double> dpsgd_gradient(const nn::PerExampleGrads& grads,
                                   const ClipNoiseConfig& cfg, RngStream& rng,
                                   std::vector<double>* noise_out) {
  if (cfg.batch_size < 1) {
    throw std::invalid_argument("batch_size must be >= 1");
  }
  if (static_cast<std::int64_t>(grads.batch_size) != cfg.batch_size) {
    throw std::invalid_argument(
        "per-example gradient count does not match batch_size");
  }
  if (!(cfg.noise_multiplier >= 0.0)) {
    throw std::invalid_argument("noise_multiplier must be >= 0");
  }
  if (noise_out != nullptr) noise_out->clear();

  std::vector<double> sum(grads.param_count, 0.0);
  for (const std::vector<double>& g : grads.grads) {
    if (g.size() != grads.param_count) {
      throw std::invalid_argument("ragged per-example gradients");
    }
    const std::vector<double> clipped = clip_to_bound(g, cfg.clip_bound);
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += clipped[i];
  }
  if (cfg.noise_multiplier > 0.0) {
    const double sigma0 = cfg.noise_multiplier * cfg.clip_bound;
    if (noise_out != nullptr) noise_out->resize(sum.size());
    for (std::size_t i = 0; i < sum.size(); ++i) {
      const double noise = sigma0 * rng.gaussian();
      sum[i] += noise;
      if (noise_out != nullptr) (*noise_out)[i] = noise;
    }
  }
  const double inv = 1.0 / static_cast<double>(cfg.batch_size);
  for (double& x : sum) x *= inv;
  return sum;
}

}  // namespace ptgan::dpsgd
