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

#ifndef PTGAN_AGGREGATION_HPP_
#define PTGAN_AGGREGATION_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "ptgan/nn.hpp"
#include "ptgan/rng.hpp"

namespace ptgan::pate {

// Two-class teacher vote tally for one (x, y) pair: Real means "this pair
// looks like it came from the data", Fake means it does not.
struct VoteHistogram {
  std::int64_t count_real = 0;
  std::int64_t count_fake = 0;
  std::int64_t total() const { return count_real + count_fake; }
};

enum class SampleOrigin { kFromClassifier, kFromGenerator };

enum class Decision { kReal, kFake, kAbstain };

// Hybrid aggregation settings. threshold/sigma1 gate generator-origin
// queries; sigma2 noises the released argmax; teacher_count is the jury size.
struct HyGnmaxConfig {
  double threshold = 0.0;
  double sigma1 = 0.0;
  double sigma2 = 0.0;
  std::int64_t teacher_count = 0;
};

// A candidate pair submitted to the jury.
struct PairSample {
  std::vector<double> x;
  std::int64_t y = 0;
  SampleOrigin origin = SampleOrigin::kFromClassifier;
};

// Runs every teacher on concat(x, one_hot(y)) and tallies score > 0.5 as a
// Real vote. The class count is inferred from the teachers' input width.
// Throws std::invalid_argument on dimension mismatch or out-of-range label.
VoteHistogram collect_votes(std::span<const nn::DenseNetwork> teachers,
                            const PairSample& sample);

// Deterministic argmax of the raw counts; exact ties resolve to Fake.
Decision argmax_label(const VoteHistogram& votes);

// Noisy argmax: adds an independent N(0, sigma^2) draw to each count and
// returns the larger. Never abstains. A (measure-zero) tie after noise
// resolves to Fake, matching argmax_label.
Decision gnmax(const VoteHistogram& votes, double sigma, RngStream& rng);

// Confidence-gated release: one N(0, sigma1^2) draw is added to the maximum
// raw count; if that noisy maximum reaches the threshold the decision is
// gnmax(votes, sigma2), using fresh draws independent of the gate draw.
// Otherwise Abstain. Draw order is fixed: gate first, then the two argmax
// draws when the gate passes.
Decision confident_gnmax(const VoteHistogram& votes, const HyGnmaxConfig& cfg,
                         RngStream& rng);

// The hybrid rule: classifier-origin pairs get the deterministic argmax
// (consumes no randomness); generator-origin pairs go through
// confident_gnmax. Abstention can therefore only happen for generator-origin
// queries.
Decision hygnmax(const VoteHistogram& votes, SampleOrigin origin,
                 const HyGnmaxConfig& cfg, RngStream& rng);

// Soft sanity check on a config: warns (stderr) when the threshold is
// non-positive or unreachably far above teacher_count; never throws for
// that. sigma values must be positive.
void validate_hygnmax_config(const HyGnmaxConfig& cfg, bool warn = true);

}  // namespace ptgan::pate

#endif  // PTGAN_AGGREGATION_HPP_
