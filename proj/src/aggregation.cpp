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

#include "ptgan/aggregation.hpp"

#include <algorithm>
#include <iostream>
#include <sstream>
#include <stdexcept>

namespace ptgan::pate {

VoteHistogram collect_votes(std::span<const nn::DenseNetwork> teachers,
                            const PairSample& sample) {
  if (teachers.empty()) {
    throw std::invalid_argument("collect_votes: no teachers");
  }
  const std::size_t input_dim = teachers.front().input_dim();
  if (input_dim <= sample.x.size()) {
    std::ostringstream msg;
    msg << "teacher input width " << input_dim
        << " leaves no room for a one-hot label after " << sample.x.size()
        << " features";
    throw std::invalid_argument(msg.str());
  }
  const std::size_t num_classes = input_dim - sample.x.size();
  if (sample.y < 0 || static_cast<std::size_t>(sample.y) >= num_classes) {
    std::ostringstream msg;
    msg << "label " << sample.y << " out of range for " << num_classes
        << " classes";
    throw std::invalid_argument(msg.str());
  }
  nn::RealTensor input = nn::RealTensor::matrix(1, input_dim);
  std::copy(sample.x.begin(), sample.x.end(), input.values.begin());
  input.values[sample.x.size() + static_cast<std::size_t>(sample.y)] = 1.0;

  VoteHistogram votes;
  for (const nn::DenseNetwork& teacher : teachers) {
    if (teacher.input_dim() != input_dim || teacher.output_dim() != 1) {
      throw std::invalid_argument(
          "all teachers must share input width and emit one score");
    }
    const double score = nn::forward(teacher, input).values[0];
    if (score > 0.5) {
      ++votes.count_real;
    } else {
      ++votes.count_fake;
    }
  }
  return votes;
}

Decision argmax_label(const VoteHistogram& votes) {
  return votes.count_real > votes.count_fake ? Decision::kReal
                                             : Decision::kFake;
}

Decision gnmax(const VoteHistogram& votes, double sigma, RngStream& rng) {
  if (!(sigma > 0.0)) {
    throw std::invalid_argument("gnmax sigma must be > 0");
  }
  const double noisy_real =
      static_cast<double>(votes.count_real) + sigma * rng.gaussian();
  const double noisy_fake =
      static_cast<double>(votes.count_fake) + sigma * rng.gaussian();
  return noisy_real > noisy_fake ? Decision::kReal : Decision::kFake;
}

Decision confident_gnmax(const VoteHistogram& votes, const HyGnmaxConfig& cfg,
                         RngStream& rng) {
  if (!(cfg.sigma1 > 0.0) || !(cfg.sigma2 > 0.0)) {
    throw std::invalid_argument("sigma1 and sigma2 must be > 0");
  }
  const double max_count =
      static_cast<double>(std::max(votes.count_real, votes.count_fake));
  const double gate = max_count + cfg.sigma1 * rng.gaussian();
  if (gate >= cfg.threshold) {
    return gnmax(votes, cfg.sigma2, rng);
  }
  return Decision::kAbstain;
}

Decision hygnmax(const VoteHistogram& votes, SampleOrigin origin,
                 const HyGnmaxConfig& cfg, RngStream& rng) {
  if (origin == SampleOrigin::kFromClassifier) {
    return argmax_label(votes);
  }
  return confident_gnmax(votes, cfg, rng);
}

void validate_hygnmax_config(const HyGnmaxConfig& cfg, bool warn) {
  if (!(cfg.sigma1 > 0.0) || !(cfg.sigma2 > 0.0)) {
    throw std::invalid_argument("sigma1 and sigma2 must be > 0");
  }
  if (cfg.teacher_count < 1) {
    throw std::invalid_argument("teacher_count must be >= 1");
  }
  if (warn) {
    const double reachable =
        static_cast<double>(cfg.teacher_count) + 6.0 * cfg.sigma1;
    if (cfg.threshold <= 0.0) {
      std::cerr << "warning: threshold " << cfg.threshold
                << " is non-positive; the confidence gate always passes\n";
    } else if (cfg.threshold > reachable) {
      std::cerr << "warning: threshold " << cfg.threshold
                << " exceeds teacher_count + 6*sigma1 (" << reachable
                << "); nearly every generator query will abstain\n";
    }
  }
}

}  // namespace ptgan::pate
