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

#ifndef PTGAN_EVAL_HPP_
#define PTGAN_EVAL_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "ptgan/data_io.hpp"
#include "ptgan/nn.hpp"

namespace ptgan::eval {

// Labeled synthetic sample: per row, a conditioning label is drawn uniformly,
// then a standard normal noise vector, and the generator maps both to
// features. Deterministic in (generator, n, seed).
data::Dataset generate_dataset(const nn::DenseNetwork& generator,
                               std::size_t n, std::int64_t num_classes,
                               std::int64_t noise_dim, std::uint64_t seed);

// Area under the ROC curve of `scores` against binary `positives`, computed
// with the rank statistic (ties get averaged ranks, which matches the
// pairwise definition counting ties as 1/2). Returns NaN when either class
// is empty.
double binary_auroc(std::span<const double> scores,
                    std::span<const bool> positives);

struct EvalReport {
  double accuracy = 0.0;
  double auroc_macro = 0.0;
  std::vector<double> per_class_accuracy;
  std::size_t n_synthetic = 0;
  std::size_t n_test = 0;
  std::uint64_t seed = 0;
};

// Trains a fresh softmax classifier on the synthetic set and scores it on
// the real test set: overall accuracy, per-class accuracy, and macro
// one-vs-rest AUROC (averaged over classes present in the test set).
// Deterministic in (synthetic, test, epochs, seed).
EvalReport evaluate(const data::Dataset& synthetic, const data::Dataset& test,
                    std::int64_t epochs, std::uint64_t seed);

}  // namespace ptgan::eval

#endif  // PTGAN_EVAL_HPP_
