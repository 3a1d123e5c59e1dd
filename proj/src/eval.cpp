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

#include "ptgan/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "ptgan/rng.hpp"
#include "ptgan/trainer.hpp"

namespace ptgan::eval {
namespace {

constexpr std::size_t kHiddenWidth = 64;
constexpr double kLearningRate = 0.05;
constexpr std::size_t kBatchSize = 32;

nn::RealTensor feature_batch(const data::Dataset& ds,
                             std::span<const std::size_t> rows) {
  nn::RealTensor t = nn::RealTensor::matrix(rows.size(), ds.dim());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < ds.dim(); ++j) {
      t.at(i, j) = ds.features[rows[i]][j];
    }
  }
  return t;
}

}  // namespace

data::Dataset generate_dataset(const nn::DenseNetwork& generator,
                               std::size_t n, std::int64_t num_classes,
                               std::int64_t noise_dim, std::uint64_t seed) {
  if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
  if (noise_dim < 1) throw ConfigError("noise_dim must be >= 1");
  if (generator.input_dim() !=
      static_cast<std::size_t>(noise_dim + num_classes)) {
    throw ConfigError("generator input width != noise_dim + num_classes");
  }
  RngStream rng(seed);
  std::vector<std::vector<double>> zs(n);
  std::vector<std::int64_t> ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    ys[i] = static_cast<std::int64_t>(
        rng.uniform_index(static_cast<std::size_t>(num_classes)));
    zs[i].resize(static_cast<std::size_t>(noise_dim));
    for (auto& v : zs[i]) v = rng.gaussian();
  }
  const nn::RealTensor out = nn::forward(
      generator, train::build_generator_input(zs, ys, num_classes));

  data::Dataset ds;
  ds.name = "synthetic";
  ds.features.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = out.row(i);
    ds.features[i].assign(row.begin(), row.end());
  }
  ds.labels = ys;
  return ds;
}

double binary_auroc(std::span<const double> scores,
                    std::span<const bool> positives) {
  if (scores.size() != positives.size()) {
    throw std::invalid_argument("binary_auroc: size mismatch");
  }
  const std::size_t n = scores.size();
  std::size_t n_pos = 0;
  for (bool p : positives) n_pos += p ? 1 : 0;
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    return std::numeric_limits<double>::quiet_NaN();
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });

  // Sum of positive ranks, with tied scores sharing the average rank of
  // their run; this equals the pairwise win-count with ties at half weight.
  double rank_sum = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based
    for (std::size_t t = i; t < j; ++t) {
      if (positives[order[t]]) rank_sum += avg_rank;
    }
    i = j;
  }
  const double np = static_cast<double>(n_pos);
  const double nn_ = static_cast<double>(n_neg);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn_);
}

EvalReport evaluate(const data::Dataset& synthetic, const data::Dataset& test,
                    std::int64_t epochs, std::uint64_t seed) {
  if (!synthetic.labeled() || !test.labeled()) {
    throw ConfigError("evaluate: both datasets must be labeled");
  }
  if (synthetic.size() == 0 || test.size() == 0) {
    throw ConfigError("evaluate: empty dataset");
  }
  if (synthetic.dim() != test.dim()) {
    throw ConfigError("evaluate: feature widths disagree");
  }
  if (epochs < 1) throw ConfigError("evaluate: epochs must be >= 1");
  const std::int64_t m =
      std::max(synthetic.num_classes(), test.num_classes());
  if (m < 2) throw ConfigError("evaluate: need at least two classes");

  RngStream root(seed);
  nn::DenseNetwork evaluator = nn::init_network(
      {synthetic.dim(), kHiddenWidth, static_cast<std::size_t>(m)},
      nn::Activation::kSoftmaxOutput, root.child_seed("init"));

  std::vector<std::size_t> order(synthetic.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::int64_t e = 0; e < epochs; ++e) {
    RngStream epoch_rng = root.split("epoch", static_cast<std::uint64_t>(e));
    epoch_rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += kBatchSize) {
      const std::size_t stop = std::min(order.size(), start + kBatchSize);
      const std::span<const std::size_t> rows(order.data() + start,
                                              stop - start);
      const nn::RealTensor batch = feature_batch(synthetic, rows);
      std::vector<std::int64_t> labels(rows.size());
      for (std::size_t i = 0; i < rows.size(); ++i) {
        labels[i] = (*synthetic.labels)[rows[i]];
      }
      const auto spec = nn::LossSpec::cross_entropy(labels);
      const std::vector<double> grad =
          nn::batch_gradient(evaluator, batch, spec);
      nn::apply_update(evaluator, grad, kLearningRate);
    }
  }

  std::vector<std::size_t> all(test.size());
  std::iota(all.begin(), all.end(), 0);
  const nn::RealTensor probs =
      nn::forward(evaluator, feature_batch(test, all));

  EvalReport report;
  report.n_synthetic = synthetic.size();
  report.n_test = test.size();
  report.seed = seed;
  report.per_class_accuracy.assign(static_cast<std::size_t>(m), 0.0);
  std::vector<std::size_t> class_totals(static_cast<std::size_t>(m), 0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < probs.cols(); ++c) {
      if (probs.at(i, c) > probs.at(i, best)) best = c;
    }
    const auto label = static_cast<std::size_t>((*test.labels)[i]);
    class_totals[label] += 1;
    if (best == label) {
      correct += 1;
      report.per_class_accuracy[label] += 1.0;
    }
  }
  report.accuracy = static_cast<double>(correct) /
                    static_cast<double>(test.size());
  for (std::size_t c = 0; c < class_totals.size(); ++c) {
    report.per_class_accuracy[c] =
        class_totals[c] > 0
            ? report.per_class_accuracy[c] /
                  static_cast<double>(class_totals[c])
            : 0.0;
  }

  // One-vs-rest AUROC per class. vector<bool> has no contiguous storage, so
  // the flags live in a plain bool buffer the span can view.
  double auroc_sum = 0.0;
  std::size_t auroc_classes = 0;
  std::vector<double> class_scores(test.size());
  const std::unique_ptr<bool[]> flags(new bool[test.size()]);
  for (std::size_t c = 0; c < static_cast<std::size_t>(m); ++c) {
    for (std::size_t i = 0; i < test.size(); ++i) {
      class_scores[i] = probs.at(i, c);
      flags[i] = static_cast<std::size_t>((*test.labels)[i]) == c;
    }
    const double auc =
        binary_auroc(std::span<const double>(class_scores),
                     std::span<const bool>(flags.get(), test.size()));
    if (!std::isnan(auc)) {
      auroc_sum += auc;
      auroc_classes += 1;
    }
  }
  report.auroc_macro =
      auroc_classes > 0 ? auroc_sum / static_cast<double>(auroc_classes)
                        : std::numeric_limits<double>::quiet_NaN();
  return report;
}

}  // namespace ptgan::eval
