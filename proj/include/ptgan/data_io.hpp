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

#ifndef PTGAN_DATA_IO_HPP_
#define PTGAN_DATA_IO_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ptgan::data {

struct Dataset {
  std::vector<std::vector<double>> features;
  std::optional<std::vector<std::int64_t>> labels;
  std::string name;

  std::size_t size() const { return features.size(); }
  std::size_t dim() const { return features.empty() ? 0 : features[0].size(); }
  bool labeled() const { return labels.has_value(); }
  // max label + 1; 0 when unlabeled or empty.
  std::int64_t num_classes() const;
};

struct SplitSpec {
  double percent = 0.8;  // fraction that becomes the unlabeled pool
  std::uint64_t seed = 0;
};

// Deterministic shuffle, then round(percent * n) examples become the
// unlabeled pool S_d (labels discarded) and the rest stay labeled as S_l.
// Returns (S_l, S_d). Throws ConfigError when either side ends up empty or
// the input has no labels.
std::pair<Dataset, Dataset> split(const Dataset& ds, const SplitSpec& spec);

// m-class isotropic Gaussian mixture: class c is centered at
// separation * (cos(2*pi*c/m), sin(2*pi*c/m), 0, ...), std 1, n_per_class
// samples each, then each dimension is affinely rescaled onto [-1, 1].
// Labels follow the exact per-class histogram.
Dataset synth_mixture(std::int64_t m, std::int64_t n_per_class, std::int64_t d,
                      double separation, std::uint64_t seed);

// IDX readers (big-endian, magic 0x00000803 for images / 0x00000801 for
// labels). Pixels map to [-1, 1] via x/127.5 - 1. Parse errors carry byte
// offsets and expected-vs-actual counts.
Dataset load_idx(const std::string& images_path);
Dataset load_idx(const std::string& images_path,
                 const std::string& labels_path);

// CSV: label in the first column, features after. A header line is detected
// by a non-numeric first cell and skipped. Ragged rows and unparsable cells
// raise errors naming the line.
Dataset load_csv(const std::string& path);
void write_csv(const Dataset& ds, const std::string& path);

// Per-dimension affine map onto [-1, 1] ((x - mid)/half, so a dataset whose
// per-dimension min/max already sit at -1/1 passes through bit-exact).
// Constant dimensions map to 0.
void normalize_minmax(Dataset& ds);

}  // namespace ptgan::data

#endif  // PTGAN_DATA_IO_HPP_
