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

#include "ptgan/data_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "ptgan/rng.hpp"

namespace ptgan::data {
namespace {

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;
constexpr double kPi = 3.14159265358979323846;

std::vector<unsigned char> read_all_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return bytes;
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes,
                        std::size_t offset, const std::string& path) {
  if (offset + 4 > bytes.size()) {
    std::ostringstream msg;
    msg << path << ": truncated header, needed 4 bytes at byte " << offset
        << " but the file holds " << bytes.size();
    throw std::runtime_error(msg.str());
  }
  return (std::uint32_t(bytes[offset]) << 24) |
         (std::uint32_t(bytes[offset + 1]) << 16) |
         (std::uint32_t(bytes[offset + 2]) << 8) |
         std::uint32_t(bytes[offset + 3]);
}

bool parse_double(const std::string& cell, double* out) {
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  while (first != last && (*first == ' ' || *first == '\t')) ++first;
  while (last != first && (last[-1] == ' ' || last[-1] == '\t')) --last;
  if (first == last) return false;
  const auto result = std::from_chars(first, last, *out);
  return result.ec == std::errc() && result.ptr == last;
}

std::vector<std::string> split_cells(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

}  // namespace

std::int64_t Dataset::num_classes() const {
  if (!labels.has_value() || labels->empty()) return 0;
  std::int64_t max_label = 0;
  for (std::int64_t y : *labels) max_label = std::max(max_label, y);
  return max_label + 1;
}

std::pair<Dataset, Dataset> split(const Dataset& ds, const SplitSpec& spec) {
  if (!ds.labeled()) {
    throw ConfigError("split needs a labeled dataset");
  }
  if (ds.size() == 0) throw ConfigError("split: dataset is empty");
  if (!(spec.percent > 0.0) || spec.percent > 1.0) {
    throw ConfigError("percent must be in (0, 1]");
  }
  const std::size_t n = ds.size();
  const auto n_unlabeled = static_cast<std::size_t>(
      std::llround(spec.percent * static_cast<double>(n)));
  if (n_unlabeled == 0) {
    throw ConfigError("percent yields an empty unlabeled pool");
  }
  if (n_unlabeled >= n) {
    throw ConfigError("percent yields an empty labeled set");
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  RngStream rng(spec.seed);
  rng.shuffle(order);

  Dataset unlabeled;
  unlabeled.name = ds.name + "/unlabeled";
  unlabeled.features.reserve(n_unlabeled);
  Dataset labeled;
  labeled.name = ds.name + "/labeled";
  labeled.features.reserve(n - n_unlabeled);
  labeled.labels.emplace();
  labeled.labels->reserve(n - n_unlabeled);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t src = order[i];
    if (i < n_unlabeled) {
      unlabeled.features.push_back(ds.features[src]);
    } else {
      labeled.features.push_back(ds.features[src]);
      labeled.labels->push_back((*ds.labels)[src]);
    }
  }
  return {std::move(labeled), std::move(unlabeled)};
}

Dataset synth_mixture(std::int64_t m, std::int64_t n_per_class, std::int64_t d,
                      double separation, std::uint64_t seed) {
  if (m < 2) throw ConfigError("need at least 2 classes");
  if (n_per_class < 1) throw ConfigError("need at least 1 sample per class");
  if (d < 2) throw ConfigError("mixture needs dimension >= 2");
  if (!(separation >= 0.0)) throw ConfigError("separation must be >= 0");

  RngStream rng(seed);
  Dataset ds;
  ds.name = "synth_mixture";
  ds.labels.emplace();
  ds.features.reserve(static_cast<std::size_t>(m * n_per_class));
  for (std::int64_t c = 0; c < m; ++c) {
    const double angle = 2.0 * kPi * static_cast<double>(c) /
                         static_cast<double>(m);
    for (std::int64_t i = 0; i < n_per_class; ++i) {
      std::vector<double> x(static_cast<std::size_t>(d));
      for (std::int64_t j = 0; j < d; ++j) {
        x[static_cast<std::size_t>(j)] = rng.gaussian();
      }
      x[0] += separation * std::cos(angle);
      x[1] += separation * std::sin(angle);
      ds.features.push_back(std::move(x));
      ds.labels->push_back(c);
    }
  }
  normalize_minmax(ds);
  return ds;
}

Dataset load_idx(const std::string& images_path) {
  const std::vector<unsigned char> bytes = read_all_bytes(images_path);
  const std::uint32_t magic = read_be32(bytes, 0, images_path);
  if (magic != kIdxImagesMagic) {
    std::ostringstream msg;
    msg << images_path << ": bad IDX magic 0x" << std::hex << magic
        << " at byte 0 (expected 0x00000803 for images)";
    throw std::runtime_error(msg.str());
  }
  const std::uint32_t n = read_be32(bytes, 4, images_path);
  const std::uint32_t rows = read_be32(bytes, 8, images_path);
  const std::uint32_t cols = read_be32(bytes, 12, images_path);
  const std::size_t expected = std::size_t(n) * rows * cols;
  if (bytes.size() != 16 + expected) {
    std::ostringstream msg;
    msg << images_path << ": expected " << expected
        << " payload bytes after the 16-byte header, found "
        << (bytes.size() >= 16 ? bytes.size() - 16 : 0) << " (file size "
        << bytes.size() << ")";
    throw std::runtime_error(msg.str());
  }
  Dataset ds;
  ds.name = images_path;
  ds.features.assign(n, std::vector<double>(std::size_t(rows) * cols));
  std::size_t offset = 16;
  for (std::uint32_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < std::size_t(rows) * cols; ++p) {
      ds.features[i][p] =
          static_cast<double>(bytes[offset++]) / 127.5 - 1.0;
    }
  }
  return ds;
}

Dataset load_idx(const std::string& images_path,
                 const std::string& labels_path) {
  Dataset ds = load_idx(images_path);
  const std::vector<unsigned char> bytes = read_all_bytes(labels_path);
  const std::uint32_t magic = read_be32(bytes, 0, labels_path);
  if (magic != kIdxLabelsMagic) {
    std::ostringstream msg;
    msg << labels_path << ": bad IDX magic 0x" << std::hex << magic
        << " at byte 0 (expected 0x00000801 for labels)";
    throw std::runtime_error(msg.str());
  }
  const std::uint32_t n = read_be32(bytes, 4, labels_path);
  if (bytes.size() != 8 + std::size_t(n)) {
    std::ostringstream msg;
    msg << labels_path << ": expected " << n
        << " payload bytes after the 8-byte header, found "
        << (bytes.size() >= 8 ? bytes.size() - 8 : 0) << " (file size "
        << bytes.size() << ")";
    throw std::runtime_error(msg.str());
  }
  if (n != ds.size()) {
    std::ostringstream msg;
    msg << "image/label count mismatch: " << ds.size() << " images vs " << n
        << " labels";
    throw std::runtime_error(msg.str());
  }
  ds.labels.emplace(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    (*ds.labels)[i] = static_cast<std::int64_t>(bytes[8 + i]);
  }
  return ds;
}

Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  Dataset ds;
  ds.name = path;
  ds.labels.emplace();
  std::string line;
  std::size_t line_no = 0;
  std::size_t expected_cols = 0;
  bool first_content_line = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells = split_cells(line);
    if (first_content_line) {
      double probe;
      if (!parse_double(cells[0], &probe)) {
        first_content_line = false;  // header line, skip it
        expected_cols = cells.size();
        continue;
      }
      expected_cols = cells.size();
      first_content_line = false;
    }
    if (cells.size() != expected_cols) {
      std::ostringstream msg;
      msg << path << ": line " << line_no << ": expected " << expected_cols
          << " columns, found " << cells.size();
      throw std::runtime_error(msg.str());
    }
    if (cells.size() < 2) {
      std::ostringstream msg;
      msg << path << ": line " << line_no
          << ": need a label column plus at least one feature";
      throw std::runtime_error(msg.str());
    }
    double label_value;
    if (!parse_double(cells[0], &label_value)) {
      std::ostringstream msg;
      msg << path << ": line " << line_no << ": cannot parse label cell '"
          << cells[0] << "'";
      throw std::runtime_error(msg.str());
    }
    const double rounded = std::nearbyint(label_value);
    if (std::abs(label_value - rounded) > 1e-9 || rounded < 0.0) {
      std::ostringstream msg;
      msg << path << ": line " << line_no << ": label '" << cells[0]
          << "' is not a non-negative integer";
      throw std::runtime_error(msg.str());
    }
    std::vector<double> row(cells.size() - 1);
    for (std::size_t c = 1; c < cells.size(); ++c) {
      if (!parse_double(cells[c], &row[c - 1])) {
        std::ostringstream msg;
        msg << path << ": line " << line_no << ": cannot parse cell " << c + 1
            << " ('" << cells[c] << "')";
        throw std::runtime_error(msg.str());
      }
    }
    ds.features.push_back(std::move(row));
    ds.labels->push_back(static_cast<std::int64_t>(rounded));
  }
  if (ds.features.empty()) {
    throw std::runtime_error(path + ": no data rows");
  }
  return ds;
}

void write_csv(const Dataset& ds, const std::string& path) {
  if (!ds.labeled()) {
    throw std::invalid_argument("write_csv needs a labeled dataset");
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "label";
  for (std::size_t j = 0; j < ds.dim(); ++j) out << ",x" << j;
  out << "\n";
  char buf[40];
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out << (*ds.labels)[i];
    for (double v : ds.features[i]) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      out << ',' << buf;
    }
    out << "\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

void normalize_minmax(Dataset& ds) {
  if (ds.size() == 0) return;
  const std::size_t d = ds.dim();
  for (const auto& row : ds.features) {
    if (row.size() != d) {
      throw std::invalid_argument("normalize_minmax: ragged feature rows");
    }
  }
  for (std::size_t j = 0; j < d; ++j) {
    double lo = ds.features[0][j];
    double hi = lo;
    for (const auto& row : ds.features) {
      lo = std::min(lo, row[j]);
      hi = std::max(hi, row[j]);
    }
    const double mid = 0.5 * (hi + lo);
    const double half = 0.5 * (hi - lo);
    for (auto& row : ds.features) {
      row[j] = half == 0.0 ? 0.0 : (row[j] - mid) / half;
    }
  }
}

}  // namespace ptgan::data
