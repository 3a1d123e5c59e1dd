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

#ifndef PTGAN_RNG_HPP_
#define PTGAN_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ptgan {

// Seedable random stream with named splitting.
//
// Every consumer of randomness in this codebase owns its own RngStream,
// derived from a master seed by a path of string tags (and optional indices).
// Child streams depend only on (base seed, tag, index), never on how many
// draws the parent has made, so adding or removing draws in one component
// cannot shift the sequences seen by any other component.
//
// The bit source is std::mt19937_64, which the C++ standard specifies
// exactly, and the Gaussian transform is hand-rolled Box-Muller, so all
// sequences are bit-identical across platforms for a fixed seed.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed)
      : base_seed_(seed), engine_(Splitmix64(seed)) {}

  // Derives the seed a child stream labeled `tag` (+ index) would use.
  std::uint64_t child_seed(std::string_view tag, std::uint64_t index = 0) const {
    std::uint64_t h = Fnv1a(tag);
    h = Splitmix64(h ^ Splitmix64(base_seed_ + 0x9e3779b97f4a7c15ULL));
    return Splitmix64(h ^ (index + 0x517cc1b727220a95ULL));
  }

  RngStream split(std::string_view tag, std::uint64_t index = 0) const {
    return RngStream(child_seed(tag, index));
  }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform double in [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform double in (0, 1]; never zero, safe as a log() argument.
  double uniform_open() {
    return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;
  }

  // Standard normal draw via Box-Muller. Two uniforms per draw, no cached
  // spare, so the consumption pattern is fixed and replayable.
  double gaussian() {
    const double u1 = uniform_open();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  // Unbiased integer in [0, n) by rejection.
  std::size_t uniform_index(std::size_t n) {
    if (n == 0) throw std::invalid_argument("uniform_index: n must be > 0");
    const std::uint64_t bound = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= bound);
    return static_cast<std::size_t>(x % n);
  }

  // Draws `count` distinct indices from [0, n) by partial Fisher-Yates.
  std::vector<std::size_t> sample_without_replacement(std::size_t n,
                                                      std::size_t count) {
    if (count > n) {
      throw std::invalid_argument(
          "sample_without_replacement: count exceeds population");
    }
    std::vector<std::size_t> pool(n);
    for (std::size_t i = 0; i < n; ++i) pool[i] = i;
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t j = i + uniform_index(n - i);
      std::swap(pool[i], pool[j]);
    }
    pool.resize(count);
    return pool;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    if (v.size() < 2) return;
    for (std::size_t i = v.size() - 1; i > 0; --i) {
      std::swap(v[i], v[uniform_index(i + 1)]);
    }
  }

  std::uint64_t base_seed() const { return base_seed_; }

 private:
  static std::uint64_t Splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  static std::uint64_t Fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    return h;
  }

  std::uint64_t base_seed_;
  std::mt19937_64 engine_;
};

// Configuration errors: inputs that are syntactically fine but semantically
// unusable (inconsistent sizes, out-of-range hyperparameters, bad key names).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ptgan

#endif  // PTGAN_RNG_HPP_
