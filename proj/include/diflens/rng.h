/*
 * Copyright 2026 The diflens Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef DIFLENS_RNG_H_
#define DIFLENS_RNG_H_

#include <cstdint>
#include <initializer_list>
#include <string_view>
#include <utility>
#include <vector>

namespace diflens {

// Keyed counter-based random streams.
//
// A stream is a SplitMix64 sequence: output i is Mix(start + i * kGamma) where
// Mix is the SplitMix64 finalizer. The start state is derived from a 64-bit
// seed and an ordered list of labels (FNV-1a 64 of each label, folded in with
// Mix), so every (seed, labels...) tuple names an independent stream and draws
// never depend on iteration order. Doubles take the top 53 bits. Normal draws
// use Box-Muller on two uniforms, without caching the second variate.
class Stream {
 public:
  explicit Stream(std::uint64_t start) : state_(start) {}

  static Stream For(std::uint64_t seed,
                    std::initializer_list<std::string_view> labels);
  // Stream keyed by pre-hashed labels; used in hot loops.
  static Stream ForHashes(std::uint64_t seed,
                          std::initializer_list<std::uint64_t> hashes);

  std::uint64_t NextU64();
  // Uniform on [0, 1).
  double Uniform();
  // Uniform on (0, 1).
  double UniformOpen();
  double Normal();
  double Normal(double mean, double sd) { return mean + sd * Normal(); }
  // Uniform integer in [0, n); n > 0.
  std::uint64_t Below(std::uint64_t n);
  // Uniform integer in [lo, hi].
  int Between(int lo, int hi);

  template <typename T>
  void Shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(Below(i));
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  std::uint64_t state_;
};

std::uint64_t Mix64(std::uint64_t x);
std::uint64_t HashLabel(std::string_view label);

}  // namespace diflens

#endif  // DIFLENS_RNG_H_
