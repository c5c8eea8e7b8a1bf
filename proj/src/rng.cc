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

#include "diflens/rng.h"

#include <cmath>
#include <numbers>

namespace diflens {

namespace {
constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;
constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;
}  // namespace

std::uint64_t Mix64(std::uint64_t x) {
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t HashLabel(std::string_view label) {
  std::uint64_t h = kFnvOffset;
  for (const char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= kFnvPrime;
  }
  return h;
}

Stream Stream::ForHashes(std::uint64_t seed,
                         std::initializer_list<std::uint64_t> hashes) {
  std::uint64_t state = Mix64(seed + kGamma);
  for (const std::uint64_t h : hashes) {
    state = Mix64(state ^ (h + kGamma + (state << 6) + (state >> 2)));
  }
  return Stream(state);
}

Stream Stream::For(std::uint64_t seed,
                   std::initializer_list<std::string_view> labels) {
  std::uint64_t state = Mix64(seed + kGamma);
  for (const std::string_view label : labels) {
    const std::uint64_t h = HashLabel(label);
    state = Mix64(state ^ (h + kGamma + (state << 6) + (state >> 2)));
  }
  return Stream(state);
}

std::uint64_t Stream::NextU64() {
  state_ += kGamma;
  return Mix64(state_);
}

double Stream::Uniform() {
  return static_cast<double>(NextU64() >> 11) * 0x1.0p-53;
}

double Stream::UniformOpen() {
  return (static_cast<double>(NextU64() >> 11) + 0.5) * 0x1.0p-53;
}

double Stream::Normal() {
  const double u1 = UniformOpen();
  const double u2 = Uniform();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Stream::Below(std::uint64_t n) {
  // Rejection keeps the draw exactly uniform.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x = NextU64();
  while (x >= limit) x = NextU64();
  return x % n;
}

int Stream::Between(int lo, int hi) {
  return lo + static_cast<int>(Below(static_cast<std::uint64_t>(hi - lo + 1)));
}

}  // namespace diflens
