// Copyright 2026 The ctnarr Authors
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

#pragma once

// Reproducible randomness.
//
// The generator is std::mt19937_64, whose output sequence is fixed by the C++
// standard. Bounded integers and shuffles are implemented here rather than via
// std::uniform_int_distribution / std::shuffle, which are implementation
// defined. Any implementation following the two rules below reproduces the
// same samples and splits:
//
//   bounded(n):  draw x = next(); reject while x >= 2^64 - (2^64 mod n);
//                return x mod n.
//   shuffle(v):  for i = size-1 down to 1: j = bounded(i + 1); swap(v[i], v[j]).

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace ctn {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform integer in [0, n). n must be positive.
  std::uint64_t bounded(std::uint64_t n) {
    // 2^64 mod n, computed without overflow.
    const std::uint64_t rem = (0 - n) % n;
    const std::uint64_t limit = 0 - rem;  // 2^64 - rem, wraps to 0 when rem == 0
    for (;;) {
      const std::uint64_t x = engine_();
      if (rem == 0 || x < limit) return x % n;
    }
  }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(bounded(i));
      using std::swap;
      swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace ctn
