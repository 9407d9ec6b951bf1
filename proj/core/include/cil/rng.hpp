// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace cil {

/// Pinned pseudo-random generator so that orderings, splits and synthetic
/// data are reproducible across platforms and languages.
///
/// State is seeded with four successive SplitMix64 outputs; draws use
/// xoshiro256**. Derived quantities are fixed as:
///   uniform()      = (next() >> 11) * 2^-53
///   below(n)       = floor(next() * n / 2^64)   (128-bit multiply-shift)
///   normal()       = Box-Muller, cos branch only, u1 = 1 - uniform()
///   shuffle(v)     = Fisher-Yates from the back: j = below(i + 1)
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next();
  double uniform();
  std::uint64_t below(std::uint64_t n);
  double normal();

  /// Independent child stream; same (parent seed, tag) gives the same child.
  Rng fork(std::uint64_t tag) const;

  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(values[i - 1], values[j]);
    }
  }

  template <typename T>
  void shuffle(std::vector<T>& values) {
    shuffle(std::span<T>(values));
  }

 private:
  std::uint64_t seed_;
  std::uint64_t s_[4];
};

std::uint64_t splitmix64(std::uint64_t& state);

}  // namespace cil
