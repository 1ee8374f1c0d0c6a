// Copyright 2026 The dupsista Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Seeded randomness.
//
// Generator: xoshiro256** (Blackman & Vigna), state filled from a SplitMix64
// expansion of the 64-bit seed. Gaussian samples use the Box-Muller
// transform on two 53-bit uniforms; the second variate of each pair is
// cached. Integer streams are identical on every platform; Gaussian values
// additionally depend on the platform's std::log/std::cos/std::sin.
//
// Substreams are keyed by (seed, k1, k2, ...): the key tuple is folded into
// a single 64-bit seed by repeated SplitMix64 finalization, so any member of
// an ensemble can be regenerated without drawing its predecessors.

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <optional>

#include "dupsista/core.hpp"

namespace dupsista {

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
  return (x << k) | (x >> (64 - k));
}

}  // namespace detail

/// Roles for substream derivation. Values are part of the stream identity
/// and must not be renumbered.
enum class StreamRole : std::uint64_t {
  ObservationMatrix = 1,
  Sketch = 2,
  Signal = 3,
  Noise = 4,
  Training = 5,
  Evaluation = 6,
  Diagnostic = 7,
  Benchmark = 8,
};

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed) {
    std::uint64_t sm = seed;
    for (auto& s : state_) s = detail::splitmix64(sm);
  }

  /// Independent generator for the key path (seed, keys...).
  static Rng substream(std::uint64_t seed,
                       std::initializer_list<std::uint64_t> keys) {
    return Rng(derive_seed(seed, keys));
  }

  static std::uint64_t derive_seed(std::uint64_t seed,
                                   std::initializer_list<std::uint64_t> keys) {
    std::uint64_t st = seed ^ 0x6A09E667F3BCC909ULL;
    std::uint64_t h = detail::splitmix64(st);
    for (std::uint64_t k : keys) {
      st = h ^ (k * 0xD1B54A32D192ED03ULL + 0x8CB92BA72F3D8DD7ULL);
      h = detail::splitmix64(st);
    }
    return h;
  }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t draws() const noexcept { return draws_; }

  std::uint64_t next_u64() noexcept {
    ++draws_;
    const std::uint64_t result = detail::rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = detail::rotl(state_[3], 45);
    return result;
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [0, bound), Lemire's nearly-divisionless method.
  std::uint64_t uniform_index(std::uint64_t bound) {
    detail::require(bound > 0, "uniform_index: bound must be positive");
    std::uint64_t x = next_u64();
    __uint128_t m = static_cast<__uint128_t>(x) * bound;
    std::uint64_t low = static_cast<std::uint64_t>(m);
    if (low < bound) {
      const std::uint64_t threshold = (0 - bound) % bound;
      while (low < threshold) {
        x = next_u64();
        m = static_cast<__uint128_t>(x) * bound;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  /// Standard normal via Box-Muller.
  double standard_normal() {
    if (cached_) {
      const double z = *cached_;
      cached_.reset();
      return z;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    cached_ = r * std::sin(theta);
    return r * std::cos(theta);
  }

 private:
  std::uint64_t seed_;
  std::uint64_t draws_ = 0;
  std::array<std::uint64_t, 4> state_{};
  std::optional<double> cached_;
};

inline double gaussian(Rng& rng, double mean, double variance) {
  detail::require(variance >= 0.0 && std::isfinite(variance),
                  "gaussian: variance must be finite and non-negative, got ",
                  variance);
  return mean + std::sqrt(variance) * rng.standard_normal();
}

inline bool bernoulli(Rng& rng, double p) {
  detail::require(p >= 0.0 && p <= 1.0, "bernoulli: p must lie in [0,1], got ",
                  p);
  return rng.uniform() < p;
}

inline Matrix gaussian_matrix(Rng& rng, std::size_t rows, std::size_t cols,
                              double variance = 1.0) {
  detail::require(variance >= 0.0, "gaussian_matrix: negative variance");
  Matrix M(rows, cols);
  const double sd = std::sqrt(variance);
  double* p = M.data();
  for (std::size_t i = 0; i < rows * cols; ++i) p[i] = sd * rng.standard_normal();
  return M;
}

}  // namespace dupsista
