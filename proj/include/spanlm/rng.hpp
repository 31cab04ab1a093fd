// Copyright 2026 The spanlm Authors.
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

#include <cmath>
#include <cstdint>
#include <numbers>

namespace spanlm {

// SplitMix64 finalizer (Steele, Lea, Flood 2014).
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Seed for one (epoch, example) corruption draw:
//   h0 = mix64(base)
//   h1 = mix64(h0 ^ (epoch      * 0xd1b54a32d192ed03))
//   h2 = mix64(h1 ^ (example_id * 0xaef17502108ef2d9))
// Each argument passes through a full avalanche round, so a change in any
// of them flips about half of the output bits.
constexpr std::uint64_t epoch_seed(std::uint64_t base, std::uint64_t epoch,
                                   std::uint64_t example_id) {
  std::uint64_t h = mix64(base);
  h = mix64(h ^ (epoch * 0xd1b54a32d192ed03ULL));
  h = mix64(h ^ (example_id * 0xaef17502108ef2d9ULL));
  return h;
}

// Stream salts so that independent consumers of the same example seed
// (masking, replacement, generator sampling, shuffling) never share draws.
inline constexpr std::uint64_t kMaskStream = 0;
inline constexpr std::uint64_t kReplaceStream = 0x5245504c41434521ULL;
inline constexpr std::uint64_t kSampleStream = 0x53414d504c452121ULL;
inline constexpr std::uint64_t kShuffleStream = 0x53485546464c4521ULL;
inline constexpr std::uint64_t kDropoutStream = 0x44524f504f555421ULL;
inline constexpr std::uint64_t kInitStream = 0x494e495449414c21ULL;

// SplitMix64 sequence generator. The draw primitives below are fully
// specified here (no std:: distributions) so results are identical across
// standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 bits of resolution.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n). Rejection sampling removes modulo bias.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  // Standard normal via Box-Muller; one output per pair of uniforms.
  double normal() {
    double u1 = uniform01();
    const double u2 = uniform01();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::uint64_t state() const { return state_; }
  void set_state(std::uint64_t s) { state_ = s; }

 private:
  std::uint64_t state_;
};

}  // namespace spanlm
