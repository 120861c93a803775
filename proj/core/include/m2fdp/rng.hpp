// Copyright 2026 The M2FDP Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef M2FDP_RNG_HPP_
#define M2FDP_RNG_HPP_

#include <cstdint>
#include <initializer_list>
#include <random>

namespace m2fdp {

// Top-level purposes for stream derivation. Keeping them separate means that
// switching noise on or off never shifts the data or minibatch draws.
enum class StreamPurpose : std::uint64_t {
  kData = 1,
  kInit = 2,
  kMinibatch = 3,
  kParticipation = 4,
  kNoise = 5,
  kProbe = 6,
};

// SplitMix64 finalizer.
constexpr std::uint64_t MixBits(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Folds a run seed, a purpose and a list of coordinates (round, iteration,
// layer, node, ...) into one 64-bit stream key.
std::uint64_t DeriveStreamKey(std::uint64_t seed, StreamPurpose purpose,
                              std::initializer_list<std::uint64_t> coords);

// A reproducible random stream. Two streams built from the same key produce
// identical sequences regardless of which thread owns them.
class RngStream {
 public:
  explicit RngStream(std::uint64_t key) : key_(key), engine_(key) {}
  RngStream(std::uint64_t seed, StreamPurpose purpose,
            std::initializer_list<std::uint64_t> coords)
      : RngStream(DeriveStreamKey(seed, purpose, coords)) {}

  std::uint64_t key() const { return key_; }

  double Uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double Normal() { return normal_(engine_); }
  // Uniform integer in [0, n).
  std::size_t Index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t key_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace m2fdp

#endif  // M2FDP_RNG_HPP_
