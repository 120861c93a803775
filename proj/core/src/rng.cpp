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

#include "m2fdp/rng.hpp"

namespace m2fdp {

std::uint64_t DeriveStreamKey(std::uint64_t seed, StreamPurpose purpose,
                              std::initializer_list<std::uint64_t> coords) {
  // Rotate before every fold so that argument order matters.
  auto fold = [](std::uint64_t h, std::uint64_t v) {
    return MixBits(((h << 17) | (h >> 47)) ^ MixBits(v + 0x632be59bd9b4e019ULL));
  };
  std::uint64_t h = MixBits(seed + 0x9e3779b97f4a7c15ULL);
  h = fold(h, static_cast<std::uint64_t>(purpose));
  for (std::uint64_t c : coords) h = fold(h, c);
  return h;
}

}  // namespace m2fdp
