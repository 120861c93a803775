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

#ifndef M2FDP_SRC_INTERNAL_FORMAT_HPP_
#define M2FDP_SRC_INTERNAL_FORMAT_HPP_

#include <cstdio>
#include <string>

namespace m2fdp::internal {

// Shortest round-trip-safe rendering used in every emitted file.
inline std::string FormatDouble(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace m2fdp::internal

#endif  // M2FDP_SRC_INTERNAL_FORMAT_HPP_
