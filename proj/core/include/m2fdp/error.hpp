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

#ifndef M2FDP_ERROR_HPP_
#define M2FDP_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace m2fdp {

// Every failure the library reports maps to one of these codes. The CLI
// serializes the code name into its machine-readable error document.
enum class ErrorCode {
  kEmptyLayer,
  kEmptySubnet,
  kTrustInconsistent,
  kOrphanNode,
  kInvalidLayer,
  kUnknownDevice,
  kInvalidHeterogeneity,
  kZeroSamples,
  kMalformedRow,
  kTooFewRows,
  kInvalidQ,
  kDimensionMismatch,
  kEmptyBatch,
  kDegenerateTrace,
  kAccountantPremiseViolated,
  kIncompleteLedger,
  kOverlappingAggregationSets,
  kZeroInterval,
  kScheduleViolation,
  kRateOutOfRange,
  kInadmissibleStepSize,
  kPreconditionViolated,
  kInfeasibleConstraints,
  kSearchSpaceTooLarge,
  kConfigInvalid,
  kAxisMismatch,
  kIoError,
  kInvalidArgument,
};

std::string_view ErrorCodeName(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Configuration errors carry the dotted path of the offending field and,
// when validation tripped a library check, that check's code.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& message,
              ErrorCode cause = ErrorCode::kConfigInvalid)
      : Error(ErrorCode::kConfigInvalid, message),
        field_(std::move(field)),
        cause_(cause) {}

  const std::string& field() const noexcept { return field_; }
  ErrorCode cause() const noexcept { return cause_; }

 private:
  std::string field_;
  ErrorCode cause_;
};

}  // namespace m2fdp

#endif  // M2FDP_ERROR_HPP_
