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

#include "m2fdp/error.hpp"

namespace m2fdp {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kEmptyLayer: return "EmptyLayer";
    case ErrorCode::kEmptySubnet: return "EmptySubnet";
    case ErrorCode::kTrustInconsistent: return "TrustInconsistent";
    case ErrorCode::kOrphanNode: return "OrphanNode";
    case ErrorCode::kInvalidLayer: return "InvalidLayer";
    case ErrorCode::kUnknownDevice: return "UnknownDevice";
    case ErrorCode::kInvalidHeterogeneity: return "InvalidHeterogeneity";
    case ErrorCode::kZeroSamples: return "ZeroSamples";
    case ErrorCode::kMalformedRow: return "MalformedRow";
    case ErrorCode::kTooFewRows: return "TooFewRows";
    case ErrorCode::kInvalidQ: return "InvalidQ";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kEmptyBatch: return "EmptyBatch";
    case ErrorCode::kDegenerateTrace: return "DegenerateTrace";
    case ErrorCode::kAccountantPremiseViolated: return "AccountantPremiseViolated";
    case ErrorCode::kIncompleteLedger: return "IncompleteLedger";
    case ErrorCode::kOverlappingAggregationSets: return "OverlappingAggregationSets";
    case ErrorCode::kZeroInterval: return "ZeroInterval";
    case ErrorCode::kScheduleViolation: return "ScheduleViolation";
    case ErrorCode::kRateOutOfRange: return "RateOutOfRange";
    case ErrorCode::kInadmissibleStepSize: return "InadmissibleStepSize";
    case ErrorCode::kPreconditionViolated: return "PreconditionViolated";
    case ErrorCode::kInfeasibleConstraints: return "InfeasibleConstraints";
    case ErrorCode::kSearchSpaceTooLarge: return "SearchSpaceTooLarge";
    case ErrorCode::kConfigInvalid: return "ConfigInvalid";
    case ErrorCode::kAxisMismatch: return "AxisMismatch";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace m2fdp
