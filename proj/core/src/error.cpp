// Copyright 2026 The sgen Authors
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

#include "sgen/error.hpp"

namespace sgen {

std::string_view error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNonOnehotRow: return "NON_ONEHOT_ROW";
    case ErrorCode::kLabelOnAbsentPart: return "LABEL_ON_ABSENT_PART";
    case ErrorCode::kAsymmetricE: return "ASYMMETRIC_E";
    case ErrorCode::kSelfLoop: return "SELF_LOOP";
    case ErrorCode::kEdgeOnAbsentPart: return "EDGE_ON_ABSENT_PART";
    case ErrorCode::kRowCountMismatch: return "ROW_COUNT_MISMATCH";
    case ErrorCode::kDegenerateCloud: return "DEGENERATE_CLOUD";
    case ErrorCode::kNoExistingPart: return "NO_EXISTING_PART";
    case ErrorCode::kIoError: return "IO_ERROR";
    case ErrorCode::kSchemaVersionMismatch: return "SCHEMA_VERSION_MISMATCH";
    case ErrorCode::kCorruptRecord: return "CORRUPT_RECORD";
    case ErrorCode::kGeometryInfeasible: return "GEOMETRY_INFEASIBLE";
    case ErrorCode::kMissingGradient: return "MISSING_GRADIENT";
    case ErrorCode::kNondeterministicLoss: return "NONDETERMINISTIC_LOSS";
    case ErrorCode::kNonfiniteState: return "NONFINITE_STATE";
    case ErrorCode::kInvalidRange: return "INVALID_RANGE";
    case ErrorCode::kCheckpointMismatch: return "CHECKPOINT_MISMATCH";
    case ErrorCode::kEmptyCloud: return "EMPTY_CLOUD";
    case ErrorCode::kSizeMismatch: return "SIZE_MISMATCH";
    case ErrorCode::kEmptySet: return "EMPTY_SET";
    case ErrorCode::kUndertrainedPredictor: return "UNDERTRAINED_PREDICTOR";
    case ErrorCode::kDatasetInvalid: return "DATASET_INVALID";
    case ErrorCode::kNonfiniteLoss: return "NONFINITE_LOSS";
    case ErrorCode::kPredictorRequired: return "PREDICTOR_REQUIRED";
    case ErrorCode::kInvalidArgument: return "INVALID_ARGUMENT";
  }
  return "UNKNOWN";
}

Error::Error(ErrorCode code, const std::string& detail)
    : std::runtime_error(std::string(error_name(code)) + ": " + detail), code_(code) {}

}  // namespace sgen
