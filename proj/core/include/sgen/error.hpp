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

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sgen {

enum class ErrorCode {
  kNonOnehotRow,
  kLabelOnAbsentPart,
  kAsymmetricE,
  kSelfLoop,
  kEdgeOnAbsentPart,
  kRowCountMismatch,
  kDegenerateCloud,
  kNoExistingPart,
  kIoError,
  kSchemaVersionMismatch,
  kCorruptRecord,
  kGeometryInfeasible,
  kMissingGradient,
  kNondeterministicLoss,
  kNonfiniteState,
  kInvalidRange,
  kCheckpointMismatch,
  kEmptyCloud,
  kSizeMismatch,
  kEmptySet,
  kUndertrainedPredictor,
  kDatasetInvalid,
  kNonfiniteLoss,
  kPredictorRequired,
  kInvalidArgument,
};

// Upper-snake name, e.g. "ASYMMETRIC_E".
std::string_view error_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace sgen
