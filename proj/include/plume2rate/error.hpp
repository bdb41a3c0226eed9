/*
 * Copyright 2026 The plume2rate Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef PLUME2RATE_ERROR_HPP_
#define PLUME2RATE_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace plume2rate {

// Every failure the library reports. The CLI maps kinds onto exit codes.
enum class ErrorKind {
  // core_grid
  kGapFillRequired,
  kUnsupportedUpscale,
  kEmptyField,
  kPatchOutOfBounds,
  kGridMismatch,
  // plume_sim
  kSourceOutOfBounds,
  kInvalidCoverage,
  kInvalidScenario,
  // ingest
  kInsufficientSoundings,
  kDegenerateProxy,
  kInvalidProxy,
  // dataset
  kEmptyDataset,
  kInvalidAugment,
  kUnbinnedSample,
  kSchemaError,
  // models / training
  kConfigError,
  kInvalidInput,
  kZeroTargetMAPE,
  kLengthError,
  kTrainingDiverged,
  kEmptyEnsemble,
  // eval_report
  kInvalidTarget,
  kDegenerateR2,
  kZeroBaseline,
  // plumbing
  kIoError,
};

std::string_view ErrorKindName(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(ErrorKindName(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline std::string_view ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kGapFillRequired: return "GapFillRequired";
    case ErrorKind::kUnsupportedUpscale: return "UnsupportedUpscale";
    case ErrorKind::kEmptyField: return "EmptyField";
    case ErrorKind::kPatchOutOfBounds: return "PatchOutOfBounds";
    case ErrorKind::kGridMismatch: return "GridMismatch";
    case ErrorKind::kSourceOutOfBounds: return "SourceOutOfBounds";
    case ErrorKind::kInvalidCoverage: return "InvalidCoverage";
    case ErrorKind::kInvalidScenario: return "InvalidScenario";
    case ErrorKind::kInsufficientSoundings: return "InsufficientSoundings";
    case ErrorKind::kDegenerateProxy: return "DegenerateProxy";
    case ErrorKind::kInvalidProxy: return "InvalidProxy";
    case ErrorKind::kEmptyDataset: return "EmptyDataset";
    case ErrorKind::kInvalidAugment: return "InvalidAugment";
    case ErrorKind::kUnbinnedSample: return "UnbinnedSample";
    case ErrorKind::kSchemaError: return "SchemaError";
    case ErrorKind::kConfigError: return "ConfigError";
    case ErrorKind::kInvalidInput: return "InvalidInput";
    case ErrorKind::kZeroTargetMAPE: return "ZeroTargetMAPE";
    case ErrorKind::kLengthError: return "LengthError";
    case ErrorKind::kTrainingDiverged: return "TrainingDiverged";
    case ErrorKind::kEmptyEnsemble: return "EmptyEnsemble";
    case ErrorKind::kInvalidTarget: return "InvalidTarget";
    case ErrorKind::kDegenerateR2: return "DegenerateR2";
    case ErrorKind::kZeroBaseline: return "ZeroBaseline";
    case ErrorKind::kIoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace plume2rate

#endif  // PLUME2RATE_ERROR_HPP_
