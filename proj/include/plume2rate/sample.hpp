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

#ifndef PLUME2RATE_SAMPLE_HPP_
#define PLUME2RATE_SAMPLE_HPP_

#include <array>
#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "plume2rate/date.hpp"
#include "plume2rate/error.hpp"

namespace plume2rate::data {

inline constexpr int kPatchSize = 64;
inline constexpr int kNumChannels = 4;
inline constexpr int kPixelsPerChannel = kPatchSize * kPatchSize;
inline constexpr int kFeatureCount = kNumChannels * kPixelsPerChannel;

// Fixed channel order of every feature stack.
enum ChannelIndex : int { kXco2 = 0, kNo2 = 1, kWindU = 2, kWindV = 3 };

enum class Source { kSimulated, kSatellite };

inline std::string_view source_name(Source s) {
  return s == Source::kSimulated ? "SIMULATED" : "SATELLITE";
}

inline Source parse_source(std::string_view name) {
  if (name == "SIMULATED") return Source::kSimulated;
  if (name == "SATELLITE") return Source::kSatellite;
  throw Error(ErrorKind::kSchemaError,
              "unknown source '" + std::string(name) + "'");
}

// One training example: a channel-major 4x64x64 feature stack and the
// emission rate of the source at its center pixel.
struct Sample {
  std::string id;
  std::vector<float> features = std::vector<float>(kFeatureCount, 0.0f);
  double target_mt_per_yr = 0.0;
  std::string plant_id;
  Date date;
  Source source = Source::kSimulated;
  double cell_size_km = 2.0;

  std::span<float> channel(int c) {
    return std::span<float>(features).subspan(std::size_t(c) * kPixelsPerChannel,
                                              kPixelsPerChannel);
  }
  std::span<const float> channel(int c) const {
    return std::span<const float>(features).subspan(
        std::size_t(c) * kPixelsPerChannel, kPixelsPerChannel);
  }
  float& at(int c, int i, int j) {
    return features[std::size_t(c) * kPixelsPerChannel + i * kPatchSize + j];
  }
  float at(int c, int i, int j) const {
    return features[std::size_t(c) * kPixelsPerChannel + i * kPatchSize + j];
  }

  // Throws SchemaError when the corpus invariants do not hold.
  void validate() const {
    if (features.size() != std::size_t(kFeatureCount)) {
      throw Error(ErrorKind::kSchemaError,
                  "sample " + id + ": expected 4x64x64 features");
    }
    for (float f : features) {
      if (!std::isfinite(f)) {
        throw Error(ErrorKind::kSchemaError, "sample " + id + ": non-finite feature");
      }
    }
    if (!(target_mt_per_yr > 0.0) || !std::isfinite(target_mt_per_yr)) {
      throw Error(ErrorKind::kSchemaError,
                  "sample " + id + ": target must be positive");
    }
    if (!(cell_size_km > 0.0)) {
      throw Error(ErrorKind::kSchemaError,
                  "sample " + id + ": cell_size_km must be positive");
    }
  }

  bool operator==(const Sample&) const = default;
};

}  // namespace plume2rate::data

#endif  // PLUME2RATE_SAMPLE_HPP_
