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

#ifndef PLUME2RATE_DATASET_HPP_
#define PLUME2RATE_DATASET_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "plume2rate/sample.hpp"

namespace plume2rate::data {

// Per-channel min/max fitted on the training split.
struct NormStats {
  std::array<double, kNumChannels> min{};
  std::array<double, kNumChannels> max{};

  nlohmann::json to_json() const;
  static NormStats from_json(const nlohmann::json& j);
  bool operator==(const NormStats&) const = default;
};

NormStats fit_norm_stats(std::span<const Sample> train);

// (x - min) / (max - min) per channel; a degenerate channel maps to 0.
// Targets stay in Mt/yr and out-of-range pixels are not clipped.
Sample normalize(const Sample& sample, const NormStats& stats);
Sample denormalize(const Sample& sample, const NormStats& stats);

struct AugmentOp {
  enum class Kind { kNone, kRot90, kFlipH, kFlipV, kZoom };
  Kind kind = Kind::kNone;
  int quarter_turns = 1;  // kRot90, 1..3, counterclockwise
  double zoom = 1.0;      // kZoom, [0.9, 1.1]

  static AugmentOp none() { return {}; }
  static AugmentOp rot90(int k) { return {Kind::kRot90, k, 1.0}; }
  static AugmentOp flip_h() { return {Kind::kFlipH, 1, 1.0}; }
  static AugmentOp flip_v() { return {Kind::kFlipV, 1, 1.0}; }
  static AugmentOp scale(double s) { return {Kind::kZoom, 1, s}; }
};

// Geometric augmentation. Wind channels are co-transformed as a vector
// field; the target never changes.
Sample augment(const Sample& sample, const AugmentOp& op);

// Uniform draw over {none, rot90 x1..3, flip_h, flip_v, zoom}; zoom is
// skipped when `allow_zoom` is false.
AugmentOp random_augment(std::mt19937_64& rng, bool allow_zoom = true);

enum class Split { kTrain = 0, kValid = 1, kTest = 2 };
std::string_view split_name(Split s);
Split parse_split(std::string_view name);

struct SplitManifest {
  std::map<std::string, Split> assignments;
  std::vector<double> bin_edges;
  std::array<double, 3> ratios{0.70, 0.15, 0.15};
  std::uint64_t seed = 0;

  std::size_t count(Split s) const;
  std::vector<std::string> ids(Split s) const;
  nlohmann::json to_json() const;
  static SplitManifest from_json(const nlohmann::json& j);
  bool operator==(const SplitManifest&) const = default;
};

inline const std::vector<double>& default_bin_edges() {
  static const std::vector<double> edges{0, 5, 10, 15, 20, 30, 60};
  return edges;
}

// Index of the bin [e_k, e_k+1) holding `value` (last bin closed), or -1.
int bin_index(double value, std::span<const double> edges);

// Shuffles each emission bin with `seed` and deals it into
// train/valid/test by largest-remainder rounding of the ratios.
SplitManifest stratified_redistribution(std::span<const Sample> samples,
                                        std::span<const double> bin_edges,
                                        std::array<double, 3> ratios,
                                        std::uint64_t seed);

std::vector<Sample> merge_datasets(std::vector<Sample> simulated,
                                   std::vector<Sample> satellite);

struct Histogram {
  std::vector<double> bin_edges;
  std::vector<std::array<std::size_t, 3>> counts;  // [bin][split]

  std::size_t total() const;
  std::size_t split_total(Split s) const;
  std::string render() const;
};

Histogram dataset_histogram(std::span<const Sample> samples,
                            const SplitManifest& manifest,
                            std::span<const double> bin_edges);

// samples/<id>.f32 (channel-major float32) + samples/<id>.json.
void write_sample(const std::filesystem::path& samples_dir, const Sample& s);
Sample read_sample(const std::filesystem::path& samples_dir, const std::string& id);
// Every sample in the directory, ordered by id.
std::vector<Sample> read_samples(const std::filesystem::path& samples_dir);

}  // namespace plume2rate::data

#endif  // PLUME2RATE_DATASET_HPP_
