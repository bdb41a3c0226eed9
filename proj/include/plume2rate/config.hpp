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


#ifndef PLUME2RATE_CONFIG_HPP_
#define PLUME2RATE_CONFIG_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "plume2rate/models.hpp"
#include "plume2rate/plume_sim.hpp"
#include "plume2rate/training.hpp"

namespace plume2rate::config {

struct SimulateSection {
  sim::ScenarioBatch batch;
};

struct IngestSection {
  bool enabled = true;
  // `simulate` also writes a synthetic satellite-style region to raw_dir.
  bool synthesize_raw = true;
  std::filesystem::path raw_dir;  // empty: <data_root>/raw
  int knn_k = 16;
  sim::RegionConfig region;
};

struct DatasetSection {
  std::vector<double> bin_edges = data::default_bin_edges();
  std::array<double, 3> ratios{0.70, 0.15, 0.15};
};

struct TrainSection {
  std::vector<models::Arch> archs{models::Arch::kCnn, models::Arch::kUnet};
  training::TrainConfig train;
  models::ModelConfig cnn = models::ModelConfig::cnn_defaults();
  models::ModelConfig unet = models::ModelConfig::unet_defaults();

  const models::ModelConfig& model(models::Arch arch) const {
    return arch == models::Arch::kCnn ? cnn : unet;
  }
};

enum class Subset { kSimulated, kSatellite, kCombined };
std::string_view subset_key(Subset s);    // "simulated"
std::string_view subset_label(Subset s);  // "Simulated"
Subset parse_subset(std::string_view key);

struct EvaluateSection {
  std::vector<Subset> subsets{Subset::kSimulated, Subset::kSatellite, Subset::kCombined};
  bool plot = true;
};

struct RunConfig {
  std::filesystem::path data_root;
  std::uint64_t seed = 42;
  SimulateSection simulate;
  IngestSection ingest;
  DatasetSection dataset;
  TrainSection train;
  EvaluateSection evaluate;

  // Propagates the global seed into every stochastic stage.
  void apply_seed(std::uint64_t s);
  std::filesystem::path raw_dir() const;

  // Throws ConfigError.
  void validate() const;
  nlohmann::json to_json() const;
  // Unknown keys are rejected. Throws ConfigError.
  static RunConfig from_json(const nlohmann::json& j);
};

// TOML by default; a `.json` extension selects JSON. Throws ConfigError
// or IoError.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig parse_run_config(const std::string& text, bool is_json);

std::string to_toml(const RunConfig& config);

}  // namespace plume2rate::config

#endif  // PLUME2RATE_CONFIG_HPP_
