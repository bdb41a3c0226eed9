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


#ifndef PLUME2RATE_TRAINING_HPP_
#define PLUME2RATE_TRAINING_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "plume2rate/dataset.hpp"
#include "plume2rate/models.hpp"

namespace plume2rate::training {

enum class LossId { kMae = 0, kMape = 1, kMse = 2, kHuber = 3 };
std::string_view loss_name(LossId id);
LossId parse_loss(std::string_view name);
inline constexpr LossId kAllLosses[] = {LossId::kMae, LossId::kMape, LossId::kMse,
                                        LossId::kHuber};

struct TrainConfig {
  std::vector<LossId> losses{std::begin(kAllLosses), std::end(kAllLosses)};
  double huber_delta_mt = 1.0;
  int epochs = 30;
  int batch_size = 32;
  double learning_rate = 1e-3;
  int early_stop_patience = 8;
  std::uint64_t seed = 0;
  bool augment = true;

  // Throws ConfigError.
  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
  bool operator==(const TrainConfig&) const = default;
};

// Mean loss over the batch. Throws LengthError or ZeroTargetMAPE.
double loss_value(LossId id, std::span<const double> predictions,
                  std::span<const double> targets, double huber_delta = 1.0);

// Same value; also writes d(loss)/d(prediction) into `grad`.
double loss_with_gradient(LossId id, std::span<const double> predictions,
                          std::span<const double> targets, double huber_delta,
                          std::span<double> grad);

struct EpochRecord {
  int epoch = 0;  // 0 is the initialized model before any update
  double train_loss = 0.0;
  double valid_mae = 0.0;
};

struct TrainResult {
  models::RegressionModel<float> model;
  std::vector<EpochRecord> history;
  int best_epoch = 0;
};

using EpochCallback = std::function<void(LossId, const EpochRecord&)>;

// `train` and `valid` hold raw samples; each batch is augmented first
// and then normalized with `norm`. Member initialization uses
// train_config.seed + the loss index. Throws TrainingDiverged.
TrainResult train_member(const models::ModelConfig& model_config,
                         std::span<const data::Sample> train,
                         std::span<const data::Sample> valid,
                         const data::NormStats& norm, LossId loss,
                         const TrainConfig& train_config,
                         const EpochCallback& on_epoch = {});

struct EnsembleModel {
  std::vector<std::pair<LossId, models::RegressionModel<float>>> members;
  data::NormStats norm;

  // Writes ensemble.json and members/<loss>/model.{bin,json}.
  void save(const std::filesystem::path& dir, const TrainConfig& train_config) const;
  static EnsembleModel load(const std::filesystem::path& dir);
};

// Predictions of one member on raw samples, in inference mode.
std::vector<double> member_predict(models::RegressionModel<float>& model,
                                   const data::NormStats& norm,
                                   std::span<const data::Sample> samples);

// Mean of member predictions per sample. Throws EmptyEnsemble.
std::vector<double> ensemble_predict(EnsembleModel& ensemble,
                                     std::span<const data::Sample> samples);

}  // namespace plume2rate::training

#endif  // PLUME2RATE_TRAINING_HPP_
