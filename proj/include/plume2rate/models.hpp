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

#ifndef PLUME2RATE_MODELS_HPP_
#define PLUME2RATE_MODELS_HPP_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "plume2rate/nn/tensor.hpp"

namespace plume2rate::nn {
template <typename T>
class Dense;
}

namespace plume2rate::models {

enum class Arch { kCnn, kUnet };
std::string_view arch_name(Arch arch);
Arch parse_arch(std::string_view name);

enum class Head { kGlobalAvgPoolDense };

struct ModelConfig {
  Arch arch = Arch::kUnet;
  int base_channels = 32;
  int depth = 4;
  double dropout = 0.2;
  double leaky_slope = 0.1;
  Head head = Head::kGlobalAvgPoolDense;

  static ModelConfig cnn_defaults();
  static ModelConfig unet_defaults();

  // Throws ConfigError.
  void validate() const;
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
  bool operator==(const ModelConfig&) const = default;
};

// Channel width of encoder level `level`: base * 2^level.
inline int level_width(const ModelConfig& c, int level) {
  return c.base_channels << level;
}

template <typename T>
class NetworkBase;

// Either architecture behind one forward/backward contract:
// (B, 4, 64, 64) patches -> (B, 1, 1, 1) emission rates.
template <typename T>
class RegressionModel {
 public:
  RegressionModel(const ModelConfig& config, std::uint64_t seed);
  ~RegressionModel();
  RegressionModel(RegressionModel&&) noexcept;
  RegressionModel& operator=(RegressionModel&&) noexcept;

  const ModelConfig& config() const { return config_; }
  std::size_t parameter_count() const;

  nn::Tensor<T> forward(const nn::Tensor<T>& batch, nn::Mode mode,
                        nn::ForwardTrace* trace = nullptr);
  // Gradient w.r.t. the (B, 1, 1, 1) output of the last forward() in
  // kTrain mode; accumulates into parameter gradients.
  void backward(const nn::Tensor<T>& grad_output);

  const std::vector<nn::Parameter<T>*>& parameters() { return params_; }
  void zero_grad();

  // Flat copy of all parameters followed by batch-norm running stats.
  std::vector<T> state() const;
  void load_state(const std::vector<T>& state);

  // Replaces batch-norm running stats by the plain average of batch
  // statistics over the kCalibrate forwards issued between the two calls,
  // so inference sees the dropout-free activation distribution.
  void begin_batch_norm_calibration();
  void finish_batch_norm_calibration();

  void reseed_dropout(std::uint64_t seed) { dropout_rng_.seed(seed); }
  nn::Dense<T>& head();

  // Outputs are multiplied by a fixed positive scale (default 1); since
  // LeakyReLU is positively homogeneous this rescales the dense layer's
  // pre-activation. Throws InvalidInput.
  void set_output_scale(T scale);
  T output_scale() const;

  void save(const std::filesystem::path& path) const;
  void load(const std::filesystem::path& path);

 private:
  ModelConfig config_;
  std::unique_ptr<NetworkBase<T>> net_;
  std::vector<nn::Parameter<T>*> params_;
  std::vector<nn::Buffer<T>> buffers_;
  std::mt19937_64 dropout_rng_;
  std::size_t calibration_batches_ = 0;
};

template <typename T>
RegressionModel<T> build_cnn(const ModelConfig& config, std::uint64_t seed);
template <typename T>
RegressionModel<T> build_unet(const ModelConfig& config, std::uint64_t seed);
template <typename T>
RegressionModel<T> build_model(const ModelConfig& config, std::uint64_t seed);

// Inference-mode predictions in Mt/yr, one per batch item. Throws
// InvalidInput on non-finite features.
template <typename T>
std::vector<T> forward(RegressionModel<T>& model, const nn::Tensor<T>& batch);

}  // namespace plume2rate::models

#endif  // PLUME2RATE_MODELS_HPP_
