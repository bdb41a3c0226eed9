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


#include "plume2rate/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "plume2rate/error.hpp"
#include "plume2rate/io_util.hpp"
#include "plume2rate/nn/layers.hpp"

namespace plume2rate::training {

using data::Sample;
using models::RegressionModel;
using nn::Tensor;

std::string_view loss_name(LossId id) {
  switch (id) {
    case LossId::kMae: return "MAE";
    case LossId::kMape: return "MAPE";
    case LossId::kMse: return "MSE";
    case LossId::kHuber: return "HUBER";
  }
  return "?";
}

LossId parse_loss(std::string_view name) {
  for (LossId id : kAllLosses) {
    if (loss_name(id) == name) return id;
  }
  throw Error(ErrorKind::kConfigError, "unknown loss '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorKind::kConfigError, m); };
  if (losses.empty()) fail("train.losses must not be empty");
  for (std::size_t i = 0; i < losses.size(); ++i) {
    for (std::size_t j = i + 1; j < losses.size(); ++j) {
      if (losses[i] == losses[j]) {
        fail("train.losses lists " + std::string(loss_name(losses[i])) + " twice");
      }
    }
  }
  if (!(huber_delta_mt > 0.0)) fail("train.huber_delta_mt must be positive");
  if (epochs < 1) fail("train.epochs must be >= 1");
  if (batch_size < 1) fail("train.batch_size must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    fail("train.learning_rate must be finite and non-negative");
  }
  if (early_stop_patience < 0) fail("train.early_stop_patience must be >= 0");
}

nlohmann::json TrainConfig::to_json() const {
  nlohmann::json names = nlohmann::json::array();
  for (LossId id : losses) names.push_back(loss_name(id));
  return {{"losses", names},
          {"huber_delta_mt", huber_delta_mt},
          {"epochs", epochs},
          {"batch_size", batch_size},
          {"learning_rate", learning_rate},
          {"early_stop_patience", early_stop_patience},
          {"seed", seed},
          {"augment", augment}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    if (j.contains("losses")) {
      c.losses.clear();
      for (const auto& n : j.at("losses")) c.losses.push_back(parse_loss(n.get<std::string>()));
    }
    c.huber_delta_mt = j.value("huber_delta_mt", c.huber_delta_mt);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.early_stop_patience = j.value("early_stop_patience", c.early_stop_patience);
    c.seed = j.value("seed", c.seed);
    c.augment = j.value("augment", c.augment);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kConfigError, std::string("train: ") + e.what());
  }
  return c;
}

double loss_with_gradient(LossId id, std::span<const double> predictions,
                          std::span<const double> targets, double huber_delta,
                          std::span<double> grad) {
  const std::size_t n = predictions.size();
  if (n == 0 || targets.size() != n) {
    throw Error(ErrorKind::kLengthError,
                "loss over " + std::to_string(n) + " predictions and " +
                    std::to_string(targets.size()) + " targets");
  }
  if (!grad.empty() && grad.size() != n) {
    throw Error(ErrorKind::kLengthError, "gradient buffer has the wrong length");
  }
  const double inv_n = 1.0 / double(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = predictions[i] - targets[i];
    const double sign = (e > 0.0) - (e < 0.0);
    double value = 0.0;
    double slope = 0.0;
    switch (id) {
      case LossId::kMae:
        value = std::abs(e);
        slope = sign;
        break;
      case LossId::kMape:
        if (targets[i] == 0.0) {
          throw Error(ErrorKind::kZeroTargetMAPE,
                      "MAPE undefined for zero target at index " + std::to_string(i));
        }
        value = 100.0 * std::abs(e) / std::abs(targets[i]);
        slope = 100.0 * sign / std::abs(targets[i]);
        break;
      case LossId::kMse:
        value = e * e;
        slope = 2.0 * e;
        break;
      case LossId::kHuber:
        if (std::abs(e) <= huber_delta) {
          value = 0.5 * e * e;
          slope = e;
        } else {
          value = huber_delta * (std::abs(e) - 0.5 * huber_delta);
          slope = huber_delta * sign;
        }
        break;
    }
    total += value;
    if (!grad.empty()) grad[i] = slope * inv_n;
  }
  return total * inv_n;
}

double loss_value(LossId id, std::span<const double> predictions,
                  std::span<const double> targets, double huber_delta) {
  return loss_with_gradient(id, predictions, targets, huber_delta, {});
}

namespace {

// Adam with the usual defaults (beta1 0.9, beta2 0.999, eps 1e-8).
class Adam {
 public:
  Adam(const std::vector<nn::Parameter<float>*>& params, double lr)
      : params_(params), lr_(lr) {
    for (const auto* p : params_) {
      m_.emplace_back(p->value.size(), 0.0f);
      v_.emplace_back(p->value.size(), 0.0f);
    }
  }

  void step() {
    ++t_;
    const double c1 = 1.0 - std::pow(kBeta1, t_);
    const double c2 = 1.0 - std::pow(kBeta2, t_);
    const float step = static_cast<float>(lr_ * std::sqrt(c2) / c1);
    const float eps = static_cast<float>(kEps * std::sqrt(c2));
    for (std::size_t k = 0; k < params_.size(); ++k) {
      auto& p = *params_[k];
      auto& m = m_[k];
      auto& v = v_[k];
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        const float g = p.grad[i];
        m[i] = float(kBeta1) * m[i] + float(1 - kBeta1) * g;
        v[i] = float(kBeta2) * v[i] + float(1 - kBeta2) * g * g;
        p.value[i] -= step * m[i] / (std::sqrt(v[i]) + eps);
      }
    }
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  std::vector<nn::Parameter<float>*> params_;
  double lr_;
  long t_ = 0;
  std::vector<std::vector<float>> m_, v_;
};

// Normalized feature stacks for samples[indices], each optionally
// augmented before normalization.
Tensor<float> assemble(std::span<const Sample> samples, std::span<const std::size_t> indices,
                       const data::NormStats& norm, std::span<const data::AugmentOp> ops) {
  Tensor<float> batch(static_cast<int>(indices.size()), data::kNumChannels, data::kPatchSize,
                      data::kPatchSize);
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const Sample& raw = samples[indices[b]];
    const Sample normalized = ops.empty() ? data::normalize(raw, norm)
                                          : data::normalize(data::augment(raw, ops[b]), norm);
    std::copy(normalized.features.begin(), normalized.features.end(),
              batch.sample(static_cast<int>(b)));
  }
  return batch;
}

std::vector<double> targets_of(std::span<const Sample> samples) {
  std::vector<double> y;
  y.reserve(samples.size());
  for (const auto& s : samples) y.push_back(s.target_mt_per_yr);
  return y;
}

constexpr std::size_t kInferenceBatch = 32;

// Dropout rescales surviving activations, so the moving batch-norm stats
// gathered during optimization overstate the spread seen at inference.
// Re-estimate them on unaugmented training batches with dropout off.
void recalibrate(RegressionModel<float>& net, std::span<const Sample> train,
                 const data::NormStats& norm, std::size_t batch_size) {
  std::vector<std::size_t> idx;
  net.begin_batch_norm_calibration();
  for (std::size_t start = 0; start < train.size(); start += batch_size) {
    const std::size_t end = std::min(train.size(), start + batch_size);
    if (end - start < 2 && start > 0) break;
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    net.forward(assemble(train, idx, norm, {}), nn::Mode::kCalibrate);
  }
  net.finish_batch_norm_calibration();
}

}  // namespace

std::vector<double> member_predict(RegressionModel<float>& model, const data::NormStats& norm,
                                   std::span<const Sample> samples) {
  std::vector<double> out;
  out.reserve(samples.size());
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < samples.size(); start += kInferenceBatch) {
    const std::size_t end = std::min(samples.size(), start + kInferenceBatch);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const auto y = models::forward(model, assemble(samples, idx, norm, {}));
    out.insert(out.end(), y.begin(), y.end());
  }
  return out;
}

TrainResult train_member(const models::ModelConfig& model_config,
                         std::span<const Sample> train, std::span<const Sample> valid,
                         const data::NormStats& norm, LossId loss,
                         const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  if (train.empty() || valid.empty()) {
    throw Error(ErrorKind::kEmptyDataset, "training needs nonempty train and valid splits");
  }
  const std::uint64_t member_seed = cfg.seed + static_cast<std::uint64_t>(loss);
  TrainResult result{models::build_model<float>(model_config, member_seed), {}, 0};
  RegressionModel<float>& net = result.model;
  net.reseed_dropout(member_seed ^ 0x5eedd20fULL);

  const std::vector<double> train_y = targets_of(train);
  const std::vector<double> valid_y = targets_of(valid);
  // Output in units of the target spread, centered on the target mean.
  const double mean_y =
      std::accumulate(train_y.begin(), train_y.end(), 0.0) / double(train_y.size());
  double var_y = 0.0;
  for (double y : train_y) var_y += (y - mean_y) * (y - mean_y);
  const double sd_y = std::sqrt(var_y / double(train_y.size()));
  const double scale = sd_y > 0.0 ? sd_y : std::max(std::abs(mean_y), 1.0);
  net.set_output_scale(static_cast<float>(scale));
  net.head().bias().value[0] = static_cast<float>(mean_y / scale);

  auto valid_mae = [&] {
    return loss_value(LossId::kMae, member_predict(net, norm, valid), valid_y);
  };
  auto check_finite = [](double value, int epoch) {
    if (!std::isfinite(value)) {
      throw Error(ErrorKind::kTrainingDiverged,
                  "non-finite loss at epoch " + std::to_string(epoch));
    }
  };

  const double initial_loss =
      loss_value(loss, member_predict(net, norm, train), train_y, cfg.huber_delta_mt);
  check_finite(initial_loss, 0);
  result.history.push_back({0, initial_loss, valid_mae()});
  if (on_epoch) on_epoch(loss, result.history.back());

  std::mt19937_64 rng(member_seed * 0x9e3779b97f4a7c15ULL + 1);
  Adam adam(net.parameters(), cfg.learning_rate);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<data::AugmentOp> ops;
  std::vector<double> pred, target, grad;

  double best_mae = std::numeric_limits<double>::infinity();
  std::vector<float> best_state;
  int since_best = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    double train_loss = initial_loss;
    // A zero learning rate is a no-op optimization: the model, including
    // its batch-norm statistics, stays at its initial state.
    if (cfg.learning_rate > 0.0) {
      std::shuffle(order.begin(), order.end(), rng);
      double weighted = 0.0;
      std::size_t seen = 0;
      for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
        const std::size_t end = std::min(order.size(), start + cfg.batch_size);
        // Batch norm needs at least two samples per batch.
        if (end - start < 2 && start > 0) break;
        std::span<const std::size_t> idx(order.data() + start, end - start);
        ops.clear();
        if (cfg.augment) {
          for (std::size_t k = 0; k < idx.size(); ++k) ops.push_back(data::random_augment(rng));
        }
        const Tensor<float> batch = assemble(train, idx, norm, ops);
        const Tensor<float> out = net.forward(batch, nn::Mode::kTrain);
        pred.assign(out.data.begin(), out.data.end());
        target.resize(idx.size());
        grad.resize(idx.size());
        for (std::size_t k = 0; k < idx.size(); ++k) target[k] = train_y[idx[k]];
        const double value =
            loss_with_gradient(loss, pred, target, cfg.huber_delta_mt, grad);
        check_finite(value, epoch);
        weighted += value * double(idx.size());
        seen += idx.size();

        Tensor<float> dy(out.n, 1, 1, 1);
        for (std::size_t k = 0; k < idx.size(); ++k) dy.data[k] = static_cast<float>(grad[k]);
        net.zero_grad();
        net.backward(dy);
        adam.step();
      }
      train_loss = weighted / double(seen);
      recalibrate(net, train, norm, cfg.batch_size);
    }
    const double mae = valid_mae();
    check_finite(mae, epoch);
    result.history.push_back({epoch, train_loss, mae});
    if (on_epoch) on_epoch(loss, result.history.back());

    if (mae < best_mae) {
      best_mae = mae;
      best_state = net.state();
      result.best_epoch = epoch;
      since_best = 0;
    } else if (cfg.early_stop_patience > 0 && ++since_best >= cfg.early_stop_patience) {
      break;
    }
  }
  net.load_state(best_state);
  return result;
}

void EnsembleModel::save(const std::filesystem::path& dir,
                         const TrainConfig& train_config) const {
  if (members.empty()) throw Error(ErrorKind::kEmptyEnsemble, "nothing to save");
  nlohmann::json listed = nlohmann::json::array();
  for (const auto& [loss, model] : members) {
    const std::string name(loss_name(loss));
    const auto member_dir = dir / "members" / name;
    std::error_code ec;
    std::filesystem::create_directories(member_dir, ec);
    if (ec) throw Error(ErrorKind::kIoError, "cannot create " + member_dir.string());
    model.save(member_dir / "model.bin");
    io::write_json(member_dir / "model.json",
                   {{"arch", models::arch_name(model.config().arch)},
                    {"config", model.config().to_json()},
                    {"parameter_count", model.parameter_count()},
                    {"loss", name},
                    {"train_seed", train_config.seed + static_cast<std::uint64_t>(loss)},
                    {"optimizer",
                     {{"name", "adam"},
                      {"learning_rate", train_config.learning_rate},
                      {"beta1", 0.9},
                      {"beta2", 0.999},
                      {"eps", 1e-8}}},
                    {"batch_size", train_config.batch_size},
                    {"huber_delta_mt", train_config.huber_delta_mt},
                    {"normstats", "../../normstats.json"}});
    listed.push_back({{"loss", name}, {"checkpoint", "members/" + name + "/model.bin"}});
  }
  io::write_json(dir / "normstats.json", norm.to_json());
  io::write_json(dir / "ensemble.json", {{"model_config", members.front().second.config().to_json()},
                                         {"train_config", train_config.to_json()},
                                         {"members", listed},
                                         {"normstats", "normstats.json"}});
}

EnsembleModel EnsembleModel::load(const std::filesystem::path& dir) {
  const auto manifest = io::read_json(dir / "ensemble.json");
  EnsembleModel ensemble;
  try {
    const auto config = models::ModelConfig::from_json(manifest.at("model_config"));
    ensemble.norm = data::NormStats::from_json(
        io::read_json(dir / manifest.at("normstats").get<std::string>()));
    for (const auto& m : manifest.at("members")) {
      const LossId loss = parse_loss(m.at("loss").get<std::string>());
      auto model = models::build_model<float>(config, 0);
      model.load(dir / m.at("checkpoint").get<std::string>());
      ensemble.members.emplace_back(loss, std::move(model));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kSchemaError, (dir / "ensemble.json").string() + ": " + e.what());
  }
  if (ensemble.members.empty()) {
    throw Error(ErrorKind::kEmptyEnsemble, (dir / "ensemble.json").string() + " lists no members");
  }
  return ensemble;
}

std::vector<double> ensemble_predict(EnsembleModel& ensemble, std::span<const Sample> samples) {
  if (ensemble.members.empty()) throw Error(ErrorKind::kEmptyEnsemble, "ensemble has no members");
  std::vector<double> mean(samples.size(), 0.0);
  for (auto& [loss, model] : ensemble.members) {
    const auto p = member_predict(model, ensemble.norm, samples);
    for (std::size_t i = 0; i < p.size(); ++i) mean[i] += p[i];
  }
  for (double& v : mean) v /= double(ensemble.members.size());
  return mean;
}

}  // namespace plume2rate::training
