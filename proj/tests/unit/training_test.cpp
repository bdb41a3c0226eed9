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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "plume2rate/nn/layers.hpp"
#include "plume2rate/plume_sim.hpp"

namespace plume2rate::training {
namespace {

using data::Sample;

double loss_of(LossId id, std::vector<double> p, std::vector<double> y, double delta = 1.0) {
  return loss_value(id, p, y, delta);
}

TEST(Loss, ZeroAtPerfectPrediction) {
  const std::vector<double> y{1.0, 4.0, 9.5};
  for (LossId id : kAllLosses) EXPECT_EQ(loss_of(id, y, y), 0.0) << loss_name(id);
}

TEST(Loss, HandCases) {
  EXPECT_DOUBLE_EQ(loss_of(LossId::kMape, {110.0}, {100.0}), 10.0);
  EXPECT_DOUBLE_EQ(loss_of(LossId::kHuber, {10.5, 12.0}, {10.0, 10.0}, 1.0), 0.8125);
  EXPECT_DOUBLE_EQ(loss_of(LossId::kMae, {1.0, 5.0}, {2.0, 2.0}), 2.0);
  EXPECT_DOUBLE_EQ(loss_of(LossId::kMse, {1.0, 5.0}, {2.0, 2.0}), 5.0);
}

TEST(Loss, HuberBranchesAgreeAtDelta) {
  for (double delta : {0.5, 1.0, 3.0}) {
    const double at = loss_of(LossId::kHuber, {delta}, {0.0}, delta);
    EXPECT_DOUBLE_EQ(at, 0.5 * delta * delta);
    EXPECT_DOUBLE_EQ(at, delta * (delta - 0.5 * delta));
    const double below = loss_of(LossId::kHuber, {delta - 1e-9}, {0.0}, delta);
    const double above = loss_of(LossId::kHuber, {delta + 1e-9}, {0.0}, delta);
    EXPECT_NEAR(below, at, 1e-8);
    EXPECT_NEAR(above, at, 1e-8);
  }
}

TEST(Loss, NonnegativeAndZeroOnlyWhenExact) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.5, 40.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> p(7), y(7);
    for (auto& v : p) v = u(rng);
    for (auto& v : y) v = u(rng);
    for (LossId id : kAllLosses) EXPECT_GT(loss_of(id, p, y), 0.0);
  }
}

TEST(Loss, GradientMatchesFiniteDifferences) {
  const std::vector<double> y{3.0, 10.0, 0.7, 22.0};
  std::vector<double> p{3.4, 8.2, 0.9, 22.6};
  for (LossId id : kAllLosses) {
    std::vector<double> grad(p.size());
    loss_with_gradient(id, p, y, 1.0, grad);
    for (std::size_t k = 0; k < p.size(); ++k) {
      auto q = p;
      q[k] += 1e-6;
      const double up = loss_of(id, q, y);
      q[k] -= 2e-6;
      const double down = loss_of(id, q, y);
      EXPECT_NEAR(grad[k], (up - down) / 2e-6, 1e-5) << loss_name(id) << " " << k;
    }
  }
}

TEST(Loss, Errors) {
  try {
    loss_of(LossId::kMape, {1.0}, {0.0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kZeroTargetMAPE);
  }
  try {
    loss_of(LossId::kMae, {1.0, 2.0}, {1.0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kLengthError);
  }
  EXPECT_THROW(loss_of(LossId::kMse, {}, {}), Error);
}

TEST(Loss, RmseDominatesMae) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> p(11), y(11, 0.0);
    for (auto& v : p) v = n(rng);
    EXPECT_GE(std::sqrt(loss_of(LossId::kMse, p, y)) + 1e-12, loss_of(LossId::kMae, p, y));
  }
}

TEST(TrainConfig, ValidationAndJson) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(TrainConfig::from_json(c.to_json()), c);
  c.losses = {LossId::kMae, LossId::kMae};
  EXPECT_THROW(c.validate(), Error);
  c = TrainConfig{};
  c.losses.clear();
  EXPECT_THROW(c.validate(), Error);
  c = TrainConfig{};
  c.epochs = 0;
  EXPECT_THROW(c.validate(), Error);
}

struct ToyData {
  std::vector<Sample> train, valid;
  data::NormStats norm;
};

// `encode_target` overwrites the XCO2 channel with a uniform field whose
// level is the target, giving a signal any of the models can pick up.
ToyData toy_data(std::size_t n_train, std::size_t n_valid, std::uint64_t seed,
                 bool encode_target = false) {
  sim::ScenarioBatch batch;
  batch.count = static_cast<int>(n_train + n_valid);
  batch.seed = seed;
  auto samples = sim::simulate_batch(batch);
  if (encode_target) {
    for (auto& s : samples) {
      for (float& f : s.channel(data::kXco2)) f = 400.0f + float(s.target_mt_per_yr);
    }
  }
  ToyData d;
  d.train.assign(samples.begin(), samples.begin() + n_train);
  d.valid.assign(samples.begin() + n_train, samples.end());
  d.norm = data::fit_norm_stats(d.train);
  return d;
}

models::ModelConfig toy_model(models::Arch arch) {
  auto c = arch == models::Arch::kCnn ? models::ModelConfig::cnn_defaults()
                                      : models::ModelConfig::unet_defaults();
  c.base_channels = 2;
  c.depth = 1;
  return c;
}

TEST(TrainMember, ZeroLearningRateIsNoOp) {
  const auto d = toy_data(12, 6, 3);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.learning_rate = 0.0;
  cfg.batch_size = 4;
  auto result = train_member(toy_model(models::Arch::kCnn), d.train, d.valid, d.norm,
                             LossId::kMae, cfg);
  ASSERT_EQ(result.history.size(), 4u);
  for (const auto& rec : result.history) {
    EXPECT_EQ(rec.valid_mae, result.history[0].valid_mae);
  }
  const auto pred = member_predict(result.model, d.norm, d.valid);
  std::vector<double> y;
  for (const auto& s : d.valid) y.push_back(s.target_mt_per_yr);
  EXPECT_DOUBLE_EQ(loss_value(LossId::kMae, pred, y), result.history[0].valid_mae);
}

TEST(TrainMember, EncodedTargetIsLearned) {
  const auto d = toy_data(32, 12, 4, true);
  TrainConfig cfg;
  cfg.epochs = 10;
  cfg.batch_size = 8;
  cfg.learning_rate = 3e-3;
  cfg.early_stop_patience = 0;
  for (models::Arch arch : {models::Arch::kCnn, models::Arch::kUnet}) {
    auto result = train_member(toy_model(arch), d.train, d.valid, d.norm, LossId::kMse, cfg);
    const double initial = result.history.front().valid_mae;
    const double best = result.history[result.best_epoch].valid_mae;
    EXPECT_LT(best, 0.75 * initial) << models::arch_name(arch);
  }
}

TEST(TrainMember, SeedDeterministicHistory) {
  const auto d = toy_data(16, 6, 5);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 8;
  cfg.seed = 9;
  auto run = [&] {
    std::vector<EpochRecord> seen;
    auto result = train_member(toy_model(models::Arch::kUnet), d.train, d.valid, d.norm,
                               LossId::kHuber, cfg,
                               [&](LossId, const EpochRecord& r) { seen.push_back(r); });
    EXPECT_EQ(seen.size(), result.history.size());
    return std::pair{result.history, result.model.state()};
  };
  const auto [h1, s1] = run();
  const auto [h2, s2] = run();
  ASSERT_EQ(h1.size(), h2.size());
  for (std::size_t k = 0; k < h1.size(); ++k) {
    EXPECT_EQ(h1[k].train_loss, h2[k].train_loss);
    EXPECT_EQ(h1[k].valid_mae, h2[k].valid_mae);
  }
  EXPECT_EQ(s1, s2);
}

TEST(TrainMember, EmptySplitsRejected) {
  const auto d = toy_data(4, 2, 6);
  EXPECT_THROW(train_member(toy_model(models::Arch::kCnn), d.train, {}, d.norm, LossId::kMae,
                            TrainConfig{}),
               Error);
}

// Member whose prediction is the constant `value` on every input.
models::RegressionModel<float> constant_member(float value, std::uint64_t seed) {
  auto m = models::build_model<float>(toy_model(models::Arch::kCnn), seed);
  auto& head = m.head();
  std::fill(head.weight().value.begin(), head.weight().value.end(), 0.0f);
  head.bias().value[0] = value;
  return m;
}

TEST(Ensemble, MeanOfMembersAndOrderInvariance) {
  const auto d = toy_data(3, 2, 7);
  EnsembleModel ens;
  ens.norm = d.norm;
  for (int k = 0; k < 4; ++k) {
    ens.members.emplace_back(kAllLosses[k], constant_member(float(k + 1), k));
  }
  const auto p = ensemble_predict(ens, d.valid);
  for (double v : p) EXPECT_DOUBLE_EQ(v, 2.5);
  std::swap(ens.members[0], ens.members[3]);
  std::swap(ens.members[1], ens.members[2]);
  EXPECT_EQ(ensemble_predict(ens, d.valid), p);
}

TEST(Ensemble, IdenticalMembersMatchSingleMember) {
  const auto d = toy_data(3, 4, 8);
  EnsembleModel ens;
  ens.norm = d.norm;
  for (int k = 0; k < 3; ++k) {
    ens.members.emplace_back(kAllLosses[k],
                             models::build_model<float>(toy_model(models::Arch::kUnet), 5));
  }
  const auto single = member_predict(ens.members[0].second, d.norm, d.valid);
  const auto mean = ensemble_predict(ens, d.valid);
  for (std::size_t k = 0; k < mean.size(); ++k) EXPECT_NEAR(mean[k], single[k], 1e-12);
  EnsembleModel empty;
  try {
    ensemble_predict(empty, d.valid);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kEmptyEnsemble);
  }
}

TEST(Ensemble, SaveLoadRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "plume2rate_ensemble";
  std::filesystem::remove_all(dir);
  const auto d = toy_data(3, 3, 9);
  EnsembleModel ens;
  ens.norm = d.norm;
  ens.members.emplace_back(LossId::kMae, constant_member(2.0f, 1));
  ens.members.emplace_back(LossId::kHuber, constant_member(4.0f, 2));
  TrainConfig cfg;
  cfg.losses = {LossId::kMae, LossId::kHuber};
  ens.save(dir, cfg);
  EXPECT_TRUE(std::filesystem::exists(dir / "members" / "MAE" / "model.json"));
  EXPECT_TRUE(std::filesystem::exists(dir / "members" / "HUBER" / "model.bin"));
  auto back = EnsembleModel::load(dir);
  ASSERT_EQ(back.members.size(), 2u);
  EXPECT_EQ(back.members[1].first, LossId::kHuber);
  EXPECT_EQ(back.norm, ens.norm);
  EXPECT_EQ(ensemble_predict(back, d.valid), ensemble_predict(ens, d.valid));
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace plume2rate::training
