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


#include "plume2rate/models.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "oracles.hpp"
#include "plume2rate/error.hpp"
#include "plume2rate/nn/layers.hpp"

namespace plume2rate::models {
namespace {

using nn::Mode;
using nn::Tensor;

ModelConfig toy(Arch arch, int base = 4, int depth = 2) {
  ModelConfig c = arch == Arch::kCnn ? ModelConfig::cnn_defaults() : ModelConfig::unet_defaults();
  c.base_channels = base;
  c.depth = depth;
  return c;
}

Tensor<float> random_batch(int n, std::uint64_t seed) {
  Tensor<float> x(n, 4, 64, 64);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (float& v : x.data) v = u(rng);
  return x;
}

std::size_t conv_bn(int in, int out) { return std::size_t(in) * out * 9 + 2 * out; }

std::size_t expected_cnn_params(const ModelConfig& c) {
  std::size_t n = 0;
  int in = 4;
  for (int l = 0; l < c.depth; ++l) {
    const int w = c.base_channels << l;
    n += conv_bn(in, w);
    in = w;
  }
  const int side = 64 >> c.depth;
  return n + std::size_t(in) * side * side + 1;
}

std::size_t expected_unet_params(const ModelConfig& c) {
  std::size_t n = 0;
  int in = 4;
  for (int l = 0; l < c.depth; ++l) {
    const int w = c.base_channels << l;
    n += conv_bn(in, w) + conv_bn(w, w);
    in = w;
  }
  const int bottom = c.base_channels << c.depth;
  n += conv_bn(in, bottom) + conv_bn(bottom, bottom);
  for (int l = 0; l < c.depth; ++l) {
    const int w = c.base_channels << l;
    const int deeper = w * 2;
    n += std::size_t(deeper) * deeper * 9 + deeper;  // up-conv with bias
    n += conv_bn(deeper + w, w) + conv_bn(w, w);
  }
  return n + c.base_channels + 1;
}

TEST(ModelConfig, Defaults) {
  EXPECT_EQ(ModelConfig::cnn_defaults().dropout, 0.3);
  EXPECT_EQ(ModelConfig::unet_defaults().dropout, 0.2);
  EXPECT_EQ(ModelConfig::unet_defaults().base_channels, 32);
  EXPECT_EQ(ModelConfig::unet_defaults().depth, 4);
  EXPECT_EQ(ModelConfig::unet_defaults().leaky_slope, 0.1);
}

TEST(ModelConfig, ValidationAndJson) {
  ModelConfig c = ModelConfig::unet_defaults();
  c.depth = 0;
  EXPECT_THROW(c.validate(), Error);
  c.depth = 7;  // 64 is not divisible by 128
  EXPECT_THROW(c.validate(), Error);
  c = ModelConfig::cnn_defaults();
  c.dropout = 1.0;
  EXPECT_THROW(c.validate(), Error);
  c = toy(Arch::kCnn, 8, 3);
  EXPECT_EQ(ModelConfig::from_json(c.to_json()), c);
  try {
    build_cnn<float>(toy(Arch::kUnet), 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfigError);
  }
}

TEST(Cnn, PreFlattenShapeAtDefaultWidths) {
  auto model = build_cnn<float>(ModelConfig::cnn_defaults(), 1);
  nn::ForwardTrace trace;
  const auto y = model.forward(random_batch(2, 2), Mode::kInfer, &trace);
  const auto* pre = trace.find("cnn.pre_flatten");
  ASSERT_NE(pre, nullptr);
  EXPECT_EQ(pre->shape, (std::array<int, 4>{2, 256, 4, 4}));
  EXPECT_EQ(y.shape(), (std::array<int, 4>{2, 1, 1, 1}));
}

TEST(Cnn, OutputShapeForAnyBatch) {
  auto model = build_cnn<float>(toy(Arch::kCnn), 3);
  for (int b : {1, 2, 5}) EXPECT_EQ(forward(model, random_batch(b, b)).size(), std::size_t(b));
}

TEST(Unet, DecoderChannelArithmeticAndSkips) {
  ModelConfig c = ModelConfig::unet_defaults();
  c.depth = 1;  // the only decoder level consumes the level-0 skip
  auto model = build_unet<float>(c, 4);
  nn::ForwardTrace trace;
  const auto x = random_batch(1, 5);
  const auto y = model.forward(x, Mode::kInfer, &trace);
  EXPECT_EQ(trace.find("dec0.up")->shape, (std::array<int, 4>{1, 64, 64, 64}));
  EXPECT_EQ(trace.find("dec0.concat")->shape, (std::array<int, 4>{1, 96, 64, 64}));
  EXPECT_EQ(trace.find("dec0.out")->shape, (std::array<int, 4>{1, 32, 64, 64}));
  EXPECT_EQ(y.size(), 1u);
}

TEST(Unet, EachDecoderLevelConsumesItsMirror) {
  auto model = build_unet<float>(toy(Arch::kUnet, 4, 3), 6);
  nn::ForwardTrace trace;
  model.forward(random_batch(2, 7), Mode::kInfer, &trace);
  for (int l = 0; l < 3; ++l) {
    const auto* enc = trace.find("enc" + std::to_string(l) + ".out");
    const auto* skip = trace.find("dec" + std::to_string(l) + ".skip");
    ASSERT_NE(enc, nullptr);
    ASSERT_NE(skip, nullptr);
    EXPECT_EQ(enc->digest, skip->digest);
    EXPECT_EQ(enc->shape, skip->shape);
    EXPECT_EQ(enc->shape[2], 64 >> l);
    EXPECT_EQ(enc->shape[1], 4 << l);
  }
  EXPECT_EQ(trace.find("bottleneck.out")->shape, (std::array<int, 4>{2, 32, 8, 8}));
  EXPECT_EQ(trace.find("dec0.out")->shape[2], 64);
}

TEST(ParameterCount, MatchesLayerArithmetic) {
  for (int depth : {1, 2, 4}) {
    const auto cnn = toy(Arch::kCnn, 4, depth);
    const auto unet = toy(Arch::kUnet, 4, depth);
    EXPECT_EQ(build_cnn<float>(cnn, 0).parameter_count(), expected_cnn_params(cnn));
    EXPECT_EQ(build_unet<float>(unet, 0).parameter_count(), expected_unet_params(unet));
  }
  auto cnn = ModelConfig::cnn_defaults();
  auto unet = ModelConfig::unet_defaults();
  cnn.dropout = unet.dropout = 0.2;
  EXPECT_GT(expected_unet_params(unet), expected_cnn_params(cnn));
  EXPECT_GT(build_unet<float>(unet, 0).parameter_count(),
            build_cnn<float>(cnn, 0).parameter_count());
}

TEST(Determinism, SameSeedSameModel) {
  for (Arch arch : {Arch::kCnn, Arch::kUnet}) {
    auto a = build_model<float>(toy(arch), 11);
    auto b = build_model<float>(toy(arch), 11);
    EXPECT_EQ(a.parameter_count(), b.parameter_count());
    EXPECT_EQ(a.state(), b.state());
    const auto x = random_batch(3, 12);
    EXPECT_EQ(forward(a, x), forward(b, x));
    EXPECT_EQ(forward(a, x), forward(a, x));
    for (auto* p : a.parameters()) {
      for (float v : p->value) ASSERT_TRUE(std::isfinite(v));
    }
  }
}

TEST(Forward, ZeroDenseGivesLeakyBias) {
  for (Arch arch : {Arch::kCnn, Arch::kUnet}) {
    auto model = build_model<float>(toy(arch), 13);
    auto& head = model.head();
    std::fill(head.weight().value.begin(), head.weight().value.end(), 0.0f);
    for (float b : {1.5f, -2.0f}) {
      head.bias().value[0] = b;
      const float expected = b > 0 ? b : 0.1f * b;
      for (float y : forward(model, random_batch(4, 14))) EXPECT_FLOAT_EQ(y, expected);
    }
  }
}

TEST(Forward, DropoutOffAtInference) {
  auto model = build_unet<float>(toy(Arch::kUnet), 15);
  const auto x = random_batch(2, 16);
  const auto first = model.forward(x, Mode::kInfer);
  const auto second = model.forward(x, Mode::kInfer);
  EXPECT_EQ(first.data, second.data);
  // Train mode draws dropout masks and batch statistics.
  EXPECT_NE(model.forward(x, Mode::kTrain).data, first.data);
}

TEST(Forward, NonFiniteInputRejected) {
  auto model = build_cnn<float>(toy(Arch::kCnn), 17);
  auto x = random_batch(1, 18);
  x.data[100] = std::nanf("");
  try {
    forward(model, x);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInvalidInput);
  }
  EXPECT_THROW(forward(model, Tensor<float>(1, 3, 64, 64)), Error);
}

TEST(Forward, OutputScaleMultipliesPredictions) {
  auto model = build_cnn<float>(toy(Arch::kCnn), 19);
  const auto x = random_batch(3, 20);
  const auto base = forward(model, x);
  model.set_output_scale(4.0f);
  const auto scaled = forward(model, x);
  for (std::size_t k = 0; k < base.size(); ++k) EXPECT_NEAR(scaled[k], 4.0f * base[k], 1e-5f);
  EXPECT_THROW(model.set_output_scale(0.0f), Error);
}

TEST(GradientCheck, ToyModelsMatchFiniteDifferences) {
  for (Arch arch : {Arch::kCnn, Arch::kUnet}) {
    ModelConfig c = toy(arch, 2, 1);
    c.dropout = 0.0;
    const auto check = testing::check_gradients(c, 3, 1e-6, 1e-4);
    EXPECT_GT(check.total, 100u);
    EXPECT_GE(check.pass_fraction(), 0.99) << arch_name(arch);
  }
}

TEST(Layers, LeakyReluAndMaxPoolBackward) {
  nn::LeakyRelu<double> act(0.1);
  Tensor<double> x(1, 1, 2, 2);
  x.data = {1.0, -2.0, 0.5, -0.5};
  const auto y = act.forward(x);
  EXPECT_EQ(y.data, (nn::AlignedVector<double>{1.0, -0.2, 0.5, -0.05}));
  Tensor<double> ones(1, 1, 2, 2, 1.0);
  EXPECT_EQ(act.backward(ones).data, (nn::AlignedVector<double>{1.0, 0.1, 1.0, 0.1}));

  nn::MaxPool2<double> pool;
  const auto p = pool.forward(x);
  EXPECT_EQ(p.data, (nn::AlignedVector<double>{1.0}));
  Tensor<double> g(1, 1, 1, 1, 3.0);
  EXPECT_EQ(pool.backward(g).data, (nn::AlignedVector<double>{3.0, 0.0, 0.0, 0.0}));
}

TEST(BatchNorm, CalibrationAveragesBatchStatistics) {
  auto model = build_cnn<float>(toy(Arch::kCnn, 2, 1), 21);
  const auto a = random_batch(4, 22);
  auto b = random_batch(4, 23);
  for (float& v : b.data) v = 3.0f * v + 1.0f;
  model.begin_batch_norm_calibration();
  model.forward(a, Mode::kCalibrate);
  model.forward(b, Mode::kCalibrate);
  model.finish_batch_norm_calibration();
  const auto after = model.state();

  // Same averages from two independent single-batch calibrations.
  auto ref_a = build_cnn<float>(toy(Arch::kCnn, 2, 1), 21);
  ref_a.begin_batch_norm_calibration();
  ref_a.forward(a, Mode::kCalibrate);
  ref_a.finish_batch_norm_calibration();
  auto ref_b = build_cnn<float>(toy(Arch::kCnn, 2, 1), 21);
  ref_b.begin_batch_norm_calibration();
  ref_b.forward(b, Mode::kCalibrate);
  ref_b.finish_batch_norm_calibration();
  const auto sa = ref_a.state();
  const auto sb = ref_b.state();
  for (std::size_t k = 0; k < after.size(); ++k) {
    EXPECT_NEAR(after[k], 0.5f * (sa[k] + sb[k]), 1e-5f * (1.0f + std::abs(after[k])));
  }
  // Parameters are untouched; only the running statistics move.
  auto fresh = build_cnn<float>(toy(Arch::kCnn, 2, 1), 21);
  const std::size_t params = fresh.parameter_count();
  const auto initial = fresh.state();
  for (std::size_t k = 0; k < params; ++k) EXPECT_EQ(after[k], initial[k]);
  EXPECT_THROW(fresh.finish_batch_norm_calibration(), Error);
}

TEST(Checkpoint, SaveLoadRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "plume2rate_ckpt";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  auto model = build_unet<float>(toy(Arch::kUnet), 24);
  model.set_output_scale(2.5f);
  model.forward(random_batch(4, 25), Mode::kTrain);  // moves running stats
  model.save(dir / "model.bin");
  auto other = build_unet<float>(toy(Arch::kUnet), 99);
  other.load(dir / "model.bin");
  EXPECT_EQ(other.state(), model.state());
  EXPECT_EQ(other.output_scale(), 2.5f);
  const auto x = random_batch(2, 26);
  EXPECT_EQ(forward(other, x), forward(model, x));
  auto wrong = build_cnn<float>(toy(Arch::kCnn), 1);
  EXPECT_THROW(wrong.load(dir / "model.bin"), Error);
  EXPECT_THROW(other.load(dir / "missing.bin"), Error);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace plume2rate::models
