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


#include "plume2rate/ingest.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "plume2rate/plume_sim.hpp"

namespace plume2rate::ingest {
namespace {

using grid::Channel;
using grid::GridField;
using grid::Mask;
using grid::Raster;

GridField field_of(int rows, int cols, double cell_km, auto value_at,
                   Channel channel = Channel::kNo2) {
  Raster r(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) r(i, j) = value_at(i, j);
  }
  return GridField::complete(std::move(r), cell_km, {0.5 * cell_km, 0.5 * cell_km},
                             Date(2020, 3, 1), channel);
}

GridField sample_channel(const data::Sample& s, int c, Channel channel) {
  return field_of(data::kPatchSize, data::kPatchSize, s.cell_size_km,
                  [&](int i, int j) { return double(s.at(c, i, j)); }, channel);
}

TEST(FillXco2, CompleteSoundingsPassThrough) {
  const auto xco2 = field_of(16, 16, 1.0, [](int i, int j) { return 400.0 + i - j; },
                             Channel::kXco2);
  const auto pred = field_of(16, 16, 1.0, [](int i, int) { return double(i); });
  EXPECT_EQ(fill_xco2_map(xco2, {pred}).values(), xco2.values());
}

TEST(FillXco2, ConstantSoundingsFillConstant) {
  const auto xco2 = field_of(20, 20, 1.0, [](int, int) { return 411.5; }, Channel::kXco2);
  const auto pred = field_of(20, 20, 1.0, [](int i, int j) { return std::sin(i + 0.3 * j); });
  const auto sparse = sim::make_sparse_soundings(xco2, 0.2, 3, 1);
  const auto filled = fill_xco2_map(sparse, {pred});
  EXPECT_TRUE(filled.is_complete());
  for (double v : filled.values().data()) EXPECT_DOUBLE_EQ(v, 411.5);
}

TEST(FillXco2, ObservedCellsUnchanged) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(410, 1);
  const auto xco2 = field_of(24, 24, 1.0, [&](int, int) { return n(rng); }, Channel::kXco2);
  const auto pred = field_of(24, 24, 1.0, [](int i, int j) { return i * 0.1 + j; });
  const auto sparse = sim::make_sparse_soundings(xco2, 0.25, 2, 8);
  const auto filled = fill_xco2_map(sparse, {pred});
  for (int i = 0; i < 24; ++i) {
    for (int j = 0; j < 24; ++j) {
      if (sparse.valid(i, j)) EXPECT_EQ(filled.value(i, j), xco2.value(i, j));
      EXPECT_TRUE(std::isfinite(filled.value(i, j)));
    }
  }
}

TEST(FillXco2, PlumeSceneAtFifteenPercentCoverage) {
  sim::ScenarioBatch batch;
  batch.count = 5;
  batch.seed = 21;
  for (const auto& scene : sim::simulate_batch(batch)) {
    const auto truth = sample_channel(scene, data::kXco2, Channel::kXco2);
    const auto sparse = sim::make_sparse_soundings(truth, 0.15, 6, 99);
    const auto filled = fill_xco2_map(
        sparse, {sample_channel(scene, data::kNo2, Channel::kNo2),
                 sample_channel(scene, data::kWindU, Channel::kWindU),
                 sample_channel(scene, data::kWindV, Channel::kWindV)});
    double se = 0.0;
    int n = 0;
    for (int i = 0; i < 64; ++i) {
      for (int j = 0; j < 64; ++j) {
        if (sparse.valid(i, j)) continue;
        const double e = filled.value(i, j) - truth.value(i, j);
        se += e * e;
        ++n;
      }
    }
    EXPECT_LT(std::sqrt(se / n), 2.0 * batch.defaults.noise_sd_ppm);
  }
}

TEST(FillXco2, Errors) {
  const auto xco2 = field_of(10, 10, 1.0, [](int, int) { return 1.0; }, Channel::kXco2);
  Mask few(10, 10, std::uint8_t{0});
  for (int k = 0; k < 5; ++k) few(k, k) = 1;
  const GridField sparse(xco2.values(), few, 1.0, xco2.origin(), xco2.timestamp(),
                         Channel::kXco2);
  try {
    fill_xco2_map(sparse, {}, 16);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInsufficientSoundings);
  }
  const auto wrong = field_of(8, 8, 1.0, [](int, int) { return 0.0; });
  try {
    fill_xco2_map(xco2, {wrong});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kGridMismatch);
  }
}

TEST(PreprocessNo2, ConstantRawGivesConstantKilometerField) {
  const auto raw = field_of(6, 6, 4.0, [](int, int) { return 2.5e-4; });
  const auto out = preprocess_no2(raw);
  EXPECT_DOUBLE_EQ(out.cell_size_km(), 1.0);
  EXPECT_EQ(out.rows(), 24);
  for (double v : out.values().data()) EXPECT_DOUBLE_EQ(v, 2.5e-4);
}

TEST(PreprocessNo2, HoleFilledWithinNeighborRange) {
  const auto raw = field_of(5, 5, 4.0, [](int i, int j) { return 1.0 + 0.1 * (i + j); });
  Mask m(5, 5, std::uint8_t{1});
  m(2, 2) = 0;
  const GridField holed(raw.values(), m, 4.0, raw.origin(), raw.timestamp(), Channel::kNo2);
  const auto out = preprocess_no2(holed);
  EXPECT_TRUE(out.is_complete());
  // The former hole covers 1 km cells 8..11 in both directions.
  for (int i = 8; i < 12; ++i) {
    for (int j = 8; j < 12; ++j) {
      EXPECT_GE(out.value(i, j), 1.1);
      EXPECT_LE(out.value(i, j), 1.7);
    }
  }
}

TEST(PreprocessNo2, ReproducesPlaneInInterior) {
  const auto raw = field_of(8, 8, 4.0, [](int, int j) { return 2.0 + 4.0 * j; });
  const auto out = preprocess_no2(raw);
  for (int i = 0; i < out.rows(); ++i) {
    for (int j = 0; j < out.cols(); ++j) {
      const double x = out.cell_x(j);
      if (x < raw.cell_x(0) || x > raw.cell_x(raw.cols() - 1)) continue;
      EXPECT_NEAR(out.value(i, j), x, 1e-9);
    }
  }
}

TEST(PreprocessNo2, CommutesWithGlobalOffset) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0, 1);
  const auto raw = field_of(6, 7, 4.0, [&](int, int) { return u(rng); });
  Mask m(6, 7, std::uint8_t{1});
  m(1, 1) = m(3, 4) = m(5, 0) = 0;
  const GridField a(raw.values(), m, 4.0, raw.origin(), raw.timestamp(), Channel::kNo2);
  Raster shifted = raw.values();
  for (double& v : shifted.data()) v += 3.0;
  const GridField b(shifted, m, 4.0, raw.origin(), raw.timestamp(), Channel::kNo2);
  const auto pa = preprocess_no2(a);
  const auto pb = preprocess_no2(b);
  for (std::size_t k = 0; k < pa.values().size(); ++k) {
    EXPECT_NEAR(pb.values().data()[k], pa.values().data()[k] + 3.0, 1e-12);
  }
}

TEST(PreprocessWind, UniformAndLinearAndMismatch) {
  const auto u = field_of(8, 8, 4.0, [](int, int) { return 3.0; }, Channel::kWindU);
  const auto v = field_of(8, 8, 4.0, [](int, int) { return -1.0; }, Channel::kWindV);
  const auto [u1, v1] = preprocess_wind(u, v);
  for (double x : u1.values().data()) EXPECT_DOUBLE_EQ(x, 3.0);
  for (double x : v1.values().data()) EXPECT_DOUBLE_EQ(x, -1.0);

  const auto uy = field_of(8, 8, 4.0, [](int i, int) { return 2.0 + 4.0 * i; }, Channel::kWindU);
  const auto [u2, v2] = preprocess_wind(uy, v);
  for (int i = 0; i < u2.rows(); ++i) {
    const double y = u2.cell_y(i);
    if (y < uy.cell_y(0) || y > uy.cell_y(7)) continue;
    for (int j = 0; j < u2.cols(); ++j) EXPECT_NEAR(u2.value(i, j), y, 1e-9);
  }

  const auto small = field_of(16, 16, 4.0, [](int, int) { return 0.0; }, Channel::kWindV);
  const auto big = field_of(32, 32, 4.0, [](int, int) { return 0.0; }, Channel::kWindU);
  try {
    preprocess_wind(big, small);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kGridMismatch);
  }
}

std::vector<DailyProxy> proxies_of(std::initializer_list<double> values) {
  std::vector<DailyProxy> out;
  Date d(2020, 1, 1);
  for (double v : values) out.push_back({d, v}), d = d.AddDays(1);
  return out;
}

TEST(Disaggregate, HandCase) {
  const auto r = disaggregate_annual({"P", {}, 2.0, 2020}, proxies_of({1.0, 3.0}));
  ASSERT_EQ(r.size(), 2u);
  EXPECT_DOUBLE_EQ(r[0].rate_mt_per_yr, 1.0);
  EXPECT_DOUBLE_EQ(r[1].rate_mt_per_yr, 3.0);
  EXPECT_EQ(r[1].date, Date(2020, 1, 2));
}

TEST(Disaggregate, UniformProxiesGiveConstantRate) {
  const auto r = disaggregate_annual({"P", {}, 7.3, 2020}, proxies_of({0.4, 0.4, 0.4, 0.4, 0.4}));
  for (const auto& d : r) EXPECT_DOUBLE_EQ(d.rate_mt_per_yr, 7.3);
}

TEST(Disaggregate, ConservesAnnualTotal) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> e(0.1, 50.0), p(0.0, 10.0);
  std::uniform_int_distribution<int> days(1, 365);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<DailyProxy> proxies;
    const int n = days(rng);
    for (int d = 0; d < n; ++d) proxies.push_back({Date(2020, 1, 1).AddDays(d), p(rng)});
    proxies.front().proxy_value += 1e-3;
    const double annual = e(rng);
    const auto r = disaggregate_annual({"P", {}, annual, 2020}, proxies);
    double sum = 0.0;
    for (const auto& d : r) sum += d.rate_mt_per_yr;
    EXPECT_NEAR(sum / n, annual, 1e-12 * annual);
  }
}

TEST(Disaggregate, Errors) {
  try {
    disaggregate_annual({"P", {}, 1.0, 2020}, proxies_of({0.0, 0.0}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDegenerateProxy);
  }
  try {
    disaggregate_annual({"P", {}, 1.0, 2020}, proxies_of({1.0, -0.5}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInvalidProxy);
  }
}

TEST(CatalogIo, RoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "plume2rate_catalog";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const std::vector<PlantRecord> plants{{"PP01", {40.5, 60.25}, 12.5, 2021},
                                        {"PP02", {90.0, 30.0}, 3.0, 2021}};
  write_plant_catalog(dir / "plants.csv", plants);
  const auto back = read_plant_catalog(dir / "plants.csv");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].plant_id, "PP02");
  EXPECT_DOUBLE_EQ(back[0].location.y_km, 60.25);
  EXPECT_DOUBLE_EQ(back[0].annual_emission_mt, 12.5);

  std::map<std::string, std::vector<DailyProxy>> proxies{
      {"PP01", proxies_of({1.0, 2.0})}, {"PP02", proxies_of({0.5})}};
  write_proxy_series(dir / "proxies.csv", proxies);
  const auto pback = read_proxy_series(dir / "proxies.csv");
  ASSERT_EQ(pback.at("PP01").size(), 2u);
  EXPECT_DOUBLE_EQ(pback.at("PP01")[1].proxy_value, 2.0);
  EXPECT_THROW(read_plant_catalog(dir / "missing.csv"), Error);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace plume2rate::ingest
