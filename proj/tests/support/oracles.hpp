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


// Independent oracles shared by the unit and acceptance tests.

#ifndef PLUME2RATE_TESTS_SUPPORT_ORACLES_HPP_
#define PLUME2RATE_TESTS_SUPPORT_ORACLES_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "plume2rate/ingest.hpp"
#include "plume2rate/models.hpp"
#include "plume2rate/plume_sim.hpp"

namespace plume2rate::testing {

// Metrics recomputed by a separate code path: sort-based quantiles with
// the (n-1)p position rule and two-pass sums.
struct BruteMetrics {
  double q25, median, q75, rel_q25, rel_median, rel_q75, mae, rmse, r2;
};

inline double brute_quantile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double pos = p * double(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  return v[lo] + (pos - double(lo)) * (v[hi] - v[lo]);
}

inline BruteMetrics brute_metrics(const std::vector<double>& pred,
                                  const std::vector<double>& truth) {
  const std::size_t n = pred.size();
  std::vector<double> abs_err(n), rel_err(n);
  for (std::size_t k = 0; k < n; ++k) {
    abs_err[k] = std::fabs(pred[k] - truth[k]);
    rel_err[k] = 100.0 * abs_err[k] / truth[k];
  }
  double mean_truth = 0.0;
  for (double y : truth) mean_truth += y / double(n);
  double sum_abs = 0.0, sum_sq = 0.0, total_sq = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    sum_abs += abs_err[k];
    sum_sq += abs_err[k] * abs_err[k];
    total_sq += (truth[k] - mean_truth) * (truth[k] - mean_truth);
  }
  return {brute_quantile(abs_err, 0.25), brute_quantile(abs_err, 0.5),
          brute_quantile(abs_err, 0.75), brute_quantile(rel_err, 0.25),
          brute_quantile(rel_err, 0.5),  brute_quantile(rel_err, 0.75),
          sum_abs / double(n),           std::sqrt(sum_sq / double(n)),
          1.0 - sum_sq / total_sq};
}

// Central finite differences of the batch MSE against analytic gradients
// of a double-precision model in train mode. Dropout must be 0 so every
// forward sees the same function.
struct GradientCheck {
  std::size_t total = 0;
  std::size_t passed = 0;
  double pass_fraction() const { return total ? double(passed) / double(total) : 0.0; }
};

inline GradientCheck check_gradients(const models::ModelConfig& config, std::uint64_t seed,
                                     double step, double tolerance) {
  auto model = models::build_model<double>(config, seed);
  constexpr int kBatch = 3;
  nn::Tensor<double> x(kBatch, 4, 64, 64);
  std::mt19937_64 rng(seed + 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& v : x.data) v = normal(rng);
  const std::vector<double> y{1.0, 2.0, 3.0};
  auto loss = [&] {
    const auto out = model.forward(x, nn::Mode::kTrain);
    double s = 0.0;
    for (int k = 0; k < kBatch; ++k) s += (out.data[k] - y[k]) * (out.data[k] - y[k]);
    return s / kBatch;
  };
  const auto out = model.forward(x, nn::Mode::kTrain);
  nn::Tensor<double> dy(kBatch, 1, 1, 1);
  for (int k = 0; k < kBatch; ++k) dy.data[k] = 2.0 * (out.data[k] - y[k]) / kBatch;
  model.zero_grad();
  model.backward(dy);

  GradientCheck result;
  for (auto* p : model.parameters()) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double v = p->value[i];
      p->value[i] = v + step;
      const double up = loss();
      p->value[i] = v - step;
      const double down = loss();
      p->value[i] = v;
      const double fd = (up - down) / (2.0 * step);
      const double an = p->grad[i];
      const double rel = std::fabs(fd - an) / std::max({std::fabs(fd), std::fabs(an), 1e-8});
      ++result.total;
      if (rel <= tolerance) ++result.passed;
    }
  }
  return result;
}

// Trapezoidal crosswind integral of the column mass density (kg/m) for a
// plume blowing along +x; column `col` lies on the plume axis grid line.
inline double crosswind_mass_flux(const grid::GridField& ppm_field, int col) {
  const double to_kg = 1e-6 * sim::dry_air_column_mol_m2() * sim::kMolarMassCo2;
  const double dy_m = ppm_field.cell_size_km() * 1000.0;
  double sum = 0.0;
  for (int i = 0; i < ppm_field.rows(); ++i) {
    const double w = (i == 0 || i == ppm_field.rows() - 1) ? 0.5 : 1.0;
    sum += w * ppm_field.value(i, col) * to_kg * dy_m;
  }
  return sum;
}

// RMSE of the k-NN fill over cells hidden by a sparse-sounding mask, with
// the scene's own NO2 and wind channels as predictors.
inline double xco2_fill_rmse(const data::Sample& scene, double coverage, int swath_width,
                             std::uint64_t mask_seed) {
  auto channel = [&](int c, grid::Channel id) {
    grid::Raster r(data::kPatchSize, data::kPatchSize);
    for (int i = 0; i < data::kPatchSize; ++i) {
      for (int j = 0; j < data::kPatchSize; ++j) r(i, j) = scene.at(c, i, j);
    }
    return grid::GridField::complete(std::move(r), scene.cell_size_km, {}, scene.date, id);
  };
  const auto truth = channel(data::kXco2, grid::Channel::kXco2);
  const auto sparse = sim::make_sparse_soundings(truth, coverage, swath_width, mask_seed);
  const auto filled = ingest::fill_xco2_map(
      sparse, {channel(data::kNo2, grid::Channel::kNo2),
               channel(data::kWindU, grid::Channel::kWindU),
               channel(data::kWindV, grid::Channel::kWindV)});
  double se = 0.0;
  int n = 0;
  for (int i = 0; i < data::kPatchSize; ++i) {
    for (int j = 0; j < data::kPatchSize; ++j) {
      if (sparse.valid(i, j)) continue;
      const double e = filled.value(i, j) - truth.value(i, j);
      se += e * e;
      ++n;
    }
  }
  return std::sqrt(se / n);
}

}  // namespace plume2rate::testing

#endif  // PLUME2RATE_TESTS_SUPPORT_ORACLES_HPP_
