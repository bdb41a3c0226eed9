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


#ifndef PLUME2RATE_EVAL_REPORT_HPP_
#define PLUME2RATE_EVAL_REPORT_HPP_

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace plume2rate::eval {

// Error summary of one (dataset, model) pair. Absolute errors and MAE/RMSE
// are in Mt/yr, relative errors in percent of the true rate.
struct MetricsReport {
  double abs_err_q25 = 0.0;
  double abs_err_median = 0.0;
  double abs_err_q75 = 0.0;
  double rel_err_q25 = 0.0;
  double rel_err_median = 0.0;
  double rel_err_q75 = 0.0;
  double median_abs_err = 0.0;
  double median_abs_rel_err = 0.0;
  double mae = 0.0;
  double rmse = 0.0;
  double r2 = 0.0;
  std::size_t n = 0;
  std::string dataset_label;
  std::string model_label;

  nlohmann::json to_json() const;
  static MetricsReport from_json(const nlohmann::json& j);
};

// Linear interpolation between order statistics of ascending `sorted`.
double quantile(std::span<const double> sorted, double p);

// Throws LengthError, InvalidTarget or DegenerateR2.
MetricsReport compute_metrics(std::span<const double> predictions,
                              std::span<const double> targets,
                              std::string dataset_label = {},
                              std::string model_label = {});

enum class Orientation { kLowerBetter, kHigherBetter };

// Percent change from `baseline` to `value`, positive when `value` is
// better. Throws ZeroBaseline.
double relative_improvement(double baseline, double value, Orientation orientation);

// Fixed-width table, rows grouped by dataset; within a dataset holding
// more than one row, the best value of every column carries a '*'.
std::string render_table(std::span<const MetricsReport> reports);

// Predicted-vs-true scatter with identity line, written as PNG next to a
// JSON sidecar (same stem) holding the plotted points.
struct ScatterData {
  std::vector<std::pair<double, double>> points;  // (true, predicted)
  double axis_min = 0.0;
  double axis_max = 0.0;

  nlohmann::json to_json() const;
};

// Throws InvalidInput on empty input, LengthError, IoError.
ScatterData plot_predictions(std::span<const double> predictions,
                             std::span<const double> targets,
                             const std::filesystem::path& out_path);

}  // namespace plume2rate::eval

#endif  // PLUME2RATE_EVAL_REPORT_HPP_
