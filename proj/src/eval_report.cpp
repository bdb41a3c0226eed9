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


#include "plume2rate/eval_report.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>

#include "plume2rate/error.hpp"
#include "plume2rate/io_util.hpp"
#include "png_writer.hpp"

namespace plume2rate::eval {

nlohmann::json MetricsReport::to_json() const {
  return {{"dataset", dataset_label},
          {"model", model_label},
          {"n", n},
          {"abs_err_q25", abs_err_q25},
          {"abs_err_median", abs_err_median},
          {"abs_err_q75", abs_err_q75},
          {"rel_err_q25", rel_err_q25},
          {"rel_err_median", rel_err_median},
          {"rel_err_q75", rel_err_q75},
          {"median_abs_err", median_abs_err},
          {"median_abs_rel_err", median_abs_rel_err},
          {"mae", mae},
          {"rmse", rmse},
          {"r2", r2}};
}

MetricsReport MetricsReport::from_json(const nlohmann::json& j) {
  MetricsReport r;
  try {
    r.dataset_label = j.at("dataset").get<std::string>();
    r.model_label = j.at("model").get<std::string>();
    r.n = j.at("n").get<std::size_t>();
    r.abs_err_q25 = j.at("abs_err_q25");
    r.abs_err_median = j.at("abs_err_median");
    r.abs_err_q75 = j.at("abs_err_q75");
    r.rel_err_q25 = j.at("rel_err_q25");
    r.rel_err_median = j.at("rel_err_median");
    r.rel_err_q75 = j.at("rel_err_q75");
    r.median_abs_err = j.at("median_abs_err");
    r.median_abs_rel_err = j.at("median_abs_rel_err");
    r.mae = j.at("mae");
    r.rmse = j.at("rmse");
    r.r2 = j.at("r2");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kSchemaError, std::string("metrics report: ") + e.what());
  }
  return r;
}

double quantile(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw Error(ErrorKind::kLengthError, "quantile of an empty list");
  const double pos = p * double(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - double(lo)) * (sorted[hi] - sorted[lo]);
}

MetricsReport compute_metrics(std::span<const double> predictions,
                              std::span<const double> targets, std::string dataset_label,
                              std::string model_label) {
  const std::size_t n = targets.size();
  if (predictions.size() != n || n < 2) {
    throw Error(ErrorKind::kLengthError,
                fmt::format("metrics need >= 2 paired values, got {} predictions and {} targets",
                            predictions.size(), n));
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!(targets[i] > 0.0)) {
      throw Error(ErrorKind::kInvalidTarget,
                  fmt::format("target {} at index {} is not positive", targets[i], i));
    }
  }
  const double mean_y = std::accumulate(targets.begin(), targets.end(), 0.0) / double(n);
  double ss_tot = 0.0, ss_res = 0.0, sum_abs = 0.0;
  std::vector<double> abs_err(n), rel_err(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double e = predictions[i] - targets[i];
    abs_err[i] = std::abs(e);
    rel_err[i] = 100.0 * abs_err[i] / targets[i];
    sum_abs += abs_err[i];
    ss_res += e * e;
    ss_tot += (targets[i] - mean_y) * (targets[i] - mean_y);
  }
  if (ss_tot == 0.0) throw Error(ErrorKind::kDegenerateR2, "targets have zero variance");
  std::sort(abs_err.begin(), abs_err.end());
  std::sort(rel_err.begin(), rel_err.end());

  MetricsReport r;
  r.abs_err_q25 = quantile(abs_err, 0.25);
  r.abs_err_median = quantile(abs_err, 0.5);
  r.abs_err_q75 = quantile(abs_err, 0.75);
  r.rel_err_q25 = quantile(rel_err, 0.25);
  r.rel_err_median = quantile(rel_err, 0.5);
  r.rel_err_q75 = quantile(rel_err, 0.75);
  r.median_abs_err = r.abs_err_median;
  r.median_abs_rel_err = r.rel_err_median;
  r.mae = sum_abs / double(n);
  r.rmse = std::sqrt(ss_res / double(n));
  r.r2 = 1.0 - ss_res / ss_tot;
  r.n = n;
  r.dataset_label = std::move(dataset_label);
  r.model_label = std::move(model_label);
  return r;
}

double relative_improvement(double baseline, double value, Orientation orientation) {
  if (baseline == 0.0) throw Error(ErrorKind::kZeroBaseline, "baseline value is zero");
  const double delta = orientation == Orientation::kLowerBetter ? baseline - value
                                                                 : value - baseline;
  return 100.0 * delta / baseline;
}

namespace {

struct Column {
  const char* name;
  double MetricsReport::*field;
  bool higher_better;
};

constexpr std::array<Column, 11> kColumns{{
    {"Q25", &MetricsReport::abs_err_q25, false},
    {"Median", &MetricsReport::abs_err_median, false},
    {"Q75", &MetricsReport::abs_err_q75, false},
    {"Q25", &MetricsReport::rel_err_q25, false},
    {"Median", &MetricsReport::rel_err_median, false},
    {"Q75", &MetricsReport::rel_err_q75, false},
    {"MedAE", &MetricsReport::median_abs_err, false},
    {"MedARE", &MetricsReport::median_abs_rel_err, false},
    {"MAE", &MetricsReport::mae, false},
    {"RMSE", &MetricsReport::rmse, false},
    {"R2", &MetricsReport::r2, true},
}};

constexpr int kLabelWidth = 11;
constexpr int kCell = 9;  // 8 digits + best mark

}  // namespace

std::string render_table(std::span<const MetricsReport> reports) {
  // Group by dataset in order of first appearance, keeping row order.
  std::vector<std::string> datasets;
  for (const auto& r : reports) {
    if (std::find(datasets.begin(), datasets.end(), r.dataset_label) == datasets.end()) {
      datasets.push_back(r.dataset_label);
    }
  }
  std::string out;
  out += fmt::format("{:<{}}{:^{}}{:^{}}{:^{}}\n", "", 2 * kLabelWidth,
                     "Abs. error (Mt/yr)", 3 * kCell, "Abs. rel. error (%)", 3 * kCell,
                     "Median", 2 * kCell);
  out += fmt::format("{:<{}}{:<{}}", "Dataset", kLabelWidth, "Model", kLabelWidth);
  for (const auto& c : kColumns) out += fmt::format("{:>{}} ", c.name, kCell - 1);
  out += "\n";
  out += std::string(2 * kLabelWidth + kColumns.size() * kCell, '-') + "\n";

  for (const auto& dataset : datasets) {
    std::vector<const MetricsReport*> rows;
    for (const auto& r : reports) {
      if (r.dataset_label == dataset) rows.push_back(&r);
    }
    // Best marks compare the printed (rounded) values so ties mark together.
    std::array<double, kColumns.size()> best{};
    for (std::size_t c = 0; c < kColumns.size(); ++c) {
      best[c] = kColumns[c].higher_better ? -HUGE_VAL : HUGE_VAL;
      for (const auto* r : rows) {
        const double v = std::round(r->*kColumns[c].field * 100.0) / 100.0;
        best[c] = kColumns[c].higher_better ? std::max(best[c], v) : std::min(best[c], v);
      }
    }
    for (const auto* r : rows) {
      out += fmt::format("{:<{}}{:<{}}", r->dataset_label, kLabelWidth, r->model_label,
                         kLabelWidth);
      for (std::size_t c = 0; c < kColumns.size(); ++c) {
        const double v = r->*kColumns[c].field;
        const bool mark = rows.size() > 1 && std::round(v * 100.0) / 100.0 == best[c];
        out += fmt::format("{:>{}.2f}{}", v, kCell - 1, mark ? '*' : ' ');
      }
      out += "\n";
    }
  }
  return out;
}

nlohmann::json ScatterData::to_json() const {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& [t, p] : points) pts.push_back({{"true", t}, {"predicted", p}});
  return {{"n", points.size()}, {"axis", {axis_min, axis_max}}, {"points", pts}};
}

namespace {

constexpr int kImageSize = 480;
constexpr int kMargin = 40;

class Canvas {
 public:
  Canvas() : rgb_(std::size_t(kImageSize) * kImageSize * 3, 255) {}

  void set(int x, int y, std::array<std::uint8_t, 3> color) {
    if (x < 0 || y < 0 || x >= kImageSize || y >= kImageSize) return;
    std::copy(color.begin(), color.end(), rgb_.begin() + (std::size_t(y) * kImageSize + x) * 3);
  }
  std::span<const std::uint8_t> pixels() const { return rgb_; }

 private:
  std::vector<std::uint8_t> rgb_;
};

}  // namespace

ScatterData plot_predictions(std::span<const double> predictions,
                             std::span<const double> targets,
                             const std::filesystem::path& out_path) {
  if (predictions.empty()) throw Error(ErrorKind::kInvalidInput, "nothing to plot");
  if (predictions.size() != targets.size()) {
    throw Error(ErrorKind::kLengthError, "predictions and targets differ in length");
  }
  ScatterData data;
  double lo = 0.0, hi = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    data.points.emplace_back(targets[i], predictions[i]);
    lo = std::min({lo, targets[i], predictions[i]});
    hi = std::max({hi, targets[i], predictions[i]});
  }
  if (hi <= lo) hi = lo + 1.0;
  hi += 0.05 * (hi - lo);
  data.axis_min = lo;
  data.axis_max = hi;

  const int span = kImageSize - 2 * kMargin;
  auto px = [&](double v) { return kMargin + int(std::lround((v - lo) / (hi - lo) * span)); };
  auto py = [&](double v) { return kImageSize - 1 - px(v); };
  Canvas canvas;
  constexpr std::array<std::uint8_t, 3> kAxis{0, 0, 0};
  constexpr std::array<std::uint8_t, 3> kIdentity{170, 170, 170};
  constexpr std::array<std::uint8_t, 3> kPoint{31, 80, 180};
  for (int k = 0; k <= span; ++k) {
    canvas.set(kMargin + k, kImageSize - 1 - kMargin, kAxis);
    canvas.set(kMargin, kImageSize - 1 - kMargin - k, kAxis);
    canvas.set(kMargin + k, kImageSize - 1 - kMargin - k, kIdentity);
  }
  for (const auto& [t, p] : data.points) {
    const int cx = px(t), cy = py(p);
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) canvas.set(cx + dx, cy + dy, kPoint);
    }
  }
  detail::write_png_rgb(out_path, kImageSize, kImageSize, canvas.pixels());
  auto sidecar = out_path;
  sidecar.replace_extension(".json");
  io::write_json(sidecar, data.to_json());
  return data;
}

}  // namespace plume2rate::eval
