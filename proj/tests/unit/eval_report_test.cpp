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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "plume2rate/error.hpp"
#include "plume2rate/io_util.hpp"

namespace plume2rate::eval {
namespace {

MetricsReport reference_row(std::string dataset, std::string model,
                            std::array<double, 11> v) {
  MetricsReport r;
  r.dataset_label = std::move(dataset);
  r.model_label = std::move(model);
  r.abs_err_q25 = v[0], r.abs_err_median = v[1], r.abs_err_q75 = v[2];
  r.rel_err_q25 = v[3], r.rel_err_median = v[4], r.rel_err_q75 = v[5];
  r.median_abs_err = v[6], r.median_abs_rel_err = v[7];
  r.mae = v[8], r.rmse = v[9], r.r2 = v[10];
  r.n = 100;
  return r;
}

// Simulated-data rows of the reference results table.
const MetricsReport kSimCnn = reference_row(
    "Simulated", "CNN", {1.20, 2.67, 4.70, 7.37, 16.01, 27.76, 2.67, 16.01, 3.22, 4.07, 0.20});
const MetricsReport kSimUnet = reference_row(
    "Simulated", "U-Net", {1.13, 2.35, 3.99, 7.08, 14.14, 23.98, 2.35, 14.14, 2.89, 3.74, 0.42});

std::vector<std::string> split_words(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> out;
  for (std::string w; ss >> w;) out.push_back(w);
  return out;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::istringstream ss(text);
  std::vector<std::string> out;
  for (std::string l; std::getline(ss, l);) out.push_back(l);
  return out;
}

TEST(ComputeMetrics, PerfectPredictions) {
  const std::vector<double> y{1.0, 3.0, 8.0, 2.0};
  const auto r = compute_metrics(y, y);
  EXPECT_EQ(r.mae, 0.0);
  EXPECT_EQ(r.rmse, 0.0);
  EXPECT_EQ(r.abs_err_q75, 0.0);
  EXPECT_EQ(r.rel_err_q75, 0.0);
  EXPECT_EQ(r.r2, 1.0);
  EXPECT_EQ(r.n, 4u);
}

TEST(ComputeMetrics, HandCase) {
  const auto r = compute_metrics(std::vector<double>{2.0, 4.0}, std::vector<double>{1.0, 2.0});
  EXPECT_EQ(r.mae, 1.5);
  EXPECT_EQ(r.rmse, std::sqrt(2.5));
  EXPECT_EQ(r.r2, -9.0);
  EXPECT_EQ(r.median_abs_rel_err, 100.0);
  EXPECT_EQ(r.rel_err_q25, 100.0);
  EXPECT_EQ(r.median_abs_err, r.abs_err_median);
}

TEST(Quantile, LinearInterpolationOracle) {
  const std::vector<double> e{1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(quantile(e, 0.25), 1.75);
  EXPECT_DOUBLE_EQ(quantile(e, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(quantile(e, 0.75), 3.25);
  EXPECT_DOUBLE_EQ(quantile(e, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(quantile(e, 1.0), 4.0);
}

TEST(ComputeMetrics, MatchesBruteForceOracle) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> len(2, 500);
  std::uniform_real_distribution<double> y(0.5, 40.0);
  std::normal_distribution<double> noise(0.0, 4.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = len(rng);
    std::vector<double> truth(n), pred(n);
    for (int k = 0; k < n; ++k) truth[k] = y(rng), pred[k] = truth[k] + noise(rng);
    const auto r = compute_metrics(pred, truth);
    const auto b = testing::brute_metrics(pred, truth);
    const auto close = [](double a, double c) { return std::abs(a - c) <= 1e-9 * std::max(1.0, std::abs(c)); };
    ASSERT_TRUE(close(r.abs_err_q25, b.q25) && close(r.abs_err_median, b.median) &&
                close(r.abs_err_q75, b.q75) && close(r.rel_err_q25, b.rel_q25) &&
                close(r.rel_err_median, b.rel_median) && close(r.rel_err_q75, b.rel_q75) &&
                close(r.mae, b.mae) && close(r.rmse, b.rmse) && close(r.r2, b.r2))
        << "trial " << trial;
    // Report invariants.
    EXPECT_LE(r.abs_err_q25, r.abs_err_median);
    EXPECT_LE(r.abs_err_median, r.abs_err_q75);
    EXPECT_LE(r.rel_err_q25, r.rel_err_median);
    EXPECT_LE(r.rel_err_median, r.rel_err_q75);
    EXPECT_GE(r.rmse + 1e-12, r.mae);
    EXPECT_LE(r.r2, 1.0);
  }
}

TEST(ComputeMetrics, Errors) {
  auto kind_of = [](auto&& f) {
    try {
      f();
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::kIoError;
  };
  EXPECT_EQ(kind_of([] { compute_metrics(std::vector<double>{1, 2}, std::vector<double>{1, 0}); }),
            ErrorKind::kInvalidTarget);
  EXPECT_EQ(kind_of([] { compute_metrics(std::vector<double>{1, 2}, std::vector<double>{3, 3}); }),
            ErrorKind::kDegenerateR2);
  EXPECT_EQ(kind_of([] { compute_metrics(std::vector<double>{1}, std::vector<double>{1}); }),
            ErrorKind::kLengthError);
}

TEST(ComputeMetrics, JsonRoundTrip) {
  auto r = compute_metrics(std::vector<double>{2.0, 4.5, 1.0}, std::vector<double>{1.0, 5.0, 2.0},
                           "Combined", "U-Net");
  const auto back = MetricsReport::from_json(r.to_json());
  EXPECT_EQ(back.to_json(), r.to_json());
}

TEST(RelativeImprovement, ReferenceImprovements) {
  EXPECT_NEAR(relative_improvement(3.22, 2.89, Orientation::kLowerBetter), 10.25, 0.005);
  EXPECT_NEAR(relative_improvement(3.22, 2.89, Orientation::kLowerBetter), 10.0, 0.5);
  EXPECT_NEAR(relative_improvement(4.07, 3.74, Orientation::kLowerBetter), 8.0, 0.5);
  EXPECT_NEAR(relative_improvement(0.20, 0.42, Orientation::kHigherBetter), 110.0, 1.0);
  EXPECT_NEAR(relative_improvement(0.20, 0.86, Orientation::kHigherBetter), 330.0, 1.0);
}

TEST(RelativeImprovement, IdentityAntisymmetryAndZeroBaseline) {
  EXPECT_EQ(relative_improvement(5.0, 5.0, Orientation::kLowerBetter), 0.0);
  EXPECT_EQ(relative_improvement(5.0, 5.0, Orientation::kHigherBetter), 0.0);
  // Swapping baseline and value flips the sign of the change.
  const double a = 3.0, b = 2.0;
  EXPECT_GT(relative_improvement(a, b, Orientation::kLowerBetter), 0.0);
  EXPECT_LT(relative_improvement(b, a, Orientation::kLowerBetter), 0.0);
  EXPECT_NEAR(relative_improvement(a, b, Orientation::kLowerBetter) * a,
              -relative_improvement(b, a, Orientation::kLowerBetter) * b, 1e-12);
  try {
    relative_improvement(0.0, 1.0, Orientation::kLowerBetter);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kZeroBaseline);
  }
}

TEST(RenderTable, ReferenceUnetRowReadsVerbatim) {
  const std::vector<MetricsReport> reports{kSimUnet};
  const auto rows = lines_of(render_table(reports));
  ASSERT_EQ(rows.size(), 4u);  // two header lines, rule, one row
  const auto words = split_words(rows[3]);
  const std::vector<std::string> expected{"Simulated", "U-Net", "1.13",  "2.35", "3.99",
                                          "7.08",      "14.14", "23.98", "2.35", "14.14",
                                          "2.89",      "3.74",  "0.42"};
  EXPECT_EQ(words, expected);
}

TEST(RenderTable, BetterModelCarriesEveryBestMark) {
  const std::vector<MetricsReport> reports{kSimCnn, kSimUnet};
  const auto rows = lines_of(render_table(reports));
  ASSERT_EQ(rows.size(), 5u);
  const auto cnn = split_words(rows[3]);
  const auto unet = split_words(rows[4]);
  ASSERT_EQ(unet.size(), 13u);
  for (std::size_t k = 2; k < unet.size(); ++k) {
    EXPECT_EQ(unet[k].back(), '*') << unet[k];
    EXPECT_NE(cnn[k].back(), '*') << cnn[k];
  }
}

TEST(RenderTable, GroupsRowsByDataset) {
  auto sat = reference_row("Satellite", "CNN",
                           {0.53, 0.95, 1.33, 33.11, 78.22, 154.05, 0.98, 74.35, 1.57, 3.72, 0.12});
  const std::vector<MetricsReport> reports{kSimCnn, sat, kSimUnet};
  const auto rows = lines_of(render_table(reports));
  ASSERT_EQ(rows.size(), 6u);
  EXPECT_EQ(split_words(rows[3])[1], "CNN");
  EXPECT_EQ(split_words(rows[4])[1], "U-Net");
  EXPECT_EQ(split_words(rows[5])[0], "Satellite");
  // A dataset with a single row has nothing to compare against.
  EXPECT_EQ(rows[5].find('*'), std::string::npos);
}

TEST(PlotPredictions, SidecarListsEveryPoint) {
  const auto dir = std::filesystem::temp_directory_path() / "plume2rate_plot";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const std::vector<double> y{1.0, 5.0, 9.0, 12.5, 30.0};
  const auto data = plot_predictions(y, y, dir / "scatter.png");
  ASSERT_EQ(data.points.size(), y.size());
  for (const auto& [t, p] : data.points) EXPECT_EQ(t, p);
  EXPECT_TRUE(std::filesystem::exists(dir / "scatter.png"));
  const auto sidecar = io::read_json(dir / "scatter.json");
  EXPECT_EQ(sidecar.at("n").get<std::size_t>(), y.size());
  EXPECT_EQ(sidecar.at("points").size(), y.size());
  // PNG signature.
  const auto bytes = io::read_text(dir / "scatter.png");
  EXPECT_EQ(bytes.substr(1, 3), "PNG");
  // Layout is deterministic.
  plot_predictions(y, y, dir / "again.png");
  EXPECT_EQ(io::read_text(dir / "again.png"), bytes);

  EXPECT_THROW(plot_predictions({}, {}, dir / "empty.png"), Error);
  try {
    plot_predictions(y, y, dir / "no" / "such" / "dir" / "x.png");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kIoError);
  }
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace plume2rate::eval
