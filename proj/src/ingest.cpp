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

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "plume2rate/io_util.hpp"

namespace plume2rate::ingest {

using grid::GridField;

GridField fill_xco2_map(const GridField& soundings,
                        const std::vector<GridField>& predictors, int k) {
  if (k < 1) throw Error(ErrorKind::kInvalidInput, "k must be >= 1");
  for (const auto& p : predictors) {
    if (!p.co_registered(soundings)) {
      throw Error(ErrorKind::kGridMismatch,
                  "predictor grid differs from the sounding grid");
    }
    if (!p.is_complete()) {
      throw Error(ErrorKind::kGapFillRequired, "predictors must be complete");
    }
  }
  const int ny = soundings.rows();
  const int nx = soundings.cols();
  std::vector<int> observed;
  for (int c = 0; c < ny * nx; ++c) {
    if (soundings.valid(c / nx, c % nx)) observed.push_back(c);
  }
  if (observed.size() < std::size_t(k)) {
    throw Error(ErrorKind::kInsufficientSoundings,
                std::to_string(observed.size()) + " valid soundings, need " +
                    std::to_string(k));
  }
  if (observed.size() == std::size_t(ny) * nx) return soundings;

  // Raw features per cell: predictor values, then x and y.
  const std::size_t nf = predictors.size() + 2;
  auto raw_feature = [&](int cell, std::size_t f) {
    const int i = cell / nx;
    const int j = cell % nx;
    if (f < predictors.size()) return predictors[f].value(i, j);
    return f == predictors.size() ? soundings.cell_x(j) : soundings.cell_y(i);
  };
  // Standardize over observed cells; constant features carry no information
  // and get zero scale.
  std::vector<double> mean(nf, 0.0), scale(nf, 0.0);
  for (std::size_t f = 0; f < nf; ++f) {
    double s = 0.0, s2 = 0.0;
    for (int c : observed) s += raw_feature(c, f);
    mean[f] = s / observed.size();
    for (int c : observed) {
      const double d = raw_feature(c, f) - mean[f];
      s2 += d * d;
    }
    const double sd = std::sqrt(s2 / observed.size());
    scale[f] = sd > 1e-12 * (std::abs(mean[f]) + 1.0) ? 1.0 / sd : 0.0;
  }
  std::vector<double> known(observed.size() * nf);
  for (std::size_t n = 0; n < observed.size(); ++n) {
    for (std::size_t f = 0; f < nf; ++f) {
      known[n * nf + f] = (raw_feature(observed[n], f) - mean[f]) * scale[f];
    }
  }

  grid::Raster out = soundings.values();
  std::vector<std::pair<double, std::size_t>> dist(observed.size());
  std::vector<double> query(nf);
  for (int c = 0; c < ny * nx; ++c) {
    const int i = c / nx;
    const int j = c % nx;
    if (soundings.valid(i, j)) continue;
    for (std::size_t f = 0; f < nf; ++f) {
      query[f] = (raw_feature(c, f) - mean[f]) * scale[f];
    }
    for (std::size_t n = 0; n < observed.size(); ++n) {
      const double* row = &known[n * nf];
      double d2 = 0.0;
      for (std::size_t f = 0; f < nf; ++f) {
        const double d = row[f] - query[f];
        d2 += d * d;
      }
      dist[n] = {d2, n};
    }
    std::nth_element(dist.begin(), dist.begin() + (k - 1), dist.end());
    double wsum = 0.0, vsum = 0.0;
    double exact_sum = 0.0;
    int exact = 0;
    for (int n = 0; n < k; ++n) {
      const double value = soundings.value(observed[dist[n].second] / nx,
                                           observed[dist[n].second] % nx);
      if (dist[n].first == 0.0) {
        exact_sum += value;
        ++exact;
        continue;
      }
      const double w = 1.0 / std::sqrt(dist[n].first);
      wsum += w;
      vsum += w * value;
    }
    out(i, j) = exact > 0 ? exact_sum / exact : vsum / wsum;
  }
  return GridField::complete(std::move(out), soundings.cell_size_km(),
                             soundings.origin(), soundings.timestamp(),
                             soundings.channel());
}

GridField preprocess_no2(const GridField& raw) {
  return grid::bilinear_resample(grid::idw_fill(raw), 1.0);
}

std::pair<GridField, GridField> preprocess_wind(const GridField& u,
                                                const GridField& v) {
  if (!u.co_registered(v)) {
    throw Error(ErrorKind::kGridMismatch, "wind components are not co-registered");
  }
  return {grid::bilinear_resample(u, 1.0), grid::bilinear_resample(v, 1.0)};
}

std::vector<DailyRate> disaggregate_annual(
    const PlantRecord& record, const std::vector<DailyProxy>& proxies) {
  if (!(record.annual_emission_mt > 0.0)) {
    throw Error(ErrorKind::kInvalidInput,
                record.plant_id + ": annual emission must be positive");
  }
  if (proxies.empty()) {
    throw Error(ErrorKind::kDegenerateProxy, record.plant_id + ": no proxy days");
  }
  double total = 0.0;
  for (const auto& p : proxies) {
    if (!std::isfinite(p.proxy_value) || p.proxy_value < 0.0) {
      throw Error(ErrorKind::kInvalidProxy,
                  record.plant_id + ": negative or non-finite proxy on " +
                      p.date.ToString());
    }
    total += p.proxy_value;
  }
  if (!(total > 0.0)) {
    throw Error(ErrorKind::kDegenerateProxy, record.plant_id + ": all proxies are zero");
  }
  const double days = static_cast<double>(proxies.size());
  std::vector<DailyRate> out;
  out.reserve(proxies.size());
  for (const auto& p : proxies) {
    out.push_back({p.date, record.annual_emission_mt * days * (p.proxy_value / total)});
  }
  return out;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
  }
  return out;
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path,
                                               const std::string& header) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIoError, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || split_csv(line) != split_csv(header)) {
    throw Error(ErrorKind::kSchemaError,
                path.string() + ": expected header '" + header + "'");
  }
  const std::size_t width = split_csv(header).size();
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto row = split_csv(line);
    if (row.size() != width) {
      throw Error(ErrorKind::kSchemaError, path.string() + ": bad row '" + line + "'");
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

double to_double(const std::string& s, const std::filesystem::path& path) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorKind::kSchemaError, path.string() + ": bad number '" + s + "'");
  }
}

constexpr const char* kCatalogHeader = "plant_id,x_km,y_km,annual_emission_mt,year";
constexpr const char* kProxyHeader = "plant_id,date,proxy_value";

}  // namespace

std::vector<PlantRecord> read_plant_catalog(const std::filesystem::path& path) {
  std::vector<PlantRecord> out;
  for (const auto& row : read_csv(path, kCatalogHeader)) {
    out.push_back({row[0],
                   {to_double(row[1], path), to_double(row[2], path)},
                   to_double(row[3], path),
                   static_cast<int>(to_double(row[4], path))});
  }
  return out;
}

void write_plant_catalog(const std::filesystem::path& path,
                         const std::vector<PlantRecord>& plants) {
  std::ostringstream out;
  out.precision(17);
  out << kCatalogHeader << "\n";
  for (const auto& p : plants) {
    out << p.plant_id << ',' << p.location.x_km << ',' << p.location.y_km << ','
        << p.annual_emission_mt << ',' << p.year << "\n";
  }
  io::write_text_atomic(path, out.str());
}

std::map<std::string, std::vector<DailyProxy>> read_proxy_series(
    const std::filesystem::path& path) {
  std::map<std::string, std::vector<DailyProxy>> out;
  for (const auto& row : read_csv(path, kProxyHeader)) {
    out[row[0]].push_back({Date::Parse(row[1]), to_double(row[2], path)});
  }
  return out;
}

void write_proxy_series(
    const std::filesystem::path& path,
    const std::map<std::string, std::vector<DailyProxy>>& proxies) {
  std::ostringstream out;
  out.precision(17);
  out << kProxyHeader << "\n";
  for (const auto& [id, series] : proxies) {
    for (const auto& p : series) {
      out << id << ',' << p.date.ToString() << ',' << p.proxy_value << "\n";
    }
  }
  io::write_text_atomic(path, out.str());
}

}  // namespace plume2rate::ingest
