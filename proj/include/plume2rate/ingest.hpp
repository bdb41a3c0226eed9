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

#ifndef PLUME2RATE_INGEST_HPP_
#define PLUME2RATE_INGEST_HPP_

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "plume2rate/core_grid.hpp"
#include "plume2rate/date.hpp"

namespace plume2rate::ingest {

struct PlantRecord {
  std::string plant_id;
  grid::GeoPoint location;
  double annual_emission_mt = 0.0;
  int year = 2020;
};

struct DailyProxy {
  Date date;
  double proxy_value = 0.0;
};

struct DailyRate {
  Date date;
  double rate_mt_per_yr = 0.0;
};

// Completes a sparse XCO2 sounding map with distance-weighted k-NN
// regression in standardized (predictor values, x, y) space. Observed
// cells pass through unchanged.
grid::GridField fill_xco2_map(const grid::GridField& soundings,
                              const std::vector<grid::GridField>& predictors,
                              int k = 16);

// Gap-fill a coarse NO2 field, then resample it to 1 km.
grid::GridField preprocess_no2(const grid::GridField& raw);

// Bilinear downscaling of both wind components to 1 km.
std::pair<grid::GridField, grid::GridField> preprocess_wind(
    const grid::GridField& u, const grid::GridField& v);

// Spreads an annual total over the proxy days. Rates stay in annualized
// Mt/yr, so their mean equals the annual emission.
std::vector<DailyRate> disaggregate_annual(const PlantRecord& record,
                                           const std::vector<DailyProxy>& proxies);

// CSV catalogs: `plant_id,x_km,y_km,annual_emission_mt,year` and
// `plant_id,date,proxy_value`.
std::vector<PlantRecord> read_plant_catalog(const std::filesystem::path& path);
void write_plant_catalog(const std::filesystem::path& path,
                         const std::vector<PlantRecord>& plants);
std::map<std::string, std::vector<DailyProxy>> read_proxy_series(
    const std::filesystem::path& path);
void write_proxy_series(
    const std::filesystem::path& path,
    const std::map<std::string, std::vector<DailyProxy>>& proxies);

}  // namespace plume2rate::ingest

#endif  // PLUME2RATE_INGEST_HPP_
