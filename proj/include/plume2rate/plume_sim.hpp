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

#ifndef PLUME2RATE_PLUME_SIM_HPP_
#define PLUME2RATE_PLUME_SIM_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "plume2rate/core_grid.hpp"
#include "plume2rate/ingest.hpp"
#include "plume2rate/sample.hpp"

namespace plume2rate::sim {

inline constexpr double kSecondsPerYear = 365.0 * 86400.0;
inline constexpr double kKgPerMt = 1e9;
inline constexpr double kMolarMassCo2 = 0.044;     // kg/mol
inline constexpr double kMolarMassAir = 0.028964;  // kg/mol
inline constexpr double kSurfacePressure = 101325.0;  // Pa
inline constexpr double kGravity = 9.80665;           // m/s^2
inline constexpr double kMaxRateMtPerYr = 60.0;
inline constexpr double kMinWindSpeed = 0.5;

// Moles of dry air above one square meter, p_s / (g M_air).
inline constexpr double dry_air_column_mol_m2() {
  return kSurfacePressure / (kGravity * kMolarMassAir);
}

inline constexpr double mt_per_yr_to_kg_s(double q) {
  return q * kKgPerMt / kSecondsPerYear;
}

// CO2 column mass density (kg/m^2) -> XCO2 enhancement (ppm).
inline constexpr double column_mass_to_ppm(double kg_m2) {
  return kg_m2 / kMolarMassCo2 / dry_air_column_mol_m2() * 1e6;
}

struct PlumeScenario {
  double q_mt_per_yr = 10.0;
  double wind_u_ms = 4.0;
  double wind_v_ms = 0.0;
  double sigma_a = 0.8;  // sigma_y(x) = sigma_a * x^sigma_b, meters
  double sigma_b = 0.9;
  double background_xco2_ppm = 410.0;
  double noise_sd_ppm = 0.7;
  double no2_ratio = 3.5e-4;     // mol/m^2 NO2 per ppm of CO2 enhancement
  double no2_noise_sd = 2e-5;    // mol/m^2
  double no2_lifetime_s = 4.0 * 3600.0;
  std::uint64_t seed = 0;

  double wind_speed() const;
  // Throws InvalidScenario. q == 0 is accepted for physics checks.
  void validate() const;
};

// Position of a point relative to the source, rotated so x points
// downwind. Meters.
struct PlumeFrame {
  double downwind_m = 0.0;
  double crosswind_m = 0.0;
};

PlumeFrame to_plume_frame(const PlumeScenario& scenario, grid::GeoPoint source,
                          grid::GeoPoint at);

// Vertically integrated Gaussian plume, kg/m^2; zero at or upwind of the
// source.
double column_density_kg_m2(const PlumeScenario& scenario, PlumeFrame at);

// XCO2 enhancement (ppm) at cell centers. Cells within one cell of the
// source are evaluated no closer than half a cell downwind.
grid::GridField gaussian_plume_column(const PlumeScenario& scenario,
                                      const grid::GridSpec& grid,
                                      grid::GeoPoint source,
                                      Date date = Date());

// Four-channel synthetic scene on a 64x64 grid with known target.
data::Sample simulate_scene(const PlumeScenario& scenario,
                            const grid::GridSpec& grid, grid::GeoPoint source,
                            Date date = Date());

// Keeps `coverage` of the cells, laid out as randomly placed diagonal
// swaths. Invalid cells are set to NaN.
grid::GridField make_sparse_soundings(const grid::GridField& field,
                                      double coverage, int swath_width_cells,
                                      std::uint64_t seed);

// Batch of synthetic scenes for the simulated corpus.
struct ScenarioBatch {
  int count = 600;
  double q_min = 1.0;
  double q_max = 40.0;
  double wind_min = 2.0;  // speed range, m/s; direction uniform
  double wind_max = 6.0;
  double cell_size_km = 2.0;
  PlumeScenario defaults{};
  std::uint64_t seed = 1;
  Date start_date{2015, 1, 1};
};

// Throws ConfigError.
void validate_batch(const ScenarioBatch& batch);
std::vector<PlumeScenario> draw_scenarios(const ScenarioBatch& batch);
std::vector<data::Sample> simulate_batch(const ScenarioBatch& batch);

// Satellite-style raw inputs for a small region with several plants:
// sparse 1 km XCO2 soundings, gappy coarse NO2, coarse wind.
struct RegionConfig {
  int size_km = 128;
  int plants = 3;
  int days = 4;
  Date start_date{2020, 1, 1};
  double annual_min_mt = 2.0;
  double annual_max_mt = 30.0;
  double xco2_coverage = 0.15;
  int swath_width_cells = 6;
  double no2_cell_km = 4.0;
  double no2_gap_fraction = 0.2;
  double wind_cell_km = 4.0;
  PlumeScenario defaults{};
  std::uint64_t seed = 7;
};

struct RegionDay {
  Date date;
  grid::GridField xco2;    // 1 km, masked
  grid::GridField no2;     // coarse, masked
  grid::GridField wind_u;  // coarse, complete
  grid::GridField wind_v;
};

struct RegionCorpus {
  std::vector<ingest::PlantRecord> plants;
  std::map<std::string, std::vector<ingest::DailyProxy>> proxies;
  std::vector<RegionDay> days;
};

// Annual demand curve with peak-to-trough ratio 1.4 and unit mean.
double demand_factor(Date date);

// Throws ConfigError.
void validate_region(const RegionConfig& config);
RegionCorpus simulate_region(const RegionConfig& config);

}  // namespace plume2rate::sim

#endif  // PLUME2RATE_PLUME_SIM_HPP_
