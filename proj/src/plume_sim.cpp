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

#include "plume2rate/plume_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace plume2rate::sim {

using grid::GeoPoint;
using grid::GridField;
using grid::GridSpec;
using grid::Raster;

double PlumeScenario::wind_speed() const {
  return std::hypot(wind_u_ms, wind_v_ms);
}

void PlumeScenario::validate() const {
  auto fail = [](const std::string& what) {
    throw Error(ErrorKind::kInvalidScenario, what);
  };
  if (!(q_mt_per_yr >= 0.0) || q_mt_per_yr > kMaxRateMtPerYr) {
    fail("q_mt_per_yr must lie in (0, 60]");
  }
  if (!std::isfinite(wind_u_ms) || !std::isfinite(wind_v_ms) ||
      wind_speed() < kMinWindSpeed) {
    fail("wind speed must be >= 0.5 m/s");
  }
  if (!(sigma_a > 0.0)) fail("sigma_a must be positive");
  if (!(sigma_b > 0.0) || sigma_b > 1.0) fail("sigma_b must lie in (0, 1]");
  if (!(background_xco2_ppm > 0.0)) fail("background must be positive");
  if (!(noise_sd_ppm >= 0.0) || !(no2_noise_sd >= 0.0)) {
    fail("noise levels must be nonnegative");
  }
  if (!(no2_ratio > 0.0)) fail("no2_ratio must be positive");
  if (!(no2_lifetime_s > 0.0)) fail("no2_lifetime_s must be positive");
}

PlumeFrame to_plume_frame(const PlumeScenario& scenario, GeoPoint source,
                          GeoPoint at) {
  const double dx = (at.x_km - source.x_km) * 1000.0;
  const double dy = (at.y_km - source.y_km) * 1000.0;
  const double u = scenario.wind_u_ms;
  const double v = scenario.wind_v_ms;
  const double speed = scenario.wind_speed();
  return {(dx * u + dy * v) / speed, (-dx * v + dy * u) / speed};
}

double column_density_kg_m2(const PlumeScenario& scenario, PlumeFrame at) {
  if (at.downwind_m <= 0.0) return 0.0;
  const double sigma = scenario.sigma_a * std::pow(at.downwind_m, scenario.sigma_b);
  const double flux = mt_per_yr_to_kg_s(scenario.q_mt_per_yr);
  return flux / (std::sqrt(2.0 * std::numbers::pi) * sigma * scenario.wind_speed()) *
         std::exp(-at.crosswind_m * at.crosswind_m / (2.0 * sigma * sigma));
}

namespace {

struct PlumeCells {
  Raster ppm;
  Raster downwind_m;  // effective (floored) downwind distance
};

PlumeCells plume_cells(const PlumeScenario& scenario, const GridSpec& spec,
                       GeoPoint source) {
  scenario.validate();
  if (spec.ny < 2 || spec.nx < 2 || !(spec.cell_size_km > 0.0)) {
    throw Error(ErrorKind::kInvalidInput, "bad grid spec");
  }
  const double cs = spec.cell_size_km;
  const int src_row = static_cast<int>(std::floor((source.y_km - spec.origin.y_km) / cs + 0.5));
  const int src_col = static_cast<int>(std::floor((source.x_km - spec.origin.x_km) / cs + 0.5));
  if (src_row < 0 || src_col < 0 || src_row >= spec.ny || src_col >= spec.nx) {
    throw Error(ErrorKind::kSourceOutOfBounds, "source lies outside the grid");
  }
  const double floor_m = 0.5 * cs * 1000.0;
  PlumeCells out{Raster(spec.ny, spec.nx), Raster(spec.ny, spec.nx)};
  for (int i = 0; i < spec.ny; ++i) {
    for (int j = 0; j < spec.nx; ++j) {
      const GeoPoint at{spec.origin.x_km + j * cs, spec.origin.y_km + i * cs};
      PlumeFrame frame = to_plume_frame(scenario, source, at);
      const bool near = std::abs(i - src_row) <= 1 && std::abs(j - src_col) <= 1;
      if (near && frame.downwind_m >= 0.0) {
        frame.downwind_m = std::max(frame.downwind_m, floor_m);
      }
      out.ppm(i, j) = column_mass_to_ppm(column_density_kg_m2(scenario, frame));
      out.downwind_m(i, j) = std::max(frame.downwind_m, 0.0);
    }
  }
  return out;
}

}  // namespace

GridField gaussian_plume_column(const PlumeScenario& scenario,
                                const GridSpec& spec, GeoPoint source,
                                Date date) {
  PlumeCells cells = plume_cells(scenario, spec, source);
  return GridField::complete(std::move(cells.ppm), spec.cell_size_km,
                             spec.origin, date, grid::Channel::kXco2);
}

data::Sample simulate_scene(const PlumeScenario& scenario, const GridSpec& spec,
                            GeoPoint source, Date date) {
  if (spec.ny != data::kPatchSize || spec.nx != data::kPatchSize) {
    throw Error(ErrorKind::kInvalidInput, "scenes are 64x64");
  }
  const PlumeCells cells = plume_cells(scenario, spec, source);
  const double e_fold_m = scenario.wind_speed() * scenario.no2_lifetime_s;

  std::mt19937_64 rng(scenario.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  data::Sample s;
  s.target_mt_per_yr = scenario.q_mt_per_yr;
  s.plant_id = "sim";
  s.date = date;
  s.source = data::Source::kSimulated;
  s.cell_size_km = spec.cell_size_km;
  for (int i = 0; i < spec.ny; ++i) {
    for (int j = 0; j < spec.nx; ++j) {
      s.at(data::kXco2, i, j) = static_cast<float>(
          scenario.background_xco2_ppm + cells.ppm(i, j) +
          scenario.noise_sd_ppm * normal(rng));
    }
  }
  for (int i = 0; i < spec.ny; ++i) {
    for (int j = 0; j < spec.nx; ++j) {
      const double no2 = scenario.no2_ratio * cells.ppm(i, j) *
                         std::exp(-cells.downwind_m(i, j) / e_fold_m);
      s.at(data::kNo2, i, j) =
          static_cast<float>(no2 + scenario.no2_noise_sd * normal(rng));
      s.at(data::kWindU, i, j) = static_cast<float>(scenario.wind_u_ms);
      s.at(data::kWindV, i, j) = static_cast<float>(scenario.wind_v_ms);
    }
  }
  return s;
}

GridField make_sparse_soundings(const GridField& field, double coverage,
                                int swath_width_cells, std::uint64_t seed) {
  if (!(coverage > 0.0) || coverage > 1.0) {
    throw Error(ErrorKind::kInvalidCoverage, "coverage must lie in (0, 1]");
  }
  if (swath_width_cells < 1) {
    throw Error(ErrorKind::kInvalidCoverage, "swath width must be >= 1");
  }
  if (!field.is_complete()) {
    throw Error(ErrorKind::kGapFillRequired, "soundings are drawn from a complete field");
  }
  const int ny = field.rows();
  const int nx = field.cols();
  const std::size_t total = std::size_t(ny) * nx;
  const std::size_t target = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(coverage * double(total))), 1, total);

  // Diagonal index d = j - i + (ny - 1); one swath covers w consecutive d.
  const int diagonals = nx + ny - 1;
  std::vector<int> starts(diagonals);
  for (int d = 0; d < diagonals; ++d) starts[d] = d;
  std::mt19937_64 rng(seed);
  std::shuffle(starts.begin(), starts.end(), rng);

  grid::Mask mask(ny, nx, std::uint8_t{0});
  std::size_t count = 0;
  for (int start : starts) {
    if (count >= target) break;
    // Walk the swath along-track; a swath that would overshoot is cut short.
    for (int i = 0; i < ny && count < target; ++i) {
      for (int d = start; d < start + swath_width_cells && d < diagonals; ++d) {
        const int j = d - (ny - 1) + i;
        if (j < 0 || j >= nx || mask(i, j)) continue;
        mask(i, j) = 1;
        if (++count >= target) break;
      }
    }
  }

  Raster values = field.values();
  for (int i = 0; i < ny; ++i) {
    for (int j = 0; j < nx; ++j) {
      if (!mask(i, j)) values(i, j) = std::numeric_limits<double>::quiet_NaN();
    }
  }
  return GridField(std::move(values), std::move(mask), field.cell_size_km(),
                   field.origin(), field.timestamp(), field.channel());
}

namespace {

// Per-item seed derivation (splitmix64 finalizer).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

void validate_batch(const ScenarioBatch& b) {
  if (b.count < 1) throw Error(ErrorKind::kConfigError, "scenario count must be >= 1");
  if (!(b.q_min > 0.0) || b.q_max > kMaxRateMtPerYr || b.q_min > b.q_max) {
    throw Error(ErrorKind::kConfigError,
                "q range must satisfy 0 < q_min <= q_max <= 60");
  }
  if (b.wind_min < kMinWindSpeed || b.wind_min > b.wind_max) {
    throw Error(ErrorKind::kConfigError,
                "wind range must satisfy 0.5 <= wind_min <= wind_max");
  }
  if (!(b.cell_size_km > 0.0)) {
    throw Error(ErrorKind::kConfigError, "cell_size_km must be positive");
  }
  PlumeScenario probe = b.defaults;
  probe.q_mt_per_yr = b.q_min;
  try {
    probe.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::kConfigError, std::string("scenario defaults: ") + e.what());
  }
}

std::vector<PlumeScenario> draw_scenarios(const ScenarioBatch& batch) {
  validate_batch(batch);
  std::vector<PlumeScenario> out;
  out.reserve(batch.count);
  for (int n = 0; n < batch.count; ++n) {
    std::mt19937_64 rng(mix_seed(batch.seed, n));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    PlumeScenario s = batch.defaults;
    s.q_mt_per_yr = batch.q_min + (batch.q_max - batch.q_min) * unit(rng);
    const double speed = batch.wind_min + (batch.wind_max - batch.wind_min) * unit(rng);
    const double dir = 2.0 * std::numbers::pi * unit(rng);
    s.wind_u_ms = speed * std::cos(dir);
    s.wind_v_ms = speed * std::sin(dir);
    s.seed = mix_seed(batch.seed ^ 0x5eedULL, n);
    s.validate();
    out.push_back(s);
  }
  return out;
}

std::vector<data::Sample> simulate_batch(const ScenarioBatch& batch) {
  const auto scenarios = draw_scenarios(batch);
  const GridSpec spec{data::kPatchSize, data::kPatchSize, batch.cell_size_km, {0.0, 0.0}};
  const GeoPoint source{data::kPatchSize / 2 * batch.cell_size_km,
                        data::kPatchSize / 2 * batch.cell_size_km};
  std::vector<data::Sample> out;
  out.reserve(scenarios.size());
  for (std::size_t n = 0; n < scenarios.size(); ++n) {
    data::Sample s = simulate_scene(scenarios[n], spec, source,
                                    batch.start_date.AddDays(int(n % 365)));
    char id[32];
    std::snprintf(id, sizeof(id), "sim-%06zu", n);
    s.id = id;
    out.push_back(std::move(s));
  }
  return out;
}

double demand_factor(Date date) {
  // 1 + A sin(.) with (1 + A) / (1 - A) = 1.4.
  constexpr double amplitude = 1.0 / 6.0;
  return 1.0 + amplitude * std::sin(2.0 * std::numbers::pi * date.DayOfYear() / 365.0);
}

namespace {

struct LinearWind {
  double u0, v0, gu, gv;  // gradients per km across the region
  double cx, cy;
  double u(GeoPoint p) const { return u0 + gu * (p.x_km - cx); }
  double v(GeoPoint p) const { return v0 + gv * (p.y_km - cy); }
};

}  // namespace

void validate_region(const RegionConfig& cfg) {
  const int n = cfg.size_km;
  const int coarse_no2 = static_cast<int>(std::lround(cfg.no2_cell_km));
  const int coarse_wind = static_cast<int>(std::lround(cfg.wind_cell_km));
  if (n < data::kPatchSize + 8 || cfg.plants < 1 || cfg.days < 1 ||
      coarse_no2 < 2 || coarse_wind < 2 || n % coarse_no2 != 0 ||
      n % coarse_wind != 0 || !(cfg.annual_min_mt > 0.0) ||
      cfg.annual_min_mt > cfg.annual_max_mt ||
      cfg.annual_max_mt > kMaxRateMtPerYr || !(cfg.no2_gap_fraction >= 0.0) ||
      cfg.no2_gap_fraction >= 1.0 || !(cfg.xco2_coverage > 0.0) ||
      cfg.xco2_coverage > 1.0 || cfg.swath_width_cells < 1) {
    throw Error(ErrorKind::kConfigError, "invalid satellite region settings");
  }
}

RegionCorpus simulate_region(const RegionConfig& cfg) {
  validate_region(cfg);
  const int n = cfg.size_km;
  const int margin = data::kPatchSize / 2 + 4;
  const int coarse_no2 = static_cast<int>(std::lround(cfg.no2_cell_km));
  const int coarse_wind = static_cast<int>(std::lround(cfg.wind_cell_km));
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  RegionCorpus corpus;
  const double span = n - 1 - 2.0 * margin;
  for (int p = 0, attempts = 0; p < cfg.plants && attempts < 10000; ++attempts) {
    const GeoPoint loc{margin + span * unit(rng), margin + span * unit(rng)};
    const bool crowded = std::any_of(
        corpus.plants.begin(), corpus.plants.end(), [&](const auto& other) {
          return std::hypot(other.location.x_km - loc.x_km,
                            other.location.y_km - loc.y_km) < 24.0;
        });
    if (crowded) continue;
    char id[16];
    std::snprintf(id, sizeof(id), "PP%02d", p + 1);
    corpus.plants.push_back(
        {id, loc,
         cfg.annual_min_mt + (cfg.annual_max_mt - cfg.annual_min_mt) * unit(rng),
         cfg.start_date.year()});
    ++p;
  }

  const GridSpec fine{n, n, 1.0, {0.0, 0.0}};
  auto coarse_spec = [&](int cell) {
    const int m = n / cell;
    const double o = -0.5 + 0.5 * cell;
    return GridSpec{m, m, double(cell), {o, o}};
  };
  const GridSpec no2_spec = coarse_spec(coarse_no2);
  const GridSpec wind_spec = coarse_spec(coarse_wind);

  for (int d = 0; d < cfg.days; ++d) {
    const Date date = cfg.start_date.AddDays(d);
    const double speed = 2.0 + 4.0 * unit(rng);
    const double dir = 2.0 * std::numbers::pi * unit(rng);
    const LinearWind wind{speed * std::cos(dir), speed * std::sin(dir),
                          (unit(rng) - 0.5) * 2.0 / n, (unit(rng) - 0.5) * 2.0 / n,
                          0.5 * (n - 1), 0.5 * (n - 1)};

    Raster xco2(n, n, cfg.defaults.background_xco2_ppm);
    Raster no2(n, n, 0.0);
    std::vector<std::pair<Raster, double>> plumes;  // plume ppm, rate
    for (const auto& plant : corpus.plants) {
      PlumeScenario s = cfg.defaults;
      s.q_mt_per_yr = std::min(
          kMaxRateMtPerYr,
          plant.annual_emission_mt * demand_factor(date) *
              std::max(0.2, 1.0 + 0.1 * normal(rng)));
      s.wind_u_ms = wind.u(plant.location);
      s.wind_v_ms = wind.v(plant.location);
      if (s.wind_speed() < kMinWindSpeed) s.wind_u_ms += 1.0;
      PlumeCells cells = plume_cells(s, fine, plant.location);
      const double e_fold = s.wind_speed() * s.no2_lifetime_s;
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          xco2(i, j) += cells.ppm(i, j);
          no2(i, j) += s.no2_ratio * cells.ppm(i, j) *
                       std::exp(-cells.downwind_m(i, j) / e_fold);
        }
      }
      plumes.emplace_back(std::move(cells.ppm), s.q_mt_per_yr);
    }
    for (auto& x : xco2.data()) x += cfg.defaults.noise_sd_ppm * normal(rng);
    for (auto& x : no2.data()) x += cfg.defaults.no2_noise_sd * normal(rng);

    // Proxy: mean NO2 over the plant's plume pixels times the demand curve.
    for (std::size_t p = 0; p < corpus.plants.size(); ++p) {
      const Raster& ppm = plumes[p].first;
      const auto peak = *std::max_element(ppm.data().begin(), ppm.data().end());
      double sum = 0.0;
      int cnt = 0;
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          if (peak > 0.0 && ppm(i, j) > 0.05 * peak) {
            sum += no2(i, j);
            ++cnt;
          }
        }
      }
      const double mean_no2 = cnt > 0 ? std::max(sum / cnt, 0.0) : 0.0;
      corpus.proxies[corpus.plants[p].plant_id].push_back(
          {date, mean_no2 * demand_factor(date)});
    }

    const GridField xco2_field =
        GridField::complete(xco2, 1.0, fine.origin, date, grid::Channel::kXco2);
    GridField soundings = make_sparse_soundings(
        xco2_field, cfg.xco2_coverage, cfg.swath_width_cells, rng());

    // Coarse NO2: block mean, then cloud gaps.
    Raster no2_coarse(no2_spec.ny, no2_spec.nx, 0.0);
    grid::Mask no2_mask(no2_spec.ny, no2_spec.nx, std::uint8_t{1});
    for (int i = 0; i < no2_spec.ny; ++i) {
      for (int j = 0; j < no2_spec.nx; ++j) {
        double sum = 0.0;
        for (int a = 0; a < coarse_no2; ++a) {
          for (int b = 0; b < coarse_no2; ++b) {
            sum += no2(i * coarse_no2 + a, j * coarse_no2 + b);
          }
        }
        no2_coarse(i, j) = sum / (coarse_no2 * coarse_no2);
        if (unit(rng) < cfg.no2_gap_fraction) no2_mask(i, j) = 0;
      }
    }
    no2_mask(no2_spec.ny / 2, no2_spec.nx / 2) = 1;

    Raster u(wind_spec.ny, wind_spec.nx), v(wind_spec.ny, wind_spec.nx);
    for (int i = 0; i < wind_spec.ny; ++i) {
      for (int j = 0; j < wind_spec.nx; ++j) {
        const GeoPoint at{wind_spec.origin.x_km + j * wind_spec.cell_size_km,
                          wind_spec.origin.y_km + i * wind_spec.cell_size_km};
        u(i, j) = wind.u(at);
        v(i, j) = wind.v(at);
      }
    }
    corpus.days.push_back(
        {date, std::move(soundings),
         GridField(std::move(no2_coarse), std::move(no2_mask),
                   no2_spec.cell_size_km, no2_spec.origin, date,
                   grid::Channel::kNo2),
         GridField::complete(std::move(u), wind_spec.cell_size_km,
                             wind_spec.origin, date, grid::Channel::kWindU),
         GridField::complete(std::move(v), wind_spec.cell_size_km,
                             wind_spec.origin, date, grid::Channel::kWindV)});
  }
  return corpus;
}

}  // namespace plume2rate::sim
