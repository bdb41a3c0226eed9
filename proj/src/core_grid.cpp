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

#include "plume2rate/core_grid.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace plume2rate::grid {

std::string_view channel_name(Channel channel) {
  switch (channel) {
    case Channel::kXco2: return "XCO2";
    case Channel::kNo2: return "NO2";
    case Channel::kWindU: return "WIND_U";
    case Channel::kWindV: return "WIND_V";
  }
  return "XCO2";
}

Channel parse_channel(std::string_view name) {
  for (Channel c : {Channel::kXco2, Channel::kNo2, Channel::kWindU,
                    Channel::kWindV}) {
    if (channel_name(c) == name) return c;
  }
  throw Error(ErrorKind::kSchemaError,
              "unknown channel_id '" + std::string(name) + "'");
}

GridField::GridField(Raster values, Mask valid, double cell_size_km,
                     GeoPoint origin, Date timestamp, Channel channel)
    : values_(std::move(values)),
      valid_(std::move(valid)),
      cell_size_km_(cell_size_km),
      origin_(origin),
      timestamp_(timestamp),
      channel_(channel) {
  if (values_.rows() < 2 || values_.cols() < 2) {
    throw Error(ErrorKind::kInvalidInput, "grid dimensions must be >= 2");
  }
  if (values_.rows() != valid_.rows() || values_.cols() != valid_.cols()) {
    throw Error(ErrorKind::kInvalidInput, "values and mask differ in shape");
  }
  if (!(cell_size_km_ > 0.0) || !std::isfinite(cell_size_km_)) {
    throw Error(ErrorKind::kInvalidInput, "cell_size_km must be positive");
  }
  if (!std::isfinite(origin_.x_km) || !std::isfinite(origin_.y_km)) {
    throw Error(ErrorKind::kInvalidInput, "origin must be finite");
  }
  const auto v = values_.data();
  const auto m = valid_.data();
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (m[k] && !std::isfinite(v[k])) {
      throw Error(ErrorKind::kInvalidInput, "valid cell holds non-finite value");
    }
  }
}

GridField GridField::complete(Raster values, double cell_size_km,
                              GeoPoint origin, Date timestamp,
                              Channel channel) {
  Mask mask(values.rows(), values.cols(), std::uint8_t{1});
  return GridField(std::move(values), std::move(mask), cell_size_km, origin,
                   timestamp, channel);
}

std::size_t GridField::valid_count() const {
  const auto m = valid_.data();
  return static_cast<std::size_t>(std::count_if(
      m.begin(), m.end(), [](std::uint8_t b) { return b != 0; }));
}

bool GridField::co_registered(const GridField& other) const {
  return values_.same_shape(other.values_) &&
         std::abs(cell_size_km_ - other.cell_size_km_) < 1e-9 &&
         std::abs(origin_.x_km - other.origin_.x_km) < 1e-9 &&
         std::abs(origin_.y_km - other.origin_.y_km) < 1e-9;
}

CellIndex GridField::cell_containing(GeoPoint p) const {
  return {static_cast<int>(
              std::floor((p.y_km - origin_.y_km) / cell_size_km_ + 0.5)),
          static_cast<int>(
              std::floor((p.x_km - origin_.x_km) / cell_size_km_ + 0.5))};
}

namespace {

// Fractional index clamped to [0, n-1], split into a base index whose
// successor exists and the interpolation weight.
std::pair<int, double> clamped_coordinate(double frac, int n) {
  frac = std::clamp(frac, 0.0, double(n - 1));
  int base = std::min(static_cast<int>(std::floor(frac)), n - 2);
  return {base, frac - base};
}

void require_complete(const GridField& field, const char* op) {
  if (!field.is_complete()) {
    throw Error(ErrorKind::kGapFillRequired,
                std::string(op) + " needs a complete field");
  }
}

}  // namespace

double sample_bilinear(const GridField& field, GeoPoint p) {
  const double cs = field.cell_size_km();
  const auto [j0, tx] =
      clamped_coordinate((p.x_km - field.origin().x_km) / cs, field.cols());
  const auto [i0, ty] =
      clamped_coordinate((p.y_km - field.origin().y_km) / cs, field.rows());
  const Raster& v = field.values();
  const double top = (1.0 - tx) * v(i0, j0) + tx * v(i0, j0 + 1);
  const double bottom = (1.0 - tx) * v(i0 + 1, j0) + tx * v(i0 + 1, j0 + 1);
  return (1.0 - ty) * top + ty * bottom;
}

GridField bilinear_resample(const GridField& field,
                            double target_cell_size_km) {
  require_complete(field, "bilinear_resample");
  if (!(target_cell_size_km > 0.0)) {
    throw Error(ErrorKind::kInvalidInput, "target cell size must be positive");
  }
  const double cs = field.cell_size_km();
  if (target_cell_size_km > cs * (1.0 + 1e-12)) {
    throw Error(ErrorKind::kUnsupportedUpscale,
                "target cell size exceeds source cell size");
  }
  const int ny = std::max(
      2, static_cast<int>(std::lround(field.rows() * cs / target_cell_size_km)));
  const int nx = std::max(
      2, static_cast<int>(std::lround(field.cols() * cs / target_cell_size_km)));
  const GeoPoint origin{field.origin().x_km - 0.5 * cs + 0.5 * target_cell_size_km,
                        field.origin().y_km - 0.5 * cs + 0.5 * target_cell_size_km};
  Raster out(ny, nx);
  for (int i = 0; i < ny; ++i) {
    const double y = origin.y_km + i * target_cell_size_km;
    for (int j = 0; j < nx; ++j) {
      out(i, j) = sample_bilinear(field, {origin.x_km + j * target_cell_size_km, y});
    }
  }
  return GridField::complete(std::move(out), target_cell_size_km, origin,
                             field.timestamp(), field.channel());
}

GridField idw_fill(const GridField& field, double power, int max_neighbors) {
  if (max_neighbors < 1) {
    throw Error(ErrorKind::kInvalidInput, "max_neighbors must be >= 1");
  }
  struct Known {
    double x, y, value;
  };
  std::vector<Known> known;
  known.reserve(field.valid_count());
  for (int i = 0; i < field.rows(); ++i) {
    for (int j = 0; j < field.cols(); ++j) {
      if (field.valid(i, j)) {
        known.push_back({field.cell_x(j), field.cell_y(i), field.value(i, j)});
      }
    }
  }
  if (known.empty()) {
    throw Error(ErrorKind::kEmptyField, "no valid cells to fill from");
  }

  Raster out = field.values();
  const std::size_t k = std::min<std::size_t>(max_neighbors, known.size());
  std::vector<std::pair<double, std::size_t>> dist(known.size());
  for (int i = 0; i < field.rows(); ++i) {
    for (int j = 0; j < field.cols(); ++j) {
      if (field.valid(i, j)) continue;
      const double x = field.cell_x(j);
      const double y = field.cell_y(i);
      for (std::size_t n = 0; n < known.size(); ++n) {
        const double dx = known[n].x - x;
        const double dy = known[n].y - y;
        dist[n] = {dx * dx + dy * dy, n};
      }
      // (distance, index) pairs are unique, so selection is deterministic.
      std::nth_element(dist.begin(), dist.begin() + (k - 1), dist.end());
      double wsum = 0.0;
      double vsum = 0.0;
      for (std::size_t n = 0; n < k; ++n) {
        const double w = std::pow(dist[n].first, -0.5 * power);
        wsum += w;
        vsum += w * known[dist[n].second].value;
      }
      out(i, j) = vsum / wsum;
    }
  }
  return GridField::complete(std::move(out), field.cell_size_km(),
                             field.origin(), field.timestamp(),
                             field.channel());
}

namespace {

CellIndex window_corner(const GridField& field, GeoPoint center, int rows,
                        int cols) {
  const CellIndex c = field.cell_containing(center);
  const CellIndex corner{c.row - rows / 2, c.col - cols / 2};
  if (corner.row < 0 || corner.col < 0 || corner.row + rows > field.rows() ||
      corner.col + cols > field.cols()) {
    throw Error(ErrorKind::kPatchOutOfBounds,
                "window around cell (" + std::to_string(c.row) + ", " +
                    std::to_string(c.col) + ") crosses the field boundary");
  }
  return corner;
}

}  // namespace

Raster extract_patch(const GridField& field, GeoPoint center, int size) {
  if (size < 2) throw Error(ErrorKind::kInvalidInput, "patch size must be >= 2");
  require_complete(field, "extract_patch");
  const CellIndex corner = window_corner(field, center, size, size);
  Raster patch(size, size);
  for (int i = 0; i < size; ++i) {
    for (int j = 0; j < size; ++j) {
      patch(i, j) = field.value(corner.row + i, corner.col + j);
    }
  }
  return patch;
}

GridField write_patch(const GridField& field, GeoPoint center,
                      const Raster& patch) {
  const CellIndex corner =
      window_corner(field, center, patch.rows(), patch.cols());
  Raster values = field.values();
  Mask mask = field.valid_mask();
  for (int i = 0; i < patch.rows(); ++i) {
    for (int j = 0; j < patch.cols(); ++j) {
      values(corner.row + i, corner.col + j) = patch(i, j);
      mask(corner.row + i, corner.col + j) = 1;
    }
  }
  return GridField(std::move(values), std::move(mask), field.cell_size_km(),
                   field.origin(), field.timestamp(), field.channel());
}

}  // namespace plume2rate::grid
