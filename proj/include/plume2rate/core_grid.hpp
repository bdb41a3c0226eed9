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

#ifndef PLUME2RATE_CORE_GRID_HPP_
#define PLUME2RATE_CORE_GRID_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "plume2rate/date.hpp"
#include "plume2rate/error.hpp"

namespace plume2rate::grid {

enum class Channel { kXco2, kNo2, kWindU, kWindV };

std::string_view channel_name(Channel channel);
Channel parse_channel(std::string_view name);

// Dense row-major 2-D array.
template <typename T>
class Array2D {
 public:
  Array2D() = default;
  Array2D(int rows, int cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(std::size_t(rows) * cols, fill) {}
  Array2D(int rows, int cols, std::vector<T> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != std::size_t(rows) * cols) {
      throw Error(ErrorKind::kInvalidInput, "Array2D data size mismatch");
    }
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  T& operator()(int i, int j) { return data_[std::size_t(i) * cols_ + j]; }
  const T& operator()(int i, int j) const {
    return data_[std::size_t(i) * cols_ + j];
  }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  const std::vector<T>& vector() const { return data_; }

  bool same_shape(const Array2D& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }
  bool operator==(const Array2D&) const = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<T> data_;
};

using Raster = Array2D<double>;
using Mask = Array2D<std::uint8_t>;

// Planar grid-local coordinates in km.
struct GeoPoint {
  double x_km = 0.0;
  double y_km = 0.0;
};

struct GridSpec {
  int ny = 64;
  int nx = 64;
  double cell_size_km = 2.0;
  GeoPoint origin{};  // center of cell (0, 0)
};

struct CellIndex {
  int row = 0;
  int col = 0;
};

// Georeferenced raster with a validity mask. Column index grows with x,
// row index grows with y; origin is the center of cell (0, 0).
class GridField {
 public:
  GridField(Raster values, Mask valid, double cell_size_km, GeoPoint origin,
            Date timestamp, Channel channel);

  // Fully valid field.
  static GridField complete(Raster values, double cell_size_km,
                            GeoPoint origin, Date timestamp, Channel channel);

  const Raster& values() const { return values_; }
  const Mask& valid_mask() const { return valid_; }
  double cell_size_km() const { return cell_size_km_; }
  GeoPoint origin() const { return origin_; }
  Date timestamp() const { return timestamp_; }
  Channel channel() const { return channel_; }
  int rows() const { return values_.rows(); }
  int cols() const { return values_.cols(); }

  bool valid(int i, int j) const { return valid_(i, j) != 0; }
  double value(int i, int j) const { return values_(i, j); }
  double cell_x(int j) const { return origin_.x_km + j * cell_size_km_; }
  double cell_y(int i) const { return origin_.y_km + i * cell_size_km_; }

  std::size_t valid_count() const;
  bool is_complete() const { return valid_count() == values_.size(); }
  GridSpec spec() const {
    return {rows(), cols(), cell_size_km_, origin_};
  }
  bool co_registered(const GridField& other) const;

  // Cell whose footprint contains the point; may lie outside the grid.
  CellIndex cell_containing(GeoPoint p) const;

 private:
  Raster values_;
  Mask valid_;
  double cell_size_km_;
  GeoPoint origin_;
  Date timestamp_;
  Channel channel_;
};

// Bilinear interpolation of a complete field at an arbitrary point;
// coordinates beyond the outermost cell centers are clamped.
double sample_bilinear(const GridField& field, GeoPoint p);

// Resample a complete field onto a finer grid covering the same extent.
GridField bilinear_resample(const GridField& field, double target_cell_size_km);

// Inverse-distance-weighted fill of every invalid cell from its
// `max_neighbors` nearest valid cells, weights d^-power.
GridField idw_fill(const GridField& field, double power = 2.0,
                   int max_neighbors = 12);

// size x size window centered so that the cell containing `center` sits at
// (size/2, size/2). Throws PatchOutOfBounds rather than padding.
Raster extract_patch(const GridField& field, GeoPoint center, int size = 64);

// Inverse of extract_patch: writes the window back into the field.
GridField write_patch(const GridField& field, GeoPoint center,
                      const Raster& patch);

// On-disk form: <name>.f32 (little-endian float32, row-major) plus a
// <name>.json sidecar; an optional <mask_file> holds one uint8 per cell.
void write_field(const GridField& field, const std::filesystem::path& dir,
                 const std::string& name);
GridField read_field(const std::filesystem::path& dir, const std::string& name);

}  // namespace plume2rate::grid

#endif  // PLUME2RATE_CORE_GRID_HPP_
