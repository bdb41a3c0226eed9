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

#include <cstdint>
#include <vector>

#include "plume2rate/core_grid.hpp"
#include "plume2rate/io_util.hpp"

namespace plume2rate::grid {

void write_field(const GridField& field, const std::filesystem::path& dir,
                 const std::string& name) {
  const auto& values = field.values().vector();
  std::vector<float> f32(values.begin(), values.end());
  io::write_binary(dir / (name + ".f32"), f32);

  nlohmann::json meta{
      {"shape", {field.rows(), field.cols()}},
      {"cell_size_km", field.cell_size_km()},
      {"origin_xy_km", {field.origin().x_km, field.origin().y_km}},
      {"timestamp", field.timestamp().ToString()},
      {"channel_id", channel_name(field.channel())},
  };
  if (!field.is_complete()) {
    const std::string mask_name = name + ".mask.u8";
    io::write_binary(dir / mask_name, field.valid_mask().vector());
    meta["mask_file"] = mask_name;
  }
  io::write_json(dir / (name + ".json"), meta);
}

GridField read_field(const std::filesystem::path& dir,
                     const std::string& name) {
  const nlohmann::json meta = io::read_json(dir / (name + ".json"));
  try {
    const int ny = meta.at("shape").at(0).get<int>();
    const int nx = meta.at("shape").at(1).get<int>();
    if (ny < 2 || nx < 2) {
      throw Error(ErrorKind::kSchemaError, name + ": shape must be >= 2x2");
    }
    const std::size_t n = std::size_t(ny) * nx;
    const auto f32 = io::read_binary<float>(dir / (name + ".f32"), n);
    Raster values(ny, nx, std::vector<double>(f32.begin(), f32.end()));

    Mask mask(ny, nx, std::uint8_t{1});
    if (meta.contains("mask_file")) {
      std::filesystem::path mpath = meta.at("mask_file").get<std::string>();
      if (mpath.is_relative()) mpath = dir / mpath;
      mask = Mask(ny, nx, io::read_binary<std::uint8_t>(mpath, n));
    }
    // Masked-out cells may carry NaN fill values on disk.
    for (int i = 0; i < ny; ++i) {
      for (int j = 0; j < nx; ++j) {
        if (!mask(i, j)) values(i, j) = 0.0;
      }
    }
    return GridField(std::move(values), std::move(mask),
                     meta.at("cell_size_km").get<double>(),
                     {meta.at("origin_xy_km").at(0).get<double>(),
                      meta.at("origin_xy_km").at(1).get<double>()},
                     Date::Parse(meta.at("timestamp").get<std::string>()),
                     parse_channel(meta.at("channel_id").get<std::string>()));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kSchemaError, name + ".json: " + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kInvalidInput) {
      throw Error(ErrorKind::kSchemaError, name + ": " + e.what());
    }
    throw;
  }
}

}  // namespace plume2rate::grid
