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


#ifndef PLUME2RATE_SRC_PNG_WRITER_HPP_
#define PLUME2RATE_SRC_PNG_WRITER_HPP_

#include <cstdint>
#include <filesystem>
#include <span>

namespace plume2rate::detail {

// 8-bit RGB, rows top to bottom. Throws IoError.
void write_png_rgb(const std::filesystem::path& path, int width, int height,
                   std::span<const std::uint8_t> rgb);

}  // namespace plume2rate::detail

#endif  // PLUME2RATE_SRC_PNG_WRITER_HPP_
