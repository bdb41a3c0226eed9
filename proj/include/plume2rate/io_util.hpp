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

#ifndef PLUME2RATE_IO_UTIL_HPP_
#define PLUME2RATE_IO_UTIL_HPP_

#include <bit>
#include <cstring>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "plume2rate/error.hpp"

namespace plume2rate::io {

namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Writes to a sibling temp file, then renames over the target.
inline void write_text_atomic(const fs::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::kIoError, "cannot write " + tmp.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw Error(ErrorKind::kIoError, "short write to " + tmp.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    throw Error(ErrorKind::kIoError,
                "cannot rename " + tmp.string() + ": " + ec.message());
  }
}

template <typename T>
void write_binary(const fs::path& path, const std::vector<T>& data) {
  std::string bytes(reinterpret_cast<const char*>(data.data()),
                    data.size() * sizeof(T));
  write_text_atomic(path, bytes);
}

template <typename T>
std::vector<T> read_binary(const fs::path& path, std::size_t expected_count) {
  const std::string bytes = read_text(path);
  if (bytes.size() != expected_count * sizeof(T)) {
    throw Error(ErrorKind::kSchemaError,
                path.string() + ": expected " +
                    std::to_string(expected_count * sizeof(T)) + " bytes, got " +
                    std::to_string(bytes.size()));
  }
  std::vector<T> out(expected_count);
  std::memcpy(out.data(), bytes.data(), bytes.size());
  return out;
}

inline nlohmann::json read_json(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kSchemaError, path.string() + ": " + e.what());
  }
}

inline void write_json(const fs::path& path, const nlohmann::json& j) {
  write_text_atomic(path, j.dump(2) + "\n");
}

}  // namespace plume2rate::io

#endif  // PLUME2RATE_IO_UTIL_HPP_
