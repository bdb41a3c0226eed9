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


#ifndef PLUME2RATE_PIPELINE_HPP_
#define PLUME2RATE_PIPELINE_HPP_

#include <filesystem>
#include <string>

#include "plume2rate/config.hpp"
#include "plume2rate/error.hpp"

namespace plume2rate::pipeline {

namespace fs = std::filesystem;

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitData = 4;

int exit_code(const Error& error);

// Artifact layout under one data root.
struct Layout {
  fs::path root;

  fs::path simulated() const { return root / "simulated"; }
  fs::path satellite() const { return root / "satellite"; }
  fs::path dataset() const { return root / "dataset"; }
  fs::path models() const { return root / "models"; }
  fs::path eval() const { return root / "eval"; }
};

std::string arch_dir_name(models::Arch arch);  // "cnn" / "unet"

// Exclusive advisory lock on <root>/.plume2rate.lock. Throws IoError when
// another process holds it.
class DataRootLock {
 public:
  explicit DataRootLock(const fs::path& root);
  ~DataRootLock();
  DataRootLock(const DataRootLock&) = delete;
  DataRootLock& operator=(const DataRootLock&) = delete;

 private:
  int fd_ = -1;
};

// Optional directory overrides for train/evaluate; empty means the
// default location under the data root.
struct StageDirs {
  fs::path data;
  fs::path models;
  fs::path out;
};

// Every command validates the config first and publishes its outputs
// by renaming a finished temp directory over the target.
void cmd_simulate(const config::RunConfig& config);
void cmd_ingest(const config::RunConfig& config);
void cmd_build_dataset(const config::RunConfig& config);
void cmd_train(const config::RunConfig& config, const StageDirs& dirs = {});
void cmd_evaluate(const config::RunConfig& config, const StageDirs& dirs = {});
// Table and improvement summary of an earlier evaluation.
std::string cmd_report(const config::RunConfig& config, const StageDirs& dirs = {});
void cmd_run_all(const config::RunConfig& config);

}  // namespace plume2rate::pipeline

#endif  // PLUME2RATE_PIPELINE_HPP_
