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


// plume2rate command-line entry point.

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <cstdlib>
#include <optional>
#include <string>

#include "plume2rate/config.hpp"
#include "plume2rate/pipeline.hpp"

namespace {

using plume2rate::Error;
using plume2rate::ErrorKind;
namespace config = plume2rate::config;
namespace pipeline = plume2rate::pipeline;

struct Options {
  std::string config_path;
  std::string data_root;
  std::optional<std::uint64_t> seed;
  std::string data_dir;
  std::string models_dir;
  std::string out_dir;
};

config::RunConfig resolve(const Options& o) {
  config::RunConfig cfg;
  if (!o.config_path.empty()) {
    try {
      cfg = config::load_run_config(o.config_path);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kIoError) throw;
      throw Error(ErrorKind::kConfigError, "cannot read config " + o.config_path);
    }
  }
  if (!o.data_root.empty()) {
    cfg.data_root = o.data_root;
  } else if (cfg.data_root.empty()) {
    if (const char* env = std::getenv("PLUME2RATE_DATA_ROOT"); env && *env) cfg.data_root = env;
  }
  if (cfg.data_root.empty()) {
    throw Error(ErrorKind::kConfigError,
                "no data root: pass --data-root, set data_root in the config, or set "
                "PLUME2RATE_DATA_ROOT");
  }
  if (o.seed) cfg.apply_seed(*o.seed);
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  auto logger = spdlog::stderr_color_mt("plume2rate");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%H:%M:%S] %^%l%$ %v");

  CLI::App app{"Estimate CO2 point-source emission rates from 4x64x64 plume patches."};
  app.require_subcommand(0, 1);
  Options opt;
  bool print_config = false;
  bool quiet = false;
  app.add_flag("--print-config", print_config,
               "Print the effective configuration as TOML and exit");
  app.add_flag("-q,--quiet", quiet, "Only log warnings and errors");

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config_path, "TOML or JSON run configuration")
        ->check(CLI::ExistingFile);
    sub->add_option("--data-root", opt.data_root,
                    "Artifact directory (default: config data_root, then $PLUME2RATE_DATA_ROOT)");
    sub->add_option("--seed", opt.seed, "Global seed overriding the config");
  };
  // --print-config also honors --config given at top level.
  app.add_option("--config", opt.config_path, "TOML or JSON run configuration")
      ->check(CLI::ExistingFile);

  auto* simulate = app.add_subcommand("simulate", "Simulate the synthetic plume corpus");
  auto* ingest = app.add_subcommand("ingest", "Build satellite-style samples from raw fields");
  auto* build = app.add_subcommand("build-dataset", "Merge corpora, split and normalize");
  auto* train = app.add_subcommand("train", "Train the CNN and U-Net ensembles");
  auto* evaluate = app.add_subcommand("evaluate", "Score ensembles on the test split");
  auto* report = app.add_subcommand("report", "Print the table of the last evaluation");
  auto* run_all = app.add_subcommand("run-all", "Run every stage in order");
  for (auto* sub : {simulate, ingest, build, train, evaluate, report, run_all}) add_common(sub);
  train->add_option("--data", opt.data_dir, "Dataset directory (default <data-root>/dataset)");
  train->add_option("--out", opt.out_dir, "Model output directory (default <data-root>/models)");
  evaluate->add_option("--data", opt.data_dir, "Dataset directory (default <data-root>/dataset)");
  evaluate->add_option("--models", opt.models_dir,
                       "Model directory (default <data-root>/models)");
  evaluate->add_option("--out", opt.out_dir, "Evaluation output (default <data-root>/eval)");
  report->add_option("--out", opt.out_dir, "Evaluation directory (default <data-root>/eval)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? pipeline::kExitOk : pipeline::kExitConfig;
  }
  if (quiet) spdlog::set_level(spdlog::level::warn);

  try {
    if (print_config) {
      config::RunConfig cfg;
      if (!opt.config_path.empty()) cfg = config::load_run_config(opt.config_path);
      std::fputs(config::to_toml(cfg).c_str(), stdout);
      return pipeline::kExitOk;
    }
    if (app.get_subcommands().empty()) {
      std::fputs(app.help().c_str(), stderr);
      return pipeline::kExitConfig;
    }
    const config::RunConfig cfg = resolve(opt);
    const pipeline::StageDirs dirs{opt.data_dir, opt.models_dir, opt.out_dir};
    if (*simulate) pipeline::cmd_simulate(cfg);
    if (*ingest) pipeline::cmd_ingest(cfg);
    if (*build) pipeline::cmd_build_dataset(cfg);
    if (*train) pipeline::cmd_train(cfg, dirs);
    if (*evaluate) pipeline::cmd_evaluate(cfg, dirs);
    if (*report) std::fputs(pipeline::cmd_report(cfg, dirs).c_str(), stdout);
    if (*run_all) pipeline::cmd_run_all(cfg);
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return pipeline::exit_code(e);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return pipeline::kExitFailure;
  }
  return pipeline::kExitOk;
}
