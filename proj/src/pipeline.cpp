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


#include "plume2rate/pipeline.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <map>

#include "plume2rate/dataset.hpp"
#include "plume2rate/eval_report.hpp"
#include "plume2rate/ingest.hpp"
#include "plume2rate/io_util.hpp"
#include "plume2rate/plume_sim.hpp"
#include "plume2rate/training.hpp"

namespace plume2rate::pipeline {

using config::RunConfig;
using data::Sample;

int exit_code(const Error& error) {
  switch (error.kind()) {
    case ErrorKind::kConfigError: return kExitConfig;
    case ErrorKind::kIoError: return kExitIo;
    default: return kExitData;
  }
}

std::string arch_dir_name(models::Arch arch) {
  return arch == models::Arch::kCnn ? "cnn" : "unet";
}

DataRootLock::DataRootLock(const fs::path& root) {
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw Error(ErrorKind::kIoError, "cannot create data root " + root.string());
  const fs::path lock = root / ".plume2rate.lock";
  fd_ = ::open(lock.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (fd_ < 0) throw Error(ErrorKind::kIoError, "cannot open " + lock.string());
  if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(fd_);
    fd_ = -1;
    throw Error(ErrorKind::kIoError,
                "data root " + root.string() + " is in use by another command");
  }
}

DataRootLock::~DataRootLock() {
  if (fd_ >= 0) {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
}

namespace {

// Outputs are built in <target>.tmp and renamed over <target> on commit;
// an abandoned stage leaves the previous target untouched.
class StagedDir {
 public:
  explicit StagedDir(fs::path target)
      : target_(std::move(target)), tmp_(target_.string() + ".tmp") {
    std::error_code ec;
    fs::remove_all(tmp_, ec);
    fs::create_directories(tmp_, ec);
    if (ec) throw Error(ErrorKind::kIoError, "cannot create " + tmp_.string());
  }
  ~StagedDir() {
    if (!committed_) {
      std::error_code ec;
      fs::remove_all(tmp_, ec);
    }
  }
  StagedDir(const StagedDir&) = delete;
  StagedDir& operator=(const StagedDir&) = delete;

  const fs::path& path() const { return tmp_; }

  void commit() {
    std::error_code ec;
    fs::remove_all(target_, ec);
    if (ec) throw Error(ErrorKind::kIoError, "cannot replace " + target_.string());
    fs::rename(tmp_, target_, ec);
    if (ec) throw Error(ErrorKind::kIoError, "cannot publish " + target_.string());
    committed_ = true;
  }

 private:
  fs::path target_;
  fs::path tmp_;
  bool committed_ = false;
};

fs::path or_default(const fs::path& override_dir, const fs::path& fallback) {
  return override_dir.empty() ? fallback : override_dir;
}

std::vector<Sample> read_corpus_if_present(const fs::path& dir) {
  if (!fs::exists(dir / "samples")) return {};
  return data::read_samples(dir / "samples");
}

void simulate_stage(const RunConfig& cfg, const Layout& layout) {
  const auto samples = sim::simulate_batch(cfg.simulate.batch);
  StagedDir out(layout.simulated());
  double q_lo = HUGE_VAL, q_hi = -HUGE_VAL;
  for (const auto& s : samples) {
    data::write_sample(out.path() / "samples", s);
    q_lo = std::min(q_lo, s.target_mt_per_yr);
    q_hi = std::max(q_hi, s.target_mt_per_yr);
  }
  out.commit();
  spdlog::info("simulated {} scenes, q in [{:.3f}, {:.3f}] Mt/yr", samples.size(), q_lo, q_hi);

  if (!(cfg.ingest.enabled && cfg.ingest.synthesize_raw)) return;
  const auto region = sim::simulate_region(cfg.ingest.region);
  StagedDir raw(cfg.raw_dir());
  ingest::write_plant_catalog(raw.path() / "plants.csv", region.plants);
  ingest::write_proxy_series(raw.path() / "proxies.csv", region.proxies);
  for (const auto& day : region.days) {
    const fs::path dir = raw.path() / "fields" / day.date.ToString();
    grid::write_field(day.xco2, dir, "xco2");
    grid::write_field(day.no2, dir, "no2");
    grid::write_field(day.wind_u, dir, "wind_u");
    grid::write_field(day.wind_v, dir, "wind_v");
  }
  raw.commit();
  spdlog::info("synthesized satellite-style inputs: {} plants x {} days in {}",
               region.plants.size(), region.days.size(), cfg.raw_dir().string());
}

void ingest_stage(const RunConfig& cfg, const Layout& layout) {
  const fs::path raw = cfg.raw_dir();
  const auto plants = ingest::read_plant_catalog(raw / "plants.csv");
  const auto proxies = ingest::read_proxy_series(raw / "proxies.csv");

  // plant -> date -> annualized daily rate
  std::map<std::string, std::map<Date, double>> rates;
  std::size_t degenerate = 0;
  for (const auto& plant : plants) {
    const auto it = proxies.find(plant.plant_id);
    try {
      const auto daily = ingest::disaggregate_annual(
          plant, it == proxies.end() ? std::vector<ingest::DailyProxy>{} : it->second);
      for (const auto& d : daily) rates[plant.plant_id][d.date] = d.rate_mt_per_yr;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kDegenerateProxy && e.kind() != ErrorKind::kInvalidProxy) throw;
      ++degenerate;
      spdlog::warn("plant {}: {}; no samples for it", plant.plant_id, e.what());
    }
  }

  std::vector<fs::path> day_dirs;
  if (fs::exists(raw / "fields")) {
    for (const auto& entry : fs::directory_iterator(raw / "fields")) {
      if (entry.is_directory()) day_dirs.push_back(entry.path());
    }
  }
  std::sort(day_dirs.begin(), day_dirs.end());
  if (day_dirs.empty()) throw Error(ErrorKind::kIoError, "no daily fields under " + raw.string());

  StagedDir out(layout.satellite());
  std::size_t written = 0, edge_skipped = 0, no_rate = 0;
  for (const auto& dir : day_dirs) {
    const auto xco2_raw = grid::read_field(dir, "xco2");
    const auto no2 = ingest::preprocess_no2(grid::read_field(dir, "no2"));
    const auto [u, v] =
        ingest::preprocess_wind(grid::read_field(dir, "wind_u"), grid::read_field(dir, "wind_v"));
    const auto xco2 = ingest::fill_xco2_map(xco2_raw, {no2, u, v}, cfg.ingest.knn_k);
    const Date date = xco2_raw.timestamp();
    for (const auto& plant : plants) {
      const auto pr = rates.find(plant.plant_id);
      if (pr == rates.end()) continue;
      const auto rate = pr->second.find(date);
      if (rate == pr->second.end() || !(rate->second > 0.0)) {
        ++no_rate;
        spdlog::warn("plant {} on {}: no positive daily rate; skipped", plant.plant_id,
                     date.ToString());
        continue;
      }
      Sample s;
      try {
        const grid::GridField* channels[] = {&xco2, &no2, &u, &v};
        for (int c = 0; c < data::kNumChannels; ++c) {
          const auto patch = grid::extract_patch(*channels[c], plant.location, data::kPatchSize);
          auto dst = s.channel(c);
          for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = static_cast<float>(patch.data()[k]);
        }
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::kPatchOutOfBounds) throw;
        ++edge_skipped;
        spdlog::warn("plant {} on {}: {}; skipped", plant.plant_id, date.ToString(), e.what());
        continue;
      }
      s.id = "sat-" + plant.plant_id + "-" + date.ToString();
      s.target_mt_per_yr = rate->second;
      s.plant_id = plant.plant_id;
      s.date = date;
      s.source = data::Source::kSatellite;
      s.cell_size_km = xco2.cell_size_km();
      s.validate();
      data::write_sample(out.path() / "samples", s);
      ++written;
    }
  }
  fs::create_directories(out.path() / "samples");
  out.commit();
  spdlog::info("ingested {} satellite samples ({} plants x {} days); skipped {} near the "
               "grid edge, {} without a daily rate, {} plants with degenerate proxies",
               written, plants.size(), day_dirs.size(), edge_skipped, no_rate, degenerate);
}

void build_dataset_stage(const RunConfig& cfg, const Layout& layout) {
  auto simulated = read_corpus_if_present(layout.simulated());
  auto satellite = read_corpus_if_present(layout.satellite());
  if (simulated.empty() && satellite.empty()) {
    throw Error(ErrorKind::kEmptyDataset, "no simulated or satellite samples under " +
                                              layout.root.string());
  }
  const auto merged = data::merge_datasets(std::move(simulated), std::move(satellite));
  const auto manifest = data::stratified_redistribution(merged, cfg.dataset.bin_edges,
                                                        cfg.dataset.ratios, cfg.seed);
  std::vector<Sample> train;
  for (const auto& s : merged) {
    if (manifest.assignments.at(s.id) == data::Split::kTrain) train.push_back(s);
  }
  const auto norm = data::fit_norm_stats(train);
  const auto histogram = data::dataset_histogram(merged, manifest, cfg.dataset.bin_edges);

  StagedDir out(layout.dataset());
  for (const auto& s : merged) data::write_sample(out.path() / "samples", s);
  io::write_json(out.path() / "manifest.json", manifest.to_json());
  io::write_json(out.path() / "normstats.json", norm.to_json());
  io::write_text_atomic(out.path() / "histogram.txt", histogram.render());
  out.commit();
  spdlog::info("dataset: {} samples, train {} / valid {} / test {}\n{}", merged.size(),
               manifest.count(data::Split::kTrain), manifest.count(data::Split::kValid),
               manifest.count(data::Split::kTest), histogram.render());
}

struct Splits {
  std::vector<Sample> train, valid, test;
};

Splits read_splits(const fs::path& dataset_dir) {
  const auto manifest = data::SplitManifest::from_json(io::read_json(dataset_dir / "manifest.json"));
  Splits out;
  for (auto& s : data::read_samples(dataset_dir / "samples")) {
    const auto it = manifest.assignments.find(s.id);
    if (it == manifest.assignments.end()) {
      throw Error(ErrorKind::kSchemaError, "sample " + s.id + " missing from the manifest");
    }
    auto& dst = it->second == data::Split::kTrain   ? out.train
                : it->second == data::Split::kValid ? out.valid
                                                    : out.test;
    dst.push_back(std::move(s));
  }
  if (out.train.size() + out.valid.size() + out.test.size() != manifest.assignments.size()) {
    throw Error(ErrorKind::kSchemaError, "manifest lists samples that are not on disk");
  }
  return out;
}

void train_stage(const RunConfig& cfg, const Layout& layout, const StageDirs& dirs) {
  const fs::path data_dir = or_default(dirs.data, layout.dataset());
  const fs::path models_dir = or_default(dirs.out, layout.models());
  const Splits splits = read_splits(data_dir);
  const auto norm = data::NormStats::from_json(io::read_json(data_dir / "normstats.json"));
  const auto& tc = cfg.train.train;

  for (const auto arch : cfg.train.archs) {
    const auto& model_config = cfg.train.model(arch);
    StagedDir out(models_dir / arch_dir_name(arch));
    training::EnsembleModel ensemble;
    ensemble.norm = norm;
    for (const auto loss : tc.losses) {
      const std::string tag = fmt::format("{}/{}", models::arch_name(arch), training::loss_name(loss));
      auto result = training::train_member(
          model_config, splits.train, splits.valid, norm, loss, tc,
          [&](training::LossId, const training::EpochRecord& e) {
            spdlog::info("{} epoch {:>3}: train loss {:.4f}, valid MAE {:.4f}", tag, e.epoch,
                         e.train_loss, e.valid_mae);
          });
      std::string csv = "epoch,train_loss,valid_mae\n";
      for (const auto& e : result.history) {
        csv += fmt::format("{},{},{}\n", e.epoch, e.train_loss, e.valid_mae);
      }
      io::write_text_atomic(out.path() / "members" / std::string(training::loss_name(loss)) /
                                "history.csv",
                            csv);
      spdlog::info("{}: best epoch {}", tag, result.best_epoch);
      ensemble.members.emplace_back(loss, std::move(result.model));
    }
    ensemble.save(out.path(), tc);
    out.commit();
  }
}

std::string model_label(models::Arch arch) {
  return arch == models::Arch::kCnn ? "CNN" : "U-Net";
}

nlohmann::json improvement_json(const std::vector<eval::MetricsReport>& reports) {
  using eval::Orientation;
  nlohmann::json out = nlohmann::json::array();
  std::vector<std::string> datasets;
  for (const auto& r : reports) {
    if (std::find(datasets.begin(), datasets.end(), r.dataset_label) == datasets.end()) {
      datasets.push_back(r.dataset_label);
    }
  }
  for (const auto& d : datasets) {
    const eval::MetricsReport* base = nullptr;
    const eval::MetricsReport* unet = nullptr;
    for (const auto& r : reports) {
      if (r.dataset_label != d) continue;
      if (r.model_label == "CNN") base = &r;
      if (r.model_label == "U-Net") unet = &r;
    }
    if (!base || !unet) continue;
    nlohmann::json entry = {{"dataset", d}};
    auto add = [&](const char* key, double b, double n, Orientation o) {
      try {
        entry[key] = eval::relative_improvement(b, n, o);
      } catch (const Error&) {
        entry[key] = nullptr;
      }
    };
    add("mae_pct", base->mae, unet->mae, Orientation::kLowerBetter);
    add("rmse_pct", base->rmse, unet->rmse, Orientation::kLowerBetter);
    add("r2_pct", base->r2, unet->r2, Orientation::kHigherBetter);
    out.push_back(entry);
  }
  return out;
}

std::string render_improvements(const nlohmann::json& improvements) {
  std::string out;
  for (const auto& e : improvements) {
    auto pct = [](const nlohmann::json& v) {
      return v.is_null() ? std::string("n/a") : fmt::format("{:.1f}%", v.get<double>());
    };
    out += fmt::format("{}: U-Net vs CNN improvement  MAE {}  RMSE {}  R2 {}\n",
                       e.at("dataset").get<std::string>(), pct(e.at("mae_pct")),
                       pct(e.at("rmse_pct")), pct(e.at("r2_pct")));
  }
  return out;
}

void evaluate_stage(const RunConfig& cfg, const Layout& layout, const StageDirs& dirs) {
  const fs::path data_dir = or_default(dirs.data, layout.dataset());
  const fs::path models_dir = or_default(dirs.models, layout.models());
  const fs::path eval_dir = or_default(dirs.out, layout.eval());
  const auto test = read_splits(data_dir).test;
  if (test.empty()) throw Error(ErrorKind::kEmptyDataset, "test split is empty");

  std::vector<double> y;
  for (const auto& s : test) y.push_back(s.target_mt_per_yr);

  struct ArchPredictions {
    models::Arch arch;
    std::vector<std::pair<std::string, std::vector<double>>> members;
    std::vector<double> ensemble;
  };
  std::vector<ArchPredictions> preds;
  for (const auto arch : cfg.train.archs) {
    const fs::path dir = models_dir / arch_dir_name(arch);
    if (!fs::exists(dir / "ensemble.json")) {
      throw Error(ErrorKind::kIoError, "missing checkpoint: " + (dir / "ensemble.json").string());
    }
    auto ensemble = training::EnsembleModel::load(dir);
    ArchPredictions p{arch, {}, std::vector<double>(test.size(), 0.0)};
    for (auto& [loss, model] : ensemble.members) {
      auto m = training::member_predict(model, ensemble.norm, test);
      for (std::size_t i = 0; i < m.size(); ++i) p.ensemble[i] += m[i];
      p.members.emplace_back(std::string(training::loss_name(loss)), std::move(m));
    }
    for (double& v : p.ensemble) v /= double(ensemble.members.size());
    preds.push_back(std::move(p));
  }

  std::vector<eval::MetricsReport> reports;
  for (const auto subset : cfg.evaluate.subsets) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < test.size(); ++i) {
      const bool keep = subset == config::Subset::kCombined ||
                        (subset == config::Subset::kSimulated) ==
                            (test[i].source == data::Source::kSimulated);
      if (keep) idx.push_back(i);
    }
    if (idx.size() < 2) {
      spdlog::warn("{} test subset has {} samples; not evaluated",
                   config::subset_label(subset), idx.size());
      continue;
    }
    std::vector<double> ys;
    for (auto i : idx) ys.push_back(y[i]);
    for (const auto& p : preds) {
      std::vector<double> ps;
      for (auto i : idx) ps.push_back(p.ensemble[i]);
      reports.push_back(eval::compute_metrics(ps, ys, std::string(config::subset_label(subset)),
                                              model_label(p.arch)));
    }
  }
  if (reports.empty()) throw Error(ErrorKind::kEmptyDataset, "no evaluable test subset");

  StagedDir out(eval_dir);
  nlohmann::json listed = nlohmann::json::array();
  for (const auto& r : reports) listed.push_back(r.to_json());
  const auto improvements = improvement_json(reports);
  io::write_json(out.path() / "metrics.json", {{"reports", listed}, {"improvements", improvements}});
  const std::string table = eval::render_table(reports);
  io::write_text_atomic(out.path() / "table.txt", table);

  std::string csv = "arch,sample_id,source,y";
  for (const auto& [name, m] : preds.front().members) csv += "," + name;
  csv += ",ensemble\n";
  for (const auto& p : preds) {
    for (std::size_t i = 0; i < test.size(); ++i) {
      csv += fmt::format("{},{},{},{}", models::arch_name(p.arch), test[i].id,
                         data::source_name(test[i].source), y[i]);
      for (const auto& [name, m] : p.members) csv += fmt::format(",{}", m[i]);
      csv += fmt::format(",{}\n", p.ensemble[i]);
    }
  }
  io::write_text_atomic(out.path() / "predictions.csv", csv);

  if (cfg.evaluate.plot) {
    // The proposed model when present, over the whole test split.
    const auto& shown = preds.back();
    eval::plot_predictions(shown.ensemble, y, out.path() / "scatter.png");
  }
  out.commit();
  std::fputs(table.c_str(), stdout);
  std::fputs(render_improvements(improvements).c_str(), stdout);
}

}  // namespace

void cmd_simulate(const RunConfig& config) {
  config.validate();
  DataRootLock lock(config.data_root);
  simulate_stage(config, Layout{config.data_root});
}

void cmd_ingest(const RunConfig& config) {
  config.validate();
  DataRootLock lock(config.data_root);
  ingest_stage(config, Layout{config.data_root});
}

void cmd_build_dataset(const RunConfig& config) {
  config.validate();
  DataRootLock lock(config.data_root);
  build_dataset_stage(config, Layout{config.data_root});
}

void cmd_train(const RunConfig& config, const StageDirs& dirs) {
  config.validate();
  DataRootLock lock(config.data_root);
  train_stage(config, Layout{config.data_root}, dirs);
}

void cmd_evaluate(const RunConfig& config, const StageDirs& dirs) {
  config.validate();
  DataRootLock lock(config.data_root);
  evaluate_stage(config, Layout{config.data_root}, dirs);
}

std::string cmd_report(const RunConfig& config, const StageDirs& dirs) {
  config.validate();
  const fs::path eval_dir = or_default(dirs.out, Layout{config.data_root}.eval());
  const auto metrics = io::read_json(eval_dir / "metrics.json");
  std::vector<eval::MetricsReport> reports;
  try {
    for (const auto& r : metrics.at("reports")) reports.push_back(eval::MetricsReport::from_json(r));
    return eval::render_table(reports) + render_improvements(metrics.at("improvements"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kSchemaError, (eval_dir / "metrics.json").string() + ": " + e.what());
  }
}

void cmd_run_all(const RunConfig& config) {
  config.validate();
  DataRootLock lock(config.data_root);
  const Layout layout{config.data_root};
  simulate_stage(config, layout);
  if (config.ingest.enabled) {
    ingest_stage(config, layout);
  } else {
    std::error_code ec;
    fs::remove_all(layout.satellite(), ec);
  }
  build_dataset_stage(config, layout);
  train_stage(config, layout, {});
  evaluate_stage(config, layout, {});
}

}  // namespace plume2rate::pipeline
