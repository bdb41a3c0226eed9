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


#include "plume2rate/config.hpp"

#include <toml.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "plume2rate/error.hpp"
#include "plume2rate/io_util.hpp"

namespace plume2rate::config {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view subset_key(Subset s) {
  switch (s) {
    case Subset::kSimulated: return "simulated";
    case Subset::kSatellite: return "satellite";
    case Subset::kCombined: return "combined";
  }
  return "?";
}

std::string_view subset_label(Subset s) {
  switch (s) {
    case Subset::kSimulated: return "Simulated";
    case Subset::kSatellite: return "Satellite";
    case Subset::kCombined: return "Combined";
  }
  return "?";
}

Subset parse_subset(std::string_view key) {
  for (Subset s : {Subset::kSimulated, Subset::kSatellite, Subset::kCombined}) {
    if (subset_key(s) == key) return s;
  }
  throw Error(ErrorKind::kConfigError, "unknown evaluation subset '" + std::string(key) + "'");
}

namespace {

[[noreturn]] void config_error(const std::string& message) {
  throw Error(ErrorKind::kConfigError, message);
}

// Reads keys of one JSON object and rejects any key left unread.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) config_error(path_ + ": expected a table");
  }

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      config_error(where(key) + ": wrong value type");
    }
  }

  void read_date(const char* key, Date& out) {
    std::string text = out.ToString();
    read(key, text);
    try {
      out = Date::Parse(text);
    } catch (const Error&) {
      config_error(where(key) + ": expected YYYY-MM-DD, got '" + text + "'");
    }
  }

  void read_path(const char* key, fs::path& out) {
    std::string text = out.string();
    read(key, text);
    out = text;
  }

  template <typename E, typename Parse>
  void read_names(const char* key, std::vector<E>& out, Parse parse) {
    if (!j_.contains(key)) {
      seen_.insert(key);
      return;
    }
    std::vector<std::string> names;
    read(key, names);
    out.clear();
    for (const auto& n : names) {
      try {
        out.push_back(parse(n));
      } catch (const Error& e) {
        config_error(where(key) + ": " + e.what());
      }
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  std::string where(const char* key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) config_error("unknown key " + where(key.c_str()));
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string, std::less<>> seen_;
};

json scenario_json(const sim::PlumeScenario& s) {
  return {{"sigma_a", s.sigma_a},
          {"sigma_b", s.sigma_b},
          {"background_xco2_ppm", s.background_xco2_ppm},
          {"noise_sd_ppm", s.noise_sd_ppm},
          {"no2_ratio", s.no2_ratio},
          {"no2_noise_sd", s.no2_noise_sd},
          {"no2_lifetime_s", s.no2_lifetime_s}};
}

void read_scenario(Section& sec, sim::PlumeScenario& s) {
  sec.read("sigma_a", s.sigma_a);
  sec.read("sigma_b", s.sigma_b);
  sec.read("background_xco2_ppm", s.background_xco2_ppm);
  sec.read("noise_sd_ppm", s.noise_sd_ppm);
  sec.read("no2_ratio", s.no2_ratio);
  sec.read("no2_noise_sd", s.no2_noise_sd);
  sec.read("no2_lifetime_s", s.no2_lifetime_s);
}

json model_json(const models::ModelConfig& m) {
  return {{"base_channels", m.base_channels},
          {"depth", m.depth},
          {"dropout", m.dropout},
          {"leaky_slope", m.leaky_slope}};
}

void read_model(const json* j, const std::string& path, models::ModelConfig& m) {
  if (!j) return;
  Section sec(*j, path);
  sec.read("base_channels", m.base_channels);
  sec.read("depth", m.depth);
  sec.read("dropout", m.dropout);
  sec.read("leaky_slope", m.leaky_slope);
  sec.finish();
}

template <typename T>
bool has_duplicates(std::vector<T> v) {
  std::sort(v.begin(), v.end());
  return std::adjacent_find(v.begin(), v.end()) != v.end();
}

}  // namespace

void RunConfig::apply_seed(std::uint64_t s) {
  seed = s;
  simulate.batch.seed = s;
  ingest.region.seed = s + 1;
  train.train.seed = s;
}

fs::path RunConfig::raw_dir() const {
  if (ingest.raw_dir.empty()) return data_root / "raw";
  return ingest.raw_dir.is_absolute() ? ingest.raw_dir : data_root / ingest.raw_dir;
}

void RunConfig::validate() const {
  sim::validate_batch(simulate.batch);
  if (ingest.knn_k < 1) config_error("ingest.knn_k must be >= 1");
  if (ingest.enabled && ingest.synthesize_raw) sim::validate_region(ingest.region);

  const auto& edges = dataset.bin_edges;
  if (edges.size() < 2 || !std::is_sorted(edges.begin(), edges.end()) ||
      std::adjacent_find(edges.begin(), edges.end()) != edges.end()) {
    config_error("dataset.bin_edges must hold at least two strictly ascending values");
  }
  double sum = 0.0;
  for (double r : dataset.ratios) {
    if (!(r >= 0.0)) config_error("dataset.ratios must be nonnegative");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) config_error("dataset.ratios must sum to 1");

  if (train.archs.empty() || has_duplicates(train.archs)) {
    config_error("train.archs must be nonempty and duplicate-free");
  }
  train.train.validate();
  if (train.cnn.arch != models::Arch::kCnn || train.unet.arch != models::Arch::kUnet) {
    config_error("train.cnn / train.unet architecture mismatch");
  }
  train.cnn.validate();
  train.unet.validate();

  if (evaluate.subsets.empty() || has_duplicates(evaluate.subsets)) {
    config_error("evaluate.subsets must be nonempty and duplicate-free");
  }
}

json RunConfig::to_json() const {
  const auto& b = simulate.batch;
  json sim_j = {{"count", b.count},
                {"q_min", b.q_min},
                {"q_max", b.q_max},
                {"wind_min", b.wind_min},
                {"wind_max", b.wind_max},
                {"cell_size_km", b.cell_size_km},
                {"start_date", b.start_date.ToString()}};
  sim_j.update(scenario_json(b.defaults));

  const auto& r = ingest.region;
  json region_j = {{"size_km", r.size_km},
                   {"plants", r.plants},
                   {"days", r.days},
                   {"start_date", r.start_date.ToString()},
                   {"annual_min_mt", r.annual_min_mt},
                   {"annual_max_mt", r.annual_max_mt},
                   {"xco2_coverage", r.xco2_coverage},
                   {"swath_width_cells", r.swath_width_cells},
                   {"no2_cell_km", r.no2_cell_km},
                   {"no2_gap_fraction", r.no2_gap_fraction},
                   {"wind_cell_km", r.wind_cell_km}};

  json archs = json::array();
  for (auto a : train.archs) archs.push_back(models::arch_name(a));
  json train_j = train.train.to_json();
  train_j.erase("seed");
  train_j["archs"] = archs;
  train_j["cnn"] = model_json(train.cnn);
  train_j["unet"] = model_json(train.unet);

  json subsets = json::array();
  for (auto s : evaluate.subsets) subsets.push_back(subset_key(s));

  return {{"data_root", data_root.string()},
          {"seed", seed},
          {"simulate", sim_j},
          {"ingest",
           {{"enabled", ingest.enabled},
            {"synthesize_raw", ingest.synthesize_raw},
            {"raw_dir", ingest.raw_dir.string()},
            {"knn_k", ingest.knn_k},
            {"region", region_j}}},
          {"dataset",
           {{"bin_edges", dataset.bin_edges},
            {"ratios", dataset.ratios}}},
          {"train", train_j},
          {"evaluate", {{"subsets", subsets}, {"plot", evaluate.plot}}}};
}

RunConfig RunConfig::from_json(const json& j) {
  RunConfig c;
  Section top(j, "");
  top.read_path("data_root", c.data_root);
  std::uint64_t seed = c.seed;
  top.read("seed", seed);

  if (const json* s = top.child("simulate")) {
    Section sec(*s, "simulate");
    auto& b = c.simulate.batch;
    sec.read("count", b.count);
    sec.read("q_min", b.q_min);
    sec.read("q_max", b.q_max);
    sec.read("wind_min", b.wind_min);
    sec.read("wind_max", b.wind_max);
    sec.read("cell_size_km", b.cell_size_km);
    sec.read_date("start_date", b.start_date);
    read_scenario(sec, b.defaults);
    sec.finish();
  }
  if (const json* s = top.child("ingest")) {
    Section sec(*s, "ingest");
    sec.read("enabled", c.ingest.enabled);
    sec.read("synthesize_raw", c.ingest.synthesize_raw);
    sec.read_path("raw_dir", c.ingest.raw_dir);
    sec.read("knn_k", c.ingest.knn_k);
    if (const json* rj = sec.child("region")) {
      Section rs(*rj, "ingest.region");
      auto& r = c.ingest.region;
      rs.read("size_km", r.size_km);
      rs.read("plants", r.plants);
      rs.read("days", r.days);
      rs.read_date("start_date", r.start_date);
      rs.read("annual_min_mt", r.annual_min_mt);
      rs.read("annual_max_mt", r.annual_max_mt);
      rs.read("xco2_coverage", r.xco2_coverage);
      rs.read("swath_width_cells", r.swath_width_cells);
      rs.read("no2_cell_km", r.no2_cell_km);
      rs.read("no2_gap_fraction", r.no2_gap_fraction);
      rs.read("wind_cell_km", r.wind_cell_km);
      rs.finish();
    }
    sec.finish();
  }
  if (const json* s = top.child("dataset")) {
    Section sec(*s, "dataset");
    sec.read("bin_edges", c.dataset.bin_edges);
    sec.read("ratios", c.dataset.ratios);
    sec.finish();
  }
  if (const json* s = top.child("train")) {
    Section sec(*s, "train");
    auto& t = c.train.train;
    sec.read_names("archs", c.train.archs, models::parse_arch);
    sec.read_names("losses", t.losses, training::parse_loss);
    sec.read("huber_delta_mt", t.huber_delta_mt);
    sec.read("epochs", t.epochs);
    sec.read("batch_size", t.batch_size);
    sec.read("learning_rate", t.learning_rate);
    sec.read("early_stop_patience", t.early_stop_patience);
    sec.read("augment", t.augment);
    read_model(sec.child("cnn"), "train.cnn", c.train.cnn);
    read_model(sec.child("unet"), "train.unet", c.train.unet);
    sec.finish();
  }
  if (const json* s = top.child("evaluate")) {
    Section sec(*s, "evaluate");
    sec.read_names("subsets", c.evaluate.subsets, parse_subset);
    sec.read("plot", c.evaluate.plot);
    sec.finish();
  }
  top.finish();
  c.ingest.region.defaults = c.simulate.batch.defaults;
  c.apply_seed(seed);
  return c;
}

namespace {

json toml_to_json(const toml::node& node) {
  if (const auto* t = node.as_table()) {
    json out = json::object();
    for (const auto& [key, value] : *t) out[std::string(key.str())] = toml_to_json(value);
    return out;
  }
  if (const auto* a = node.as_array()) {
    json out = json::array();
    for (const auto& value : *a) out.push_back(toml_to_json(value));
    return out;
  }
  if (const auto* v = node.as_string()) return v->get();
  if (const auto* v = node.as_integer()) return v->get();
  if (const auto* v = node.as_floating_point()) return v->get();
  if (const auto* v = node.as_boolean()) return v->get();
  if (const auto* v = node.as_date()) {
    std::ostringstream ss;
    ss << *v;
    return ss.str();
  }
  config_error("unsupported TOML value type");
}

void json_to_toml(const json& j, toml::table& out);

toml::array json_array_to_toml(const json& j) {
  toml::array arr;
  for (const auto& v : j) {
    if (v.is_string()) arr.push_back(v.get<std::string>());
    else if (v.is_boolean()) arr.push_back(v.get<bool>());
    else if (v.is_number_integer()) arr.push_back(v.get<std::int64_t>());
    else arr.push_back(v.get<double>());
  }
  return arr;
}

void json_to_toml(const json& j, toml::table& out) {
  for (const auto& [key, v] : j.items()) {
    if (v.is_object()) {
      toml::table sub;
      json_to_toml(v, sub);
      out.insert_or_assign(key, std::move(sub));
    } else if (v.is_array()) {
      out.insert_or_assign(key, json_array_to_toml(v));
    } else if (v.is_string()) {
      out.insert_or_assign(key, v.get<std::string>());
    } else if (v.is_boolean()) {
      out.insert_or_assign(key, v.get<bool>());
    } else if (v.is_number_integer()) {
      out.insert_or_assign(key, v.get<std::int64_t>());
    } else {
      out.insert_or_assign(key, v.get<double>());
    }
  }
}

}  // namespace

RunConfig parse_run_config(const std::string& text, bool is_json) {
  json j;
  if (is_json) {
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      config_error(std::string("invalid JSON config: ") + e.what());
    }
  } else {
    try {
      j = toml_to_json(toml::parse(text));
    } catch (const toml::parse_error& e) {
      std::ostringstream ss;
      ss << "invalid TOML config at line " << e.source().begin.line << ": " << e.description();
      config_error(ss.str());
    }
  }
  return RunConfig::from_json(j);
}

RunConfig load_run_config(const fs::path& path) {
  return parse_run_config(io::read_text(path), path.extension() == ".json");
}

std::string to_toml(const RunConfig& config) {
  toml::table table;
  json_to_toml(config.to_json(), table);
  std::ostringstream ss;
  ss << table << "\n";
  return ss.str();
}

}  // namespace plume2rate::config
