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

#include "plume2rate/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "plume2rate/io_util.hpp"

namespace plume2rate::data {

namespace {
constexpr std::array<const char*, kNumChannels> kChannelNames{"XCO2", "NO2",
                                                              "WIND_U", "WIND_V"};
}

nlohmann::json NormStats::to_json() const {
  return {{"channels", kChannelNames}, {"min", min}, {"max", max}};
}

NormStats NormStats::from_json(const nlohmann::json& j) {
  try {
    NormStats s;
    s.min = j.at("min").get<std::array<double, kNumChannels>>();
    s.max = j.at("max").get<std::array<double, kNumChannels>>();
    for (int c = 0; c < kNumChannels; ++c) {
      if (!std::isfinite(s.min[c]) || !std::isfinite(s.max[c]) || s.max[c] < s.min[c]) {
        throw Error(ErrorKind::kSchemaError, "normstats: bad range for channel " +
                                                 std::string(kChannelNames[c]));
      }
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kSchemaError, std::string("normstats: ") + e.what());
  }
}

NormStats fit_norm_stats(std::span<const Sample> train) {
  if (train.empty()) throw Error(ErrorKind::kEmptyDataset, "no training samples");
  NormStats s;
  s.min.fill(std::numeric_limits<double>::infinity());
  s.max.fill(-std::numeric_limits<double>::infinity());
  for (const Sample& sample : train) {
    for (int c = 0; c < kNumChannels; ++c) {
      const auto [lo, hi] = std::minmax_element(sample.channel(c).begin(),
                                                sample.channel(c).end());
      s.min[c] = std::min(s.min[c], double(*lo));
      s.max[c] = std::max(s.max[c], double(*hi));
    }
  }
  return s;
}

Sample normalize(const Sample& sample, const NormStats& stats) {
  Sample out = sample;
  for (int c = 0; c < kNumChannels; ++c) {
    const double range = stats.max[c] - stats.min[c];
    for (float& x : out.channel(c)) {
      x = range > 0.0 ? static_cast<float>((x - stats.min[c]) / range) : 0.0f;
    }
  }
  return out;
}

Sample denormalize(const Sample& sample, const NormStats& stats) {
  Sample out = sample;
  for (int c = 0; c < kNumChannels; ++c) {
    const double range = stats.max[c] - stats.min[c];
    for (float& x : out.channel(c)) {
      x = static_cast<float>(stats.min[c] + x * range);
    }
  }
  return out;
}

namespace {

constexpr int N = kPatchSize;

template <typename IndexMap>
void remap_spatial(const Sample& in, Sample& out, IndexMap source_of) {
  for (int c = 0; c < kNumChannels; ++c) {
    for (int i = 0; i < N; ++i) {
      for (int j = 0; j < N; ++j) {
        const auto [si, sj] = source_of(i, j);
        out.at(c, i, j) = in.at(c, si, sj);
      }
    }
  }
}

// One counterclockwise quarter turn about the patch center, in (x, y) with
// x along columns and y along rows.
Sample rotate_once(const Sample& in) {
  Sample out = in;
  remap_spatial(in, out, [](int i, int j) { return std::pair{N - 1 - j, i}; });
  auto u = out.channel(kWindU);
  auto v = out.channel(kWindV);
  for (int p = 0; p < kPixelsPerChannel; ++p) {
    const float up = u[p];
    u[p] = -v[p];
    v[p] = up;
  }
  return out;
}

float bilinear_clamped(std::span<const float> img, double fi, double fj) {
  fi = std::clamp(fi, 0.0, double(N - 1));
  fj = std::clamp(fj, 0.0, double(N - 1));
  const int i0 = std::min(static_cast<int>(fi), N - 2);
  const int j0 = std::min(static_cast<int>(fj), N - 2);
  const double ti = fi - i0;
  const double tj = fj - j0;
  auto at = [&](int i, int j) { return double(img[i * N + j]); };
  const double top = (1 - tj) * at(i0, j0) + tj * at(i0, j0 + 1);
  const double bottom = (1 - tj) * at(i0 + 1, j0) + tj * at(i0 + 1, j0 + 1);
  return static_cast<float>((1 - ti) * top + ti * bottom);
}

}  // namespace

Sample augment(const Sample& sample, const AugmentOp& op) {
  switch (op.kind) {
    case AugmentOp::Kind::kNone:
      return sample;
    case AugmentOp::Kind::kRot90: {
      if (op.quarter_turns < 1 || op.quarter_turns > 3) {
        throw Error(ErrorKind::kInvalidAugment, "rot90 takes 1..3 quarter turns");
      }
      Sample out = rotate_once(sample);
      for (int k = 1; k < op.quarter_turns; ++k) out = rotate_once(out);
      return out;
    }
    case AugmentOp::Kind::kFlipH: {
      Sample out = sample;
      remap_spatial(sample, out, [](int i, int j) { return std::pair{i, N - 1 - j}; });
      for (float& u : out.channel(kWindU)) u = -u;
      return out;
    }
    case AugmentOp::Kind::kFlipV: {
      Sample out = sample;
      remap_spatial(sample, out, [](int i, int j) { return std::pair{N - 1 - i, j}; });
      for (float& v : out.channel(kWindV)) v = -v;
      return out;
    }
    case AugmentOp::Kind::kZoom: {
      if (!(op.zoom >= 0.9 && op.zoom <= 1.1)) {
        throw Error(ErrorKind::kInvalidAugment, "zoom must lie in [0.9, 1.1]");
      }
      // Central crop of side 64/s resampled back to 64 pixels.
      Sample out = sample;
      const double center = 0.5 * (N - 1);
      for (int c = 0; c < kNumChannels; ++c) {
        const auto src = sample.channel(c);
        auto dst = out.channel(c);
        for (int i = 0; i < N; ++i) {
          for (int j = 0; j < N; ++j) {
            dst[i * N + j] = bilinear_clamped(src, center + (i - center) / op.zoom,
                                              center + (j - center) / op.zoom);
          }
        }
      }
      return out;
    }
  }
  return sample;
}

AugmentOp random_augment(std::mt19937_64& rng, bool allow_zoom) {
  std::uniform_int_distribution<int> pick(0, allow_zoom ? 6 : 5);
  switch (pick(rng)) {
    case 1: return AugmentOp::rot90(1);
    case 2: return AugmentOp::rot90(2);
    case 3: return AugmentOp::rot90(3);
    case 4: return AugmentOp::flip_h();
    case 5: return AugmentOp::flip_v();
    case 6: {
      std::uniform_real_distribution<double> s(0.9, 1.1);
      return AugmentOp::scale(s(rng));
    }
    default: return AugmentOp::none();
  }
}

std::string_view split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "TRAIN";
    case Split::kValid: return "VALID";
    case Split::kTest: return "TEST";
  }
  return "TRAIN";
}

Split parse_split(std::string_view name) {
  for (Split s : {Split::kTrain, Split::kValid, Split::kTest}) {
    if (split_name(s) == name) return s;
  }
  throw Error(ErrorKind::kSchemaError, "unknown split '" + std::string(name) + "'");
}

std::size_t SplitManifest::count(Split s) const {
  return static_cast<std::size_t>(std::count_if(
      assignments.begin(), assignments.end(),
      [s](const auto& kv) { return kv.second == s; }));
}

std::vector<std::string> SplitManifest::ids(Split s) const {
  std::vector<std::string> out;
  for (const auto& [id, split] : assignments) {
    if (split == s) out.push_back(id);
  }
  return out;
}

nlohmann::json SplitManifest::to_json() const {
  nlohmann::json a = nlohmann::json::object();
  for (const auto& [id, split] : assignments) a[id] = split_name(split);
  return {{"seed", seed}, {"bin_edges", bin_edges}, {"ratios", ratios},
          {"assignments", a}};
}

SplitManifest SplitManifest::from_json(const nlohmann::json& j) {
  try {
    SplitManifest m;
    m.seed = j.at("seed").get<std::uint64_t>();
    m.bin_edges = j.at("bin_edges").get<std::vector<double>>();
    m.ratios = j.at("ratios").get<std::array<double, 3>>();
    for (const auto& [id, split] : j.at("assignments").items()) {
      m.assignments[id] = parse_split(split.get<std::string>());
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kSchemaError, std::string("manifest: ") + e.what());
  }
}

int bin_index(double value, std::span<const double> edges) {
  if (edges.size() < 2 || !(value >= edges.front()) || value > edges.back()) {
    return -1;
  }
  const auto it = std::upper_bound(edges.begin(), edges.end(), value);
  const int k = static_cast<int>(it - edges.begin()) - 1;
  return std::min(k, static_cast<int>(edges.size()) - 2);
}

namespace {

void validate_split_settings(std::span<const double> edges,
                             const std::array<double, 3>& ratios) {
  if (edges.size() < 2) {
    throw Error(ErrorKind::kConfigError, "need at least two bin edges");
  }
  for (std::size_t k = 1; k < edges.size(); ++k) {
    if (!(edges[k] > edges[k - 1])) {
      throw Error(ErrorKind::kConfigError, "bin edges must be strictly ascending");
    }
  }
  double sum = 0.0;
  for (double r : ratios) {
    if (!(r >= 0.0)) throw Error(ErrorKind::kConfigError, "ratios must be nonnegative");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw Error(ErrorKind::kConfigError, "split ratios must sum to 1");
  }
}

// Largest-remainder apportionment of n items over the ratios.
std::array<std::size_t, 3> apportion(std::size_t n, const std::array<double, 3>& ratios) {
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> remainder{};
  std::size_t assigned = 0;
  for (int s = 0; s < 3; ++s) {
    const double quota = ratios[s] * double(n);
    counts[s] = static_cast<std::size_t>(std::floor(quota));
    remainder[s] = quota - double(counts[s]);
    assigned += counts[s];
  }
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++counts[order[k % 3]];
  return counts;
}

}  // namespace

SplitManifest stratified_redistribution(std::span<const Sample> samples,
                                        std::span<const double> bin_edges,
                                        std::array<double, 3> ratios,
                                        std::uint64_t seed) {
  validate_split_settings(bin_edges, ratios);
  const std::size_t nbins = bin_edges.size() - 1;
  std::vector<std::vector<std::string>> bins(nbins);
  std::vector<std::string> unbinned;
  std::set<std::string> seen;
  for (const Sample& s : samples) {
    if (!seen.insert(s.id).second) {
      throw Error(ErrorKind::kSchemaError, "duplicate sample id " + s.id);
    }
    const int b = bin_index(s.target_mt_per_yr, bin_edges);
    if (b < 0) {
      unbinned.push_back(s.id);
    } else {
      bins[b].push_back(s.id);
    }
  }
  if (!unbinned.empty()) {
    std::string list;
    for (std::size_t k = 0; k < unbinned.size() && k < 20; ++k) {
      list += (k ? ", " : "") + unbinned[k];
    }
    throw Error(ErrorKind::kUnbinnedSample,
                std::to_string(unbinned.size()) + " sample(s) outside all bins: " + list);
  }

  SplitManifest m;
  m.bin_edges.assign(bin_edges.begin(), bin_edges.end());
  m.ratios = ratios;
  m.seed = seed;
  std::mt19937_64 rng(seed);
  for (auto& ids : bins) {
    std::sort(ids.begin(), ids.end());
    std::shuffle(ids.begin(), ids.end(), rng);
    const auto counts = apportion(ids.size(), ratios);
    std::size_t k = 0;
    for (int s = 0; s < 3; ++s) {
      for (std::size_t c = 0; c < counts[s]; ++c) {
        m.assignments[ids[k++]] = static_cast<Split>(s);
      }
    }
  }
  return m;
}

std::vector<Sample> merge_datasets(std::vector<Sample> simulated,
                                   std::vector<Sample> satellite) {
  std::vector<Sample> out = std::move(simulated);
  out.reserve(out.size() + satellite.size());
  for (auto& s : satellite) out.push_back(std::move(s));
  std::set<std::string> ids;
  for (const Sample& s : out) {
    s.validate();
    if (!ids.insert(s.id).second) {
      throw Error(ErrorKind::kSchemaError, "duplicate sample id " + s.id);
    }
  }
  return out;
}

std::size_t Histogram::total() const {
  std::size_t t = 0;
  for (const auto& row : counts) t += row[0] + row[1] + row[2];
  return t;
}

std::size_t Histogram::split_total(Split s) const {
  std::size_t t = 0;
  for (const auto& row : counts) t += row[static_cast<int>(s)];
  return t;
}

std::string Histogram::render() const {
  std::ostringstream out;
  char line[128];
  std::snprintf(line, sizeof(line), "%-16s %8s %8s %8s\n", "bin (Mt/yr)", "TRAIN",
                "VALID", "TEST");
  out << line;
  for (std::size_t b = 0; b < counts.size(); ++b) {
    char label[32];
    std::snprintf(label, sizeof(label), "[%g, %g%c", bin_edges[b], bin_edges[b + 1],
                  b + 1 == counts.size() ? ']' : ')');
    std::snprintf(line, sizeof(line), "%-16s %8zu %8zu %8zu\n", label, counts[b][0],
                  counts[b][1], counts[b][2]);
    out << line;
  }
  std::snprintf(line, sizeof(line), "%-16s %8zu %8zu %8zu\n", "total",
                split_total(Split::kTrain), split_total(Split::kValid),
                split_total(Split::kTest));
  out << line;
  return out.str();
}

Histogram dataset_histogram(std::span<const Sample> samples,
                            const SplitManifest& manifest,
                            std::span<const double> bin_edges) {
  Histogram h;
  h.bin_edges.assign(bin_edges.begin(), bin_edges.end());
  h.counts.assign(bin_edges.size() > 1 ? bin_edges.size() - 1 : 0, {0, 0, 0});
  for (const Sample& s : samples) {
    const auto it = manifest.assignments.find(s.id);
    if (it == manifest.assignments.end()) {
      throw Error(ErrorKind::kSchemaError, "manifest does not cover " + s.id);
    }
    const int b = bin_index(s.target_mt_per_yr, bin_edges);
    if (b >= 0) ++h.counts[b][static_cast<int>(it->second)];
  }
  return h;
}

void write_sample(const std::filesystem::path& dir, const Sample& s) {
  s.validate();
  io::write_binary(dir / (s.id + ".f32"), s.features);
  nlohmann::json meta{{"target_mt_per_yr", s.target_mt_per_yr},
                      {"plant_id", s.plant_id},
                      {"date", s.date.ToString()},
                      {"source", source_name(s.source)},
                      {"cell_size_km", s.cell_size_km}};
  io::write_json(dir / (s.id + ".json"), meta);
}

Sample read_sample(const std::filesystem::path& dir, const std::string& id) {
  const nlohmann::json meta = io::read_json(dir / (id + ".json"));
  Sample s;
  s.id = id;
  s.features = io::read_binary<float>(dir / (id + ".f32"), kFeatureCount);
  try {
    s.target_mt_per_yr = meta.at("target_mt_per_yr").get<double>();
    s.plant_id = meta.at("plant_id").get<std::string>();
    s.date = Date::Parse(meta.at("date").get<std::string>());
    s.source = parse_source(meta.at("source").get<std::string>());
    s.cell_size_km = meta.at("cell_size_km").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kSchemaError, id + ".json: " + e.what());
  }
  s.validate();
  return s;
}

std::vector<Sample> read_samples(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw Error(ErrorKind::kIoError, "no sample directory " + dir.string());
  }
  std::vector<std::string> ids;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() == ".f32") ids.push_back(entry.path().stem().string());
  }
  std::sort(ids.begin(), ids.end());
  std::vector<Sample> out;
  out.reserve(ids.size());
  for (const auto& id : ids) out.push_back(read_sample(dir, id));
  return out;
}

}  // namespace plume2rate::data
