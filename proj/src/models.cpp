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

#include "plume2rate/models.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include "plume2rate/error.hpp"
#include "plume2rate/nn/layers.hpp"
#include "plume2rate/sample.hpp"

namespace plume2rate::models {

using nn::Mode;
using nn::Tensor;

std::string_view arch_name(Arch arch) {
  return arch == Arch::kCnn ? "CNN" : "UNET";
}

Arch parse_arch(std::string_view name) {
  if (name == "CNN" || name == "cnn") return Arch::kCnn;
  if (name == "UNET" || name == "unet" || name == "U-Net") return Arch::kUnet;
  throw Error(ErrorKind::kConfigError, "unknown arch '" + std::string(name) + "'");
}

ModelConfig ModelConfig::cnn_defaults() {
  ModelConfig c;
  c.arch = Arch::kCnn;
  c.dropout = 0.3;
  return c;
}

ModelConfig ModelConfig::unet_defaults() { return ModelConfig{}; }

void ModelConfig::validate() const {
  if (depth < 1) throw Error(ErrorKind::kConfigError, "depth must be >= 1");
  if (depth > 6 || data::kPatchSize % (1 << depth) != 0) {
    throw Error(ErrorKind::kConfigError, "64 must be divisible by 2^depth");
  }
  if (base_channels < 1 || base_channels > 1024) {
    throw Error(ErrorKind::kConfigError, "base_channels must lie in [1, 1024]");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw Error(ErrorKind::kConfigError, "dropout must lie in [0, 1)");
  }
  if (!(leaky_slope >= 0.0 && leaky_slope < 1.0)) {
    throw Error(ErrorKind::kConfigError, "leaky_slope must lie in [0, 1)");
  }
}

nlohmann::json ModelConfig::to_json() const {
  return {{"arch", arch_name(arch)},
          {"base_channels", base_channels},
          {"depth", depth},
          {"dropout", dropout},
          {"leaky_slope", leaky_slope},
          {"head", "GLOBAL_AVG_POOL_DENSE"}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  try {
    ModelConfig c = parse_arch(j.at("arch").get<std::string>()) == Arch::kCnn
                        ? cnn_defaults()
                        : unet_defaults();
    c.base_channels = j.value("base_channels", c.base_channels);
    c.depth = j.value("depth", c.depth);
    c.dropout = j.value("dropout", c.dropout);
    c.leaky_slope = j.value("leaky_slope", c.leaky_slope);
    if (j.value("head", std::string("GLOBAL_AVG_POOL_DENSE")) != "GLOBAL_AVG_POOL_DENSE") {
      throw Error(ErrorKind::kConfigError, "unsupported head");
    }
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kConfigError, std::string("model config: ") + e.what());
  }
}

template <typename T>
class NetworkBase {
 public:
  virtual ~NetworkBase() = default;
  virtual Tensor<T> forward(const Tensor<T>& x, Mode mode, std::mt19937_64& rng,
                            nn::ForwardTrace* trace) = 0;
  virtual void backward(const Tensor<T>& dy) = 0;
  virtual void collect(nn::ParamList<T>& params, nn::BufferList<T>& buffers) = 0;
  virtual void init(std::mt19937_64& rng) = 0;
  virtual nn::Dense<T>& head() = 0;

  // Fixed multiplier on the network output (non-trainable, checkpointed).
  std::vector<T> output_scale{T(1)};
};

namespace {

// conv (no bias) -> batch norm -> LeakyReLU
template <typename T>
struct ConvBnAct {
  nn::Conv3x3<T> conv;
  nn::BatchNorm2d<T> bn;
  nn::LeakyRelu<T> act;

  ConvBnAct(const std::string& name, int in, int out, double slope)
      : conv(name + ".conv", in, out, false), bn(name + ".bn", out), act(slope) {}

  Tensor<T> forward(const Tensor<T>& x, Mode mode) {
    return act.forward(bn.forward(conv.forward(x), mode));
  }
  Tensor<T> backward(const Tensor<T>& dy) {
    return conv.backward(bn.backward(act.backward(dy)));
  }
  void collect(nn::ParamList<T>& p, nn::BufferList<T>& b) {
    conv.collect(p);
    bn.collect(p, b);
  }
};

template <typename T>
Tensor<T> reshaped(Tensor<T> t, std::array<int, 4> shape) {
  t.n = shape[0];
  t.c = shape[1];
  t.h = shape[2];
  t.w = shape[3];
  return t;
}

template <typename T>
class CnnNetwork final : public NetworkBase<T> {
 public:
  explicit CnnNetwork(const ModelConfig& c)
      : head_("head.dense",
              level_width(c, c.depth - 1) * (data::kPatchSize >> c.depth) *
                  (data::kPatchSize >> c.depth),
              1),
        out_act_(c.leaky_slope),
        slope_(c.leaky_slope) {
    int in = data::kNumChannels;
    for (int l = 0; l < c.depth; ++l) {
      const int width = level_width(c, l);
      levels_.push_back(Level{ConvBnAct<T>("cnn" + std::to_string(l), in, width, c.leaky_slope),
                              nn::MaxPool2<T>(), nn::Dropout<T>(c.dropout)});
      in = width;
    }
  }

  Tensor<T> forward(const Tensor<T>& x, Mode mode, std::mt19937_64& rng,
                    nn::ForwardTrace* trace) override {
    Tensor<T> h = x;
    for (std::size_t l = 0; l < levels_.size(); ++l) {
      h = levels_[l].block.forward(h, mode);
      h = levels_[l].pool.forward(h);
      h = levels_[l].drop.forward(h, mode, rng);
      nn::record(trace, "cnn" + std::to_string(l) + ".out", h);
    }
    nn::record(trace, "cnn.pre_flatten", h);
    pre_flatten_ = h.shape();
    const int features = h.c * h.h * h.w;
    Tensor<T> y = head_.forward(reshaped(std::move(h), {x.n, features, 1, 1}));
    nn::record(trace, "head.dense", y);
    return out_act_.forward(y);
  }

  void backward(const Tensor<T>& dy) override {
    Tensor<T> d = reshaped(head_.backward(out_act_.backward(dy)), pre_flatten_);
    for (std::size_t l = levels_.size(); l-- > 0;) {
      d = levels_[l].drop.backward(d);
      d = levels_[l].pool.backward(d);
      d = levels_[l].block.backward(d);
    }
  }

  void collect(nn::ParamList<T>& p, nn::BufferList<T>& b) override {
    for (auto& level : levels_) level.block.collect(p, b);
    head_.collect(p);
  }

  void init(std::mt19937_64& rng) override {
    for (auto& level : levels_) level.block.conv.init(rng, slope_);
    head_.init(rng);
  }

  nn::Dense<T>& head() override { return head_; }

 private:
  struct Level {
    ConvBnAct<T> block;
    nn::MaxPool2<T> pool;
    nn::Dropout<T> drop;
  };
  std::vector<Level> levels_;
  nn::Dense<T> head_;
  nn::LeakyRelu<T> out_act_;
  double slope_;
  std::array<int, 4> pre_flatten_{};
};

template <typename T>
class UnetNetwork final : public NetworkBase<T> {
 public:
  explicit UnetNetwork(const ModelConfig& c)
      : bottleneck_a_("bottleneck.a", level_width(c, c.depth - 1), level_width(c, c.depth),
                      c.leaky_slope),
        bottleneck_b_("bottleneck.b", level_width(c, c.depth), level_width(c, c.depth),
                      c.leaky_slope),
        head_("head.dense", c.base_channels, 1),
        out_act_(c.leaky_slope),
        slope_(c.leaky_slope) {
    int in = data::kNumChannels;
    for (int l = 0; l < c.depth; ++l) {
      const std::string name = "enc" + std::to_string(l);
      const int width = level_width(c, l);
      encoder_.push_back(Encoder{ConvBnAct<T>(name + ".a", in, width, c.leaky_slope),
                                 ConvBnAct<T>(name + ".b", width, width, c.leaky_slope),
                                 nn::Dropout<T>(c.dropout), nn::MaxPool2<T>()});
      in = width;
    }
    for (int l = 0; l < c.depth; ++l) {
      const std::string name = "dec" + std::to_string(l);
      const int width = level_width(c, l);
      const int deeper = level_width(c, l + 1);
      decoder_.push_back(Decoder{nn::Conv3x3<T>(name + ".up", deeper, deeper, true),
                                 ConvBnAct<T>(name + ".a", deeper + width, width, c.leaky_slope),
                                 ConvBnAct<T>(name + ".b", width, width, c.leaky_slope),
                                 deeper});
    }
  }

  Tensor<T> forward(const Tensor<T>& x, Mode mode, std::mt19937_64& rng,
                    nn::ForwardTrace* trace) override {
    const std::size_t depth = encoder_.size();
    skips_.assign(depth, Tensor<T>());
    Tensor<T> h = x;
    for (std::size_t l = 0; l < depth; ++l) {
      auto& e = encoder_[l];
      h = e.b.forward(e.a.forward(h, mode), mode);
      h = e.drop.forward(h, mode, rng);
      skips_[l] = h;
      nn::record(trace, "enc" + std::to_string(l) + ".out", h);
      h = e.pool.forward(h);
    }
    h = bottleneck_b_.forward(bottleneck_a_.forward(h, mode), mode);
    nn::record(trace, "bottleneck.out", h);
    for (std::size_t l = depth; l-- > 0;) {
      auto& d = decoder_[l];
      const std::string name = "dec" + std::to_string(l);
      Tensor<T> up = d.up.forward(nn::upsample2(h));
      nn::record(trace, name + ".up", up);
      nn::record(trace, name + ".skip", skips_[l]);
      Tensor<T> joined = nn::concat_channels(up, skips_[l]);
      nn::record(trace, name + ".concat", joined);
      h = d.b.forward(d.a.forward(joined, mode), mode);
      nn::record(trace, name + ".out", h);
    }
    out_hw_ = {h.h, h.w};
    Tensor<T> pooled = nn::global_avg_pool(h);
    nn::record(trace, "head.gap", pooled);
    Tensor<T> y = head_.forward(pooled);
    nn::record(trace, "head.dense", y);
    return out_act_.forward(y);
  }

  void backward(const Tensor<T>& dy) override {
    const std::size_t depth = encoder_.size();
    Tensor<T> d = nn::global_avg_pool_backward(head_.backward(out_act_.backward(dy)),
                                               out_hw_[0], out_hw_[1]);
    std::vector<Tensor<T>> skip_grads(depth);
    for (std::size_t l = 0; l < depth; ++l) {
      auto& dec = decoder_[l];
      d = dec.a.backward(dec.b.backward(d));
      auto [d_up, d_skip] = nn::split_channels(d, dec.up_channels);
      skip_grads[l] = std::move(d_skip);
      d = nn::upsample2_backward(dec.up.backward(d_up));
    }
    d = bottleneck_a_.backward(bottleneck_b_.backward(d));
    for (std::size_t l = depth; l-- > 0;) {
      auto& e = encoder_[l];
      d = e.pool.backward(d);
      for (std::size_t k = 0; k < d.size(); ++k) d.data[k] += skip_grads[l].data[k];
      d = e.drop.backward(d);
      d = e.a.backward(e.b.backward(d));
    }
  }

  void collect(nn::ParamList<T>& p, nn::BufferList<T>& b) override {
    for (auto& e : encoder_) {
      e.a.collect(p, b);
      e.b.collect(p, b);
    }
    bottleneck_a_.collect(p, b);
    bottleneck_b_.collect(p, b);
    for (auto& d : decoder_) {
      d.up.collect(p);
      d.a.collect(p, b);
      d.b.collect(p, b);
    }
    head_.collect(p);
  }

  void init(std::mt19937_64& rng) override {
    for (auto& e : encoder_) {
      e.a.conv.init(rng, slope_);
      e.b.conv.init(rng, slope_);
    }
    bottleneck_a_.conv.init(rng, slope_);
    bottleneck_b_.conv.init(rng, slope_);
    for (auto& d : decoder_) {
      d.up.init(rng, slope_);
      d.a.conv.init(rng, slope_);
      d.b.conv.init(rng, slope_);
    }
    head_.init(rng);
  }

  nn::Dense<T>& head() override { return head_; }

 private:
  struct Encoder {
    ConvBnAct<T> a, b;
    nn::Dropout<T> drop;
    nn::MaxPool2<T> pool;
  };
  struct Decoder {
    nn::Conv3x3<T> up;  // after 2x nearest upsampling
    ConvBnAct<T> a, b;
    int up_channels;
  };

  std::vector<Encoder> encoder_;
  ConvBnAct<T> bottleneck_a_, bottleneck_b_;
  std::vector<Decoder> decoder_;
  nn::Dense<T> head_;
  nn::LeakyRelu<T> out_act_;
  double slope_;
  std::vector<Tensor<T>> skips_;
  std::array<int, 2> out_hw_{};
};

}  // namespace

template <typename T>
RegressionModel<T>::RegressionModel(const ModelConfig& config, std::uint64_t seed)
    : config_(config), dropout_rng_(seed ^ 0xd20f07ULL) {
  config_.validate();
  if (config_.arch == Arch::kCnn) {
    net_ = std::make_unique<CnnNetwork<T>>(config_);
  } else {
    net_ = std::make_unique<UnetNetwork<T>>(config_);
  }
  net_->collect(params_, buffers_);
  buffers_.push_back({"head.output_scale", &net_->output_scale});
  std::mt19937_64 rng(seed);
  net_->init(rng);
}

template <typename T>
RegressionModel<T>::~RegressionModel() = default;
template <typename T>
RegressionModel<T>::RegressionModel(RegressionModel&&) noexcept = default;
template <typename T>
RegressionModel<T>& RegressionModel<T>::operator=(RegressionModel&&) noexcept = default;

template <typename T>
std::size_t RegressionModel<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto* p : params_) n += p->value.size();
  return n;
}

namespace {

template <typename T>
void check_batch(const Tensor<T>& batch) {
  if (batch.n < 1 || batch.c != data::kNumChannels || batch.h != data::kPatchSize ||
      batch.w != data::kPatchSize) {
    throw Error(ErrorKind::kInvalidInput, "expected a (B, 4, 64, 64) batch");
  }
  for (T v : batch.data) {
    if (!std::isfinite(v)) throw Error(ErrorKind::kInvalidInput, "non-finite input feature");
  }
}

}  // namespace

template <typename T>
Tensor<T> RegressionModel<T>::forward(const Tensor<T>& batch, Mode mode,
                                      nn::ForwardTrace* trace) {
  check_batch(batch);
  Tensor<T> y = net_->forward(batch, mode, dropout_rng_, trace);
  if (mode == Mode::kCalibrate) ++calibration_batches_;
  const T scale = net_->output_scale[0];
  if (scale != T(1)) {
    for (T& v : y.data) v *= scale;
  }
  return y;
}

template <typename T>
void RegressionModel<T>::backward(const Tensor<T>& grad_output) {
  const T scale = net_->output_scale[0];
  if (scale == T(1)) {
    net_->backward(grad_output);
    return;
  }
  Tensor<T> scaled = grad_output;
  for (T& v : scaled.data) v *= scale;
  net_->backward(scaled);
}

template <typename T>
void RegressionModel<T>::set_output_scale(T scale) {
  if (!(scale > T(0)) || !std::isfinite(scale)) {
    throw Error(ErrorKind::kInvalidInput, "output scale must be positive and finite");
  }
  net_->output_scale[0] = scale;
}

template <typename T>
T RegressionModel<T>::output_scale() const {
  return net_->output_scale[0];
}

namespace {

bool is_running_stat(const std::string& name) {
  return name.ends_with(".running_mean") || name.ends_with(".running_var");
}

}  // namespace

template <typename T>
void RegressionModel<T>::begin_batch_norm_calibration() {
  for (auto& b : buffers_) {
    if (is_running_stat(b.name)) std::fill(b.values->begin(), b.values->end(), T(0));
  }
  calibration_batches_ = 0;
}

template <typename T>
void RegressionModel<T>::finish_batch_norm_calibration() {
  if (calibration_batches_ == 0) {
    throw Error(ErrorKind::kInvalidInput, "batch-norm calibration saw no batches");
  }
  const T inv = T(1) / static_cast<T>(calibration_batches_);
  for (auto& b : buffers_) {
    if (is_running_stat(b.name)) {
      for (T& v : *b.values) v *= inv;
    }
  }
  calibration_batches_ = 0;
}

template <typename T>
void RegressionModel<T>::zero_grad() {
  for (auto* p : params_) std::fill(p->grad.begin(), p->grad.end(), T(0));
}

template <typename T>
std::vector<T> RegressionModel<T>::state() const {
  std::vector<T> out;
  for (const auto* p : params_) out.insert(out.end(), p->value.begin(), p->value.end());
  for (const auto& b : buffers_) out.insert(out.end(), b.values->begin(), b.values->end());
  return out;
}

template <typename T>
void RegressionModel<T>::load_state(const std::vector<T>& state) {
  std::size_t expected = parameter_count();
  for (const auto& b : buffers_) expected += b.values->size();
  if (state.size() != expected) {
    throw Error(ErrorKind::kSchemaError, "checkpoint state size mismatch");
  }
  auto it = state.begin();
  for (auto* p : params_) {
    std::copy(it, it + p->value.size(), p->value.begin());
    it += p->value.size();
  }
  for (auto& b : buffers_) {
    std::copy(it, it + b.values->size(), b.values->begin());
    it += b.values->size();
  }
}

template <typename T>
nn::Dense<T>& RegressionModel<T>::head() {
  return net_->head();
}

namespace {
constexpr char kMagic[8] = {'P', '2', 'R', 'C', 'K', 'P', 'T', '1'};
}

// Layout: magic, u64 entry count, then per entry: u32 name length, name,
// u64 value count, float64 values.
template <typename T>
void RegressionModel<T>::save(const std::filesystem::path& path) const {
  std::string bytes(kMagic, sizeof(kMagic));
  auto put = [&bytes](const void* p, std::size_t n) {
    bytes.append(static_cast<const char*>(p), n);
  };
  auto entry = [&](const std::string& name, std::span<const T> values) {
    const auto len = static_cast<std::uint32_t>(name.size());
    const auto count = static_cast<std::uint64_t>(values.size());
    put(&len, sizeof(len));
    put(name.data(), name.size());
    put(&count, sizeof(count));
    for (T v : values) {
      const double d = v;
      put(&d, sizeof(d));
    }
  };
  const std::uint64_t entries = params_.size() + buffers_.size();
  put(&entries, sizeof(entries));
  for (const auto* p : params_) entry(p->name, p->value);
  for (const auto& b : buffers_) entry(b.name, *b.values);

  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::kIoError, "cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorKind::kIoError, "short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorKind::kIoError, "cannot rename " + tmp.string());
}

template <typename T>
void RegressionModel<T>::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIoError, "cannot open checkpoint " + path.string());
  auto get = [&](void* p, std::size_t n) {
    in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!in) throw Error(ErrorKind::kSchemaError, "truncated checkpoint " + path.string());
  };
  char magic[8];
  get(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
    throw Error(ErrorKind::kSchemaError, "not a checkpoint: " + path.string());
  }
  std::uint64_t entries = 0;
  get(&entries, sizeof(entries));
  if (entries != params_.size() + buffers_.size()) {
    throw Error(ErrorKind::kSchemaError, "checkpoint does not match the architecture");
  }
  auto read_into = [&](const std::string& name, std::span<T> values) {
    std::uint32_t len = 0;
    get(&len, sizeof(len));
    std::string stored(len, '\0');
    get(stored.data(), len);
    std::uint64_t count = 0;
    get(&count, sizeof(count));
    if (stored != name || count != values.size()) {
      throw Error(ErrorKind::kSchemaError, "checkpoint entry mismatch at " + name);
    }
    for (auto& v : values) {
      double d = 0;
      get(&d, sizeof(d));
      v = static_cast<T>(d);
    }
  };
  for (auto* p : params_) read_into(p->name, p->value);
  for (auto& b : buffers_) read_into(b.name, *b.values);
}

template <typename T>
RegressionModel<T> build_cnn(const ModelConfig& config, std::uint64_t seed) {
  if (config.arch != Arch::kCnn) throw Error(ErrorKind::kConfigError, "arch must be CNN");
  return RegressionModel<T>(config, seed);
}

template <typename T>
RegressionModel<T> build_unet(const ModelConfig& config, std::uint64_t seed) {
  if (config.arch != Arch::kUnet) throw Error(ErrorKind::kConfigError, "arch must be UNET");
  return RegressionModel<T>(config, seed);
}

template <typename T>
RegressionModel<T> build_model(const ModelConfig& config, std::uint64_t seed) {
  return RegressionModel<T>(config, seed);
}

template <typename T>
std::vector<T> forward(RegressionModel<T>& model, const Tensor<T>& batch) {
  const Tensor<T> out = model.forward(batch, Mode::kInfer);
  return {out.data.begin(), out.data.end()};
}

template class RegressionModel<float>;
template class RegressionModel<double>;
template RegressionModel<float> build_cnn<float>(const ModelConfig&, std::uint64_t);
template RegressionModel<double> build_cnn<double>(const ModelConfig&, std::uint64_t);
template RegressionModel<float> build_unet<float>(const ModelConfig&, std::uint64_t);
template RegressionModel<double> build_unet<double>(const ModelConfig&, std::uint64_t);
template RegressionModel<float> build_model<float>(const ModelConfig&, std::uint64_t);
template RegressionModel<double> build_model<double>(const ModelConfig&, std::uint64_t);
template std::vector<float> forward<float>(RegressionModel<float>&, const Tensor<float>&);
template std::vector<double> forward<double>(RegressionModel<double>&, const Tensor<double>&);

}  // namespace plume2rate::models
