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

#ifndef PLUME2RATE_NN_TENSOR_HPP_
#define PLUME2RATE_NN_TENSOR_HPP_

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace plume2rate::nn {

// Eigen picks its vectorized GEMM path from pointer alignment, so every
// buffer fed to a product is over-aligned to keep results independent of
// heap addresses.
template <typename T>
using AlignedVector = std::vector<T, Eigen::aligned_allocator<T>>;

// Dense NCHW activation tensor.
template <typename T>
struct Tensor {
  int n = 0, c = 0, h = 0, w = 0;
  AlignedVector<T> data;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_, T fill = T(0))
      : n(n_), c(c_), h(h_), w(w_), data(std::size_t(n_) * c_ * h_ * w_, fill) {}

  std::size_t size() const { return data.size(); }
  std::size_t plane() const { return std::size_t(h) * w; }
  std::size_t per_sample() const { return std::size_t(c) * h * w; }
  std::array<int, 4> shape() const { return {n, c, h, w}; }

  T* sample(int i) { return data.data() + i * per_sample(); }
  const T* sample(int i) const { return data.data() + i * per_sample(); }
  T* channel(int i, int ch) { return sample(i) + ch * plane(); }
  const T* channel(int i, int ch) const { return sample(i) + ch * plane(); }
};

template <typename T>
struct Parameter {
  std::string name;
  AlignedVector<T> value;
  AlignedVector<T> grad;

  Parameter() = default;
  Parameter(std::string name_, std::size_t count)
      : name(std::move(name_)), value(count, T(0)), grad(count, T(0)) {}
};

// Non-trainable state saved with a checkpoint (batch-norm running stats).
template <typename T>
struct Buffer {
  std::string name;
  std::vector<T>* values;
};

// kCalibrate normalizes with batch statistics and adds them into the
// batch-norm running buffers without caching for backward; dropout is off.
enum class Mode { kTrain, kInfer, kCalibrate };

// Shapes and content digests of named activations, recorded on request.
struct TraceEvent {
  std::string name;
  std::array<int, 4> shape;
  std::uint64_t digest;
};

struct ForwardTrace {
  std::vector<TraceEvent> events;

  const TraceEvent* find(const std::string& name) const {
    for (const auto& e : events) {
      if (e.name == name) return &e;
    }
    return nullptr;
  }
};

template <typename T>
std::uint64_t digest(const Tensor<T>& t) {
  // FNV-1a over the raw bytes.
  std::uint64_t h = 1469598103934665603ULL;
  const auto* bytes = reinterpret_cast<const unsigned char*>(t.data.data());
  for (std::size_t k = 0; k < t.size() * sizeof(T); ++k) {
    h = (h ^ bytes[k]) * 1099511628211ULL;
  }
  return h;
}

template <typename T>
void record(ForwardTrace* trace, const std::string& name, const Tensor<T>& t) {
  if (trace) trace->events.push_back({name, t.shape(), digest(t)});
}

}  // namespace plume2rate::nn

#endif  // PLUME2RATE_NN_TENSOR_HPP_
