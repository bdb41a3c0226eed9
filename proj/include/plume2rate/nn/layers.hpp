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

#ifndef PLUME2RATE_NN_LAYERS_HPP_
#define PLUME2RATE_NN_LAYERS_HPP_

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "plume2rate/nn/tensor.hpp"

namespace plume2rate::nn {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

template <typename T>
using ParamList = std::vector<Parameter<T>*>;
template <typename T>
using BufferList = std::vector<Buffer<T>>;

// 3x3 convolution, stride 1, zero "same" padding. im2col + GEMM over
// bands of image rows sized to stay cache resident.
template <typename T>
class Conv3x3 {
 public:
  Conv3x3(std::string name, int in, int out, bool bias)
      : in_(in), out_(out),
        weight_(name + ".weight", std::size_t(out) * in * 9),
        bias_(name + ".bias", bias ? std::size_t(out) : 0) {}

  void init(std::mt19937_64& rng, double leaky_slope) {
    const double fan_in = 9.0 * in_;
    std::normal_distribution<double> normal(
        0.0, std::sqrt(2.0 / ((1.0 + leaky_slope * leaky_slope) * fan_in)));
    for (T& w : weight_.value) w = static_cast<T>(normal(rng));
    std::fill(bias_.value.begin(), bias_.value.end(), T(0));
  }

  Tensor<T> forward(Tensor<T> x) {
    input_ = std::move(x);
    const Tensor<T>& in = input_;
    Tensor<T> y(in.n, out_, in.h, in.w);
    const int hw = in.h * in.w;
    const int k = in_ * 9;
    const int band = band_rows(in.h, in.w);
    col_.resize(std::size_t(k) * band * in.w);
    ConstMatMap<T> wm(weight_.value.data(), out_, k);
    for (int n = 0; n < in.n; ++n) {
      for (int r0 = 0; r0 < in.h; r0 += band) {
        const int rows = std::min(band, in.h - r0);
        const int cols = rows * in.w;
        im2col(in.sample(n), in.h, in.w, r0, rows);
        ConstMatMap<T> cm(col_.data(), k, cols);
        StridedMap ym(y.sample(n) + r0 * in.w, out_, cols, Eigen::OuterStride<>(hw));
        ym.noalias() = wm * cm;
      }
      if (!bias_.value.empty()) {
        MatMap<T> ym(y.sample(n), out_, hw);
        for (int o = 0; o < out_; ++o) ym.row(o).array() += bias_.value[o];
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    const Tensor<T>& x = input_;
    Tensor<T> dx(x.n, x.c, x.h, x.w);
    const int hw = x.h * x.w;
    const int k = in_ * 9;
    const int band = band_rows(x.h, x.w);
    col_.resize(std::size_t(k) * band * x.w);
    dcol_.resize(col_.size());
    ConstMatMap<T> wm(weight_.value.data(), out_, k);
    MatMap<T> gw(weight_.grad.data(), out_, k);
    for (int n = 0; n < x.n; ++n) {
      for (int r0 = 0; r0 < x.h; r0 += band) {
        const int rows = std::min(band, x.h - r0);
        const int cols = rows * x.w;
        im2col(x.sample(n), x.h, x.w, r0, rows);
        ConstMatMap<T> cm(col_.data(), k, cols);
        MatMap<T> dcm(dcol_.data(), k, cols);
        ConstStridedMap dym(dy.sample(n) + r0 * x.w, out_, cols, Eigen::OuterStride<>(hw));
        gw.noalias() += dym * cm.transpose();
        dcm.noalias() = wm.transpose() * dym;
        col2im(dx.sample(n), x.h, x.w, r0, rows);
      }
      if (!bias_.value.empty()) {
        ConstMatMap<T> dym(dy.sample(n), out_, hw);
        for (int o = 0; o < out_; ++o) bias_.grad[o] += dym.row(o).sum();
      }
    }
    return dx;
  }

  void collect(ParamList<T>& params) {
    params.push_back(&weight_);
    if (!bias_.value.empty()) params.push_back(&bias_);
  }

  int in_channels() const { return in_; }
  int out_channels() const { return out_; }

 private:
  using StridedMap = Eigen::Map<RowMat<T>, 0, Eigen::OuterStride<>>;
  using ConstStridedMap = Eigen::Map<const RowMat<T>, 0, Eigen::OuterStride<>>;

  int band_rows(int h, int w) const {
    constexpr int kBandElements = 1 << 16;
    return std::clamp(kBandElements / (in_ * 9 * w), 1, h);
  }

  // Column layout: row (c*9 + ky*3 + kx), column (y - r0) * w + x.
  void im2col(const T* src, int h, int w, int r0, int rows) {
    const int cols = rows * w;
    for (int c = 0; c < in_; ++c) {
      const T* plane = src + std::size_t(c) * h * w;
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          T* row = col_.data() + (std::size_t(c) * 9 + ky * 3 + kx) * cols;
          const int x_lo = std::max(0, 1 - kx);
          const int x_hi = std::min(w, w + 1 - kx);
          for (int y = r0; y < r0 + rows; ++y) {
            T* dst = row + (y - r0) * w;
            const int sy = y + ky - 1;
            if (sy < 0 || sy >= h) {
              std::fill(dst, dst + w, T(0));
              continue;
            }
            if (x_lo > 0) dst[0] = T(0);
            if (x_hi < w) dst[w - 1] = T(0);
            std::memcpy(dst + x_lo, plane + sy * w + x_lo + kx - 1,
                        sizeof(T) * (x_hi - x_lo));
          }
        }
      }
    }
  }

  void col2im(T* dst, int h, int w, int r0, int rows) const {
    const int cols = rows * w;
    for (int c = 0; c < in_; ++c) {
      T* plane = dst + std::size_t(c) * h * w;
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          const T* row = dcol_.data() + (std::size_t(c) * 9 + ky * 3 + kx) * cols;
          const int x_lo = std::max(0, 1 - kx);
          const int x_hi = std::min(w, w + 1 - kx);
          for (int y = r0; y < r0 + rows; ++y) {
            const int sy = y + ky - 1;
            if (sy < 0 || sy >= h) continue;
            T* out = plane + sy * w;
            const T* in = row + (y - r0) * w;
            for (int x = x_lo; x < x_hi; ++x) out[x + kx - 1] += in[x];
          }
        }
      }
    }
  }

  int in_, out_;
  Parameter<T> weight_;
  Parameter<T> bias_;
  Tensor<T> input_;
  AlignedVector<T> col_;
  AlignedVector<T> dcol_;
};

template <typename T>
class BatchNorm2d {
 public:
  BatchNorm2d(std::string name, int channels, double momentum = 0.1, double eps = 1e-5)
      : name_(std::move(name)),
        channels_(channels),
        momentum_(momentum),
        eps_(eps),
        gamma_(name_ + ".gamma", channels),
        beta_(name_ + ".beta", channels),
        running_mean_(channels, T(0)),
        running_var_(channels, T(1)) {
    std::fill(gamma_.value.begin(), gamma_.value.end(), T(1));
  }

  Tensor<T> forward(const Tensor<T>& x, Mode mode) {
    Tensor<T> y(x.n, x.c, x.h, x.w);
    const std::size_t plane = x.plane();
    const double m = double(x.n) * plane;
    if (mode == Mode::kTrain) {
      xhat_ = Tensor<T>(x.n, x.c, x.h, x.w);
      inv_std_.assign(channels_, T(0));
    }
    for (int c = 0; c < channels_; ++c) {
      double mean, var;
      if (mode != Mode::kInfer) {
        double s = 0.0;
        for (int n = 0; n < x.n; ++n) {
          const T* p = x.channel(n, c);
          for (std::size_t k = 0; k < plane; ++k) s += p[k];
        }
        mean = s / m;
        double s2 = 0.0;
        for (int n = 0; n < x.n; ++n) {
          const T* p = x.channel(n, c);
          for (std::size_t k = 0; k < plane; ++k) {
            const double d = p[k] - mean;
            s2 += d * d;
          }
        }
        var = s2 / m;
        const double unbiased = m > 1 ? s2 / (m - 1) : var;
        if (mode == Mode::kTrain) {
          running_mean_[c] = static_cast<T>((1 - momentum_) * running_mean_[c] + momentum_ * mean);
          running_var_[c] = static_cast<T>((1 - momentum_) * running_var_[c] + momentum_ * unbiased);
        } else {
          running_mean_[c] += static_cast<T>(mean);
          running_var_[c] += static_cast<T>(unbiased);
        }
      } else {
        mean = running_mean_[c];
        var = running_var_[c];
      }
      const T inv_std = static_cast<T>(1.0 / std::sqrt(var + eps_));
      const T g = gamma_.value[c];
      const T b = beta_.value[c];
      const T mu = static_cast<T>(mean);
      for (int n = 0; n < x.n; ++n) {
        const T* p = x.channel(n, c);
        T* q = y.channel(n, c);
        if (mode == Mode::kTrain) {
          T* xh = xhat_.channel(n, c);
          for (std::size_t k = 0; k < plane; ++k) {
            xh[k] = (p[k] - mu) * inv_std;
            q[k] = g * xh[k] + b;
          }
        } else {
          for (std::size_t k = 0; k < plane; ++k) q[k] = g * (p[k] - mu) * inv_std + b;
        }
      }
      if (mode == Mode::kTrain) inv_std_[c] = inv_std;
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    Tensor<T> dx(dy.n, dy.c, dy.h, dy.w);
    const std::size_t plane = dy.plane();
    const double m = double(dy.n) * plane;
    for (int c = 0; c < channels_; ++c) {
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (int n = 0; n < dy.n; ++n) {
        const T* g = dy.channel(n, c);
        const T* xh = xhat_.channel(n, c);
        for (std::size_t k = 0; k < plane; ++k) {
          sum_dy += g[k];
          sum_dy_xhat += double(g[k]) * xh[k];
        }
      }
      gamma_.grad[c] += static_cast<T>(sum_dy_xhat);
      beta_.grad[c] += static_cast<T>(sum_dy);
      const T scale = static_cast<T>(gamma_.value[c] * inv_std_[c] / m);
      const T a = static_cast<T>(sum_dy);
      const T b = static_cast<T>(sum_dy_xhat);
      const T mm = static_cast<T>(m);
      for (int n = 0; n < dy.n; ++n) {
        const T* g = dy.channel(n, c);
        const T* xh = xhat_.channel(n, c);
        T* out = dx.channel(n, c);
        for (std::size_t k = 0; k < plane; ++k) {
          out[k] = scale * (mm * g[k] - a - xh[k] * b);
        }
      }
    }
    return dx;
  }

  void collect(ParamList<T>& params, BufferList<T>& buffers) {
    params.push_back(&gamma_);
    params.push_back(&beta_);
    buffers.push_back({name_ + ".running_mean", &running_mean_});
    buffers.push_back({name_ + ".running_var", &running_var_});
  }

 private:
  std::string name_;
  int channels_;
  double momentum_;
  double eps_;
  Parameter<T> gamma_;
  Parameter<T> beta_;
  std::vector<T> running_mean_;
  std::vector<T> running_var_;
  Tensor<T> xhat_;
  std::vector<T> inv_std_;
};

template <typename T>
class LeakyRelu {
 public:
  explicit LeakyRelu(double slope) : slope_(static_cast<T>(slope)) {}

  Tensor<T> forward(Tensor<T> x) {
    positive_.resize(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
      const bool pos = x.data[k] > T(0);
      positive_[k] = pos;
      if (!pos) x.data[k] *= slope_;
    }
    return x;
  }

  Tensor<T> backward(Tensor<T> dy) const {
    for (std::size_t k = 0; k < dy.size(); ++k) {
      if (!positive_[k]) dy.data[k] *= slope_;
    }
    return dy;
  }

 private:
  T slope_;
  std::vector<unsigned char> positive_;
};

template <typename T>
class MaxPool2 {
 public:
  Tensor<T> forward(const Tensor<T>& x) {
    in_shape_ = x.shape();
    Tensor<T> y(x.n, x.c, x.h / 2, x.w / 2);
    argmax_.assign(y.size(), 0);
    std::size_t k = 0;
    for (int n = 0; n < x.n; ++n) {
      for (int c = 0; c < x.c; ++c) {
        const T* p = x.channel(n, c);
        for (int i = 0; i < y.h; ++i) {
          for (int j = 0; j < y.w; ++j, ++k) {
            const T* base = p + (2 * i) * x.w + 2 * j;
            const T cand[4] = {base[0], base[1], base[x.w], base[x.w + 1]};
            int best = 0;
            for (int q = 1; q < 4; ++q) {
              if (cand[q] > cand[best]) best = q;
            }
            argmax_[k] = static_cast<unsigned char>(best);
            y.data[k] = cand[best];
          }
        }
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) const {
    Tensor<T> dx(in_shape_[0], in_shape_[1], in_shape_[2], in_shape_[3]);
    std::size_t k = 0;
    for (int n = 0; n < dx.n; ++n) {
      for (int c = 0; c < dx.c; ++c) {
        T* p = dx.channel(n, c);
        for (int i = 0; i < dy.h; ++i) {
          for (int j = 0; j < dy.w; ++j, ++k) {
            const int q = argmax_[k];
            p[(2 * i + q / 2) * dx.w + 2 * j + q % 2] += dy.data[k];
          }
        }
      }
    }
    return dx;
  }

 private:
  std::array<int, 4> in_shape_{};
  std::vector<unsigned char> argmax_;
};

// Inverted dropout; identity at inference.
template <typename T>
class Dropout {
 public:
  explicit Dropout(double p) : p_(p) {}

  Tensor<T> forward(const Tensor<T>& x, Mode mode, std::mt19937_64& rng) {
    if (mode != Mode::kTrain || p_ <= 0.0) {
      mask_.clear();
      return x;
    }
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const T keep_scale = static_cast<T>(1.0 / (1.0 - p_));
    mask_.resize(x.size());
    Tensor<T> y = x;
    for (std::size_t k = 0; k < x.size(); ++k) {
      mask_[k] = unit(rng) >= p_ ? keep_scale : T(0);
      y.data[k] *= mask_[k];
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) const {
    if (mask_.empty()) return dy;
    Tensor<T> dx = dy;
    for (std::size_t k = 0; k < dx.size(); ++k) dx.data[k] *= mask_[k];
    return dx;
  }

 private:
  double p_;
  std::vector<T> mask_;
};

// Nearest-neighbor 2x upsampling.
template <typename T>
Tensor<T> upsample2(const Tensor<T>& x) {
  Tensor<T> y(x.n, x.c, x.h * 2, x.w * 2);
  for (int n = 0; n < x.n; ++n) {
    for (int c = 0; c < x.c; ++c) {
      const T* p = x.channel(n, c);
      T* q = y.channel(n, c);
      for (int i = 0; i < y.h; ++i) {
        for (int j = 0; j < y.w; ++j) q[i * y.w + j] = p[(i / 2) * x.w + j / 2];
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> upsample2_backward(const Tensor<T>& dy) {
  Tensor<T> dx(dy.n, dy.c, dy.h / 2, dy.w / 2);
  for (int n = 0; n < dy.n; ++n) {
    for (int c = 0; c < dy.c; ++c) {
      const T* p = dy.channel(n, c);
      T* q = dx.channel(n, c);
      for (int i = 0; i < dy.h; ++i) {
        for (int j = 0; j < dy.w; ++j) q[(i / 2) * dx.w + j / 2] += p[i * dy.w + j];
      }
    }
  }
  return dx;
}

// Channel concatenation [a, b].
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  Tensor<T> y(a.n, a.c + b.c, a.h, a.w);
  for (int n = 0; n < a.n; ++n) {
    std::copy(a.sample(n), a.sample(n) + a.per_sample(), y.sample(n));
    std::copy(b.sample(n), b.sample(n) + b.per_sample(), y.sample(n) + a.per_sample());
  }
  return y;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>& dy, int first) {
  Tensor<T> a(dy.n, first, dy.h, dy.w);
  Tensor<T> b(dy.n, dy.c - first, dy.h, dy.w);
  for (int n = 0; n < dy.n; ++n) {
    std::copy(dy.sample(n), dy.sample(n) + a.per_sample(), a.sample(n));
    std::copy(dy.sample(n) + a.per_sample(), dy.sample(n) + dy.per_sample(), b.sample(n));
  }
  return {std::move(a), std::move(b)};
}

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
  Tensor<T> y(x.n, x.c, 1, 1);
  for (int n = 0; n < x.n; ++n) {
    for (int c = 0; c < x.c; ++c) {
      const T* p = x.channel(n, c);
      double s = 0.0;
      for (std::size_t k = 0; k < x.plane(); ++k) s += p[k];
      y.data[n * x.c + c] = static_cast<T>(s / x.plane());
    }
  }
  return y;
}

template <typename T>
Tensor<T> global_avg_pool_backward(const Tensor<T>& dy, int h, int w) {
  Tensor<T> dx(dy.n, dy.c, h, w);
  const T inv = static_cast<T>(1.0 / (double(h) * w));
  for (int n = 0; n < dy.n; ++n) {
    for (int c = 0; c < dy.c; ++c) {
      T* q = dx.channel(n, c);
      std::fill(q, q + dx.plane(), dy.data[n * dy.c + c] * inv);
    }
  }
  return dx;
}

// Fully connected layer over the flattened per-sample features.
template <typename T>
class Dense {
 public:
  Dense(std::string name, int in, int out)
      : in_(in), out_(out),
        weight_(name + ".weight", std::size_t(in) * out),
        bias_(name + ".bias", out) {}

  void init(std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(double(in_));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (T& w : weight_.value) w = static_cast<T>(u(rng));
    std::fill(bias_.value.begin(), bias_.value.end(), T(0));
  }

  Tensor<T> forward(const Tensor<T>& x) {
    input_ = x;
    Tensor<T> y(x.n, out_, 1, 1);
    ConstMatMap<T> xm(x.data.data(), x.n, in_);
    ConstMatMap<T> wm(weight_.value.data(), out_, in_);
    MatMap<T> ym(y.data.data(), x.n, out_);
    ym.noalias() = xm * wm.transpose();
    for (int n = 0; n < x.n; ++n) {
      for (int o = 0; o < out_; ++o) ym(n, o) += bias_.value[o];
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    Tensor<T> dx(input_.n, input_.c, input_.h, input_.w);
    ConstMatMap<T> xm(input_.data.data(), input_.n, in_);
    ConstMatMap<T> wm(weight_.value.data(), out_, in_);
    ConstMatMap<T> dym(dy.data.data(), dy.n, out_);
    MatMap<T> gw(weight_.grad.data(), out_, in_);
    MatMap<T> dxm(dx.data.data(), input_.n, in_);
    gw.noalias() += dym.transpose() * xm;
    for (int n = 0; n < dy.n; ++n) {
      for (int o = 0; o < out_; ++o) bias_.grad[o] += dym(n, o);
    }
    dxm.noalias() = dym * wm;
    return dx;
  }

  void collect(ParamList<T>& params) {
    params.push_back(&weight_);
    params.push_back(&bias_);
  }

  Parameter<T>& weight() { return weight_; }
  Parameter<T>& bias() { return bias_; }

 private:
  int in_, out_;
  Parameter<T> weight_;
  Parameter<T> bias_;
  Tensor<T> input_;
};

}  // namespace plume2rate::nn

#endif  // PLUME2RATE_NN_LAYERS_HPP_
