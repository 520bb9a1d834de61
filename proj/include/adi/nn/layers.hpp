// Copyright 2026 The ADI Intonation Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Feed-forward layers. Every layer caches what backward needs only when
// forward runs in Mode::kTrain; eval-mode forward leaves the layer untouched,
// which is what makes a frozen model usable from several threads.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "adi/nn/tensor.hpp"

namespace adi::nn {

template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual std::string kind() const = 0;
  virtual Tensor<T> forward(const Tensor<T>& x, Mode mode) = 0;
  // Accumulates parameter gradients, returns d(loss)/d(input).
  virtual Tensor<T> backward(const Tensor<T>& dy) = 0;
  virtual std::vector<Param<T>*> params() { return {}; }
  // Non-trainable state saved with the model (batch-norm running stats).
  virtual std::vector<Param<T>*> buffers() { return {}; }
  virtual void reseed(std::uint64_t) {}

 protected:
  void require_cache(bool ok) const {
    if (!ok) throw Error(ErrorCode::kState, kind() + ": backward called without a training-mode forward");
  }
};

template <typename T>
using LayerPtr = std::unique_ptr<Layer<T>>;

// ---------------------------------------------------------------- Linear

template <typename T>
class Linear final : public Layer<T> {
 public:
  Linear(std::size_t in, std::size_t out) : in_(in), out_(out), w_("weight", {out, in}), b_("bias", {out}) {}

  std::string kind() const override { return "linear"; }
  std::size_t in_features() const { return in_; }
  std::size_t out_features() const { return out_; }
  Param<T>& weight() { return w_; }
  Param<T>& bias() { return b_; }

  void init(std::mt19937_64& rng) {
    uniform_init(w_.value, 1.0 / std::sqrt(static_cast<double>(in_)), rng);
    b_.value.fill(T(0));
  }

  Tensor<T> forward(const Tensor<T>& x, Mode mode) override {
    require_shape(x.rank() == 2 && x.dim(1) == in_, "linear", x.shape, "[B x " + std::to_string(in_) + "]");
    const std::size_t b = x.dim(0);
    Tensor<T> y({b, out_});
    MatMap<T> Y(y.ptr(), b, out_);
    Y.noalias() = CMatMap<T>(x.ptr(), b, in_) * CMatMap<T>(w_.value.ptr(), out_, in_).transpose();
    Y.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(b_.value.ptr(), out_);
    if (mode == Mode::kTrain) x_ = x;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    this->require_cache(x_.has_value());
    const std::size_t b = x_->dim(0);
    require_shape(dy.shape == Shape{b, out_}, "linear backward", dy.shape, "matching output");
    CMatMap<T> DY(dy.ptr(), b, out_);
    MatMap<T>(w_.grad.ptr(), out_, in_).noalias() += DY.transpose() * CMatMap<T>(x_->ptr(), b, in_);
    Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(b_.grad.ptr(), out_) += DY.colwise().sum();
    Tensor<T> dx({b, in_});
    MatMap<T>(dx.ptr(), b, in_).noalias() = DY * CMatMap<T>(w_.value.ptr(), out_, in_);
    x_.reset();
    return dx;
  }

  std::vector<Param<T>*> params() override { return {&w_, &b_}; }

 private:
  std::size_t in_, out_;
  Param<T> w_, b_;
  std::optional<Tensor<T>> x_;
};

// ---------------------------------------------------------------- Conv2d

struct ConvGeometry {
  std::size_t in_ch, out_ch, kh, kw, sh, sw, ph, pw;

  std::size_t out_h(std::size_t h) const { return (h + 2 * ph - kh) / sh + 1; }
  std::size_t out_w(std::size_t w) const { return (w + 2 * pw - kw) / sw + 1; }
  std::size_t patch() const { return in_ch * kh * kw; }
};

namespace detail {

template <typename T>
void im2col(const T* x, const ConvGeometry& g, std::size_t h, std::size_t w, T* col) {
  const std::size_t oh = g.out_h(h), ow = g.out_w(w);
  for (std::size_t c = 0; c < g.in_ch; ++c) {
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        T* row = col + ((c * g.kh + ki) * g.kw + kj) * oh * ow;
        for (std::size_t i = 0; i < oh; ++i) {
          const long ih = static_cast<long>(i * g.sh + ki) - static_cast<long>(g.ph);
          T* out = row + i * ow;
          if (ih < 0 || ih >= static_cast<long>(h)) {
            std::fill(out, out + ow, T(0));
            continue;
          }
          const T* src = x + (c * h + static_cast<std::size_t>(ih)) * w;
          for (std::size_t j = 0; j < ow; ++j) {
            const long iw = static_cast<long>(j * g.sw + kj) - static_cast<long>(g.pw);
            out[j] = (iw >= 0 && iw < static_cast<long>(w)) ? src[iw] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const T* col, const ConvGeometry& g, std::size_t h, std::size_t w, T* dx) {
  const std::size_t oh = g.out_h(h), ow = g.out_w(w);
  for (std::size_t c = 0; c < g.in_ch; ++c) {
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        const T* row = col + ((c * g.kh + ki) * g.kw + kj) * oh * ow;
        for (std::size_t i = 0; i < oh; ++i) {
          const long ih = static_cast<long>(i * g.sh + ki) - static_cast<long>(g.ph);
          if (ih < 0 || ih >= static_cast<long>(h)) continue;
          T* dst = dx + (c * h + static_cast<std::size_t>(ih)) * w;
          for (std::size_t j = 0; j < ow; ++j) {
            const long iw = static_cast<long>(j * g.sw + kj) - static_cast<long>(g.pw);
            if (iw >= 0 && iw < static_cast<long>(w)) dst[iw] += row[i * ow + j];
          }
        }
      }
    }
  }
}

}  // namespace detail

// 2-D convolution via im2col + GEMM. Input [B, C, H, W].
// The im2col buffer is rebuilt in backward instead of cached; at batch 128 the
// cached columns would run to gigabytes.
template <typename T>
class Conv2d final : public Layer<T> {
 public:
  explicit Conv2d(ConvGeometry g)
      : g_(g), w_("weight", {g.out_ch, g.in_ch, g.kh, g.kw}), b_("bias", {g.out_ch}) {
    adi::detail::require(g.in_ch && g.out_ch && g.kh && g.kw && g.sh && g.sw, ErrorCode::kInvalidArgument,
                         "conv geometry must be positive");
  }
  Conv2d(std::size_t in, std::size_t out, std::size_t k, std::size_t stride, std::size_t pad)
      : Conv2d(ConvGeometry{in, out, k, k, stride, stride, pad, pad}) {}

  std::string kind() const override { return "conv2d"; }
  const ConvGeometry& geometry() const { return g_; }
  Param<T>& weight() { return w_; }
  Param<T>& bias() { return b_; }

  void init(std::mt19937_64& rng) {
    uniform_init(w_.value, 1.0 / std::sqrt(static_cast<double>(g_.patch())), rng);
    b_.value.fill(T(0));
  }

  Tensor<T> forward(const Tensor<T>& x, Mode mode) override {
    require_shape(x.rank() == 4 && x.dim(1) == g_.in_ch && x.dim(2) + 2 * g_.ph >= g_.kh &&
                      x.dim(3) + 2 * g_.pw >= g_.kw,
                  "conv2d", x.shape, "[B x " + std::to_string(g_.in_ch) + " x H x W]");
    const std::size_t bsz = x.dim(0), h = x.dim(2), w = x.dim(3);
    const std::size_t oh = g_.out_h(h), ow = g_.out_w(w), p = oh * ow, k = g_.patch();
    Tensor<T> y({bsz, g_.out_ch, oh, ow});
    col_.resize(k * p);
    CMatMap<T> W(w_.value.ptr(), g_.out_ch, k);
    const Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> bias(b_.value.ptr(), g_.out_ch);
    for (std::size_t b = 0; b < bsz; ++b) {
      detail::im2col(x.ptr() + b * g_.in_ch * h * w, g_, h, w, col_.data());
      MatMap<T> Y(y.ptr() + b * g_.out_ch * p, g_.out_ch, p);
      Y.noalias() = W * CMatMap<T>(col_.data(), k, p);
      Y.colwise() += bias;
    }
    if (mode == Mode::kTrain) x_ = x;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    this->require_cache(x_.has_value());
    const std::size_t bsz = x_->dim(0), h = x_->dim(2), w = x_->dim(3);
    const std::size_t oh = g_.out_h(h), ow = g_.out_w(w), p = oh * ow, k = g_.patch();
    require_shape(dy.shape == Shape{bsz, g_.out_ch, oh, ow}, "conv2d backward", dy.shape, "matching output");
    Tensor<T> dx(x_->shape);
    col_.resize(k * p);
    dcol_.resize(k * p);
    CMatMap<T> W(w_.value.ptr(), g_.out_ch, k);
    MatMap<T> dW(w_.grad.ptr(), g_.out_ch, k);
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> db(b_.grad.ptr(), g_.out_ch);
    for (std::size_t b = 0; b < bsz; ++b) {
      detail::im2col(x_->ptr() + b * g_.in_ch * h * w, g_, h, w, col_.data());
      CMatMap<T> DY(dy.ptr() + b * g_.out_ch * p, g_.out_ch, p);
      dW.noalias() += DY * CMatMap<T>(col_.data(), k, p).transpose();
      db += DY.rowwise().sum();
      MatMap<T>(dcol_.data(), k, p).noalias() = W.transpose() * DY;
      detail::col2im(dcol_.data(), g_, h, w, dx.ptr() + b * g_.in_ch * h * w);
    }
    x_.reset();
    return dx;
  }

  std::vector<Param<T>*> params() override { return {&w_, &b_}; }

 private:
  ConvGeometry g_;
  Param<T> w_, b_;
  std::optional<Tensor<T>> x_;
  Buffer<T> col_, dcol_;
};

// ---------------------------------------------------------------- BatchNorm2d

template <typename T>
class BatchNorm2d final : public Layer<T> {
 public:
  explicit BatchNorm2d(std::size_t channels, double momentum = 0.1, double eps = 1e-5)
      : c_(channels),
        momentum_(momentum),
        eps_(eps),
        gamma_("gamma", {channels}),
        beta_("beta", {channels}),
        running_mean_("running_mean", {channels}),
        running_var_("running_var", {channels}) {
    gamma_.value.fill(T(1));
    running_var_.value.fill(T(1));
  }

  std::string kind() const override { return "batchnorm2d"; }
  Param<T>& gamma() { return gamma_; }
  Param<T>& beta() { return beta_; }
  Param<T>& running_mean() { return running_mean_; }
  Param<T>& running_var() { return running_var_; }

  Tensor<T> forward(const Tensor<T>& x, Mode mode) override {
    require_shape(x.rank() == 4 && x.dim(1) == c_, "batchnorm2d", x.shape,
                  "[B x " + std::to_string(c_) + " x H x W]");
    const std::size_t bsz = x.dim(0), hw = x.dim(2) * x.dim(3);
    const double n = static_cast<double>(bsz * hw);
    Tensor<T> y(x.shape);
    if (mode == Mode::kEval) {
      for (std::size_t c = 0; c < c_; ++c) {
        const double inv = 1.0 / std::sqrt(static_cast<double>(running_var_.value[c]) + eps_);
        const T scale = static_cast<T>(gamma_.value[c] * inv);
        const T shift = static_cast<T>(beta_.value[c] - running_mean_.value[c] * gamma_.value[c] * inv);
        for (std::size_t b = 0; b < bsz; ++b) {
          const T* src = x.ptr() + (b * c_ + c) * hw;
          T* dst = y.ptr() + (b * c_ + c) * hw;
          for (std::size_t i = 0; i < hw; ++i) dst[i] = src[i] * scale + shift;
        }
      }
      return y;
    }
    adi::detail::require(n > 1.0, ErrorCode::kInvalidArgument, "batchnorm2d needs more than one value per channel");
    xhat_ = Tensor<T>(x.shape);
    inv_std_.assign(c_, T(0));
    for (std::size_t c = 0; c < c_; ++c) {
      double sum = 0.0;
      for (std::size_t b = 0; b < bsz; ++b) {
        const T* src = x.ptr() + (b * c_ + c) * hw;
        for (std::size_t i = 0; i < hw; ++i) sum += src[i];
      }
      const double mean = sum / n;
      double sq = 0.0;
      for (std::size_t b = 0; b < bsz; ++b) {
        const T* src = x.ptr() + (b * c_ + c) * hw;
        for (std::size_t i = 0; i < hw; ++i) sq += (src[i] - mean) * (src[i] - mean);
      }
      const double var = sq / n;
      const double inv = 1.0 / std::sqrt(var + eps_);
      inv_std_[c] = static_cast<T>(inv);
      for (std::size_t b = 0; b < bsz; ++b) {
        const T* src = x.ptr() + (b * c_ + c) * hw;
        T* xh = xhat_->ptr() + (b * c_ + c) * hw;
        T* dst = y.ptr() + (b * c_ + c) * hw;
        for (std::size_t i = 0; i < hw; ++i) {
          xh[i] = static_cast<T>((src[i] - mean) * inv);
          dst[i] = gamma_.value[c] * xh[i] + beta_.value[c];
        }
      }
      running_mean_.value[c] = static_cast<T>((1.0 - momentum_) * running_mean_.value[c] + momentum_ * mean);
      running_var_.value[c] =
          static_cast<T>((1.0 - momentum_) * running_var_.value[c] + momentum_ * var * n / (n - 1.0));
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    this->require_cache(xhat_.has_value());
    require_shape(dy.shape == xhat_->shape, "batchnorm2d backward", dy.shape, shape_str(xhat_->shape));
    const std::size_t bsz = dy.dim(0), hw = dy.dim(2) * dy.dim(3);
    const double n = static_cast<double>(bsz * hw);
    Tensor<T> dx(dy.shape);
    for (std::size_t c = 0; c < c_; ++c) {
      double sum_dy = 0.0, sum_dy_xh = 0.0;
      for (std::size_t b = 0; b < bsz; ++b) {
        const T* g = dy.ptr() + (b * c_ + c) * hw;
        const T* xh = xhat_->ptr() + (b * c_ + c) * hw;
        for (std::size_t i = 0; i < hw; ++i) {
          sum_dy += g[i];
          sum_dy_xh += g[i] * xh[i];
        }
      }
      gamma_.grad[c] += static_cast<T>(sum_dy_xh);
      beta_.grad[c] += static_cast<T>(sum_dy);
      const double k = gamma_.value[c] * inv_std_[c] / n;
      for (std::size_t b = 0; b < bsz; ++b) {
        const T* g = dy.ptr() + (b * c_ + c) * hw;
        const T* xh = xhat_->ptr() + (b * c_ + c) * hw;
        T* d = dx.ptr() + (b * c_ + c) * hw;
        for (std::size_t i = 0; i < hw; ++i) d[i] = static_cast<T>(k * (n * g[i] - sum_dy - xh[i] * sum_dy_xh));
      }
    }
    xhat_.reset();
    return dx;
  }

  std::vector<Param<T>*> params() override { return {&gamma_, &beta_}; }
  std::vector<Param<T>*> buffers() override { return {&running_mean_, &running_var_}; }

 private:
  std::size_t c_;
  double momentum_, eps_;
  Param<T> gamma_, beta_, running_mean_, running_var_;
  std::optional<Tensor<T>> xhat_;
  std::vector<T> inv_std_;
};

// ---------------------------------------------------------------- activations

template <typename T>
class ReLU final : public Layer<T> {
 public:
  std::string kind() const override { return "relu"; }
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override {
    Tensor<T> y(x.shape);
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
    if (mode == Mode::kTrain) y_ = y;
    return y;
  }
  Tensor<T> backward(const Tensor<T>& dy) override {
    this->require_cache(y_.has_value());
    require_shape(dy.shape == y_->shape, "relu backward", dy.shape, shape_str(y_->shape));
    Tensor<T> dx(dy.shape);
    for (std::size_t i = 0; i < dy.size(); ++i) dx[i] = (*y_)[i] > T(0) ? dy[i] : T(0);
    y_.reset();
    return dx;
  }

 private:
  std::optional<Tensor<T>> y_;
};

template <typename T>
class ELU final : public Layer<T> {
 public:
  explicit ELU(double alpha = 1.0) : alpha_(static_cast<T>(alpha)) {}
  std::string kind() const override { return "elu"; }
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override {
    Tensor<T> y(x.shape);
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T(0) ? x[i] : alpha_ * std::expm1(x[i]);
    if (mode == Mode::kTrain) y_ = y;
    return y;
  }
  Tensor<T> backward(const Tensor<T>& dy) override {
    this->require_cache(y_.has_value());
    require_shape(dy.shape == y_->shape, "elu backward", dy.shape, shape_str(y_->shape));
    Tensor<T> dx(dy.shape);
    for (std::size_t i = 0; i < dy.size(); ++i) {
      const T y = (*y_)[i];
      dx[i] = y > T(0) ? dy[i] : dy[i] * (y + alpha_);
    }
    y_.reset();
    return dx;
  }

 private:
  T alpha_;
  std::optional<Tensor<T>> y_;
};

// ---------------------------------------------------------------- MaxPool2d

struct PoolGeometry {
  std::size_t kh, kw, sh, sw;
  std::size_t pad_top = 0, pad_bottom = 0, pad_left = 0, pad_right = 0;

  std::size_t out_h(std::size_t h) const { return (h + pad_top + pad_bottom - kh) / sh + 1; }
  std::size_t out_w(std::size_t w) const { return (w + pad_left + pad_right - kw) / sw + 1; }
};

// Padding cells count as -inf.
template <typename T>
class MaxPool2d final : public Layer<T> {
 public:
  explicit MaxPool2d(PoolGeometry g) : g_(g) {
    adi::detail::require(g.kh && g.kw && g.sh && g.sw, ErrorCode::kInvalidArgument, "pool geometry must be positive");
    adi::detail::require(g.pad_top < g.kh && g.pad_bottom < g.kh && g.pad_left < g.kw && g.pad_right < g.kw,
                         ErrorCode::kInvalidArgument, "pool padding must be smaller than the kernel");
  }

  std::string kind() const override { return "maxpool2d"; }
  const PoolGeometry& geometry() const { return g_; }

  Tensor<T> forward(const Tensor<T>& x, Mode mode) override {
    require_shape(x.rank() == 4 && x.dim(2) + g_.pad_top + g_.pad_bottom >= g_.kh &&
                      x.dim(3) + g_.pad_left + g_.pad_right >= g_.kw,
                  "maxpool2d", x.shape, "[B x C x H x W] at least one kernel in size");
    const std::size_t planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
    const std::size_t oh = g_.out_h(h), ow = g_.out_w(w);
    Tensor<T> y({x.dim(0), x.dim(1), oh, ow});
    std::vector<std::size_t> arg(y.size());
    for (std::size_t p = 0; p < planes; ++p) {
      const T* src = x.ptr() + p * h * w;
      for (std::size_t i = 0; i < oh; ++i) {
        for (std::size_t j = 0; j < ow; ++j) {
          T best = -std::numeric_limits<T>::infinity();
          std::size_t best_idx = 0;
          bool found = false;
          for (std::size_t a = 0; a < g_.kh; ++a) {
            const long ih = static_cast<long>(i * g_.sh + a) - static_cast<long>(g_.pad_top);
            if (ih < 0 || ih >= static_cast<long>(h)) continue;
            for (std::size_t b = 0; b < g_.kw; ++b) {
              const long iw = static_cast<long>(j * g_.sw + b) - static_cast<long>(g_.pad_left);
              if (iw < 0 || iw >= static_cast<long>(w)) continue;
              const std::size_t idx = static_cast<std::size_t>(ih) * w + static_cast<std::size_t>(iw);
              if (!found || src[idx] > best) {
                best = src[idx];
                best_idx = idx;
                found = true;
              }
            }
          }
          const std::size_t o = (p * oh + i) * ow + j;
          y[o] = best;
          arg[o] = p * h * w + best_idx;
        }
      }
    }
    if (mode == Mode::kTrain) {
      in_shape_ = x.shape;
      arg_ = std::move(arg);
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    this->require_cache(in_shape_.has_value());
    require_shape(dy.size() == arg_.size(), "maxpool2d backward", dy.shape, "matching output");
    Tensor<T> dx(*in_shape_);
    for (std::size_t o = 0; o < arg_.size(); ++o) dx[arg_[o]] += dy[o];
    in_shape_.reset();
    return dx;
  }

 private:
  PoolGeometry g_;
  std::optional<Shape> in_shape_;
  std::vector<std::size_t> arg_;
};

// ---------------------------------------------------------------- Dropout

// Inverted dropout; identity in eval mode.
template <typename T>
class Dropout final : public Layer<T> {
 public:
  explicit Dropout(double p, std::uint64_t seed = 0) : p_(p), rng_(seed) {
    adi::detail::require(p >= 0.0 && p < 1.0, ErrorCode::kInvalidArgument, "dropout p must be in [0, 1)");
  }

  std::string kind() const override { return "dropout"; }
  double p() const { return p_; }
  void reseed(std::uint64_t seed) override { rng_.seed(seed); }

  Tensor<T> forward(const Tensor<T>& x, Mode mode) override {
    if (mode == Mode::kEval) return x;
    mask_ = Tensor<T>(x.shape);
    const T keep = static_cast<T>(1.0 / (1.0 - p_));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Tensor<T> y(x.shape);
    for (std::size_t i = 0; i < x.size(); ++i) {
      (*mask_)[i] = (p_ == 0.0 || u(rng_) >= p_) ? keep : T(0);
      y[i] = x[i] * (*mask_)[i];
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    this->require_cache(mask_.has_value());
    require_shape(dy.shape == mask_->shape, "dropout backward", dy.shape, shape_str(mask_->shape));
    Tensor<T> dx(dy.shape);
    for (std::size_t i = 0; i < dy.size(); ++i) dx[i] = dy[i] * (*mask_)[i];
    mask_.reset();
    return dx;
  }

 private:
  double p_;
  std::mt19937_64 rng_;
  std::optional<Tensor<T>> mask_;
};

// ---------------------------------------------------------------- ToSequence

// [B, C, F, T] -> [B, T, C*F]: channel and frequency merge per time step.
template <typename T>
class ToSequence final : public Layer<T> {
 public:
  std::string kind() const override { return "to_sequence"; }

  Tensor<T> forward(const Tensor<T>& x, Mode mode) override {
    require_shape(x.rank() == 4, "to_sequence", x.shape, "[B x C x F x T]");
    const std::size_t b = x.dim(0), c = x.dim(1), f = x.dim(2), t = x.dim(3);
    Tensor<T> y({b, t, c * f});
    for (std::size_t n = 0; n < b; ++n) {
      for (std::size_t cf = 0; cf < c * f; ++cf) {
        const T* src = x.ptr() + (n * c * f + cf) * t;
        T* dst = y.ptr() + n * t * c * f + cf;
        for (std::size_t s = 0; s < t; ++s) dst[s * c * f] = src[s];
      }
    }
    if (mode == Mode::kTrain) in_shape_ = x.shape;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    this->require_cache(in_shape_.has_value());
    const Shape s = *in_shape_;
    const std::size_t b = s[0], c = s[1], f = s[2], t = s[3];
    require_shape(dy.shape == Shape{b, t, c * f}, "to_sequence backward", dy.shape, "matching output");
    Tensor<T> dx(s);
    for (std::size_t n = 0; n < b; ++n) {
      for (std::size_t cf = 0; cf < c * f; ++cf) {
        T* dst = dx.ptr() + (n * c * f + cf) * t;
        const T* src = dy.ptr() + n * t * c * f + cf;
        for (std::size_t k = 0; k < t; ++k) dst[k] = src[k * c * f];
      }
    }
    in_shape_.reset();
    return dx;
  }

 private:
  std::optional<Shape> in_shape_;
};

}  // namespace adi::nn
