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

// GRU / LSTM over [B, T, I] returning the final hidden state [B, H].
// Gate layouts follow the common (r, z, n) and (i, f, g, o) conventions.
// Input projections for all steps are one GEMM up front.

#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "adi/nn/layers.hpp"

namespace adi::nn {

namespace detail {

template <typename T>
inline T sigmoid(T x) {
  return x >= T(0) ? T(1) / (T(1) + std::exp(-x)) : std::exp(x) / (T(1) + std::exp(x));
}

template <typename T>
struct RecurrentParams {
  Param<T> w_ih, w_hh, b_ih, b_hh;

  RecurrentParams(std::size_t gates, std::size_t in, std::size_t hidden, const std::string& prefix)
      : w_ih(prefix + "weight_ih", {gates * hidden, in}),
        w_hh(prefix + "weight_hh", {gates * hidden, hidden}),
        b_ih(prefix + "bias_ih", {gates * hidden}),
        b_hh(prefix + "bias_hh", {gates * hidden}) {}

  void init(std::size_t hidden, std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
    for (auto* p : {&w_ih, &w_hh, &b_ih, &b_hh}) uniform_init(p->value, bound, rng);
  }

  std::vector<Param<T>*> all() { return {&w_ih, &w_hh, &b_ih, &b_hh}; }
};

// Xp = X W_ih^T + b_ih over all B*T rows.
template <typename T>
Mat<T> project_inputs(const Tensor<T>& x, const Param<T>& w_ih, const Param<T>& b_ih) {
  const std::size_t rows = x.dim(0) * x.dim(1), in = x.dim(2), g = w_ih.value.dim(0);
  Mat<T> xp = CMatMap<T>(x.ptr(), rows, in) * CMatMap<T>(w_ih.value.ptr(), g, in).transpose();
  xp.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(b_ih.value.ptr(), g);
  return xp;
}

// Rows of Xp belonging to time step t (stride T rows).
template <typename T>
StridedMap<T> step_rows(Mat<T>& xp, std::size_t b, std::size_t steps, std::size_t t) {
  const auto g = static_cast<Eigen::Index>(xp.cols());
  return StridedMap<T>(xp.data() + t * xp.cols(), static_cast<Eigen::Index>(b), g,
                       Eigen::OuterStride<>(static_cast<Eigen::Index>(steps) * g));
}

template <typename T>
void finish_input_grads(const Tensor<T>& x, const Mat<T>& dxp, Param<T>& w_ih, Param<T>& b_ih, Tensor<T>& dx) {
  const std::size_t rows = x.dim(0) * x.dim(1), in = x.dim(2), g = w_ih.value.dim(0);
  MatMap<T>(w_ih.grad.ptr(), g, in).noalias() += dxp.transpose() * CMatMap<T>(x.ptr(), rows, in);
  Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(b_ih.grad.ptr(), g) += dxp.colwise().sum();
  MatMap<T>(dx.ptr(), rows, in).noalias() = dxp * CMatMap<T>(w_ih.value.ptr(), g, in);
}

}  // namespace detail

// ---------------------------------------------------------------- GRU

template <typename T>
class GRU final : public Layer<T> {
 public:
  GRU(std::size_t in, std::size_t hidden, const std::string& prefix = "")
      : in_(in), h_(hidden), p_(3, in, hidden, prefix) {}

  std::string kind() const override { return "gru"; }
  std::size_t hidden() const { return h_; }
  void init(std::mt19937_64& rng) { p_.init(h_, rng); }
  detail::RecurrentParams<T>& raw() { return p_; }

  Tensor<T> forward(const Tensor<T>& x, Mode mode) override {
    require_shape(x.rank() == 3 && x.dim(1) >= 1 && x.dim(2) == in_, "gru", x.shape,
                  "[B x T x " + std::to_string(in_) + "]");
    const std::size_t b = x.dim(0), steps = x.dim(1), H = h_;
    Mat<T> xp = detail::project_inputs(x, p_.w_ih, p_.b_ih);
    CMatMap<T> whh(p_.w_hh.value.ptr(), 3 * H, H);
    const Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> bhh(p_.b_hh.value.ptr(), 3 * H);
    Mat<T> h = Mat<T>::Zero(b, H);
    Cache cache;
    const bool train = mode == Mode::kTrain;
    Mat<T> hp(b, 3 * H), r(b, H), z(b, H), n(b, H);
    for (std::size_t t = 0; t < steps; ++t) {
      hp.noalias() = h * whh.transpose();
      hp.rowwise() += bhh;
      auto xt = detail::step_rows(xp, b, steps, t);
      for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t j = 0; j < H; ++j) {
          r(i, j) = detail::sigmoid(xt(i, j) + hp(i, j));
          z(i, j) = detail::sigmoid(xt(i, H + j) + hp(i, H + j));
          n(i, j) = std::tanh(xt(i, 2 * H + j) + r(i, j) * hp(i, 2 * H + j));
        }
      }
      if (train) {
        cache.h_prev.push_back(h);
        cache.r.push_back(r);
        cache.z.push_back(z);
        cache.n.push_back(n);
        cache.hpn.push_back(hp.rightCols(H));
      }
      h = (T(1) - z.array()) * n.array() + z.array() * h.array();
    }
    if (train) {
      cache.x = x;
      cache_ = std::move(cache);
    }
    Tensor<T> y({b, H});
    MatMap<T>(y.ptr(), b, H) = h;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    this->require_cache(cache_.has_value());
    Cache& c = *cache_;
    const std::size_t b = c.x.dim(0), steps = c.x.dim(1), H = h_;
    require_shape(dy.shape == Shape{b, H}, "gru backward", dy.shape, "matching output");
    CMatMap<T> whh(p_.w_hh.value.ptr(), 3 * H, H);
    MatMap<T> dwhh(p_.w_hh.grad.ptr(), 3 * H, H);
    Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> dbhh(p_.b_hh.grad.ptr(), 3 * H);
    Mat<T> dh = CMatMap<T>(dy.ptr(), b, H);
    Mat<T> dxp = Mat<T>::Zero(b * steps, 3 * H);
    Mat<T> dhp(b, 3 * H), dh_direct(b, H);
    for (std::size_t t = steps; t-- > 0;) {
      auto dxt = detail::step_rows(dxp, b, steps, t);
      const Mat<T>& r = c.r[t];
      const Mat<T>& z = c.z[t];
      const Mat<T>& n = c.n[t];
      const Mat<T>& hpn = c.hpn[t];
      const Mat<T>& hprev = c.h_prev[t];
      for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t j = 0; j < H; ++j) {
          const T g = dh(i, j);
          const T dn = g * (T(1) - z(i, j));
          const T dz = g * (hprev(i, j) - n(i, j));
          dh_direct(i, j) = g * z(i, j);
          const T dan = dn * (T(1) - n(i, j) * n(i, j));
          const T dar = dan * hpn(i, j) * r(i, j) * (T(1) - r(i, j));
          const T daz = dz * z(i, j) * (T(1) - z(i, j));
          dxt(i, j) = dar;
          dxt(i, H + j) = daz;
          dxt(i, 2 * H + j) = dan;
          dhp(i, j) = dar;
          dhp(i, H + j) = daz;
          dhp(i, 2 * H + j) = dan * r(i, j);
        }
      }
      dwhh.noalias() += dhp.transpose() * hprev;
      dbhh += dhp.colwise().sum();
      dh = dh_direct;
      dh.noalias() += dhp * whh;
    }
    Tensor<T> dx(c.x.shape);
    detail::finish_input_grads(c.x, dxp, p_.w_ih, p_.b_ih, dx);
    cache_.reset();
    return dx;
  }

  std::vector<Param<T>*> params() override { return p_.all(); }

 private:
  struct Cache {
    Tensor<T> x;
    std::vector<Mat<T>> h_prev, r, z, n, hpn;
  };
  std::size_t in_, h_;
  detail::RecurrentParams<T> p_;
  std::optional<Cache> cache_;
};

// ---------------------------------------------------------------- LSTM

template <typename T>
class LSTM final : public Layer<T> {
 public:
  LSTM(std::size_t in, std::size_t hidden, bool reverse = false, const std::string& prefix = "")
      : in_(in), h_(hidden), reverse_(reverse), p_(4, in, hidden, prefix) {}

  std::string kind() const override { return reverse_ ? "lstm_reverse" : "lstm"; }
  std::size_t hidden() const { return h_; }
  void init(std::mt19937_64& rng) { p_.init(h_, rng); }
  detail::RecurrentParams<T>& raw() { return p_; }

  Tensor<T> forward(const Tensor<T>& x, Mode mode) override {
    require_shape(x.rank() == 3 && x.dim(1) >= 1 && x.dim(2) == in_, "lstm", x.shape,
                  "[B x T x " + std::to_string(in_) + "]");
    const std::size_t b = x.dim(0), steps = x.dim(1), H = h_;
    Mat<T> xp = detail::project_inputs(x, p_.w_ih, p_.b_ih);
    CMatMap<T> whh(p_.w_hh.value.ptr(), 4 * H, H);
    const Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> bhh(p_.b_hh.value.ptr(), 4 * H);
    Mat<T> h = Mat<T>::Zero(b, H), cell = Mat<T>::Zero(b, H);
    Mat<T> a(b, 4 * H), gates(b, 4 * H), tc(b, H);
    Cache cache;
    const bool train = mode == Mode::kTrain;
    for (std::size_t s = 0; s < steps; ++s) {
      const std::size_t t = reverse_ ? steps - 1 - s : s;
      a.noalias() = h * whh.transpose();
      a.rowwise() += bhh;
      a += detail::step_rows(xp, b, steps, t);
      if (train) {
        cache.h_prev.push_back(h);
        cache.c_prev.push_back(cell);
      }
      for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t j = 0; j < H; ++j) {
          const T ig = detail::sigmoid(a(i, j));
          const T fg = detail::sigmoid(a(i, H + j));
          const T gg = std::tanh(a(i, 2 * H + j));
          const T og = detail::sigmoid(a(i, 3 * H + j));
          gates(i, j) = ig;
          gates(i, H + j) = fg;
          gates(i, 2 * H + j) = gg;
          gates(i, 3 * H + j) = og;
          cell(i, j) = fg * cell(i, j) + ig * gg;
          tc(i, j) = std::tanh(cell(i, j));
          h(i, j) = og * tc(i, j);
        }
      }
      if (train) {
        cache.gates.push_back(gates);
        cache.tanh_c.push_back(tc);
      }
    }
    if (train) {
      cache.x = x;
      cache_ = std::move(cache);
    }
    Tensor<T> y({b, H});
    MatMap<T>(y.ptr(), b, H) = h;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    this->require_cache(cache_.has_value());
    Cache& c = *cache_;
    const std::size_t b = c.x.dim(0), steps = c.x.dim(1), H = h_;
    require_shape(dy.shape == Shape{b, H}, "lstm backward", dy.shape, "matching output");
    CMatMap<T> whh(p_.w_hh.value.ptr(), 4 * H, H);
    MatMap<T> dwhh(p_.w_hh.grad.ptr(), 4 * H, H);
    Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> dbhh(p_.b_hh.grad.ptr(), 4 * H);
    Mat<T> dh = CMatMap<T>(dy.ptr(), b, H);
    Mat<T> dc = Mat<T>::Zero(b, H);
    Mat<T> dxp = Mat<T>::Zero(b * steps, 4 * H);
    Mat<T> da(b, 4 * H);
    for (std::size_t s = steps; s-- > 0;) {
      const std::size_t t = reverse_ ? steps - 1 - s : s;
      const Mat<T>& g = c.gates[s];
      const Mat<T>& tc = c.tanh_c[s];
      const Mat<T>& cprev = c.c_prev[s];
      for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t j = 0; j < H; ++j) {
          const T ig = g(i, j), fg = g(i, H + j), gg = g(i, 2 * H + j), og = g(i, 3 * H + j);
          const T dct = dc(i, j) + dh(i, j) * og * (T(1) - tc(i, j) * tc(i, j));
          da(i, j) = dct * gg * ig * (T(1) - ig);
          da(i, H + j) = dct * cprev(i, j) * fg * (T(1) - fg);
          da(i, 2 * H + j) = dct * ig * (T(1) - gg * gg);
          da(i, 3 * H + j) = dh(i, j) * tc(i, j) * og * (T(1) - og);
          dc(i, j) = dct * fg;
        }
      }
      detail::step_rows(dxp, b, steps, t) = da;
      dwhh.noalias() += da.transpose() * c.h_prev[s];
      dbhh += da.colwise().sum();
      dh.noalias() = da * whh;
    }
    Tensor<T> dx(c.x.shape);
    detail::finish_input_grads(c.x, dxp, p_.w_ih, p_.b_ih, dx);
    cache_.reset();
    return dx;
  }

  std::vector<Param<T>*> params() override { return p_.all(); }

 private:
  struct Cache {
    Tensor<T> x;
    std::vector<Mat<T>> h_prev, c_prev, gates, tanh_c;  // indexed by processing order
  };
  std::size_t in_, h_;
  bool reverse_;
  detail::RecurrentParams<T> p_;
  std::optional<Cache> cache_;
};

// ---------------------------------------------------------------- BiLSTM

// Final forward state concatenated with final backward state: [B, 2H].
template <typename T>
class BiLSTM final : public Layer<T> {
 public:
  BiLSTM(std::size_t in, std::size_t hidden) : fwd_(in, hidden, false, "fwd."), bwd_(in, hidden, true, "bwd.") {}

  std::string kind() const override { return "bilstm"; }
  std::size_t hidden() const { return fwd_.hidden(); }
  LSTM<T>& forward_lstm() { return fwd_; }
  LSTM<T>& backward_lstm() { return bwd_; }

  void init(std::mt19937_64& rng) {
    fwd_.init(rng);
    bwd_.init(rng);
  }

  Tensor<T> forward(const Tensor<T>& x, Mode mode) override {
    const Tensor<T> f = fwd_.forward(x, mode);
    const Tensor<T> r = bwd_.forward(x, mode);
    const std::size_t b = f.dim(0), H = f.dim(1);
    Tensor<T> y({b, 2 * H});
    for (std::size_t i = 0; i < b; ++i) {
      std::copy_n(f.ptr() + i * H, H, y.ptr() + i * 2 * H);
      std::copy_n(r.ptr() + i * H, H, y.ptr() + i * 2 * H + H);
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    const std::size_t H = hidden();
    require_shape(dy.rank() == 2 && dy.dim(1) == 2 * H, "bilstm backward", dy.shape, "[B x 2H]");
    const std::size_t b = dy.dim(0);
    Tensor<T> df({b, H}), dr({b, H});
    for (std::size_t i = 0; i < b; ++i) {
      std::copy_n(dy.ptr() + i * 2 * H, H, df.ptr() + i * H);
      std::copy_n(dy.ptr() + i * 2 * H + H, H, dr.ptr() + i * H);
    }
    Tensor<T> dx = fwd_.backward(df);
    const Tensor<T> dx2 = bwd_.backward(dr);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dx2[i];
    return dx;
  }

  std::vector<Param<T>*> params() override {
    auto p = fwd_.params();
    for (auto* q : bwd_.params()) p.push_back(q);
    return p;
  }

 private:
  LSTM<T> fwd_, bwd_;
};

}  // namespace adi::nn
