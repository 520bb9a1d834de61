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

// CRNN and Res-BLSTM classifiers over [B, 1, n_mels, frames] log-mel input.
//
// CRNN:      4 x (conv3x3 -> BN -> ELU -> maxpool -> dropout) -> sequence ->
//            GRU -> FC-1024 -> ReLU -> dropout -> logits
// Res-BLSTM: residual blocks -> sequence -> BiLSTM -> FC-1024 -> ReLU ->
//            dropout -> logits
//
// Block 1 of the CRNN uses stride 2 in both conv and pool (3x3, padding 1).
// Blocks 2-4 pool 2x2 with stride 2 along frequency and stride 1 along time;
// one padding column on the right keeps the time length unchanged.

#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "adi/nn/layers.hpp"
#include "adi/nn/loss.hpp"
#include "adi/nn/recurrent.hpp"
#include "adi/nn/residual.hpp"

namespace adi::nn {

enum class ModelKind : std::uint8_t { kCRNN = 0, kResBLSTM = 1 };

inline std::string to_string(ModelKind k) { return k == ModelKind::kCRNN ? "crnn" : "resblstm"; }

inline ModelKind parse_model_kind(const std::string& s) {
  if (s == "crnn") return ModelKind::kCRNN;
  if (s == "resblstm") return ModelKind::kResBLSTM;
  throw Error(ErrorCode::kInvalidArgument, "unknown model kind '" + s + "' (expected crnn or resblstm)");
}

inline constexpr std::size_t kFcUnits = 1024;

struct ModelSpec {
  ModelKind kind = ModelKind::kResBLSTM;
  std::vector<std::size_t> conv_channels{32, 64};
  std::size_t recurrent_hidden = 256;
  std::size_t fc_units = kFcUnits;
  std::size_t n_classes = 2;
  double dropout_p = 0.3;
  std::size_t n_mels = 128;
  std::size_t frames = 64;
  std::uint64_t seed = 0;  // parameter init and dropout streams

  static ModelSpec crnn(std::size_t n_classes) {
    ModelSpec s;
    s.kind = ModelKind::kCRNN;
    s.conv_channels = {32, 64, 128, 128};
    s.n_classes = n_classes;
    return s;
  }

  static ModelSpec resblstm(std::size_t n_classes) {
    ModelSpec s;
    s.kind = ModelKind::kResBLSTM;
    s.conv_channels = {32, 64};
    s.n_classes = n_classes;
    return s;
  }

  std::size_t embedding_dim() const {
    return kind == ModelKind::kResBLSTM ? 2 * recurrent_hidden : recurrent_hidden;
  }

  void validate() const {
    const std::size_t want = kind == ModelKind::kCRNN ? 4 : 2;
    if (conv_channels.size() != want) {
      throw Error(ErrorCode::kInvalidArgument, to_string(kind) + " needs " + std::to_string(want) +
                                                   " conv channel entries, got " +
                                                   std::to_string(conv_channels.size()));
    }
    for (auto c : conv_channels) {
      adi::detail::require(c >= 1, ErrorCode::kInvalidArgument, "conv channels must be positive");
    }
    adi::detail::require(fc_units == kFcUnits, ErrorCode::kInvalidArgument, "fc_units must be 1024");
    adi::detail::require(n_classes >= 2, ErrorCode::kInvalidArgument, "need at least two classes");
    adi::detail::require(recurrent_hidden >= 1, ErrorCode::kInvalidArgument, "recurrent hidden size must be >= 1");
    adi::detail::require(dropout_p >= 0.0 && dropout_p < 1.0, ErrorCode::kInvalidArgument,
                         "dropout must be in [0, 1)");
    adi::detail::require(n_mels >= 8 && frames >= 4, ErrorCode::kInvalidArgument, "input too small for the front-end");
  }
};

template <typename T>
class Model {
 public:
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;

  const ModelSpec& spec() const { return spec_; }
  std::size_t n_layers() const { return layers_.size(); }
  Layer<T>& layer(std::size_t i) { return *layers_.at(i); }

  // Logits [B x n_classes].
  Tensor<T> forward(const Tensor<T>& x, Mode mode) {
    check_input(x);
    Tensor<T> h = x;
    for (auto& l : layers_) h = l->forward(h, mode);
    return h;
  }

  void backward(const Tensor<T>& dlogits) {
    Tensor<T> g = dlogits;
    for (std::size_t i = layers_.size(); i-- > 0;) g = layers_[i]->backward(g);
  }

  Tensor<T> probabilities(const Tensor<T>& x) { return softmax(forward(x, Mode::kEval)); }

  // Recurrent-layer output (eval mode): [B x embedding_dim].
  Tensor<T> embed(const Tensor<T>& x) {
    check_input(x);
    Tensor<T> h = x;
    for (std::size_t i = 0; i <= embed_after_; ++i) h = layers_[i]->forward(h, Mode::kEval);
    return h;
  }

  std::vector<std::pair<std::string, Param<T>*>> named_params() { return collect(false); }
  std::vector<std::pair<std::string, Param<T>*>> named_buffers() { return collect(true); }

  void zero_grad() {
    for (auto& [n, p] : named_params()) p->zero_grad();
  }

  void reseed(std::uint64_t seed) {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      layers_[i]->reseed(seed * 0x9E3779B97F4A7C15ULL + i + 1);
    }
  }

  std::size_t param_count() {
    std::size_t n = 0;
    for (auto& [name, p] : named_params()) n += p->value.size();
    return n;
  }

  template <typename U>
  friend Model<U> build_model(const ModelSpec& spec);

 private:
  Model() = default;

  void check_input(const Tensor<T>& x) const {
    require_shape(x.rank() == 4 && x.dim(1) == 1 && x.dim(2) == spec_.n_mels && x.dim(3) == spec_.frames,
                  "model input", x.shape,
                  "[B x 1 x " + std::to_string(spec_.n_mels) + " x " + std::to_string(spec_.frames) + "]");
    adi::detail::require(x.dim(0) >= 1, ErrorCode::kShapeMismatch, "empty batch");
  }

  std::vector<std::pair<std::string, Param<T>*>> collect(bool buffers) {
    std::vector<std::pair<std::string, Param<T>*>> out;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto ps = buffers ? layers_[i]->buffers() : layers_[i]->params();
      for (auto* p : ps) out.emplace_back(std::to_string(i) + "." + layers_[i]->kind() + "." + p->name, p);
    }
    return out;
  }

  ModelSpec spec_;
  std::vector<LayerPtr<T>> layers_;
  std::size_t embed_after_ = 0;
};

template <typename T>
Model<T> build_model(const ModelSpec& spec) {
  spec.validate();
  Model<T> m;
  m.spec_ = spec;
  std::mt19937_64 rng(spec.seed);
  std::size_t ch = 1, f = spec.n_mels, t = spec.frames;

  if (spec.kind == ModelKind::kCRNN) {
    for (std::size_t b = 0; b < 4; ++b) {
      const std::size_t out = spec.conv_channels[b];
      auto conv = std::make_unique<Conv2d<T>>(ch, out, 3, b == 0 ? 2 : 1, 1);
      conv->init(rng);
      f = conv->geometry().out_h(f);
      t = conv->geometry().out_w(t);
      PoolGeometry pg = b == 0 ? PoolGeometry{3, 3, 2, 2, 1, 1, 1, 1} : PoolGeometry{2, 2, 2, 1, 0, 0, 0, 1};
      adi::detail::require(f + pg.pad_top + pg.pad_bottom >= pg.kh, ErrorCode::kInvalidArgument,
                           "too few mel bands for four pooling stages");
      m.layers_.push_back(std::move(conv));
      m.layers_.push_back(std::make_unique<BatchNorm2d<T>>(out));
      m.layers_.push_back(std::make_unique<ELU<T>>());
      m.layers_.push_back(std::make_unique<MaxPool2d<T>>(pg));
      m.layers_.push_back(std::make_unique<Dropout<T>>(spec.dropout_p));
      f = pg.out_h(f);
      t = pg.out_w(t);
      ch = out;
    }
    m.layers_.push_back(std::make_unique<ToSequence<T>>());
    auto gru = std::make_unique<GRU<T>>(ch * f, spec.recurrent_hidden);
    gru->init(rng);
    m.layers_.push_back(std::move(gru));
  } else {
    for (std::size_t b = 0; b < spec.conv_channels.size(); ++b) {
      const std::size_t out = spec.conv_channels[b];
      const std::size_t stride = b == 0 ? 2 : 1;
      auto block = std::make_unique<ResidualBlock<T>>(ch, out, stride);
      block->init(rng);
      m.layers_.push_back(std::move(block));
      f = (f + 2 - 3) / stride + 1;
      t = (t + 2 - 3) / stride + 1;
      ch = out;
    }
    m.layers_.push_back(std::make_unique<ToSequence<T>>());
    auto lstm = std::make_unique<BiLSTM<T>>(ch * f, spec.recurrent_hidden);
    lstm->init(rng);
    m.layers_.push_back(std::move(lstm));
  }
  m.embed_after_ = m.layers_.size() - 1;

  auto fc = std::make_unique<Linear<T>>(spec.embedding_dim(), spec.fc_units);
  fc->init(rng);
  m.layers_.push_back(std::move(fc));
  m.layers_.push_back(std::make_unique<ReLU<T>>());
  m.layers_.push_back(std::make_unique<Dropout<T>>(spec.dropout_p));
  auto head = std::make_unique<Linear<T>>(spec.fc_units, spec.n_classes);
  head->init(rng);
  m.layers_.push_back(std::move(head));
  m.reseed(spec.seed);
  return m;
}

template <typename T>
Model<T> build_crnn(const ModelSpec& spec) {
  adi::detail::require(spec.kind == ModelKind::kCRNN, ErrorCode::kInvalidArgument, "spec is not a CRNN");
  return build_model<T>(spec);
}

template <typename T>
Model<T> build_resblstm(const ModelSpec& spec) {
  adi::detail::require(spec.kind == ModelKind::kResBLSTM, ErrorCode::kInvalidArgument, "spec is not a Res-BLSTM");
  return build_model<T>(spec);
}

inline double embedding_distance(std::span<const float> e1, std::span<const float> e2) {
  if (e1.size() != e2.size()) {
    throw Error(ErrorCode::kShapeMismatch, "embedding dimensions differ: " + std::to_string(e1.size()) + " vs " +
                                               std::to_string(e2.size()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < e1.size(); ++i) {
    const double d = static_cast<double>(e1[i]) - e2[i];
    s += d * d;
  }
  return std::sqrt(s);
}

// True iff the Euclidean distance is within theta.
inline bool compare_embeddings(std::span<const float> e1, std::span<const float> e2, double theta) {
  adi::detail::require(theta >= 0.0, ErrorCode::kInvalidArgument, "theta must be nonnegative");
  return embedding_distance(e1, e2) <= theta;
}

}  // namespace adi::nn
