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

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "adi/nn/model.hpp"

namespace adi::nn {

// ---------------------------------------------------------------- Adam

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
class Adam {
 public:
  Adam(std::vector<std::pair<std::string, Param<T>*>> params, AdamConfig cfg = {})
      : params_(std::move(params)), cfg_(cfg) {
    for (auto& [n, p] : params_) {
      m_.emplace_back(p->value.size(), 0.0);
      v_.emplace_back(p->value.size(), 0.0);
    }
  }

  std::uint64_t steps() const { return t_; }

  void step() {
    for (auto& [name, p] : params_) {
      if (!p->grad.all_finite()) throw Error(ErrorCode::kNumerical, "non-finite gradient in " + name);
    }
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
      Param<T>& p = *params_[k].second;
      auto& m = m_[k];
      auto& v = v_[k];
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        const double g = p.grad[i];
        m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
        v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
        const double mhat = m[i] / c1, vhat = v[i] / c2;
        p.value[i] = static_cast<T>(p.value[i] - cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps));
      }
    }
  }

 private:
  std::vector<std::pair<std::string, Param<T>*>> params_;
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  std::uint64_t t_ = 0;
};

// ---------------------------------------------------------------- data

// Fixed-size spectrogram examples, band-major per record.
struct Dataset {
  std::size_t n_mels = 128;
  std::size_t frames = 64;
  std::vector<float> x;
  std::vector<int> y;

  std::size_t size() const { return y.size(); }
  bool empty() const { return y.empty(); }
  std::size_t record() const { return n_mels * frames; }
  std::span<const float> example(std::size_t i) const { return {x.data() + i * record(), record()}; }

  void add(std::span<const float> values, int label) {
    adi::detail::require(values.size() == record(), ErrorCode::kShapeMismatch, "example size mismatch");
    x.insert(x.end(), values.begin(), values.end());
    y.push_back(label);
  }

  template <typename T>
  Tensor<T> batch(std::span<const std::size_t> idx) const {
    Tensor<T> t({idx.size(), 1, n_mels, frames});
    for (std::size_t b = 0; b < idx.size(); ++b) {
      const auto e = example(idx[b]);
      std::transform(e.begin(), e.end(), t.ptr() + b * record(), [](float v) { return static_cast<T>(v); });
    }
    return t;
  }

  std::vector<int> labels(std::span<const std::size_t> idx) const {
    std::vector<int> out;
    for (auto i : idx) out.push_back(y[i]);
    return out;
  }

  Dataset subset(std::span<const std::size_t> idx) const {
    Dataset d{n_mels, frames, {}, {}};
    for (auto i : idx) d.add(example(i), y[i]);
    return d;
  }
};

// ---------------------------------------------------------------- training

struct TrainConfig {
  std::size_t batch_size = 80;
  std::size_t epochs = 20;
  std::size_t patience = 5;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  bool allow_any_grid = false;  // lift the batch/patience grid restriction

  static TrainConfig crnn() { return {80, 20, 5, 1e-3, 0, false}; }
  static TrainConfig resblstm() { return {128, 15, 2, 1e-3, 0, false}; }

  static TrainConfig for_model(ModelKind k) { return k == ModelKind::kCRNN ? crnn() : resblstm(); }

  void validate() const {
    adi::detail::require(batch_size >= 1 && patience >= 1, ErrorCode::kInvalidArgument,
                         "batch size and patience must be >= 1");
    adi::detail::require(learning_rate > 0.0, ErrorCode::kInvalidArgument, "learning rate must be positive");
    if (allow_any_grid) return;
    const std::set<std::size_t> batches{32, 40, 80, 128}, patiences{2, 5};
    if (!batches.contains(batch_size)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "batch size " + std::to_string(batch_size) + " not in {32, 40, 80, 128}");
    }
    if (!patiences.contains(patience)) {
      throw Error(ErrorCode::kInvalidArgument, "patience " + std::to_string(patience) + " not in {2, 5}");
    }
  }
};

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_accuracy = 0.0;  // on the fly, training mode
  double val_accuracy = 0.0;
};

struct TrainResult {
  std::vector<EpochStats> history;
  std::size_t best_epoch = 0;  // 0 when no epoch ran
  double best_val_accuracy = 0.0;
  bool stopped_early = false;
};

// Softmax probabilities for every example, eval mode, row-major [N x C].
template <typename T>
std::vector<float> predict(Model<T>& model, const Dataset& data, std::size_t batch = 64) {
  std::vector<float> out;
  out.reserve(data.size() * model.spec().n_classes);
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += batch) {
    idx.clear();
    for (std::size_t i = start; i < std::min(data.size(), start + batch); ++i) idx.push_back(i);
    const Tensor<T> p = model.probabilities(data.batch<T>(idx));
    for (T v : p.data) out.push_back(static_cast<float>(v));
  }
  return out;
}

inline std::vector<int> argmax_rows(std::span<const float> probs, std::size_t classes) {
  std::vector<int> out;
  for (std::size_t i = 0; i + classes <= probs.size(); i += classes) {
    out.push_back(static_cast<int>(std::max_element(probs.begin() + static_cast<long>(i),
                                                    probs.begin() + static_cast<long>(i + classes)) -
                                   (probs.begin() + static_cast<long>(i))));
  }
  return out;
}

template <typename T>
double accuracy(Model<T>& model, const Dataset& data) {
  if (data.empty()) return 0.0;
  const auto pred = argmax_rows(predict(model, data), model.spec().n_classes);
  std::size_t ok = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) ok += pred[i] == data.y[i];
  return static_cast<double>(ok) / static_cast<double>(data.size());
}

using EpochCallback = std::function<void(const EpochStats&)>;

// Mini-batch Adam with seeded shuffling. Stops once validation accuracy has
// not improved for `patience` epochs and restores the best-validation weights.
template <typename T>
TrainResult train(Model<T>& model, const Dataset& train_set, const Dataset& val_set, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {}) {
  cfg.validate();
  adi::detail::require(!train_set.empty() && !val_set.empty(), ErrorCode::kInvalidArgument,
                       "training and validation sets must be nonempty");
  const std::size_t classes = model.spec().n_classes;
  for (const Dataset* d : {&train_set, &val_set}) {
    adi::detail::require(d->n_mels == model.spec().n_mels && d->frames == model.spec().frames,
                         ErrorCode::kShapeMismatch, "dataset shape differs from the model input");
    for (int y : d->y) {
      adi::detail::require(y >= 0 && static_cast<std::size_t>(y) < classes, ErrorCode::kInvalidArgument,
                           "label outside the model's classes");
    }
  }
  const std::set<int> distinct(train_set.y.begin(), train_set.y.end());
  adi::detail::require(distinct.size() >= 2, ErrorCode::kInvalidArgument, "training data has a single class");

  TrainResult result;
  if (cfg.epochs == 0) return result;

  model.reseed(cfg.seed);
  std::mt19937_64 rng(cfg.seed ^ 0x5DEECE66DULL);
  auto params = model.named_params();
  auto buffers = model.named_buffers();
  Adam<T> opt(params, AdamConfig{cfg.learning_rate});
  std::vector<Buffer<T>> best;

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t since_best = 0;
  bool have_best = false;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::span<const std::size_t> idx(order.data() + start,
                                             std::min(cfg.batch_size, order.size() - start));
      const auto labels = train_set.labels(idx);
      model.zero_grad();
      const Tensor<T> logits = model.forward(train_set.batch<T>(idx), Mode::kTrain);
      const auto lr = softmax_cross_entropy(logits, labels);
      if (!std::isfinite(lr.loss)) throw Error(ErrorCode::kNumerical, "loss diverged at epoch " + std::to_string(epoch));
      model.backward(lr.grad);
      opt.step();
      loss_sum += lr.loss * static_cast<double>(idx.size());
      correct += lr.correct;
    }
    EpochStats st;
    st.epoch = epoch;
    st.train_loss = loss_sum / static_cast<double>(order.size());
    st.train_accuracy = static_cast<double>(correct) / static_cast<double>(order.size());
    st.val_accuracy = accuracy(model, val_set);
    result.history.push_back(st);
    if (on_epoch) on_epoch(st);

    if (!have_best || st.val_accuracy > result.best_val_accuracy) {
      have_best = true;
      result.best_val_accuracy = st.val_accuracy;
      result.best_epoch = epoch;
      since_best = 0;
      best.clear();
      for (auto& [n, p] : params) best.push_back(p->value.data);
      for (auto& [n, p] : buffers) best.push_back(p->value.data);
    } else if (++since_best >= cfg.patience) {
      result.stopped_early = epoch < cfg.epochs;
      break;
    }
  }
  std::size_t k = 0;
  for (auto& [n, p] : params) p->value.data = best[k++];
  for (auto& [n, p] : buffers) p->value.data = best[k++];
  return result;
}

}  // namespace adi::nn
