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
#include <span>
#include <vector>

#include "adi/nn/tensor.hpp"

namespace adi::nn {

inline constexpr double kProbFloor = 1e-12;

// Row-wise softmax with max subtraction.
template <typename T>
Tensor<T> softmax(const Tensor<T>& logits) {
  require_shape(logits.rank() == 2, "softmax", logits.shape, "[B x C]");
  const std::size_t b = logits.dim(0), c = logits.dim(1);
  Tensor<T> p(logits.shape);
  for (std::size_t i = 0; i < b; ++i) {
    const T* z = logits.ptr() + i * c;
    T* out = p.ptr() + i * c;
    const T mx = *std::max_element(z, z + c);
    T sum = 0;
    for (std::size_t j = 0; j < c; ++j) sum += (out[j] = std::exp(z[j] - mx));
    for (std::size_t j = 0; j < c; ++j) out[j] /= sum;
  }
  return p;
}

// loss = -sum_c y_c log(max(p_c, 1e-12)) for a single probability vector.
inline double cross_entropy(std::span<const double> y_true, std::span<const double> y_pred) {
  if (y_true.size() != y_pred.size()) {
    throw Error(ErrorCode::kShapeMismatch, "cross_entropy: target and prediction lengths differ");
  }
  double loss = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (y_true[i] != 0.0) loss -= y_true[i] * std::log(std::clamp(y_pred[i], kProbFloor, 1.0));
  }
  return loss;
}

inline double cross_entropy(std::size_t label, std::span<const double> y_pred) {
  if (label >= y_pred.size()) throw Error(ErrorCode::kShapeMismatch, "cross_entropy: label out of range");
  return -std::log(std::clamp(y_pred[label], kProbFloor, 1.0));
}

template <typename T>
struct LossResult {
  double loss = 0.0;     // mean over the batch
  Tensor<T> probs;       // [B x C]
  Tensor<T> grad;        // d(mean loss)/d(logits) = (p - y) / B
  std::size_t correct = 0;
};

template <typename T>
LossResult<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const int> labels) {
  require_shape(logits.rank() == 2 && logits.dim(0) == labels.size(), "softmax_cross_entropy", logits.shape,
                "[" + std::to_string(labels.size()) + " x C]");
  const std::size_t b = logits.dim(0), c = logits.dim(1);
  LossResult<T> r;
  r.probs = softmax(logits);
  r.grad = r.probs;
  for (std::size_t i = 0; i < b; ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= c) {
      throw Error(ErrorCode::kInvalidArgument, "label " + std::to_string(y) + " outside [0, " + std::to_string(c) + ")");
    }
    const T* p = r.probs.ptr() + i * c;
    r.loss -= std::log(std::clamp(static_cast<double>(p[y]), kProbFloor, 1.0));
    if (static_cast<std::size_t>(std::max_element(p, p + c) - p) == static_cast<std::size_t>(y)) ++r.correct;
    r.grad[i * c + static_cast<std::size_t>(y)] -= T(1);
  }
  for (auto& g : r.grad.data) g /= static_cast<T>(b);
  r.loss /= static_cast<double>(b);
  return r;
}

}  // namespace adi::nn
