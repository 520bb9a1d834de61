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

#include <Eigen/Core>
#include <Eigen/StdVector>

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "adi/error.hpp"

namespace adi::nn {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << ']';
  return os.str();
}

// Buffers handed to Eigen are allocated with a fixed alignment. Eigen picks
// reduction and GEMV code paths from the runtime pointer alignment, so plain
// malloc'd storage would make results differ between otherwise identical runs.
template <typename T>
using Buffer = std::vector<T, Eigen::aligned_allocator<T>>;

// Dense row-major tensor. Gradients live in Param, not here.
template <typename T>
struct Tensor {
  Shape shape;
  Buffer<T> data;

  Tensor() = default;
  explicit Tensor(Shape s, T fill = T(0)) : shape(std::move(s)), data(numel(shape), fill) {}
  Tensor(Shape s, const std::vector<T>& values) : shape(std::move(s)), data(values.begin(), values.end()) {
    adi::detail::require(data.size() == numel(shape), ErrorCode::kShapeMismatch,
                         "tensor data does not match shape " + shape_str(shape));
  }

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t dim(std::size_t i) const { return shape.at(i); }
  T* ptr() { return data.data(); }
  const T* ptr() const { return data.data(); }
  T& operator[](std::size_t i) { return data[i]; }
  const T& operator[](std::size_t i) const { return data[i]; }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }

  Tensor reshaped(Shape s) const {
    adi::detail::require(numel(s) == data.size(), ErrorCode::kShapeMismatch,
                         "cannot reshape " + shape_str(shape) + " to " + shape_str(s));
    Tensor out;
    out.shape = std::move(s);
    out.data = data;
    return out;
  }

  bool all_finite() const {
    for (const T& v : data) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }
};

template <typename T>
struct Param {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  Param() = default;
  Param(std::string n, Shape s) : name(std::move(n)), value(s), grad(s) {}
  void zero_grad() { grad.fill(T(0)); }
};

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<Mat<T>>;
template <typename T>
using CMatMap = Eigen::Map<const Mat<T>>;
template <typename T>
using StridedMap = Eigen::Map<Mat<T>, 0, Eigen::OuterStride<>>;
template <typename T>
using CStridedMap = Eigen::Map<const Mat<T>, 0, Eigen::OuterStride<>>;

inline void require_shape(bool ok, const std::string& layer, const Shape& got, const std::string& want) {
  if (!ok) {
    throw Error(ErrorCode::kShapeMismatch, layer + ": got input " + shape_str(got) + ", expected " + want);
  }
}

enum class Mode { kTrain, kEval };

template <typename T>
void uniform_init(Tensor<T>& t, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-bound, bound);
  for (auto& v : t.data) v = static_cast<T>(u(rng));
}

}  // namespace adi::nn
