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

#include <optional>
#include <string>
#include <vector>

#include "adi/nn/layers.hpp"

namespace adi::nn {

// relu( BN(conv3x3(relu(BN(conv3x3/stride(x))))) + shortcut(x) )
// The shortcut is the identity unless stride or channel count changes, in
// which case it is a strided 1x1 conv followed by batch norm.
template <typename T>
class ResidualBlock final : public Layer<T> {
 public:
  ResidualBlock(std::size_t in, std::size_t out, std::size_t stride)
      : conv_a_(in, out, 3, stride, 1),
        bn_a_(out),
        conv_b_(out, out, 3, 1, 1),
        bn_b_(out),
        in_(in),
        out_(out),
        stride_(stride) {
    if (in != out || stride != 1) {
      proj_.emplace(in, out, 1, stride, 0);
      proj_bn_.emplace(out);
    }
    prefix(conv_a_, "conv_a.");
    prefix(bn_a_, "bn_a.");
    prefix(conv_b_, "conv_b.");
    prefix(bn_b_, "bn_b.");
    if (proj_) {
      prefix(*proj_, "proj.");
      prefix(*proj_bn_, "proj_bn.");
    }
  }

  std::string kind() const override { return "residual"; }
  bool has_projection() const { return proj_.has_value(); }
  std::size_t stride() const { return stride_; }

  void init(std::mt19937_64& rng) {
    conv_a_.init(rng);
    conv_b_.init(rng);
    if (proj_) proj_->init(rng);
  }

  Tensor<T> forward(const Tensor<T>& x, Mode mode) override {
    require_shape(x.rank() == 4 && x.dim(1) == in_, "residual", x.shape,
                  "[B x " + std::to_string(in_) + " x H x W]");
    Tensor<T> m = conv_a_.forward(x, mode);
    m = bn_a_.forward(m, mode);
    m = relu_a_.forward(m, mode);
    m = conv_b_.forward(m, mode);
    m = bn_b_.forward(m, mode);
    if (proj_) {
      const Tensor<T> s = proj_bn_->forward(proj_->forward(x, mode), mode);
      for (std::size_t i = 0; i < m.size(); ++i) m[i] += s[i];
    } else {
      for (std::size_t i = 0; i < m.size(); ++i) m[i] += x[i];
    }
    return relu_out_.forward(m, mode);
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    const Tensor<T> d = relu_out_.backward(dy);
    Tensor<T> dm = bn_b_.backward(d);
    dm = conv_b_.backward(dm);
    dm = relu_a_.backward(dm);
    dm = bn_a_.backward(dm);
    Tensor<T> dx = conv_a_.backward(dm);
    if (proj_) {
      const Tensor<T> ds = proj_->backward(proj_bn_->backward(d));
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += ds[i];
    } else {
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += d[i];
    }
    return dx;
  }

  std::vector<Param<T>*> params() override {
    std::vector<Param<T>*> p;
    for (Layer<T>* l : sublayers()) {
      for (auto* q : l->params()) p.push_back(q);
    }
    return p;
  }

  std::vector<Param<T>*> buffers() override {
    std::vector<Param<T>*> p;
    for (Layer<T>* l : sublayers()) {
      for (auto* q : l->buffers()) p.push_back(q);
    }
    return p;
  }

 private:
  std::vector<Layer<T>*> sublayers() {
    std::vector<Layer<T>*> v{&conv_a_, &bn_a_, &conv_b_, &bn_b_};
    if (proj_) {
      v.push_back(&*proj_);
      v.push_back(&*proj_bn_);
    }
    return v;
  }

  static void prefix(Layer<T>& l, const std::string& pre) {
    for (auto* p : l.params()) p->name = pre + p->name;
    for (auto* p : l.buffers()) p->name = pre + p->name;
  }

  Conv2d<T> conv_a_;
  BatchNorm2d<T> bn_a_;
  ReLU<T> relu_a_;
  Conv2d<T> conv_b_;
  BatchNorm2d<T> bn_b_;
  std::optional<Conv2d<T>> proj_;
  std::optional<BatchNorm2d<T>> proj_bn_;
  ReLU<T> relu_out_;
  std::size_t in_, out_, stride_;
};

}  // namespace adi::nn
