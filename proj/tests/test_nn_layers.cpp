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

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "adi/nn.hpp"
#include "oracles/finite_difference.hpp"

namespace {

using namespace adi;
using namespace adi::nn;
using adi::oracle::check_layer;
using adi::oracle::random_tensor;

constexpr double kTol = 1e-4;

void expect_grad_ok(Layer<double>& layer, const Tensor<double>& x, std::uint64_t seed,
                    const std::function<void()>& prepare = {}) {
  const auto r = check_layer(layer, x, seed, prepare);
  EXPECT_GT(r.checked, 0u);
  EXPECT_LT(r.max_rel_error, kTol) << layer.kind() << " " << shape_str(x.shape) << ": " << r.worst;
}

TEST(GradCheck, Linear) {
  std::mt19937_64 rng(1);
  for (auto [b, in, out] : {std::tuple{1, 3, 2}, {4, 7, 5}, {3, 16, 9}}) {
    Linear<double> l(in, out);
    l.init(rng);
    uniform_init(l.bias().value, 0.5, rng);
    expect_grad_ok(l, random_tensor({std::size_t(b), std::size_t(in)}, rng), rng());
  }
}

TEST(GradCheck, Conv2d) {
  std::mt19937_64 rng(2);
  const std::vector<std::pair<ConvGeometry, Shape>> cases = {
      {{1, 2, 3, 3, 1, 1, 1, 1}, {2, 1, 5, 6}},
      {{3, 4, 3, 3, 2, 2, 1, 1}, {2, 3, 7, 8}},
      {{2, 3, 1, 1, 2, 2, 0, 0}, {3, 2, 6, 5}},
      {{2, 2, 3, 2, 1, 2, 0, 1}, {1, 2, 6, 7}},
  };
  for (const auto& [g, shape] : cases) {
    Conv2d<double> c(g);
    c.init(rng);
    uniform_init(c.bias().value, 0.5, rng);
    expect_grad_ok(c, random_tensor(shape, rng), rng());
  }
}

TEST(GradCheck, BatchNorm) {
  std::mt19937_64 rng(3);
  for (const Shape& s : {Shape{2, 1, 3, 3}, Shape{4, 3, 2, 5}, Shape{3, 2, 4, 4}}) {
    BatchNorm2d<double> bn(s[1]);
    uniform_init(bn.gamma().value, 1.5, rng);
    uniform_init(bn.beta().value, 0.5, rng);
    expect_grad_ok(bn, random_tensor(s, rng, 2.0), rng());
  }
}

TEST(GradCheck, Activations) {
  std::mt19937_64 rng(4);
  for (const Shape& s : {Shape{2, 3}, Shape{2, 2, 3, 4}, Shape{5, 7}}) {
    ELU<double> elu;
    ReLU<double> relu;
    expect_grad_ok(elu, random_tensor(s, rng), rng());
    expect_grad_ok(relu, random_tensor(s, rng), rng());
  }
}

TEST(GradCheck, MaxPool) {
  std::mt19937_64 rng(5);
  const std::vector<std::pair<PoolGeometry, Shape>> cases = {
      {{3, 3, 2, 2, 1, 1, 1, 1}, {2, 2, 7, 6}},
      {{2, 2, 2, 1, 0, 0, 0, 1}, {1, 3, 8, 5}},
      {{2, 2, 2, 2}, {3, 1, 4, 6}},
  };
  for (const auto& [g, s] : cases) {
    MaxPool2d<double> p(g);
    expect_grad_ok(p, random_tensor(s, rng), rng());
  }
}

TEST(GradCheck, DropoutWithPinnedMask) {
  std::mt19937_64 rng(6);
  for (const Shape& s : {Shape{2, 5}, Shape{3, 2, 2, 2}, Shape{1, 9}}) {
    Dropout<double> d(0.4);
    expect_grad_ok(d, random_tensor(s, rng), rng(), [&] { d.reseed(77); });
  }
}

TEST(GradCheck, ToSequence) {
  std::mt19937_64 rng(7);
  for (const Shape& s : {Shape{1, 2, 3, 4}, Shape{2, 3, 2, 5}, Shape{3, 1, 4, 2}}) {
    ToSequence<double> t;
    expect_grad_ok(t, random_tensor(s, rng), rng());
  }
}

TEST(GradCheck, GRU) {
  std::mt19937_64 rng(8);
  for (auto [b, t, in, h] : {std::tuple{1, 1, 2, 3}, {2, 4, 3, 5}, {3, 6, 4, 2}}) {
    GRU<double> g(in, h);
    g.init(rng);
    expect_grad_ok(g, random_tensor({std::size_t(b), std::size_t(t), std::size_t(in)}, rng), rng());
  }
}

TEST(GradCheck, LSTM) {
  std::mt19937_64 rng(9);
  for (auto [b, t, in, h, rev] : {std::tuple{1, 1, 2, 3, false}, {2, 5, 3, 4, false}, {3, 4, 2, 3, true}}) {
    LSTM<double> l(in, h, rev);
    l.init(rng);
    expect_grad_ok(l, random_tensor({std::size_t(b), std::size_t(t), std::size_t(in)}, rng), rng());
  }
}

TEST(GradCheck, BiLSTM) {
  std::mt19937_64 rng(10);
  for (auto [b, t, in, h] : {std::tuple{1, 2, 2, 2}, {2, 5, 3, 4}, {3, 3, 4, 3}}) {
    BiLSTM<double> l(in, h);
    l.init(rng);
    expect_grad_ok(l, random_tensor({std::size_t(b), std::size_t(t), std::size_t(in)}, rng), rng());
  }
}

TEST(GradCheck, ResidualBlock) {
  std::mt19937_64 rng(11);
  for (auto [in, out, stride, shape] : {std::tuple{2, 2, 1, Shape{2, 2, 4, 5}}, {1, 3, 2, Shape{2, 1, 6, 5}},
                                        {2, 3, 1, Shape{3, 2, 3, 4}}}) {
    ResidualBlock<double> r(in, out, stride);
    r.init(rng);
    for (auto* p : r.params()) {
      if (p->name.find("beta") != std::string::npos || p->name.find("bias") != std::string::npos) {
        uniform_init(p->value, 0.5, rng);
      }
    }
    expect_grad_ok(r, random_tensor(shape, rng), rng());
  }
}

TEST(GradCheck, SoftmaxCrossEntropy) {
  std::mt19937_64 rng(12);
  for (auto [b, c] : {std::pair{1, 2}, {4, 5}, {3, 7}}) {
    auto logits = random_tensor({std::size_t(b), std::size_t(c)}, rng, 3.0);
    std::vector<int> labels;
    for (int i = 0; i < b; ++i) labels.push_back(static_cast<int>(rng() % c));
    const auto res = softmax_cross_entropy(logits, labels);
    const double h = 1e-6;
    double worst = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
      const double keep = logits[i];
      logits[i] = keep + h;
      const double lp = softmax_cross_entropy(logits, labels).loss;
      logits[i] = keep - h;
      const double lm = softmax_cross_entropy(logits, labels).loss;
      logits[i] = keep;
      worst = std::max(worst, adi::oracle::rel_error(res.grad[i], (lp - lm) / (2 * h)));
    }
    EXPECT_LT(worst, kTol) << b << "x" << c;
  }
}

// ---------------------------------------------------------------- examples

TEST(Backward, ZeroUpstreamGivesZeroParamGrads) {
  std::mt19937_64 rng(13);
  ResidualBlock<double> r(1, 2, 2);
  r.init(rng);
  const auto x = random_tensor({2, 1, 4, 4}, rng);
  const auto y = r.forward(x, Mode::kTrain);
  for (auto* p : r.params()) p->zero_grad();
  r.backward(Tensor<double>(y.shape));
  for (auto* p : r.params()) {
    for (double g : p->grad.data) EXPECT_EQ(g, 0.0) << p->name;
  }
}

TEST(Backward, ReluBlocksNegativeUnits) {
  ReLU<double> relu;
  const Tensor<double> x({1, 4}, {-2.0, 3.0, -0.5, 1.0});
  relu.forward(x, Mode::kTrain);
  const auto dx = relu.backward(Tensor<double>({1, 4}, {1.0, 1.0, 1.0, 1.0}));
  EXPECT_EQ(dx.data, (Buffer<double>{0.0, 1.0, 0.0, 1.0}));
}

TEST(Backward, WithoutForwardIsStateError) {
  Linear<float> l(2, 2);
  try {
    l.backward(Tensor<float>({1, 2}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kState);
  }
  LSTM<float> lstm(2, 2);
  lstm.forward(Tensor<float>({1, 3, 2}), Mode::kEval);
  EXPECT_THROW(lstm.backward(Tensor<float>({1, 2})), Error);
}

TEST(BatchNorm, TrainingOutputIsStandardized) {
  std::mt19937_64 rng(14);
  BatchNorm2d<double> bn(3);
  const auto x = random_tensor({5, 3, 4, 4}, rng, 7.0);
  const auto y = bn.forward(x, Mode::kTrain);
  for (std::size_t c = 0; c < 3; ++c) {
    double s = 0.0, sq = 0.0;
    for (std::size_t b = 0; b < 5; ++b) {
      for (std::size_t i = 0; i < 16; ++i) {
        const double v = y[(b * 3 + c) * 16 + i];
        s += v;
        sq += v * v;
      }
    }
    EXPECT_NEAR(s / 80.0, 0.0, 1e-3);
    EXPECT_NEAR(sq / 80.0, 1.0, 1e-3);
  }
}

TEST(ResidualBlock, ZeroWeightsPassShortcut) {
  std::mt19937_64 rng(15);
  ResidualBlock<double> r(3, 3, 1);
  for (auto* p : r.params()) p->value.fill(0.0);
  auto x = random_tensor({2, 3, 4, 5}, rng);
  for (auto& v : x.data) v = std::abs(v);
  EXPECT_FALSE(r.has_projection());
  EXPECT_EQ(r.forward(x, Mode::kTrain).data, x.data);
}

TEST(Layers, ConvAndPoolShapes) {
  Conv2d<float> c(1, 32, 3, 2, 1);
  const auto y = c.forward(Tensor<float>({1, 1, 128, 64}), Mode::kEval);
  EXPECT_EQ(y.shape, (Shape{1, 32, 64, 32}));
  MaxPool2d<float> p({3, 3, 2, 2, 1, 1, 1, 1});
  EXPECT_EQ(p.forward(y, Mode::kEval).shape, (Shape{1, 32, 32, 16}));
  MaxPool2d<float> fp({2, 2, 2, 1, 0, 0, 0, 1});
  EXPECT_EQ(fp.forward(Tensor<float>({1, 4, 32, 16}), Mode::kEval).shape, (Shape{1, 4, 16, 16}));
  EXPECT_THROW(c.forward(Tensor<float>({1, 2, 8, 8}), Mode::kEval), Error);
}

TEST(Layers, ToSequenceIndexing) {
  Tensor<float> x({1, 2, 3, 4});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<float>(i);
  ToSequence<float> s;
  const auto y = s.forward(x, Mode::kEval);
  ASSERT_EQ(y.shape, (Shape{1, 4, 6}));
  // y[t][c*F + f] = x[c][f][t]
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t f = 0; f < 3; ++f) {
      for (std::size_t t = 0; t < 4; ++t) EXPECT_EQ(y[t * 6 + c * 3 + f], x[(c * 3 + f) * 4 + t]);
    }
  }
}

TEST(Layers, DropoutIdentityInEval) {
  Dropout<float> d(0.5, 3);
  const Tensor<float> x({2, 3}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(d.forward(x, Mode::kEval).data, x.data);
  const auto y = d.forward(x, Mode::kTrain);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_TRUE(y[i] == 0.0f || y[i] == 2.0f * x[i]);
}

// ---------------------------------------------------------------- loss

TEST(Softmax, ExtremeLogitsNormalize) {
  const Tensor<double> z({3, 3}, {1000.0, -1000.0, 0.0, -800.0, -800.0, -800.0, 1e-300, 700.0, 710.0});
  const auto p = softmax(z);
  for (std::size_t i = 0; i < 3; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < 3; ++j) {
      EXPECT_TRUE(std::isfinite(p[i * 3 + j]));
      s += p[i * 3 + j];
    }
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
}

TEST(CrossEntropy, ClosedForms) {
  const std::vector<double> onehot{0, 1, 0}, uniform(5, 0.2);
  EXPECT_EQ(cross_entropy(onehot, onehot), 0.0);
  EXPECT_NEAR(cross_entropy(2, uniform), std::log(5.0), 1e-12);
  EXPECT_NEAR(cross_entropy(0, std::vector<double>{1e-12, 1.0 - 1e-12}), 27.631021115928547, 1e-9);
  EXPECT_NEAR(cross_entropy(0, std::vector<double>{0.0, 1.0}), -std::log(1e-12), 1e-9);
  EXPECT_THROW(cross_entropy(onehot, uniform), Error);
}

TEST(CrossEntropy, LogitGradientIsPMinusY) {
  const Tensor<double> z({1, 3}, {0.5, -1.0, 2.0});
  const auto r = softmax_cross_entropy(z, std::vector<int>{1});
  EXPECT_NEAR(r.grad[0], r.probs[0], 1e-15);
  EXPECT_NEAR(r.grad[1], r.probs[1] - 1.0, 1e-15);
  EXPECT_NEAR(r.grad[2], r.probs[2], 1e-15);
  EXPECT_THROW(softmax_cross_entropy(z, std::vector<int>{3}), Error);
}

// ---------------------------------------------------------------- Adam

TEST(Adam, ZeroGradientLeavesParameters) {
  Param<double> p("w", {3});
  p.value.data = {1.0, -2.0, 0.5};
  Adam<double> opt({{"w", &p}});
  for (int i = 0; i < 5; ++i) opt.step();
  EXPECT_EQ(p.value.data, (Buffer<double>{1.0, -2.0, 0.5}));
}

TEST(Adam, FirstStepMagnitudeIsLr) {
  for (double g : {1e-4, 0.3, -7.0, 250.0}) {
    Param<double> p("w", {1});
    p.value[0] = 2.0;
    p.grad[0] = g;
    Adam<double> opt({{"w", &p}});
    opt.step();
    EXPECT_NEAR(std::abs(p.value[0] - 2.0), 1e-3, 1e-7) << g;
  }
}

TEST(Adam, QuadraticMatchesRecursionAndDecreases) {
  Param<double> p("w", {1});
  p.value[0] = 1.0;
  Adam<double> opt({{"w", &p}});
  double w = 1.0, m = 0.0, v = 0.0, prev = 1.0;
  for (int t = 1; t <= 100; ++t) {
    const double g = 2.0 * w;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    w -= 1e-3 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
    p.grad[0] = 2.0 * p.value[0];
    opt.step();
    EXPECT_NEAR(p.value[0], w, 1e-12);
    EXPECT_LT(std::abs(p.value[0]), prev);
    prev = std::abs(p.value[0]);
  }
}

TEST(Adam, NonFiniteGradientAborts) {
  Param<double> p("w", {2});
  p.grad[1] = std::nan("");
  Adam<double> opt({{"layer.w", &p}});
  try {
    opt.step();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNumerical);
    EXPECT_NE(std::string(e.what()).find("layer.w"), std::string::npos);
  }
}

// ---------------------------------------------------------------- embeddings

TEST(CompareEmbeddings, Examples) {
  const std::vector<float> a{0, 0}, b{3, 4}, c{0.5f, -1.0f};
  EXPECT_TRUE(compare_embeddings(c, c, 0.0));
  EXPECT_FALSE(compare_embeddings(a, c, 0.0));
  EXPECT_TRUE(compare_embeddings(a, b, 5.0));
  EXPECT_FALSE(compare_embeddings(a, b, 4.999));
  EXPECT_THROW(compare_embeddings(a, std::vector<float>{1, 2, 3}, 1.0), Error);
  EXPECT_THROW(compare_embeddings(a, b, -1.0), Error);
}

}  // namespace
