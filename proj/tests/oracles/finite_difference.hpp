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

// Central finite differences against a layer's analytic backward pass.
// The scalar probe is L(x) = sum(r * layer(x)) for a fixed random r, so the
// upstream gradient fed to backward is r itself.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "adi/nn/layers.hpp"

namespace adi::oracle {

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::string worst;  // "param[index]"
};

inline double rel_error(double analytic, double numeric, double floor = 1e-4) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

inline nn::Tensor<double> random_tensor(nn::Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  nn::Tensor<double> t(std::move(shape));
  std::normal_distribution<double> g(0.0, scale);
  for (auto& v : t.data) v = g(rng);
  return t;
}

// Checks d/dx and d/dparam for up to `samples` entries of each tensor.
// `prepare` runs before every forward (used to pin dropout masks).
inline GradCheck check_layer(nn::Layer<double>& layer, nn::Tensor<double> x, std::uint64_t seed,
                             const std::function<void()>& prepare = {}, std::size_t samples = 30,
                             double h = 1e-5) {
  std::mt19937_64 rng(seed);
  auto fwd = [&](const nn::Tensor<double>& in) {
    if (prepare) prepare();
    return layer.forward(in, nn::Mode::kTrain);
  };
  const nn::Tensor<double> y0 = fwd(x);
  const nn::Tensor<double> r = random_tensor(y0.shape, rng);
  auto probe = [&](const nn::Tensor<double>& in) {
    const auto y = fwd(in);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += r[i] * y[i];
    return s;
  };

  for (auto* p : layer.params()) p->zero_grad();
  fwd(x);
  const nn::Tensor<double> dx = layer.backward(r);

  GradCheck out;
  auto consider = [&](double a, double n, const std::string& where) {
    const double e = rel_error(a, n);
    ++out.checked;
    if (e >= out.max_rel_error) {
      out.max_rel_error = e;
      std::ostringstream os;
      os << where << " analytic=" << a << " numeric=" << n;
      out.worst = os.str();
    }
  };
  auto pick = [&](std::size_t n) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(std::min(n, samples));
    return idx;
  };

  for (auto i : pick(x.size())) {
    const double keep = x[i];
    x[i] = keep + h;
    const double lp = probe(x);
    x[i] = keep - h;
    const double lm = probe(x);
    x[i] = keep;
    consider(dx[i], (lp - lm) / (2 * h), "input[" + std::to_string(i) + "]");
  }
  for (auto* p : layer.params()) {
    const auto analytic = p->grad.data;
    for (auto i : pick(p->value.size())) {
      const double keep = p->value[i];
      p->value[i] = keep + h;
      const double lp = probe(x);
      p->value[i] = keep - h;
      const double lm = probe(x);
      p->value[i] = keep;
      consider(analytic[i], (lp - lm) / (2 * h), p->name + "[" + std::to_string(i) + "]");
    }
  }
  return out;
}

}  // namespace adi::oracle
