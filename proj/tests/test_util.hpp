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

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "adi/signal.hpp"

namespace adi::testing {

inline signal::AudioClip sine(double freq, double seconds, int sr = 16000, double amp = 0.5,
                              const std::string& id = "sine") {
  const auto n = static_cast<std::size_t>(std::lround(seconds * sr));
  std::vector<float> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = static_cast<float>(amp * std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(i) / sr));
  }
  return signal::AudioClip(std::move(x), sr, id);
}

inline signal::AudioClip sawtooth(double freq, double seconds, int sr = 16000, double amp = 0.5) {
  const auto n = static_cast<std::size_t>(std::lround(seconds * sr));
  std::vector<float> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double phase = std::fmod(freq * static_cast<double>(i) / sr, 1.0);
    x[i] = static_cast<float>(amp * (2.0 * phase - 1.0));
  }
  return signal::AudioClip(std::move(x), sr, "saw");
}

inline signal::AudioClip silence(double seconds, int sr = 16000) {
  return signal::AudioClip(std::vector<float>(static_cast<std::size_t>(std::lround(seconds * sr)), 0.0f), sr,
                           "silence");
}

// Naive DFT magnitude peak bin (test-only).
inline std::size_t dominant_bin(std::span<const float> x, std::size_t n) {
  std::size_t best = 0;
  double best_mag = -1.0;
  for (std::size_t k = 1; k < n / 2; ++k) {
    double re = 0.0, im = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      const double a = 2.0 * std::numbers::pi * static_cast<double>(k * t) / static_cast<double>(n);
      re += x[t] * std::cos(a);
      im -= x[t] * std::sin(a);
    }
    const double mag = re * re + im * im;
    if (mag > best_mag) {
      best_mag = mag;
      best = k;
    }
  }
  return best;
}

}  // namespace adi::testing
