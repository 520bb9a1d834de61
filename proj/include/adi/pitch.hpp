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

// Normalized cross-correlation (NCCF) pitch tracker.
//
// Each frame is analysed over a correlation span of window + max_lag samples
// centered on the frame, so that lags down to sr/f_min can be scored even
// though the analysis window itself is shorter than the longest period. The
// picked lag is the first local NCCF maximum that reaches kPeakRatio of the
// global maximum, which keeps sub-harmonic lags (2T, 3T, ...) from winning on
// strongly periodic input. Voiced f0 values are median-smoothed (width 3)
// inside each voiced run.

#pragma once

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <locale>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "adi/error.hpp"
#include "adi/signal.hpp"

namespace adi::pitch {

struct PitchConfig {
  double f_min = 50.0;
  double f_max = 600.0;
  int window = 256;
  int hop = 256;
  double voicing_threshold = 0.5;
  double min_rms = 1e-4;

  void validate(int sample_rate) const {
    adi::detail::require(f_min > 0.0 && f_min < f_max && f_max < sample_rate / 2.0,
                    ErrorCode::kInvalidArgument, "pitch config requires 0 < f_min < f_max < sr/2");
    adi::detail::require(window > 0 && hop > 0, ErrorCode::kInvalidArgument,
                    "pitch window and hop must be positive");
  }
};

struct PitchFrame {
  double time_s = 0.0;  // frame center
  double f0 = 0.0;      // Hz, 0 when unvoiced
  bool voiced = false;
  double confidence = 0.0;
};

struct VoicedPoint {
  double time_s;
  double f0;
};

struct PitchTrack {
  std::vector<PitchFrame> frames;
  PitchConfig config;
  int sample_rate = signal::kCanonicalSampleRate;
  std::string source_id;

  double frame_step_s() const { return static_cast<double>(config.hop) / sample_rate; }
  double half_window_s() const { return 0.5 * config.window / sample_rate; }
  std::size_t voiced_count() const {
    return static_cast<std::size_t>(
        std::count_if(frames.begin(), frames.end(), [](const PitchFrame& f) { return f.voiced; }));
  }
};

inline constexpr double kPeakRatio = 0.9;

namespace detail {

struct LagPick {
  double lag = 0.0;
  double peak = 0.0;
};

// NCCF over lags [min_lag, max_lag] for a correlation length of `length`
// samples starting at `x`; the caller guarantees length + max_lag readable samples.
inline std::vector<double> nccf(const double* x, int length, int min_lag, int max_lag) {
  std::vector<double> out(static_cast<std::size_t>(max_lag - min_lag + 1), 0.0);
  double e0 = 0.0;
  for (int n = 0; n < length; ++n) e0 += x[n] * x[n];
  // Energy of the lagged segment, updated incrementally.
  double el = 0.0;
  for (int n = 0; n < length; ++n) el += x[n + min_lag] * x[n + min_lag];
  for (int lag = min_lag; lag <= max_lag; ++lag) {
    if (lag > min_lag) {
      el += x[lag + length - 1] * x[lag + length - 1] - x[lag - 1] * x[lag - 1];
    }
    double num = 0.0;
    const double* y = x + lag;
    for (int n = 0; n < length; ++n) num += x[n] * y[n];
    const double den = std::sqrt(e0 * std::max(el, 0.0));
    out[static_cast<std::size_t>(lag - min_lag)] = den > 1e-20 ? num / den : 0.0;
  }
  return out;
}

inline LagPick pick_lag(const std::vector<double>& r, int min_lag) {
  const std::size_t n = r.size();
  LagPick pick;
  if (n == 0) return pick;
  const double global = *std::max_element(r.begin(), r.end());
  if (global <= 0.0) return pick;
  std::size_t best = n;
  for (std::size_t i = 0; i < n; ++i) {
    const bool left_ok = i == 0 || r[i] >= r[i - 1];
    const bool right_ok = i + 1 == n || r[i] >= r[i + 1];
    if (left_ok && right_ok && r[i] >= kPeakRatio * global) {
      best = i;
      break;
    }
  }
  if (best == n) best = static_cast<std::size_t>(std::max_element(r.begin(), r.end()) - r.begin());
  double offset = 0.0;
  if (best > 0 && best + 1 < n) {
    const double a = r[best - 1], b = r[best], c = r[best + 1];
    const double denom = a - 2.0 * b + c;
    if (std::abs(denom) > 1e-12) offset = std::clamp(0.5 * (a - c) / denom, -0.5, 0.5);
  }
  pick.lag = static_cast<double>(min_lag) + static_cast<double>(best) + offset;
  pick.peak = r[best];
  return pick;
}

inline void median_smooth_runs(std::vector<PitchFrame>& frames) {
  std::size_t i = 0;
  while (i < frames.size()) {
    if (!frames[i].voiced) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < frames.size() && frames[j].voiced) ++j;
    if (j - i >= 3) {
      std::vector<double> raw;
      raw.reserve(j - i);
      for (std::size_t t = i; t < j; ++t) raw.push_back(frames[t].f0);
      for (std::size_t t = i + 1; t + 1 < j; ++t) {
        double a = raw[t - i - 1], b = raw[t - i], c = raw[t - i + 1];
        frames[t].f0 = std::max(std::min(a, b), std::min(std::max(a, b), c));
      }
    }
    i = j;
  }
}

}  // namespace detail

inline PitchTrack extract_f0(const signal::AudioClip& clip, const PitchConfig& cfg = {}) {
  signal::require_nonempty(clip);
  const int sr = clip.sample_rate();
  cfg.validate(sr);
  const auto samples = clip.samples();
  const auto n = static_cast<long>(samples.size());
  if (n < cfg.window) {
    throw Error(ErrorCode::kInvalidArgument,
                clip.source_id() + ": clip shorter than one pitch analysis window");
  }

  const int min_lag = std::max(1, static_cast<int>(std::floor(sr / cfg.f_max)));
  const int max_lag = static_cast<int>(std::ceil(sr / cfg.f_min));
  const int span = cfg.window + max_lag;
  const long n_frames = 1 + (n - cfg.window) / cfg.hop;

  PitchTrack track;
  track.config = cfg;
  track.sample_rate = sr;
  track.source_id = clip.source_id();
  track.frames.reserve(static_cast<std::size_t>(n_frames));

  std::vector<double> buf(static_cast<std::size_t>(span), 0.0);
  for (long i = 0; i < n_frames; ++i) {
    const long frame_start = i * cfg.hop;
    const long center = frame_start + cfg.window / 2;
    PitchFrame frame;
    frame.time_s = static_cast<double>(center) / sr;

    double energy = 0.0;
    for (long t = frame_start; t < frame_start + cfg.window; ++t) {
      energy += static_cast<double>(samples[static_cast<std::size_t>(t)]) * samples[static_cast<std::size_t>(t)];
    }
    const double rms = std::sqrt(energy / cfg.window);

    // Correlation span centered on the frame, shifted inward at clip edges.
    long start = center - span / 2;
    if (n >= span) start = std::clamp(start, 0L, n - span);
    for (int k = 0; k < span; ++k) {
      const long idx = start + k;
      buf[static_cast<std::size_t>(k)] =
          (idx >= 0 && idx < n) ? static_cast<double>(samples[static_cast<std::size_t>(idx)]) : 0.0;
    }

    const auto r = detail::nccf(buf.data(), cfg.window, min_lag, max_lag);
    const auto pick = detail::pick_lag(r, min_lag);
    frame.confidence = std::clamp(pick.peak, 0.0, 1.0);
    if (pick.lag > 0.0 && pick.peak >= cfg.voicing_threshold && rms >= cfg.min_rms) {
      frame.voiced = true;
      frame.f0 = std::clamp(sr / pick.lag, cfg.f_min, cfg.f_max);
    }
    track.frames.push_back(frame);
  }
  detail::median_smooth_runs(track.frames);
  return track;
}

inline std::vector<VoicedPoint> voiced_points(const PitchTrack& track) {
  std::vector<VoicedPoint> out;
  for (const auto& f : track.frames) {
    if (f.voiced) out.push_back({f.time_s, f.f0});
  }
  return out;
}

// One line per frame: time_s, f0_hz, voiced (0/1), confidence.
inline void write_track(std::ostream& os, const PitchTrack& track) {
  std::ostringstream line;
  line.imbue(std::locale::classic());
  for (const auto& f : track.frames) {
    line.str({});
    line << std::fixed << std::setprecision(4) << f.time_s << '\t' << std::setprecision(3) << f.f0
         << '\t' << (f.voiced ? 1 : 0) << '\t' << std::setprecision(4) << f.confidence << '\n';
    os << line.str();
  }
}

// Inverse of write_track. Values carry the dump's rounding.
inline PitchTrack read_track(std::istream& is, std::string source_id, const PitchConfig& cfg = {},
                             int sample_rate = signal::kCanonicalSampleRate) {
  PitchTrack track;
  track.config = cfg;
  track.sample_rate = sample_rate;
  track.source_id = std::move(source_id);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ss(line);
    ss.imbue(std::locale::classic());
    PitchFrame f;
    int voiced = 0;
    if (!(ss >> f.time_s >> f.f0 >> voiced >> f.confidence) || (voiced != 0 && voiced != 1)) {
      throw Error(ErrorCode::kMalformedFile, "pitch track " + track.source_id + " line " + std::to_string(lineno));
    }
    f.voiced = voiced == 1;
    track.frames.push_back(f);
  }
  return track;
}

}  // namespace adi::pitch
