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

// Log-mel spectrogram features: 128 mel bands, 512-sample Hann frames, hop
// 256, natural log with a 1e-10 energy floor.

#pragma once

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "adi/error.hpp"
#include "adi/signal.hpp"

namespace adi::features {

static_assert(std::endian::native == std::endian::little, "archive I/O assumes a little-endian host");

inline constexpr std::size_t kMels = 128;
inline constexpr std::size_t kFrame = 512;
inline constexpr std::size_t kHop = 256;
inline constexpr double kEnergyFloor = 1e-10;
inline constexpr std::size_t kFixedFrames = 64;

inline double log_floor() { return std::log(kEnergyFloor); }

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

struct FilterBank {
  std::size_t n_mels = 0;
  std::size_t n_bins = 0;
  std::vector<double> weights;    // n_mels x n_bins, row-major
  std::vector<double> center_hz;  // per filter

  double at(std::size_t m, std::size_t k) const { return weights[m * n_bins + k]; }
};

namespace detail {

// Integral of the unit-peak triangle (lo, mid, hi) from -inf to x.
inline double triangle_cdf(double x, double lo, double mid, double hi) {
  if (x <= lo) return 0.0;
  if (x <= mid) return (x - lo) * (x - lo) / (2.0 * (mid - lo));
  if (x <= hi) return 0.5 * (mid - lo) + ((hi - mid) * (hi - mid) - (hi - x) * (hi - x)) / (2.0 * (hi - mid));
  return 0.5 * (hi - lo);
}

}  // namespace detail

// Triangular filters with centers equally spaced on the mel scale between
// 0 Hz and Nyquist. Each weight is the triangle averaged over the FFT bin's
// frequency interval, so narrow low-frequency filters that fall between bin
// centers still get a positive weight.
inline FilterBank mel_filterbank(int sample_rate, std::size_t n_fft = kFrame, std::size_t n_mels = kMels) {
  adi::detail::require(sample_rate > 0, ErrorCode::kInvalidArgument, "sample rate must be positive");
  adi::detail::require(n_mels >= 1, ErrorCode::kInvalidArgument, "need at least one mel band");
  adi::detail::require(n_fft >= 2 && std::has_single_bit(n_fft), ErrorCode::kInvalidArgument,
                       "FFT size must be a power of two");
  if (n_mels > n_fft / 2) {
    throw Error(ErrorCode::kInvalidArgument,
                std::to_string(n_mels) + " mel bands exceed the resolution of a " + std::to_string(n_fft) +
                    "-point FFT");
  }
  FilterBank fb;
  fb.n_mels = n_mels;
  fb.n_bins = n_fft / 2 + 1;
  fb.weights.assign(fb.n_mels * fb.n_bins, 0.0);
  const double nyquist = sample_rate / 2.0;
  const double mel_max = hz_to_mel(nyquist);
  std::vector<double> edges(n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mel_max * static_cast<double>(i) / static_cast<double>(n_mels + 1));
  }
  const double bin_hz = static_cast<double>(sample_rate) / static_cast<double>(n_fft);
  for (std::size_t m = 0; m < n_mels; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    fb.center_hz.push_back(mid);
    double row_sum = 0.0;
    for (std::size_t k = 0; k < fb.n_bins; ++k) {
      const double a = (static_cast<double>(k) - 0.5) * bin_hz;
      const double b = (static_cast<double>(k) + 0.5) * bin_hz;
      const double w = (detail::triangle_cdf(b, lo, mid, hi) - detail::triangle_cdf(a, lo, mid, hi)) / bin_hz;
      fb.weights[m * fb.n_bins + k] = w;
      row_sum += w;
    }
    if (!(row_sum > 0.0)) {
      throw Error(ErrorCode::kInvalidArgument, "mel filter " + std::to_string(m) + " is empty");
    }
  }
  return fb;
}

struct MelSpectrogram {
  std::vector<float> values;  // n_mels x n_frames, row-major (band-major)
  std::size_t n_mels = kMels;
  std::size_t n_frames = 0;
  int sample_rate = signal::kCanonicalSampleRate;
  std::optional<int> label;
  bool padded_input = false;  // clip was shorter than one frame

  float at(std::size_t m, std::size_t t) const { return values[m * n_frames + t]; }
};

// Owns the FFT plan and filterbank; reuse one instance for a batch of clips.
// Not thread-safe (FFTW planning and the scratch buffers are per instance).
class LogMelExtractor {
 public:
  explicit LogMelExtractor(int sample_rate = signal::kCanonicalSampleRate)
      : sample_rate_(sample_rate), bank_(mel_filterbank(sample_rate)), window_(kFrame) {
    for (std::size_t n = 0; n < kFrame; ++n) {
      window_[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / kFrame);
    }
    in_ = static_cast<double*>(fftw_malloc(sizeof(double) * kFrame));
    out_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (kFrame / 2 + 1)));
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(kFrame), in_, out_, FFTW_ESTIMATE);
  }
  LogMelExtractor(const LogMelExtractor&) = delete;
  LogMelExtractor& operator=(const LogMelExtractor&) = delete;
  ~LogMelExtractor() {
    fftw_destroy_plan(plan_);
    fftw_free(in_);
    fftw_free(out_);
  }

  const FilterBank& filterbank() const { return bank_; }

  MelSpectrogram operator()(const signal::AudioClip& clip) {
    signal::require_nonempty(clip);
    adi::detail::require(clip.sample_rate() == sample_rate_, ErrorCode::kInvalidArgument,
                         clip.source_id() + ": sample rate differs from the extractor's");
    const auto x = clip.samples();
    MelSpectrogram spec;
    spec.sample_rate = sample_rate_;
    spec.padded_input = x.size() < kFrame;
    const std::size_t n = std::max(x.size(), kFrame);
    spec.n_frames = 1 + (n - kFrame) / kHop;
    spec.values.assign(kMels * spec.n_frames, 0.0f);
    std::vector<double> power(kFrame / 2 + 1);
    for (std::size_t t = 0; t < spec.n_frames; ++t) {
      const std::size_t off = t * kHop;
      for (std::size_t i = 0; i < kFrame; ++i) {
        const double s = off + i < x.size() ? x[off + i] : 0.0;
        in_[i] = s * window_[i];
      }
      fftw_execute(plan_);
      for (std::size_t k = 0; k < power.size(); ++k) {
        power[k] = out_[k][0] * out_[k][0] + out_[k][1] * out_[k][1];
      }
      for (std::size_t m = 0; m < kMels; ++m) {
        const double* w = bank_.weights.data() + m * bank_.n_bins;
        double e = 0.0;
        for (std::size_t k = 0; k < bank_.n_bins; ++k) e += w[k] * power[k];
        spec.values[m * spec.n_frames + t] = static_cast<float>(std::log(std::max(e, kEnergyFloor)));
      }
    }
    return spec;
  }

 private:
  int sample_rate_;
  FilterBank bank_;
  std::vector<double> window_;
  double* in_ = nullptr;
  fftw_complex* out_ = nullptr;
  fftw_plan plan_ = nullptr;
};

inline MelSpectrogram log_mel(const signal::AudioClip& clip) {
  LogMelExtractor extract(clip.sample_rate());
  return extract(clip);
}

// Right-pads with log-floor columns or center-crops to exactly `frames` columns.
inline MelSpectrogram pad_or_crop(const MelSpectrogram& spec, std::size_t frames) {
  adi::detail::require(frames >= 1, ErrorCode::kInvalidArgument, "fixed frame count must be >= 1");
  MelSpectrogram out = spec;
  out.n_frames = frames;
  out.values.assign(spec.n_mels * frames, static_cast<float>(log_floor()));
  const std::size_t copy = std::min(frames, spec.n_frames);
  const std::size_t offset = spec.n_frames > frames ? (spec.n_frames - frames) / 2 : 0;
  for (std::size_t m = 0; m < spec.n_mels; ++m) {
    std::copy_n(spec.values.begin() + static_cast<long>(m * spec.n_frames + offset), copy,
                out.values.begin() + static_cast<long>(m * frames));
  }
  return out;
}

// True when every band of column t sits at the log floor, as written by
// pad_or_crop (and by digital silence, which carries nothing either).
inline bool is_floor_column(std::span<const float> values, std::size_t frames, std::size_t t) {
  const auto floor_v = static_cast<float>(log_floor());
  for (std::size_t i = t; i < values.size(); i += frames) {
    if (values[i] != floor_v) return false;
  }
  return true;
}

// Per-band mean and standard deviation over the non-floor frames of a
// training set. apply() maps floor columns to 0, i.e. to the band mean, so
// right padding does not dominate the normalized input.
struct FeatureStats {
  std::vector<float> mean;
  std::vector<float> stddev;

  static FeatureStats compute(const std::vector<MelSpectrogram>& specs) {
    adi::detail::require(!specs.empty(), ErrorCode::kInvalidArgument, "no spectrograms for statistics");
    const std::size_t bands = specs.front().n_mels;
    std::vector<double> sum(bands, 0.0), sq(bands, 0.0);
    double count = 0.0;
    for (const auto& s : specs) {
      adi::detail::require(s.n_mels == bands, ErrorCode::kShapeMismatch, "mixed mel band counts");
      for (std::size_t t = 0; t < s.n_frames; ++t) {
        if (is_floor_column(s.values, s.n_frames, t)) continue;
        for (std::size_t m = 0; m < bands; ++m) {
          const double v = s.at(m, t);
          sum[m] += v;
          sq[m] += v * v;
        }
        count += 1.0;
      }
    }
    adi::detail::require(count > 0.0, ErrorCode::kInvalidArgument, "statistics need at least one non-padding frame");
    FeatureStats st;
    for (std::size_t m = 0; m < bands; ++m) {
      const double mu = sum[m] / count;
      const double var = std::max(0.0, sq[m] / count - mu * mu);
      st.mean.push_back(static_cast<float>(mu));
      st.stddev.push_back(static_cast<float>(std::max(std::sqrt(var), 1e-3)));
    }
    return st;
  }

  // In-place (x - mean) / std over a band-major [bands x frames] block; floor
  // columns become 0.
  void apply(std::span<float> values, std::size_t frames) const {
    adi::detail::require(values.size() == mean.size() * frames, ErrorCode::kShapeMismatch,
                         "feature block does not match statistics");
    std::vector<char> pad(frames);
    for (std::size_t t = 0; t < frames; ++t) pad[t] = is_floor_column(values, frames, t);
    for (std::size_t m = 0; m < mean.size(); ++m) {
      for (std::size_t t = 0; t < frames; ++t) {
        auto& v = values[m * frames + t];
        v = pad[t] ? 0.0f : (v - mean[m]) / stddev[m];
      }
    }
  }
};

// Binary feature archive: header {"IMEL", version, n_mels, T, count} as u32
// little-endian, then `count` records of {label u8, f32[n_mels*T]}.
struct FeatureArchive {
  std::size_t n_mels = kMels;
  std::size_t n_frames = kFixedFrames;
  std::vector<std::uint8_t> labels;
  std::vector<float> values;  // count x n_mels x n_frames

  std::size_t size() const { return labels.size(); }
  std::size_t record_size() const { return n_mels * n_frames; }

  void add(const MelSpectrogram& spec, std::uint8_t label) {
    adi::detail::require(spec.n_mels == n_mels && spec.n_frames == n_frames, ErrorCode::kShapeMismatch,
                         "spectrogram shape differs from the archive's");
    labels.push_back(label);
    values.insert(values.end(), spec.values.begin(), spec.values.end());
  }
};

inline constexpr std::uint32_t kArchiveVersion = 1;

inline void write_archive(const std::filesystem::path& path, const FeatureArchive& a) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot create " + path.string());
  auto put = [&](std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
  out.write("IMEL", 4);
  put(kArchiveVersion);
  put(static_cast<std::uint32_t>(a.n_mels));
  put(static_cast<std::uint32_t>(a.n_frames));
  put(static_cast<std::uint32_t>(a.size()));
  const std::size_t rec = a.record_size();
  for (std::size_t i = 0; i < a.size(); ++i) {
    out.write(reinterpret_cast<const char*>(&a.labels[i]), 1);
    out.write(reinterpret_cast<const char*>(a.values.data() + i * rec), static_cast<std::streamsize>(rec * 4));
  }
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

inline FeatureArchive read_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  char magic[4];
  std::uint32_t header[4];
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(header), sizeof header);
  if (!in || std::memcmp(magic, "IMEL", 4) != 0) {
    throw Error(ErrorCode::kMalformedFile, path.string() + ": not a feature archive");
  }
  if (header[0] != kArchiveVersion) {
    throw Error(ErrorCode::kUnsupportedFormat, path.string() + ": archive version " + std::to_string(header[0]));
  }
  FeatureArchive a;
  a.n_mels = header[1];
  a.n_frames = header[2];
  const std::size_t count = header[3];
  const std::size_t rec = a.record_size();
  a.labels.resize(count);
  a.values.resize(count * rec);
  for (std::size_t i = 0; i < count; ++i) {
    in.read(reinterpret_cast<char*>(&a.labels[i]), 1);
    in.read(reinterpret_cast<char*>(a.values.data() + i * rec), static_cast<std::streamsize>(rec * 4));
  }
  if (!in) throw Error(ErrorCode::kMalformedFile, path.string() + ": truncated feature archive");
  return a;
}

}  // namespace adi::features
