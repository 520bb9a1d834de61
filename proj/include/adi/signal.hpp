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

// Audio ingestion: RIFF/WAVE PCM reading and writing, and band-limited
// resampling to the canonical analysis rate.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "adi/error.hpp"

namespace adi::signal {

inline constexpr int kCanonicalSampleRate = 16000;

struct TimeSpan {
  double start_s = 0.0;
  double end_s = 0.0;
  double duration() const { return end_s - start_s; }
  bool operator==(const TimeSpan&) const = default;
};

// Immutable mono clip. Construction validates every sample, so downstream
// stages never see NaN/Inf or out-of-range amplitudes.
class AudioClip {
 public:
  AudioClip() = default;

  AudioClip(std::vector<float> samples, int sample_rate, std::string source_id,
            std::optional<TimeSpan> span = std::nullopt)
      : samples_(std::move(samples)),
        sample_rate_(sample_rate),
        source_id_(std::move(source_id)),
        span_(span) {
    adi::detail::require(sample_rate_ > 0, ErrorCode::kInvalidArgument,
                    "sample rate must be positive");
    for (std::size_t i = 0; i < samples_.size(); ++i) {
      const float s = samples_[i];
      if (!std::isfinite(s) || s < -1.0f || s > 1.0f) {
        throw Error(ErrorCode::kInvalidSample,
                    source_id_ + ": sample " + std::to_string(i) + " is not a finite value in [-1,1]");
      }
    }
    if (span_) {
      adi::detail::require(span_->start_s >= 0.0 && span_->start_s < span_->end_s,
                      ErrorCode::kInvalidArgument, source_id_ + ": span must satisfy 0 <= start < end");
    }
  }

  std::span<const float> samples() const { return samples_; }
  int sample_rate() const { return sample_rate_; }
  const std::string& source_id() const { return source_id_; }
  const std::optional<TimeSpan>& span() const { return span_; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  double duration_s() const { return static_cast<double>(samples_.size()) / sample_rate_; }

  double rms() const {
    if (samples_.empty()) return 0.0;
    double acc = 0.0;
    for (float s : samples_) acc += static_cast<double>(s) * s;
    return std::sqrt(acc / static_cast<double>(samples_.size()));
  }

 private:
  std::vector<float> samples_;
  int sample_rate_ = kCanonicalSampleRate;
  std::string source_id_;
  std::optional<TimeSpan> span_;
};

// Throws kEmptyAudio when a clip cannot enter the analysis stages.
inline void require_nonempty(const AudioClip& clip) {
  if (clip.empty()) throw Error(ErrorCode::kEmptyAudio, clip.source_id() + ": clip has no samples");
}

namespace detail {

inline std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

inline void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xff));
  out.push_back(static_cast<unsigned char>(v >> 8));
}

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

}  // namespace detail

// Decodes an in-memory RIFF/WAVE image. Multichannel input is averaged to mono.
inline AudioClip decode_wav(std::span<const unsigned char> bytes, const std::string& source_id) {
  using detail::read_u16;
  using detail::read_u32;
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw Error(ErrorCode::kMalformedFile, source_id + ": not a RIFF/WAVE file");
  }

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::span<const unsigned char> data;
  bool have_data = false;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t len = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    const std::size_t avail = bytes.size() - body;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (len < 16 || avail < 16) throw Error(ErrorCode::kMalformedFile, source_id + ": short fmt chunk");
      const unsigned char* f = bytes.data() + body;
      format = read_u16(f);
      channels = read_u16(f + 2);
      rate = read_u32(f + 4);
      bits = read_u16(f + 14);
      if (format == detail::kFormatExtensible) {
        if (len < 40 || avail < 40) {
          throw Error(ErrorCode::kMalformedFile, source_id + ": short extensible fmt chunk");
        }
        format = read_u16(f + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      // Some writers leave the size field at 0xFFFFFFFF for streamed output.
      data = bytes.subspan(body, std::min<std::size_t>(len, avail));
      have_data = true;
    }
    pos = body + static_cast<std::size_t>(len) + (len & 1u);
  }

  if (!have_fmt || !have_data) {
    throw Error(ErrorCode::kMalformedFile, source_id + ": missing fmt or data chunk");
  }
  if (channels == 0 || rate == 0) {
    throw Error(ErrorCode::kMalformedFile, source_id + ": zero channels or sample rate");
  }
  const bool pcm16 = format == detail::kFormatPcm && bits == 16;
  const bool float32 = format == detail::kFormatFloat && bits == 32;
  if (!pcm16 && !float32) {
    throw Error(ErrorCode::kUnsupportedFormat,
                source_id + ": only 16-bit PCM and 32-bit float are supported (format " +
                    std::to_string(format) + ", " + std::to_string(bits) + " bits)");
  }

  const std::size_t bytes_per_sample = bits / 8;
  const std::size_t frame_bytes = bytes_per_sample * channels;
  const std::size_t n_frames = data.size() / frame_bytes;
  if (n_frames == 0) throw Error(ErrorCode::kEmptyAudio, source_id + ": no audio frames");

  std::vector<float> mono(n_frames);
  for (std::size_t i = 0; i < n_frames; ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const unsigned char* p = data.data() + i * frame_bytes + c * bytes_per_sample;
      double v;
      if (pcm16) {
        v = static_cast<std::int16_t>(read_u16(p)) / 32768.0;
      } else {
        float f;
        std::uint32_t raw = read_u32(p);
        std::memcpy(&f, &raw, sizeof f);
        if (!std::isfinite(f)) {
          throw Error(ErrorCode::kInvalidSample,
                      source_id + ": non-finite sample at frame " + std::to_string(i));
        }
        v = std::clamp(static_cast<double>(f), -1.0, 1.0);
      }
      acc += v;
    }
    mono[i] = static_cast<float>(acc / channels);
  }
  return AudioClip(std::move(mono), static_cast<int>(rate), source_id);
}

inline AudioClip load_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::kIoError, "read failed for " + path.string());
  return decode_wav(bytes, path.string());
}

// 16-bit PCM mono encoding; values are rounded and saturated.
inline std::vector<unsigned char> encode_wav_pcm16(std::span<const float> samples, int sample_rate) {
  std::vector<unsigned char> out;
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  out.reserve(44 + data_bytes);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  detail::put_u32(out, 36 + data_bytes);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  detail::put_u32(out, 16);
  detail::put_u16(out, detail::kFormatPcm);
  detail::put_u16(out, 1);
  detail::put_u32(out, static_cast<std::uint32_t>(sample_rate));
  detail::put_u32(out, static_cast<std::uint32_t>(sample_rate) * 2);
  detail::put_u16(out, 2);
  detail::put_u16(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  detail::put_u32(out, data_bytes);
  for (float s : samples) {
    const long q = std::lround(static_cast<double>(s) * 32768.0);
    const auto v = static_cast<std::int16_t>(std::clamp(q, -32768L, 32767L));
    detail::put_u16(out, static_cast<std::uint16_t>(v));
  }
  return out;
}

inline void write_wav(const std::filesystem::path& path, const AudioClip& clip) {
  const auto bytes = encode_wav_pcm16(clip.samples(), clip.sample_rate());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot create " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

namespace detail {

inline double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

// Kaiser window sampled on a uniform grid over [0, 1], linearly interpolated.
class KaiserTable {
 public:
  explicit KaiserTable(double beta, std::size_t size = 4096) : table_(size + 1) {
    const double norm = std::cyl_bessel_i(0.0, beta);
    for (std::size_t i = 0; i <= size; ++i) {
      const double x = static_cast<double>(i) / static_cast<double>(size);
      table_[i] = std::cyl_bessel_i(0.0, beta * std::sqrt(std::max(0.0, 1.0 - x * x))) / norm;
    }
  }

  double operator()(double x) const {
    const double ax = std::abs(x);
    if (ax >= 1.0) return 0.0;
    const double pos = ax * static_cast<double>(table_.size() - 1);
    const auto i = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(i);
    return table_[i] + frac * (table_[i + 1] - table_[i]);
  }

 private:
  std::vector<double> table_;
};

}  // namespace detail

// Kaiser-windowed sinc interpolation. The cutoff sits at 95% of the lower of
// the two Nyquist frequencies, with 16 zero crossings on each side.
inline AudioClip resample(const AudioClip& clip, int target_sr) {
  adi::detail::require(target_sr > 0, ErrorCode::kInvalidArgument, "target sample rate must be positive");
  if (target_sr == clip.sample_rate()) return clip;
  require_nonempty(clip);

  constexpr double kZeroCrossings = 16.0;
  constexpr double kRolloff = 0.95;
  constexpr double kBeta = 8.6;

  const auto in = clip.samples();
  const double src_sr = clip.sample_rate();
  const double ratio = target_sr / src_sr;
  const double cutoff = kRolloff * std::min(1.0, ratio);  // relative to input Nyquist
  const double half_width = kZeroCrossings / cutoff;      // in input samples
  const auto n_out = static_cast<std::size_t>(
      std::llround(static_cast<double>(in.size()) * target_sr / src_sr));
  const auto n_in = static_cast<long>(in.size());
  const detail::KaiserTable window(kBeta);

  std::vector<float> out(n_out);
  for (std::size_t n = 0; n < n_out; ++n) {
    const double t = static_cast<double>(n) * src_sr / target_sr;
    const long lo = std::max(0L, static_cast<long>(std::ceil(t - half_width)));
    const long hi = std::min(n_in - 1, static_cast<long>(std::floor(t + half_width)));
    double acc = 0.0;
    for (long k = lo; k <= hi; ++k) {
      const double d = t - static_cast<double>(k);
      acc += in[static_cast<std::size_t>(k)] * cutoff * detail::sinc(cutoff * d) *
             window(d / half_width);
    }
    out[n] = static_cast<float>(std::clamp(acc, -1.0, 1.0));
  }
  std::optional<TimeSpan> span = clip.span();
  return AudioClip(std::move(out), target_sr, clip.source_id(), span);
}

// Loads a WAV file and brings it to the canonical analysis rate.
inline AudioClip load_canonical(const std::filesystem::path& path) {
  AudioClip clip = load_wav(path);
  return resample(clip, kCanonicalSampleRate);
}

}  // namespace adi::signal
