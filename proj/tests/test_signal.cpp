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

#include <cstring>
#include <filesystem>
#include <fstream>

#include "adi/signal.hpp"
#include "test_util.hpp"

namespace adi::signal {
namespace {

std::vector<unsigned char> make_wav(std::uint16_t format, std::uint16_t channels, std::uint32_t rate,
                                    std::uint16_t bits, const std::vector<unsigned char>& payload) {
  std::vector<unsigned char> out = {'R', 'I', 'F', 'F'};
  detail::put_u32(out, static_cast<std::uint32_t>(36 + payload.size()));
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  detail::put_u32(out, 16);
  detail::put_u16(out, format);
  detail::put_u16(out, channels);
  detail::put_u32(out, rate);
  detail::put_u32(out, rate * channels * bits / 8);
  detail::put_u16(out, static_cast<std::uint16_t>(channels * bits / 8));
  detail::put_u16(out, bits);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  detail::put_u32(out, static_cast<std::uint32_t>(payload.size()));
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

std::vector<unsigned char> pcm16(const std::vector<std::int16_t>& v) {
  std::vector<unsigned char> out;
  for (auto s : v) detail::put_u16(out, static_cast<std::uint16_t>(s));
  return out;
}

TEST(LoadWav, OneSecondMono16k) {
  const auto bytes = make_wav(1, 1, 16000, 16, pcm16(std::vector<std::int16_t>(16000, 100)));
  const auto clip = decode_wav(bytes, "x");
  EXPECT_EQ(clip.size(), 16000u);
  EXPECT_EQ(clip.sample_rate(), 16000);
}

TEST(LoadWav, StereoOppositeChannelsAverageToZero) {
  std::vector<std::int16_t> v;
  for (int i = 0; i < 100; ++i) {
    const auto x = static_cast<std::int16_t>(i * 37 - 1500);
    v.push_back(x);
    v.push_back(static_cast<std::int16_t>(-x));
  }
  const auto clip = decode_wav(make_wav(1, 2, 8000, 16, pcm16(v)), "st");
  ASSERT_EQ(clip.size(), 100u);
  for (float s : clip.samples()) EXPECT_EQ(s, 0.0f);
}

TEST(LoadWav, Int16Scaling) {
  const auto clip = decode_wav(make_wav(1, 1, 16000, 16, pcm16({32767, -32768})), "s");
  EXPECT_FLOAT_EQ(clip.samples()[0], static_cast<float>(32767.0 / 32768.0));
  EXPECT_FLOAT_EQ(clip.samples()[1], -1.0f);
}

TEST(LoadWav, Float32) {
  std::vector<unsigned char> payload;
  for (float f : {0.25f, -0.5f}) {
    std::uint32_t raw;
    std::memcpy(&raw, &f, 4);
    detail::put_u32(payload, raw);
  }
  const auto clip = decode_wav(make_wav(3, 1, 22050, 32, payload), "f");
  EXPECT_EQ(clip.sample_rate(), 22050);
  EXPECT_FLOAT_EQ(clip.samples()[0], 0.25f);
  EXPECT_FLOAT_EQ(clip.samples()[1], -0.5f);
}

TEST(LoadWav, DistinctErrors) {
  auto code_of = [](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::kState;
  };
  EXPECT_EQ(code_of([] { load_wav("/nonexistent/file.wav"); }), ErrorCode::kIoError);
  EXPECT_EQ(code_of([] { decode_wav(make_wav(1, 1, 16000, 24, pcm16({1, 2, 3})), "x"); }),
            ErrorCode::kUnsupportedFormat);
  EXPECT_EQ(code_of([] { decode_wav(make_wav(1, 1, 16000, 16, {}), "x"); }), ErrorCode::kEmptyAudio);
  const std::vector<unsigned char> junk = {'n', 'o', 'p', 'e'};
  EXPECT_EQ(code_of([&] { decode_wav(junk, "x"); }), ErrorCode::kMalformedFile);
  std::vector<unsigned char> nan_payload;
  const float nan = std::numeric_limits<float>::quiet_NaN();
  std::uint32_t raw;
  std::memcpy(&raw, &nan, 4);
  detail::put_u32(nan_payload, raw);
  EXPECT_EQ(code_of([&] { decode_wav(make_wav(3, 1, 16000, 32, nan_payload), "x"); }),
            ErrorCode::kInvalidSample);
}

TEST(AudioClip, RejectsNonFiniteAndOutOfRange) {
  EXPECT_THROW(AudioClip({0.0f, std::numeric_limits<float>::infinity()}, 16000, "x"), Error);
  EXPECT_THROW(AudioClip({1.5f}, 16000, "x"), Error);
  EXPECT_THROW(AudioClip({0.1f}, 16000, "x", TimeSpan{0.5, 0.5}), Error);
}

TEST(WavRoundTrip, WriteThenRead) {
  const auto clip = testing::sine(300.0, 0.1);
  const auto path = std::filesystem::temp_directory_path() / "adi_roundtrip.wav";
  write_wav(path, clip);
  const auto back = load_wav(path);
  ASSERT_EQ(back.size(), clip.size());
  for (std::size_t i = 0; i < clip.size(); ++i) {
    EXPECT_NEAR(back.samples()[i], clip.samples()[i], 1.0 / 32768.0);
  }
  std::filesystem::remove(path);
}

TEST(Resample, SameRateIsIdentity) {
  const auto clip = testing::sine(440.0, 0.2);
  const auto out = resample(clip, 16000);
  ASSERT_EQ(out.size(), clip.size());
  for (std::size_t i = 0; i < clip.size(); ++i) EXPECT_EQ(out.samples()[i], clip.samples()[i]);
}

TEST(Resample, LengthFormula) {
  const auto clip = testing::sine(440.0, 1.0, 48000);
  const auto out = resample(clip, 16000);
  EXPECT_NEAR(static_cast<double>(out.size()), 16000.0, 1.0);
  EXPECT_EQ(out.sample_rate(), 16000);
}

TEST(Resample, DownsampledToneKeepsDominantBin) {
  const auto clip = testing::sine(440.0, 1.0, 48000);
  const auto out = resample(clip, 16000);
  // 4000-point DFT at 16 kHz has 4 Hz bins: 440 Hz -> bin 110.
  const std::size_t n = 4000;
  const auto bin = testing::dominant_bin(out.samples().subspan(4000, n), n);
  EXPECT_NEAR(static_cast<double>(bin), 110.0, 1.0);
}

TEST(Resample, RoundTripPreservesRms) {
  for (double f : {300.0, 1000.0, 3000.0}) {
    const auto clip = testing::sine(f, 0.5, 16000);
    const auto up = resample(clip, 44100);
    const auto back = resample(up, 16000);
    ASSERT_EQ(back.size(), clip.size());
    EXPECT_NEAR(back.rms() / clip.rms(), 1.0, 0.05) << f;
  }
}

TEST(Resample, RejectsZeroTarget) {
  EXPECT_THROW(resample(testing::sine(100.0, 0.1), 0), Error);
}

}  // namespace
}  // namespace adi::signal
