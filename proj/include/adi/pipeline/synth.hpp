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

// Synthetic pseudo-dialect corpus. Each utterance is a string of voiced
// phrases separated by pauses. Every syllable sits on one of eight pitch
// levels of the speaker; short filler phrases visit all eight levels, and each block of fillers carries one
// longer phrase follows the dialect's intonation grammar. Babble from several
// synthetic background talkers is mixed in at a fixed SNR.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "adi/pipeline/manifest.hpp"
#include "adi/signal.hpp"

namespace adi::pipeline {

struct SynthConfig {
  std::size_t utterances_per_dialect = 120;
  std::size_t test_per_dialect = 30;
  double snr_db = 20.0;
  std::size_t babble_talkers = 8;
  std::size_t marked_phrases = 3;  // per utterance, each in its own filler block
  std::uint64_t seed = 1;
  int sample_rate = signal::kCanonicalSampleRate;
};

inline constexpr std::size_t kSynthLevels = 8;

// One syllable: pitch level index and length in 256-sample frames.
struct Syllable {
  int level = 0;
  int frames = 6;
};
using Phrase = std::vector<Syllable>;

struct Grammar {
  std::string name;
  // Alternative symbol strings (level steps) of the marked phrase.
  std::vector<std::vector<int>> variants;
};

inline std::vector<Grammar> default_grammars() {
  return {
      {"rising", {{1, -1, 1, 1, 1, 1}, {-1, 1, 1, 1, 1, 1}}},
      {"falling", {{-1, 1, -1, -1, -1, -1}, {1, -1, -1, -1, -1, -1}}},
      {"alternating", {{1, -1, 1, -1, 1, -1}, {-1, 1, -1, 1, -1, 1}}},
  };
}

namespace detail {

inline constexpr int kFrame = 256;

struct Vowel {
  std::array<double, 3> formants;
};

inline constexpr std::array<Vowel, 3> kVowels{{{{730, 1090, 2440}}, {{270, 2290, 3010}}, {{300, 870, 2240}}}};

inline double vowel_gain(const Vowel& v, double f) {
  double g = 0.5;
  for (double fm : v.formants) {
    const double d = (f - fm) / 150.0;
    g += 1.0 / (1.0 + d * d);
  }
  return g;
}

// One period of a harmonic waveform, read with linear interpolation.
class WaveTable {
 public:
  static constexpr std::size_t kSize = 2048;

  WaveTable(const std::vector<double>& gains, const std::vector<double>& phases) : table_(kSize + 1, 0.0) {
    double energy = 0.0;
    for (std::size_t h = 0; h < gains.size(); ++h) {
      energy += gains[h] * gains[h] / 2.0;
      for (std::size_t i = 0; i < kSize; ++i) {
        const double ph = 2.0 * std::numbers::pi * static_cast<double>((h + 1) * i) / kSize;
        table_[i] += gains[h] * std::sin(ph + phases[h]);
      }
    }
    const double norm = energy > 0.0 ? 1.0 / std::sqrt(energy) : 0.0;  // unit RMS
    for (std::size_t i = 0; i < kSize; ++i) table_[i] *= norm;
    table_[kSize] = table_[0];
  }

  double at(double cycle) const {  // cycle in [0, 1)
    const double x = cycle * kSize;
    const auto i = static_cast<std::size_t>(x);
    const double f = x - static_cast<double>(i);
    return table_[i] + f * (table_[i + 1] - table_[i]);
  }

 private:
  std::vector<double> table_;
};

// A target speaker: level i sits at base * 2^(i * step_st / 12); one vowel
// colour for the whole utterance so that pitch carries the contrast.
class Voice {
 public:
  Voice(double base_hz, double step_st, std::size_t vowel, int sr)
      : base_(base_hz), step_(step_st), vowel_(kVowels[vowel % kVowels.size()]), sr_(sr) {}

  double level_hz(double level) const { return base_ * std::pow(2.0, level * step_ / 12.0); }

  // Renders a phrase into `out` starting at sample `pos`, growing `out` as needed.
  void render(std::vector<double>& out, std::size_t pos, const Phrase& phrase, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> jitter(-0.003, 0.003);
    std::size_t total = 0;
    for (const auto& s : phrase) total += static_cast<std::size_t>(s.frames * kFrame);
    if (out.size() < pos + total) out.resize(pos + total, 0.0);
    std::size_t t = pos;
    const double ramp = 0.01 * sr_;
    for (std::size_t si = 0; si < phrase.size(); ++si) {
      const auto& s = phrase[si];
      const double f0 = level_hz(s.level) * (1.0 + jitter(rng));
      const auto n_h = static_cast<std::size_t>(std::floor(3800.0 / f0));
      std::vector<double> gains(n_h), phases(n_h, 0.0);
      for (std::size_t h = 1; h <= n_h; ++h) {
        gains[h - 1] = vowel_gain(vowel_, static_cast<double>(h) * f0) / static_cast<double>(h);
      }
      const WaveTable table(gains, phases);
      const int len = s.frames * kFrame;
      for (int i = 0; i < len; ++i, ++t) {
        cycle_ += f0 / sr_;
        cycle_ -= std::floor(cycle_);
        // Soft onset/offset at phrase edges, a shallow dip between syllables.
        const double from_start = static_cast<double>(t - pos), to_end = static_cast<double>(pos + total - t);
        double env = std::min({1.0, from_start / ramp, to_end / ramp});
        if (si > 0 && i < ramp) env *= 0.75 + 0.25 * i / ramp;
        out[t] += env * table.at(cycle_);
      }
    }
  }

 private:
  double base_, step_;
  Vowel vowel_;
  int sr_;
  double cycle_ = 0.0;
};

inline Phrase random_phrase(std::mt19937_64& rng, std::size_t syllables) {
  std::uniform_int_distribution<int> lvl(0, static_cast<int>(kSynthLevels) - 1), len(6, 10);
  Phrase p;
  while (p.size() < syllables) {
    const int l = lvl(rng);
    if (!p.empty() && p.back().level == l) continue;
    p.push_back({l, len(rng)});
  }
  return p;
}

inline double power(const std::vector<double>& x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return x.empty() ? 0.0 : acc / static_cast<double>(x.size());
}

// One background talker: slowly drifting f0, flat harmonic spectrum with
// scrambled phases and a syllable-rate amplitude wobble. Flat spectra keep the
// summed babble from looking periodic to the pitch tracker.
inline std::vector<double> babble_talker(std::mt19937_64& rng, std::size_t n, int sr) {
  std::uniform_real_distribution<double> base(std::log(95.0), std::log(220.0)), uni(0.0, 2.0 * std::numbers::pi);
  std::normal_distribution<double> g(0.0, 1.0);
  const double log_f = base(rng), rate = 3.0 + uni(rng) / 2.0, mod_phase = uni(rng);
  const auto n_h = static_cast<std::size_t>(std::floor(3800.0 / std::exp(log_f)));
  std::vector<double> gains(n_h, 1.0), phases(n_h);
  for (auto& ph : phases) ph = uni(rng);
  const WaveTable table(gains, phases);
  std::vector<double> out(n);
  double cycle = 0.0, drift = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    drift = 0.9995 * (drift + 0.0005 * g(rng));
    cycle += std::exp(log_f + drift) / sr;
    cycle -= std::floor(cycle);
    const double env = 0.6 + 0.4 * std::sin(2.0 * std::numbers::pi * rate * static_cast<double>(t) / sr + mod_phase);
    out[t] = env * table.at(cycle);
  }
  return out;
}

}  // namespace detail

// The marked phrase for one grammar variant, placed at a random admissible
// starting level.
inline Phrase grammar_phrase(const std::vector<int>& steps, std::mt19937_64& rng) {
  int lo = 0, hi = 0, cur = 0;
  for (int s : steps) {
    cur += s;
    lo = std::min(lo, cur);
    hi = std::max(hi, cur);
  }
  std::uniform_int_distribution<int> start(-lo, static_cast<int>(kSynthLevels) - 1 - hi), len(6, 9);
  Phrase p;
  int level = start(rng);
  p.push_back({level, len(rng)});
  for (int s : steps) {
    level += s;
    p.push_back({level, len(rng)});
  }
  return p;
}

// Phrase plan of one utterance: per marked phrase, a block of fillers of 2-3
// syllables that covers all eight levels plus one random filler, with the
// marked phrase inserted at a random position inside the block.
inline std::vector<Phrase> utterance_plan(const Grammar& g, std::mt19937_64& rng, std::size_t marked = 1) {
  std::uniform_int_distribution<int> len(6, 10), chunk(2, 3);
  std::uniform_int_distribution<std::size_t> variant(0, g.variants.size() - 1);
  std::vector<Phrase> plan;
  for (std::size_t m = 0; m < marked; ++m) {
    std::vector<int> levels(kSynthLevels);
    for (std::size_t i = 0; i < kSynthLevels; ++i) levels[i] = static_cast<int>(i);
    std::shuffle(levels.begin(), levels.end(), rng);
    std::vector<Phrase> block;
    std::size_t i = 0;
    while (i < levels.size()) {
      const auto n = std::min<std::size_t>(static_cast<std::size_t>(chunk(rng)), levels.size() - i);
      Phrase p;
      for (std::size_t j = 0; j < n; ++j) p.push_back({levels[i + j], len(rng)});
      if (p.size() == 1) p.push_back({(p[0].level + 4) % static_cast<int>(kSynthLevels), len(rng)});
      block.push_back(std::move(p));
      i += n;
    }
    // One more filler so fillers dominate the duration.
    block.push_back(detail::random_phrase(rng, static_cast<std::size_t>(chunk(rng))));
    std::uniform_int_distribution<std::size_t> where(0, block.size());
    const auto at = static_cast<long>(where(rng));
    block.insert(block.begin() + at, grammar_phrase(g.variants[variant(rng)], rng));
    for (auto& p : block) plan.push_back(std::move(p));
  }
  return plan;
}

// Renders one utterance with babble at cfg.snr_db. Peak-normalized to 0.9
// when the mix would clip.
inline signal::AudioClip synth_utterance(const Grammar& g, std::mt19937_64& rng, const SynthConfig& cfg,
                                         const std::string& id) {
  const int sr = cfg.sample_rate;
  std::uniform_real_distribution<double> base(std::log(105.0), std::log(150.0)), step(2.8, 3.4), pause(0.20, 0.40);
  std::uniform_int_distribution<std::size_t> vowel(0, detail::kVowels.size() - 1);
  detail::Voice voice(std::exp(base(rng)), step(rng), vowel(rng), sr);
  const auto plan = utterance_plan(g, rng, cfg.marked_phrases);

  std::vector<double> speech;
  std::size_t pos = static_cast<std::size_t>(0.25 * sr);
  for (const auto& phrase : plan) {
    voice.render(speech, pos, phrase, rng);
    pos = speech.size() + static_cast<std::size_t>(pause(rng) * sr);
  }
  speech.resize(speech.size() + static_cast<std::size_t>(0.25 * sr), 0.0);

  std::vector<double> babble(speech.size(), 0.0);
  for (std::size_t b = 0; b < cfg.babble_talkers; ++b) {
    const auto track = detail::babble_talker(rng, speech.size(), sr);
    for (std::size_t i = 0; i < speech.size(); ++i) babble[i] += track[i];
  }
  const double ps = detail::power(speech), pb = detail::power(babble);
  const double gain = pb > 0.0 ? std::sqrt(ps / (pb * std::pow(10.0, cfg.snr_db / 10.0))) : 0.0;
  std::vector<double> mix(speech.size());
  double peak = 0.0;
  for (std::size_t i = 0; i < mix.size(); ++i) {
    mix[i] = 0.1 * (speech[i] + gain * babble[i]);
    peak = std::max(peak, std::abs(mix[i]));
  }
  const double scale = peak > 0.9 ? 0.9 / peak : 1.0;
  std::vector<float> out(mix.size());
  for (std::size_t i = 0; i < mix.size(); ++i) out[i] = static_cast<float>(mix[i] * scale);
  return signal::AudioClip(std::move(out), sr, id);
}

// Writes <dir>/<dialect>_<nnn>.wav for every utterance plus <dir>/manifest.tsv
// and returns the manifest. The last cfg.test_per_dialect utterances of each
// dialect go to the test split.
inline Manifest generate_corpus(const std::filesystem::path& dir, const SynthConfig& cfg = {},
                                const std::vector<Grammar>& grammars = default_grammars()) {
  adi::detail::require(cfg.test_per_dialect < cfg.utterances_per_dialect, ErrorCode::kInvalidArgument,
                       "synth needs at least one training utterance per dialect");
  adi::detail::require(!grammars.empty(), ErrorCode::kInvalidArgument, "synth needs at least one grammar");
  std::filesystem::create_directories(dir);
  Manifest m;
  for (std::size_t gi = 0; gi < grammars.size(); ++gi) {
    const auto& g = grammars[gi];
    std::mt19937_64 rng(cfg.seed * 0x9E3779B97F4A7C15ULL + gi + 1);
    for (std::size_t u = 0; u < cfg.utterances_per_dialect; ++u) {
      char name[64];
      std::snprintf(name, sizeof name, "%s_%03zu", g.name.c_str(), u);
      const auto clip = synth_utterance(g, rng, cfg, name);
      const auto file = dir / (std::string(name) + ".wav");
      signal::write_wav(file, clip);
      const bool test = u >= cfg.utterances_per_dialect - cfg.test_per_dialect;
      m.entries.push_back({file, g.name, test ? Split::kTest : Split::kTrain});
    }
  }
  m.save(dir / "manifest.tsv");
  return m;
}

}  // namespace adi::pipeline
