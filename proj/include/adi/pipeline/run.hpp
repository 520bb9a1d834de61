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

// End-to-end batch run: pitch, contours, per-dialect mining on the training
// split, instance location, cutting, log-mel features, training, evaluation.
//
// Output directory layout:
//   pitch/<id>.tsv            per-utterance f0 tracks
//   contours.tsv              every contour run of every utterance
//   dictionaries/<dialect>.json
//   instances_{train,val,test}.tsv
//   segments/<split>/*.wav    cut audio
//   features_{train,val,test}.imel   raw log-mel records, same order as the
//                                    matching instance file
//   labels.json, model.iadi, report.json

#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "adi/contour.hpp"
#include "adi/features.hpp"
#include "adi/mining.hpp"
#include "adi/nn.hpp"
#include "adi/pipeline/manifest.hpp"
#include "adi/pipeline/metrics.hpp"
#include "adi/pitch.hpp"
#include "adi/signal.hpp"
#include "json.hpp"

namespace adi::pipeline {

namespace fs = std::filesystem;
using Logger = std::function<void(const std::string&)>;

enum class TestMode { kPatterns, kRandomCrops };

inline std::string to_string(TestMode m) { return m == TestMode::kPatterns ? "patterns" : "random-crops"; }

inline TestMode parse_test_mode(const std::string& s) {
  if (s == "patterns") return TestMode::kPatterns;
  if (s == "random-crops") return TestMode::kRandomCrops;
  throw Error(ErrorCode::kInvalidArgument, "test mode must be patterns or random-crops, got '" + s + "'");
}

// Independent streams derived from the master seed (splitmix64).
enum class SeedStream : std::uint64_t { kSplit = 1, kInit = 2, kTrain = 3, kCrops = 4 };

inline std::uint64_t derive_seed(std::uint64_t master, SeedStream stream) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(stream);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

struct RunConfig {
  std::size_t k = 8;
  double gap_max_s = 0.150;
  mining::SupportThreshold min_support;  // default: max(2, ceil(1% of DB))
  std::size_t min_len = 5;
  nn::ModelKind model = nn::ModelKind::kCRNN;
  std::optional<nn::ModelSpec> model_spec;  // architecture override; classes and frames are filled in
  nn::TrainConfig train = nn::TrainConfig::crnn();
  TestMode test_mode = TestMode::kPatterns;
  std::size_t crops_per_utterance = 5;
  double crop_min_s = 0.25;
  double crop_max_s = 1.3;
  double train_fraction = 0.8;
  std::size_t frames = features::kFixedFrames;
  std::uint64_t seed = 1;

  static RunConfig for_model(nn::ModelKind kind) {
    RunConfig c;
    c.model = kind;
    c.train = nn::TrainConfig::for_model(kind);
    return c;
  }

  contour::ContourConfig contour() const {
    contour::ContourConfig c;
    c.k = k;
    c.gap_max_s = gap_max_s;
    return c;
  }

  mining::MiningConfig mining() const { return {min_support, min_len, k}; }

  nn::ModelSpec spec(std::size_t n_classes) const {
    nn::ModelSpec s = model_spec ? *model_spec
                                 : (model == nn::ModelKind::kCRNN ? nn::ModelSpec::crnn(n_classes)
                                                                  : nn::ModelSpec::resblstm(n_classes));
    s.n_classes = n_classes;
    s.frames = frames;
    s.n_mels = features::kMels;
    s.seed = derive_seed(seed, SeedStream::kInit);
    return s;
  }

  void validate() const {
    adi::detail::require(k >= 1, ErrorCode::kInvalidArgument, "k must be >= 1");
    adi::detail::require(min_len >= 1, ErrorCode::kInvalidArgument, "min_len must be >= 1");
    adi::detail::require(frames >= 1, ErrorCode::kInvalidArgument, "frames must be >= 1");
    adi::detail::require(crops_per_utterance >= 1, ErrorCode::kInvalidArgument, "need at least one crop");
    adi::detail::require(crop_min_s > 0.0 && crop_min_s <= crop_max_s, ErrorCode::kInvalidArgument,
                         "crop durations must satisfy 0 < min <= max");
    adi::detail::require(train_fraction > 0.0 && train_fraction < 1.0, ErrorCode::kInvalidArgument,
                         "train fraction must lie in (0, 1)");
    train.validate();
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["k"] = k;
    j["gap_max_s"] = gap_max_s;
    j["min_support"] = min_support.use_default ? nlohmann::json("default")
                                               : nlohmann::json({{"value", min_support.value},
                                                                 {"fractional", min_support.fractional}});
    j["min_len"] = min_len;
    j["model"] = nn::to_string(model);
    j["batch_size"] = train.batch_size;
    j["epochs"] = train.epochs;
    j["patience"] = train.patience;
    j["learning_rate"] = train.learning_rate;
    j["test_mode"] = to_string(test_mode);
    j["crops_per_utterance"] = crops_per_utterance;
    j["crop_range_s"] = {crop_min_s, crop_max_s};
    j["train_fraction"] = train_fraction;
    j["frames"] = frames;
    return j;
  }
};

// ---------------------------------------------------------------- stages

// Runs `fn`, rewriting any failure as "stage <name> [<source>]: ...".
template <typename F>
auto stage(const std::string& name, const std::string& source, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.code(), "stage " + name + " [" + source + "]: " + e.what());
  } catch (const std::exception& e) {
    throw Error(ErrorCode::kIoError, "stage " + name + " [" + source + "]: " + e.what());
  }
}

// Calls fn(i, worker) for i in [0, n) on up to hardware_concurrency threads.
// The first exception (lowest index) is rethrown after all workers join.
inline void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t, std::size_t)>& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i, 0);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i, w);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

inline std::size_t default_workers() { return std::max(1u, std::thread::hardware_concurrency()); }

struct Utterance {
  std::string id;
  std::string dialect;
  Split split = Split::kTrain;
  signal::AudioClip clip;
  pitch::PitchTrack track;
  std::vector<contour::Contour> contours;
};

inline signal::AudioClip load_audio(const ManifestEntry& e) {
  return stage("load", e.id(), [&] {
    auto clip = signal::load_canonical(e.path);
    const auto s = clip.samples();
    return signal::AudioClip(std::vector<float>(s.begin(), s.end()), clip.sample_rate(), e.id());
  });
}

inline void analyze(Utterance& u, const RunConfig& cfg) {
  u.track = stage("pitch", u.id, [&] { return pitch::extract_f0(u.clip); });
  u.contours = stage("contour", u.id, [&] { return contour::approximate_contours(u.track, cfg.contour()); });
}

// Loads and analyzes every manifest entry, in manifest order.
inline std::vector<Utterance> analyze_manifest(const Manifest& m, const RunConfig& cfg,
                                               std::size_t workers = default_workers()) {
  std::vector<Utterance> out(m.size());
  parallel_for(m.size(), workers, [&](std::size_t i, std::size_t) {
    const auto& e = m.entries[i];
    Utterance& u = out[i];
    u.id = e.id();
    u.dialect = e.dialect;
    u.split = e.split;
    u.clip = load_audio(e);
    analyze(u, cfg);
  });
  return out;
}

// One dictionary per label, mined from training-split contours only.
inline std::vector<mining::PatternDictionary> mine_dictionaries(const std::vector<Utterance>& utts,
                                                                const std::vector<std::string>& labels,
                                                                const RunConfig& cfg) {
  std::vector<mining::PatternDictionary> out;
  for (const auto& label : labels) {
    out.push_back(stage("mine", label, [&] {
      std::vector<contour::Contour> pool;
      for (const auto& u : utts) {
        if (u.split != Split::kTrain || u.dialect != label) continue;
        pool.insert(pool.end(), u.contours.begin(), u.contours.end());
      }
      return mining::build_dictionary(pool, label, cfg.mining());
    }));
  }
  return out;
}

// Training instances: each utterance against its own dialect's dictionary.
inline std::vector<mining::PatternInstance> locate_train(const std::vector<Utterance>& utts,
                                                         const std::vector<mining::PatternDictionary>& dicts) {
  std::vector<mining::PatternInstance> out;
  for (const auto& u : utts) {
    if (u.split != Split::kTrain) continue;
    const auto it = std::find_if(dicts.begin(), dicts.end(), [&](const auto& d) { return d.dialect == u.dialect; });
    if (it == dicts.end()) throw Error(ErrorCode::kInvalidArgument, "stage locate [" + u.id + "]: no dictionary");
    auto found = stage("locate", u.id, [&] { return mining::locate_instances({&*it}, u.contours, u.dialect); });
    out.insert(out.end(), found.begin(), found.end());
  }
  return out;
}

// Test instances from the union of the (training) dictionaries. Utterances
// without any instance fall back to one whole-utterance segment with an empty
// symbol string; their ids land in `fallback`.
inline std::vector<mining::PatternInstance> locate_test(const std::vector<Utterance>& utts,
                                                        const std::vector<mining::PatternDictionary>& dicts,
                                                        std::vector<std::string>* fallback = nullptr) {
  std::vector<const mining::PatternDictionary*> all;
  for (const auto& d : dicts) all.push_back(&d);
  std::vector<mining::PatternInstance> out;
  for (const auto& u : utts) {
    if (u.split != Split::kTest) continue;
    auto found = stage("locate", u.id, [&] { return mining::locate_instances(all, u.contours, u.dialect); });
    if (found.empty()) {
      found.push_back({u.dialect, u.id, 0.0, u.clip.duration_s(), {}});
      if (fallback) fallback->push_back(u.id);
    }
    out.insert(out.end(), found.begin(), found.end());
  }
  return out;
}

// Uniform random crops of every test utterance, durations ~ U[min, max]
// capped at the utterance length.
inline std::vector<mining::PatternInstance> random_crops(const std::vector<Utterance>& utts, const RunConfig& cfg) {
  std::mt19937_64 rng(derive_seed(cfg.seed, SeedStream::kCrops));
  std::uniform_real_distribution<double> dur(cfg.crop_min_s, cfg.crop_max_s), unit(0.0, 1.0);
  std::vector<mining::PatternInstance> out;
  for (const auto& u : utts) {
    if (u.split != Split::kTest) continue;
    const double total = u.clip.duration_s();
    for (std::size_t c = 0; c < cfg.crops_per_utterance; ++c) {
      const double d = std::min(dur(rng), total);
      const double start = unit(rng) * (total - d);
      out.push_back({u.dialect, u.id, start, start + d, {}});
    }
  }
  return out;
}

// Duration of the union of instance spans, summed over sources.
inline double covered_duration(std::vector<mining::PatternInstance> inst) {
  std::sort(inst.begin(), inst.end(), [](const auto& a, const auto& b) {
    return a.source_id != b.source_id ? a.source_id < b.source_id : a.start_s < b.start_s;
  });
  double total = 0.0;
  for (std::size_t i = 0; i < inst.size();) {
    double lo = inst[i].start_s, hi = inst[i].end_s;
    std::size_t j = i + 1;
    for (; j < inst.size() && inst[j].source_id == inst[i].source_id; ++j) {
      if (inst[j].start_s > hi) {
        total += hi - lo;
        lo = inst[j].start_s;
      }
      hi = std::max(hi, inst[j].end_s);
    }
    total += hi - lo;
    i = j;
  }
  return total;
}

inline int label_index(const std::vector<std::string>& labels, const std::string& label) {
  const auto it = std::find(labels.begin(), labels.end(), label);
  if (it == labels.end()) throw Error(ErrorCode::kInvalidArgument, "label " + label + " outside the model's label set");
  return static_cast<int>(it - labels.begin());
}

// Everything the cut step produces.
struct Located {
  std::vector<mining::PatternInstance> train_all;  // before the train/val split
  std::vector<mining::PatternInstance> train, val, test;
  std::vector<mining::PatternInstance> test_patterns;  // test instances that matched a pattern
  std::vector<std::string> fallback;                   // test ids with no pattern
};

// Training instances (split stratified into train/val) and test segments
// for cfg.test_mode.
inline Located locate_all(const std::vector<Utterance>& utts, const std::vector<mining::PatternDictionary>& dicts,
                          const std::vector<std::string>& labels, const RunConfig& cfg) {
  Located out;
  out.train_all = locate_train(utts, dicts);
  const auto test_pattern = locate_test(utts, dicts, &out.fallback);
  for (const auto& i : test_pattern) {
    if (!i.symbols.empty()) out.test_patterns.push_back(i);
  }
  out.test = cfg.test_mode == TestMode::kPatterns ? test_pattern : random_crops(utts, cfg);
  std::vector<int> y;
  for (const auto& i : out.train_all) y.push_back(label_index(labels, i.dialect));
  const auto [tr, val] = stage("split", "train instances", [&] {
    return split_train_val(y, cfg.train_fraction, derive_seed(cfg.seed, SeedStream::kSplit));
  });
  for (auto i : tr) out.train.push_back(out.train_all[i]);
  for (auto i : val) out.val.push_back(out.train_all[i]);
  return out;
}

struct Segments {
  std::vector<signal::AudioClip> clips;  // parallel to the instances
  features::FeatureArchive features;
};

// Cuts and featurizes instances. `clip_of` maps a source id to its audio.
inline Segments featurize(const std::vector<mining::PatternInstance>& instances,
                          const std::map<std::string, const signal::AudioClip*>& clip_of,
                          const std::vector<std::string>& labels, std::size_t frames,
                          std::size_t workers = default_workers()) {
  Segments out;
  out.clips.resize(instances.size());
  std::vector<features::MelSpectrogram> specs(instances.size());
  std::vector<std::uint8_t> y(instances.size());
  workers = std::max<std::size_t>(1, std::min(workers, instances.size()));
  // FFTW planning is not thread-safe: build one extractor per worker up front.
  std::vector<std::unique_ptr<features::LogMelExtractor>> ex;
  for (std::size_t w = 0; w < workers; ++w) ex.push_back(std::make_unique<features::LogMelExtractor>());
  parallel_for(instances.size(), workers, [&](std::size_t i, std::size_t w) {
    const auto& inst = instances[i];
    const auto it = clip_of.find(inst.source_id);
    if (it == clip_of.end()) throw Error(ErrorCode::kInvalidArgument, "stage cut [" + inst.source_id + "]: unknown source");
    out.clips[i] = stage("cut", inst.source_id, [&] { return mining::cut_segments(*it->second, {inst}).front(); });
    specs[i] = stage("featurize", inst.source_id,
                     [&] { return features::pad_or_crop((*ex[w])(out.clips[i]), frames); });
    y[i] = static_cast<std::uint8_t>(label_index(labels, inst.dialect));
  });
  out.features.n_mels = features::kMels;
  out.features.n_frames = frames;
  for (std::size_t i = 0; i < specs.size(); ++i) out.features.add(specs[i], y[i]);
  return out;
}

inline nn::Dataset to_dataset(const features::FeatureArchive& a) {
  nn::Dataset d{a.n_mels, a.n_frames, a.values, {}};
  d.y.assign(a.labels.begin(), a.labels.end());
  return d;
}

// Per-band statistics over the fixed-size records the model sees.
inline features::FeatureStats stats_of(const features::FeatureArchive& a) {
  std::vector<features::MelSpectrogram> specs(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto& s = specs[i];
    s.n_mels = a.n_mels;
    s.n_frames = a.n_frames;
    s.values.assign(a.values.begin() + static_cast<long>(i * a.record_size()),
                    a.values.begin() + static_cast<long>((i + 1) * a.record_size()));
  }
  return features::FeatureStats::compute(specs);
}

inline nn::Dataset normalized(const features::FeatureArchive& a, const features::FeatureStats& st) {
  nn::Dataset d = to_dataset(a);
  for (std::size_t i = 0; i < d.size(); ++i) {
    st.apply(std::span<float>(d.x.data() + i * d.record(), d.record()), d.frames);
  }
  return d;
}

inline features::FeatureArchive subset(const features::FeatureArchive& a, std::span<const std::size_t> idx) {
  features::FeatureArchive out;
  out.n_mels = a.n_mels;
  out.n_frames = a.n_frames;
  for (auto i : idx) {
    out.labels.push_back(a.labels[i]);
    out.values.insert(out.values.end(), a.values.begin() + static_cast<long>(i * a.record_size()),
                      a.values.begin() + static_cast<long>((i + 1) * a.record_size()));
  }
  return out;
}

// Segment-level metrics for a normalized, labelled set.
inline MetricsReport evaluate(nn::Model<float>& model, const nn::Dataset& test_set) {
  adi::detail::require(!test_set.empty(), ErrorCode::kInvalidArgument, "test set is empty");
  const auto n = model.spec().n_classes;
  for (int y : test_set.y) {
    if (y < 0 || static_cast<std::size_t>(y) >= n) {
      throw Error(ErrorCode::kInvalidArgument, "label " + std::to_string(y) + " outside the model's label set");
    }
  }
  const auto pred = nn::argmax_rows(nn::predict(model, test_set), n);
  return compute_metrics(test_set.y, pred, n);
}

struct Evaluation {
  MetricsReport segments;
  MetricsReport utterances;
  std::vector<float> probs;          // [segments x classes]
  std::vector<std::string> utterance_ids;
  std::vector<int> utterance_truth, utterance_pred;
};

// Segment metrics plus utterance-level voting. `raw` holds unnormalized
// features in the same order as `instances`.
inline Evaluation evaluate_utterances(nn::Classifier& c, const features::FeatureArchive& raw,
                                      const std::vector<mining::PatternInstance>& instances) {
  adi::detail::require(raw.size() == instances.size(), ErrorCode::kShapeMismatch,
                       "feature archive and instance list differ in length");
  const auto n = c.labels.size();
  const nn::Dataset d = normalized(raw, c.stats);
  Evaluation ev;
  ev.segments = evaluate(c.model, d);
  ev.probs = nn::predict(c.model, d);
  std::map<std::string, std::vector<std::size_t>> by_source;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    if (!by_source.contains(instances[i].source_id)) ev.utterance_ids.push_back(instances[i].source_id);
    by_source[instances[i].source_id].push_back(i);
  }
  for (const auto& id : ev.utterance_ids) {
    const auto& rows = by_source[id];
    std::vector<float> block;
    for (auto r : rows) {
      block.insert(block.end(), ev.probs.begin() + static_cast<long>(r * n), ev.probs.begin() + static_cast<long>((r + 1) * n));
    }
    ev.utterance_truth.push_back(label_index(c.labels, instances[rows.front()].dialect));
    ev.utterance_pred.push_back(vote(block, n));
  }
  ev.utterances = compute_metrics(ev.utterance_truth, ev.utterance_pred, n);
  return ev;
}

// Builds the model for cfg, computes feature stats on `train` and trains
// with the train seed stream. Epoch lines go to `log`.
inline std::pair<nn::Classifier, nn::TrainResult> train_classifier(const features::FeatureArchive& train,
                                                                   const features::FeatureArchive& val,
                                                                   const std::vector<std::string>& labels,
                                                                   const RunConfig& cfg, const Logger& log = {}) {
  const auto spec = cfg.spec(labels.size());
  nn::Classifier c{nn::build_model<float>(spec), labels, stats_of(train)};
  nn::TrainConfig tc = cfg.train;
  tc.seed = derive_seed(cfg.seed, SeedStream::kTrain);
  auto result = stage("train", nn::to_string(spec.kind), [&] {
    return nn::train(c.model, normalized(train, c.stats), normalized(val, c.stats), tc, [&](const nn::EpochStats& e) {
      if (!log) return;
      std::ostringstream os;
      os << "epoch " << e.epoch << " loss " << e.train_loss << " train acc " << e.train_accuracy << " val acc "
         << e.val_accuracy;
      log(os.str());
    });
  });
  return {std::move(c), std::move(result)};
}

// ---------------------------------------------------------------- artifacts

inline void write_text(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot create " + path.string());
  body(out);
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

inline std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  return in;
}

inline void write_pitch_tracks(const fs::path& dir, const std::vector<Utterance>& utts) {
  for (const auto& u : utts) write_text(dir / (u.id + ".tsv"), [&](std::ostream& os) { pitch::write_track(os, u.track); });
}

// Reads <dir>/<id>.tsv for every utterance.
inline void read_pitch_tracks(const fs::path& dir, std::vector<Utterance>& utts) {
  for (auto& u : utts) {
    auto in = open_in(dir / (u.id + ".tsv"));
    u.track = stage("pitch", u.id, [&] { return pitch::read_track(in, u.id); });
  }
}

inline void write_contours(const fs::path& path, const std::vector<Utterance>& utts) {
  write_text(path, [&](std::ostream& os) {
    for (const auto& u : utts) {
      for (const auto& c : u.contours) contour::write_contour(os, c);
    }
  });
}

// Attaches contours from a dump to the matching utterances (by id).
inline void attach_contours(std::vector<Utterance>& utts, const fs::path& path) {
  auto in = open_in(path);
  std::map<std::string, std::vector<contour::Contour>> by_id;
  for (auto& c : contour::read_contours(in)) by_id[c.source_id].push_back(std::move(c));
  for (auto& u : utts) u.contours = by_id[u.id];
}

inline void write_dictionaries(const fs::path& dir, const std::vector<mining::PatternDictionary>& dicts) {
  for (const auto& d : dicts) {
    write_text(dir / (d.dialect + ".json"), [&](std::ostream& os) { os << mining::to_json(d).dump(1) << '\n'; });
  }
}

inline std::vector<mining::PatternDictionary> read_dictionaries(const fs::path& dir,
                                                                const std::vector<std::string>& labels) {
  std::vector<mining::PatternDictionary> out;
  for (const auto& l : labels) {
    auto in = open_in(dir / (l + ".json"));
    nlohmann::json j;
    try {
      in >> j;
    } catch (const std::exception& e) {
      throw Error(ErrorCode::kMalformedFile, (dir / (l + ".json")).string() + ": " + e.what());
    }
    out.push_back(mining::dictionary_from_json(j));
  }
  return out;
}

inline void write_instances(const fs::path& path, const std::vector<mining::PatternInstance>& inst) {
  write_text(path, [&](std::ostream& os) { mining::write_instances(os, inst); });
}

inline std::vector<mining::PatternInstance> read_instances(const fs::path& path) {
  auto in = open_in(path);
  return mining::read_instances(in);
}

inline void write_segments(const fs::path& dir, const std::vector<signal::AudioClip>& clips) {
  fs::create_directories(dir);
  for (const auto& c : clips) signal::write_wav(dir / (c.source_id() + ".wav"), c);
}

inline void write_labels(const fs::path& path, const std::vector<std::string>& labels) {
  write_text(path, [&](std::ostream& os) { os << nlohmann::json(labels).dump() << '\n'; });
}

inline std::vector<std::string> read_labels(const fs::path& path) {
  auto in = open_in(path);
  try {
    return nlohmann::json::parse(in).get<std::vector<std::string>>();
  } catch (const std::exception& e) {
    throw Error(ErrorCode::kMalformedFile, path.string() + ": " + e.what());
  }
}

inline nlohmann::json instances_json(const std::vector<mining::PatternInstance>& inst, const std::string& split,
                                     const std::string& kind) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& i : inst) {
    a.push_back({{"split", split},
                 {"kind", i.symbols.empty() ? kind : "pattern"},
                 {"source", i.source_id},
                 {"dialect", i.dialect},
                 {"start_s", i.start_s},
                 {"end_s", i.end_s},
                 {"symbols", i.symbols}});
  }
  return a;
}

inline nlohmann::json history_json(const nn::TrainResult& r) {
  nlohmann::json h = nlohmann::json::array();
  for (const auto& e : r.history) {
    h.push_back({{"epoch", e.epoch},
                 {"train_loss", e.train_loss},
                 {"train_accuracy", e.train_accuracy},
                 {"val_accuracy", e.val_accuracy}});
  }
  return h;
}

// ---------------------------------------------------------------- driver

struct RunResult {
  nlohmann::json report;
  Evaluation evaluation;
  nn::TrainResult training;
  double pattern_duration_s = 0.0;
  double corpus_duration_s = 0.0;

  double pattern_fraction() const { return corpus_duration_s > 0 ? pattern_duration_s / corpus_duration_s : 0.0; }
};

inline RunResult run_pipeline(const Manifest& manifest, const fs::path& out_dir, const RunConfig& cfg,
                              const Logger& log = {}, std::size_t workers = default_workers()) {
  using clock = std::chrono::steady_clock;
  auto say = [&](const std::string& s) {
    if (log) log(s);
  };
  auto t0 = clock::now();
  auto lap = [&](const std::string& what) {
    const auto now = clock::now();
    std::ostringstream os;
    os.precision(3);
    os << what << " (" << std::chrono::duration<double>(now - t0).count() << " s)";
    t0 = now;
    say(os.str());
  };

  cfg.validate();
  manifest.validate();
  const auto labels = manifest.labels();
  fs::create_directories(out_dir);
  write_labels(out_dir / "labels.json", labels);

  auto utts = analyze_manifest(manifest, cfg, workers);
  write_pitch_tracks(out_dir / "pitch", utts);
  write_contours(out_dir / "contours.tsv", utts);
  lap("pitch and contours for " + std::to_string(utts.size()) + " utterances");

  const auto dicts = mine_dictionaries(utts, labels, cfg);
  write_dictionaries(out_dir / "dictionaries", dicts);
  lap("mined dictionaries");

  const auto loc = locate_all(utts, dicts, labels, cfg);
  const auto& tr_inst = loc.train;
  const auto& val_inst = loc.val;
  const auto& test_inst = loc.test;
  write_instances(out_dir / "instances_train.tsv", tr_inst);
  write_instances(out_dir / "instances_val.tsv", val_inst);
  write_instances(out_dir / "instances_test.tsv", test_inst);
  lap("located " + std::to_string(loc.train_all.size()) + " training and " + std::to_string(test_inst.size()) +
      " test segments");

  std::map<std::string, const signal::AudioClip*> clip_of;
  for (const auto& u : utts) clip_of[u.id] = &u.clip;
  const auto seg_tr = featurize(tr_inst, clip_of, labels, cfg.frames, workers);
  const auto seg_val = featurize(val_inst, clip_of, labels, cfg.frames, workers);
  const auto seg_test = featurize(test_inst, clip_of, labels, cfg.frames, workers);
  write_segments(out_dir / "segments" / "train", seg_tr.clips);
  write_segments(out_dir / "segments" / "val", seg_val.clips);
  write_segments(out_dir / "segments" / "test", seg_test.clips);
  features::write_archive(out_dir / "features_train.imel", seg_tr.features);
  features::write_archive(out_dir / "features_val.imel", seg_val.features);
  features::write_archive(out_dir / "features_test.imel", seg_test.features);
  lap("featurized");

  const auto spec = cfg.spec(labels.size());
  RunResult res;
  auto [classifier, training] = train_classifier(seg_tr.features, seg_val.features, labels, cfg, log);
  res.training = std::move(training);
  nn::save_checkpoint(out_dir / "model.iadi", classifier);
  lap("trained");

  res.evaluation = stage("evaluate", "test", [&] { return evaluate_utterances(classifier, seg_test.features, test_inst); });
  lap("evaluated");

  // Report. Audio durations only; wall-clock timings go to the log so that
  // reruns produce identical reports.
  std::vector<mining::PatternInstance> patterns = loc.train_all;
  patterns.insert(patterns.end(), loc.test_patterns.begin(), loc.test_patterns.end());
  res.pattern_duration_s = covered_duration(patterns);
  double train_dur = 0.0, test_dur = 0.0;
  for (const auto& u : utts) (u.split == Split::kTrain ? train_dur : test_dur) += u.clip.duration_s();
  res.corpus_duration_s = train_dur + test_dur;

  nlohmann::json& r = res.report;
  r["seed"] = cfg.seed;
  r["seeds"] = {{"split", derive_seed(cfg.seed, SeedStream::kSplit)},
                {"init", derive_seed(cfg.seed, SeedStream::kInit)},
                {"train", derive_seed(cfg.seed, SeedStream::kTrain)},
                {"crops", derive_seed(cfg.seed, SeedStream::kCrops)}};
  r["config"] = cfg.to_json();
  r["model"] = {{"kind", nn::to_string(spec.kind)},
                {"conv_channels", spec.conv_channels},
                {"recurrent_hidden", spec.recurrent_hidden},
                {"fc_units", spec.fc_units},
                {"dropout", spec.dropout_p},
                {"parameters", classifier.model.param_count()}};
  r["labels"] = labels;
  r["corpus"] = {{"utterances", {{"train", manifest.indices(Split::kTrain).size()},
                                 {"test", manifest.indices(Split::kTest).size()}}},
                 {"duration_s", {{"train", train_dur}, {"test", test_dur}, {"total", res.corpus_duration_s}}}};

  nlohmann::json dj = nlohmann::json::array();
  nlohmann::json prov = nlohmann::json::array();
  for (const auto& d : dicts) {
    dj.push_back({{"dialect", d.dialect}, {"db_size", d.db_size}, {"min_support", d.min_support},
                  {"patterns", d.patterns.size()}});
    std::vector<std::string> sources;
    for (const auto& u : utts) {
      if (u.split == Split::kTrain && u.dialect == d.dialect) sources.push_back(u.id);
    }
    prov.push_back({{"stage", "mine"}, {"dialect", d.dialect}, {"split", "train"}, {"utterances", sources}});
  }
  nlohmann::json dict_names = nlohmann::json::array();
  for (const auto& d : dicts) dict_names.push_back(d.dialect);
  prov.push_back({{"stage", "locate"}, {"split", "train"}, {"dictionaries", "own dialect"}, {"dictionary_split", "train"}});
  prov.push_back({{"stage", "locate"},
                  {"split", "test"},
                  {"dictionaries", dict_names},
                  {"dictionary_split", "train"},
                  {"segments", to_string(cfg.test_mode)},
                  {"fallback_utterances", loc.fallback}});
  r["dictionaries"] = dj;
  r["provenance"] = prov;

  nlohmann::json spans = instances_json(tr_inst, "train", "pattern");
  for (auto& x : instances_json(val_inst, "val", "pattern")) spans.push_back(x);
  for (auto& x : instances_json(test_inst, "test", cfg.test_mode == TestMode::kPatterns ? "fallback" : "crop")) {
    spans.push_back(x);
  }
  r["instances"] = {{"counts", {{"train", tr_inst.size()}, {"val", val_inst.size()}, {"test", test_inst.size()}}},
                    {"pattern_duration_s", res.pattern_duration_s},
                    {"pattern_duration_fraction", res.pattern_fraction()},
                    {"spans", spans}};
  r["training"] = {{"history", history_json(res.training)},
                   {"best_epoch", res.training.best_epoch},
                   {"best_val_accuracy", res.training.best_val_accuracy},
                   {"stopped_early", res.training.stopped_early}};
  r["metrics"] = {{"segment", to_json(res.evaluation.segments, labels)},
                  {"utterance", to_json(res.evaluation.utterances, labels)}};
  write_text(out_dir / "report.json", [&](std::ostream& os) { os << r.dump(2) << '\n'; });
  return res;
}

}  // namespace adi::pipeline
