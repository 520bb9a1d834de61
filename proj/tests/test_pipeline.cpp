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

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "adi/pipeline.hpp"
#include "oracles/f1.hpp"

namespace {

using namespace adi;
using namespace adi::pipeline;
namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("adi_pipeline_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------- manifest

TEST(Manifest, ParsesAndResolvesRelativePaths) {
  std::istringstream in("a.wav\tEGY\ttrain\r\n/abs/b.wav\tGLF\ttest\n\n");
  const auto m = Manifest::parse(in, "/data");
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m.entries[0].path, fs::path("/data/a.wav"));
  EXPECT_EQ(m.entries[0].split, Split::kTrain);
  EXPECT_EQ(m.entries[1].path, fs::path("/abs/b.wav"));
  EXPECT_EQ(m.entries[1].dialect, "GLF");
  EXPECT_EQ(m.entries[1].split, Split::kTest);
  EXPECT_EQ(m.labels(), (std::vector<std::string>{"EGY", "GLF"}));
}

TEST(Manifest, RejectsMalformedLines) {
  for (const char* text : {"a.wav\tEGY\n", "a.wav\tEGY\tdev\n", "\tEGY\ttrain\n", "a\tb\tc\td\n"}) {
    std::istringstream in(text);
    EXPECT_THROW(Manifest::parse(in), Error) << text;
  }
}

TEST(Manifest, EmptyManifestFailsValidation) {
  std::istringstream in("");
  const auto m = Manifest::parse(in);
  try {
    m.validate(false);
    FAIL() << "expected a validation error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidArgument);
    EXPECT_NE(std::string(e.what()).find("manifest validation"), std::string::npos);
  }
  EXPECT_THROW(run_pipeline(m, scratch("empty"), RunConfig{}), Error);
}

TEST(Manifest, ValidationChecks) {
  auto make = [](const std::string& text) {
    std::istringstream in(text);
    return Manifest::parse(in);
  };
  EXPECT_NO_THROW(make("a\tX\ttrain\nb\tY\ttrain\nc\tX\ttest\n").validate(false));
  EXPECT_THROW(make("a\tX\ttrain\nb\tY\ttrain\n").validate(false), Error);             // no test split
  EXPECT_THROW(make("a\tX\ttrain\nc\tX\ttest\n").validate(false), Error);              // one dialect
  EXPECT_THROW(make("a\tX\ttrain\nb\tY\ttrain\nc\tZ\ttest\n").validate(false), Error);  // unseen dialect
  EXPECT_THROW(make("d/a\tX\ttrain\ne/a\tY\ttrain\nc\tX\ttest\n").validate(false), Error);  // duplicate id
  EXPECT_THROW(make("/nonexistent/a.wav\tX\ttrain\nb\tY\ttrain\nc\tX\ttest\n").validate(true), Error);
}

TEST(Manifest, SaveLoadRoundTrip) {
  const auto dir = scratch("manifest");
  Manifest m;
  m.entries.push_back({dir / "x.wav", "A", Split::kTrain});
  m.entries.push_back({dir / "sub" / "y.wav", "B", Split::kTest});
  m.save(dir / "m.tsv");
  EXPECT_EQ(slurp(dir / "m.tsv"), "x.wav\tA\ttrain\nsub/y.wav\tB\ttest\n");
  const auto back = Manifest::load(dir / "m.tsv");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back.entries[1].path, dir / "sub" / "y.wav");
  EXPECT_EQ(back.entries[1].id(), "y");
}

// ---------------------------------------------------------------- split

TEST(Split, StratificationArithmetic) {
  std::vector<int> y;
  for (int c = 0; c < 5; ++c) y.insert(y.end(), 20, c);
  const auto [tr, val] = split_train_val(y, 0.8, 3);
  EXPECT_EQ(tr.size(), 80u);
  EXPECT_EQ(val.size(), 20u);
  std::map<int, int> per_tr, per_val;
  for (auto i : tr) ++per_tr[y[i]];
  for (auto i : val) ++per_val[y[i]];
  for (int c = 0; c < 5; ++c) {
    EXPECT_EQ(per_tr[c], 16);
    EXPECT_EQ(per_val[c], 4);
  }
}

TEST(Split, DeterministicPerSeed) {
  std::vector<int> y;
  for (int i = 0; i < 60; ++i) y.push_back(i % 3);
  EXPECT_EQ(split_train_val(y, 0.8, 11), split_train_val(y, 0.8, 11));
  EXPECT_NE(split_train_val(y, 0.8, 11).second, split_train_val(y, 0.8, 12).second);
}

TEST(Split, Guards) {
  const std::vector<int> y{0, 0, 1, 1};
  EXPECT_THROW(split_train_val(y, 1.0, 1), Error);
  EXPECT_THROW(split_train_val(y, 0.0, 1), Error);
  EXPECT_THROW(split_train_val(std::vector<int>{0, 0, 1}, 0.8, 1), Error);
}

TEST(Split, PartitionPropertyOnRandomLabels) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::uniform_int_distribution<int> classes(2, 6), per(2, 30);
    std::vector<int> y;
    const int c = classes(rng);
    for (int k = 0; k < c; ++k) y.insert(y.end(), static_cast<std::size_t>(per(rng)), k);
    std::shuffle(y.begin(), y.end(), rng);
    const auto [tr, val] = split_train_val(y, 0.8, rng());
    std::set<std::size_t> all(tr.begin(), tr.end());
    for (auto i : val) EXPECT_TRUE(all.insert(i).second) << "index in both splits";
    EXPECT_EQ(all.size(), y.size());
    for (int k = 0; k < c; ++k) {
      const auto in = [&](const std::vector<std::size_t>& s) {
        return std::count_if(s.begin(), s.end(), [&](std::size_t i) { return y[i] == k; });
      };
      EXPECT_GE(in(tr), 1);
      EXPECT_GE(in(val), 1);
    }
  }
}

// ---------------------------------------------------------------- metrics

TEST(Metrics, PerfectPredictions) {
  const std::vector<int> y{0, 1, 2, 2, 1};
  const auto r = compute_metrics(y, y, 3);
  EXPECT_DOUBLE_EQ(r.accuracy, 1.0);
  EXPECT_DOUBLE_EQ(r.f1_macro, 1.0);
  EXPECT_DOUBLE_EQ(r.f1_weighted, 1.0);
}

TEST(Metrics, AllPredictedOneClass) {
  const std::vector<int> truth{0, 0, 1, 1}, pred{0, 0, 0, 0};
  const auto r = compute_metrics(truth, pred, 2);
  EXPECT_DOUBLE_EQ(r.accuracy, 0.5);
  EXPECT_NEAR(r.f1_macro, 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(r.per_class[0].f1, 2.0 / 3.0, 1e-12);
  EXPECT_EQ(r.per_class[1].f1, 0.0);
}

TEST(Metrics, AbsentClassCountsAsZeroInMacro) {
  // Class 2 never occurs in truth or predictions.
  const std::vector<int> y{0, 1, 0, 1};
  const auto r = compute_metrics(y, y, 3);
  EXPECT_NEAR(r.f1_macro, 2.0 / 3.0, 1e-12);
  EXPECT_DOUBLE_EQ(r.f1_weighted, 1.0);
}

TEST(Metrics, LabelOutsideSetRejected) {
  const std::vector<int> truth{0, 3}, pred{0, 1};
  EXPECT_THROW(compute_metrics(truth, pred, 3), Error);
  EXPECT_THROW(compute_metrics(std::vector<int>{0}, std::vector<int>{0, 1}, 3), Error);
  EXPECT_THROW(compute_metrics(std::vector<int>{}, std::vector<int>{}, 3), Error);
}

TEST(Metrics, InvariantsOnRandomPredictions) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t c = 2 + rng() % 5;
    const std::size_t n = 1 + rng() % 60;
    std::vector<int> truth(n), pred(n);
    for (std::size_t i = 0; i < n; ++i) {
      truth[i] = static_cast<int>(rng() % c);
      pred[i] = rng() % 3 == 0 ? truth[i] : static_cast<int>(rng() % c);
    }
    const auto r = compute_metrics(truth, pred, c);
    std::size_t trace = 0;
    for (std::size_t k = 0; k < c; ++k) {
      const auto true_count = static_cast<std::size_t>(std::count(truth.begin(), truth.end(), static_cast<int>(k)));
      std::size_t row = 0;
      for (auto v : r.confusion[k]) row += v;
      EXPECT_EQ(row, true_count);
      EXPECT_EQ(r.per_class[k].support, true_count);
      trace += r.confusion[k][k];
    }
    EXPECT_DOUBLE_EQ(r.accuracy, static_cast<double>(trace) / static_cast<double>(n));
    const auto o = oracle::f1_from_counts(r.confusion);
    EXPECT_NEAR(r.f1_weighted, o.weighted, 1e-12);
    EXPECT_NEAR(r.f1_macro, o.macro, 1e-12);
    EXPECT_GE(r.f1_macro, 0.0);
    EXPECT_LE(r.f1_weighted, 1.0 + 1e-12);
  }
}

TEST(Metrics, JsonCarriesConfusionAndPerClass) {
  const std::vector<int> truth{0, 0, 1}, pred{0, 1, 1};
  const auto j = to_json(compute_metrics(truth, pred, 2), {"A", "B"});
  EXPECT_EQ(j["confusion"][0][1], 1);
  EXPECT_EQ(j["per_class"][1]["label"], "B");
  EXPECT_EQ(j["total"], 3);
}

// ---------------------------------------------------------------- voting

TEST(Vote, MajorityWins) {
  const std::vector<float> p{0.6f, 0.4f, 0.0f, 0.1f, 0.8f, 0.1f, 0.2f, 0.7f, 0.1f};
  EXPECT_EQ(vote(p, 3), 1);
}

TEST(Vote, TieBrokenByMeanProbability) {
  // One vote each for classes 0 and 1; class 1 has the higher mean.
  const std::vector<float> p{0.51f, 0.49f, 0.05f, 0.95f};
  EXPECT_EQ(vote(p, 2), 1);
  // Same votes, mean favors class 0.
  const std::vector<float> q{0.9f, 0.1f, 0.45f, 0.55f};
  EXPECT_EQ(vote(q, 2), 0);
}

TEST(Vote, TieOnlyAmongTopVotedClasses) {
  // Class 2 has the highest mean probability but no vote majority.
  const std::vector<float> p{0.5f, 0.0f, 0.5f, 0.5f, 0.0f, 0.5f, 0.0f, 0.4f, 0.6f};
  EXPECT_EQ(vote(p, 3), 0);
  EXPECT_THROW(vote(std::vector<float>{0.5f}, 2), Error);
}

// ---------------------------------------------------------------- helpers

TEST(Helpers, CoveredDurationMergesOverlaps) {
  std::vector<mining::PatternInstance> v{
      {"A", "u1", 0.0, 1.0, {}}, {"A", "u1", 0.5, 1.5, {}}, {"A", "u1", 2.0, 2.5, {}}, {"A", "u2", 0.0, 0.25, {}}};
  EXPECT_NEAR(covered_duration(v), 1.5 + 0.5 + 0.25, 1e-12);
  EXPECT_EQ(covered_duration({}), 0.0);
}

TEST(Helpers, SeedStreamsDiffer) {
  std::set<std::uint64_t> s;
  for (auto st : {SeedStream::kSplit, SeedStream::kInit, SeedStream::kTrain, SeedStream::kCrops}) {
    s.insert(derive_seed(1, st));
    s.insert(derive_seed(2, st));
  }
  EXPECT_EQ(s.size(), 8u);
  EXPECT_EQ(derive_seed(9, SeedStream::kInit), derive_seed(9, SeedStream::kInit));
}

TEST(Helpers, TestModeParsing) {
  EXPECT_EQ(parse_test_mode("patterns"), TestMode::kPatterns);
  EXPECT_EQ(parse_test_mode("random-crops"), TestMode::kRandomCrops);
  EXPECT_THROW(parse_test_mode("crops"), Error);
}

Utterance fake_utterance(const std::string& id, double seconds, Split split) {
  Utterance u;
  u.id = id;
  u.dialect = "A";
  u.split = split;
  u.clip = signal::AudioClip(std::vector<float>(static_cast<std::size_t>(seconds * 16000), 0.0f), 16000, id);
  return u;
}

TEST(Helpers, RandomCropsWithinRangeAndSeeded) {
  std::vector<Utterance> utts;
  utts.push_back(fake_utterance("long", 3.0, Split::kTest));
  utts.push_back(fake_utterance("short", 0.4, Split::kTest));
  utts.push_back(fake_utterance("train", 3.0, Split::kTrain));
  RunConfig cfg;
  cfg.crops_per_utterance = 50;
  const auto a = random_crops(utts, cfg);
  ASSERT_EQ(a.size(), 100u);
  for (const auto& c : a) {
    const double total = c.source_id == "long" ? 3.0 : 0.4;
    EXPECT_GE(c.start_s, 0.0);
    EXPECT_LE(c.end_s, total + 1e-9);
    EXPECT_GE(c.duration(), std::min(0.25, total) - 1e-9);
    EXPECT_LE(c.duration(), 1.3 + 1e-9);
    EXPECT_NE(c.source_id, "train");
  }
  const auto b = random_crops(utts, cfg);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].start_s, b[i].start_s);
  cfg.seed = 2;
  EXPECT_NE(random_crops(utts, cfg)[0].start_s, a[0].start_s);
}

TEST(Helpers, StageErrorsNameStageAndSource) {
  try {
    stage("pitch", "utt7", []() -> int { throw Error(ErrorCode::kEmptyAudio, "nothing"); });
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyAudio);
    const std::string w = e.what();
    EXPECT_NE(w.find("stage pitch [utt7]"), std::string::npos) << w;
  }
}

TEST(Helpers, ParallelForCoversEveryIndexAndRethrows) {
  std::vector<int> hit(100, 0);
  parallel_for(hit.size(), 4, [&](std::size_t i, std::size_t) { hit[i] += 1; });
  EXPECT_EQ(std::count(hit.begin(), hit.end(), 1), 100);
  EXPECT_THROW(parallel_for(10, 3, [](std::size_t i, std::size_t) {
                 if (i == 7) throw Error(ErrorCode::kInvalidArgument, "x");
               }),
               Error);
}

// ---------------------------------------------------------------- synth

TEST(Synth, GrammarPhraseFollowsSteps) {
  std::mt19937_64 rng(1);
  for (const auto& g : default_grammars()) {
    for (const auto& v : g.variants) {
      for (int rep = 0; rep < 20; ++rep) {
        const auto p = grammar_phrase(v, rng);
        ASSERT_EQ(p.size(), v.size() + 1);
        for (std::size_t i = 0; i < p.size(); ++i) {
          EXPECT_GE(p[i].level, 0);
          EXPECT_LT(p[i].level, static_cast<int>(kSynthLevels));
          if (i) EXPECT_EQ(p[i].level - p[i - 1].level, v[i - 1]);
        }
      }
    }
  }
}

TEST(Synth, PlanVisitsEveryLevelAndKeepsFillersShort) {
  std::mt19937_64 rng(2);
  const auto g = default_grammars()[2];
  for (int rep = 0; rep < 30; ++rep) {
    const std::size_t marked = 1 + static_cast<std::size_t>(rep % 3);
    const auto plan = utterance_plan(g, rng, marked);
    std::set<int> levels;
    std::size_t long_phrases = 0;
    for (const auto& p : plan) {
      for (const auto& s : p) levels.insert(s.level);
      if (p.size() > 4) ++long_phrases;
      EXPECT_GE(p.size(), 2u);
    }
    EXPECT_EQ(levels.size(), kSynthLevels);
    EXPECT_EQ(long_phrases, marked);  // only marked phrases have >= 5 steps
  }
}

TEST(Synth, UtteranceSnrAndRange) {
  SynthConfig cfg;
  std::mt19937_64 rng(4);
  const auto clip = synth_utterance(default_grammars()[0], rng, cfg, "x");
  const auto blocks = static_cast<double>(cfg.marked_phrases);
  EXPECT_GT(clip.duration_s(), 2.0 * blocks);
  EXPECT_LT(clip.duration_s(), 6.0 * blocks);
  float peak = 0.0f;
  for (float s : clip.samples()) peak = std::max(peak, std::abs(s));
  EXPECT_LE(peak, 0.9f + 1e-6f);
  EXPECT_GT(clip.rms(), 0.01);
}

TEST(Synth, MarkedPhraseSurvivesPitchAndContours) {
  SynthConfig cfg;
  std::size_t found = 0, total = 0;
  for (const auto& g : default_grammars()) {
    std::mt19937_64 rng(21);
    for (int u = 0; u < 6; ++u) {
      const auto clip = synth_utterance(g, rng, cfg, "x");
      const auto contours = contour::approximate_contours(pitch::extract_f0(clip));
      bool hit = false;
      for (const auto& c : contours) {
        for (const auto& v : g.variants) {
          // Any 5-step window of the grammar string counts.
          for (std::size_t s = 0; s + 5 <= v.size(); ++s) {
            hit = hit || mining::contains(c.symbols, mining::Sequence(v.begin() + static_cast<long>(s),
                                                                      v.begin() + static_cast<long>(s + 5)));
          }
        }
      }
      found += hit;
      ++total;
    }
  }
  EXPECT_GE(static_cast<double>(found) / static_cast<double>(total), 0.8);
}

TEST(Synth, CorpusLayoutAndDeterminism) {
  const auto dir = scratch("synth");
  SynthConfig cfg;
  cfg.utterances_per_dialect = 3;
  cfg.test_per_dialect = 1;
  const auto m = generate_corpus(dir / "a", cfg);
  ASSERT_EQ(m.size(), 9u);
  EXPECT_EQ(m.indices(Split::kTest).size(), 3u);
  EXPECT_EQ(m.labels(), (std::vector<std::string>{"alternating", "falling", "rising"}));
  EXPECT_NO_THROW(Manifest::load(dir / "a" / "manifest.tsv").validate());
  generate_corpus(dir / "b", cfg);
  EXPECT_EQ(slurp(dir / "a" / "rising_002.wav"), slurp(dir / "b" / "rising_002.wav"));
  EXPECT_THROW(generate_corpus(dir / "c", SynthConfig{2, 2}), Error);
}

// ---------------------------------------------------------------- end to end

RunConfig tiny_run() {
  RunConfig cfg;
  nn::ModelSpec s = nn::ModelSpec::resblstm(3);
  s.conv_channels = {4, 8};
  s.recurrent_hidden = 8;
  cfg.model_spec = s;
  cfg.frames = 16;
  cfg.train = {32, 2, 2, 1e-3, 0, false};
  return cfg;
}

class TinyRun : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = new fs::path(scratch("run"));
    SynthConfig sc;
    sc.utterances_per_dialect = 10;
    sc.test_per_dialect = 3;
    manifest_ = new Manifest(generate_corpus(*root_ / "corpus", sc));
    result_ = new RunResult(run_pipeline(*manifest_, *root_ / "r1", tiny_run()));
  }
  static void TearDownTestSuite() {
    delete result_;
    delete manifest_;
    delete root_;
  }
  static fs::path* root_;
  static Manifest* manifest_;
  static RunResult* result_;
};

fs::path* TinyRun::root_ = nullptr;
Manifest* TinyRun::manifest_ = nullptr;
RunResult* TinyRun::result_ = nullptr;

TEST_F(TinyRun, PersistsEveryArtifact) {
  const auto out = *root_ / "r1";
  for (const char* f : {"contours.tsv", "labels.json", "model.iadi", "report.json", "instances_train.tsv",
                        "instances_val.tsv", "instances_test.tsv", "features_train.imel", "features_val.imel",
                        "features_test.imel", "dictionaries/rising.json", "dictionaries/falling.json",
                        "dictionaries/alternating.json", "pitch/rising_000.tsv"}) {
    EXPECT_TRUE(fs::exists(out / f)) << f;
  }
  EXPECT_FALSE(fs::is_empty(out / "segments" / "test"));
  const auto ck = nn::load_checkpoint(out / "model.iadi");
  EXPECT_EQ(ck.labels, manifest_->labels());
  const auto a = features::read_archive(out / "features_test.imel");
  EXPECT_EQ(a.size(), read_instances(out / "instances_test.tsv").size());
}

TEST_F(TinyRun, TestPatternsComeFromTrainingDictionariesOnly) {
  const auto& prov = result_->report["provenance"];
  std::set<std::string> test_ids;
  for (auto i : manifest_->indices(Split::kTest)) test_ids.insert(manifest_->entries[i].id());
  bool saw_test_locate = false;
  for (const auto& ev : prov) {
    if (ev["stage"] == "mine") {
      EXPECT_EQ(ev["split"], "train");
      for (const auto& id : ev["utterances"]) EXPECT_FALSE(test_ids.contains(id.get<std::string>())) << id;
    }
    if (ev["stage"] == "locate" && ev["split"] == "test") {
      saw_test_locate = true;
      EXPECT_EQ(ev["dictionary_split"], "train");
    }
  }
  EXPECT_TRUE(saw_test_locate);
}

TEST_F(TinyRun, InstancesMapToValidAudioSpans) {
  std::map<std::string, double> duration;
  for (const auto& e : manifest_->entries) duration[e.id()] = signal::load_wav(e.path).duration_s();
  const auto& spans = result_->report["instances"]["spans"];
  ASSERT_FALSE(spans.empty());
  for (const auto& s : spans) {
    const auto src = s["source"].get<std::string>();
    ASSERT_TRUE(duration.contains(src)) << src;
    EXPECT_GE(s["start_s"].get<double>(), 0.0);
    EXPECT_LT(s["start_s"].get<double>(), s["end_s"].get<double>());
    EXPECT_LE(s["end_s"].get<double>(), duration[src] + 1.0 / 16000);
  }
}

TEST_F(TinyRun, ReportedWeightedF1MatchesConfusion) {
  for (const char* level : {"segment", "utterance"}) {
    const auto& m = result_->report["metrics"][level];
    const auto conf = m["confusion"].get<std::vector<std::vector<std::size_t>>>();
    const auto o = oracle::f1_from_counts(conf);
    EXPECT_NEAR(m["f1_weighted"].get<double>(), o.weighted, 1e-12) << level;
    EXPECT_NEAR(m["f1_macro"].get<double>(), o.macro, 1e-12) << level;
  }
  EXPECT_EQ(result_->report["metrics"]["utterance"]["total"], 9);
}

TEST_F(TinyRun, RerunIsIdentical) {
  const auto again = run_pipeline(*manifest_, *root_ / "r2", tiny_run());
  EXPECT_EQ(slurp(*root_ / "r1" / "report.json"), slurp(*root_ / "r2" / "report.json"));
  EXPECT_EQ(slurp(*root_ / "r1" / "model.iadi"), slurp(*root_ / "r2" / "model.iadi"));
}

TEST_F(TinyRun, RandomCropModeEvaluatesEveryTestUtterance) {
  auto cfg = tiny_run();
  cfg.test_mode = TestMode::kRandomCrops;
  cfg.crops_per_utterance = 3;
  const auto r = run_pipeline(*manifest_, *root_ / "crops", cfg);
  EXPECT_EQ(r.report["instances"]["counts"]["test"], 9 * 3);
  EXPECT_EQ(r.evaluation.utterance_ids.size(), 9u);
  for (const auto& s : r.report["instances"]["spans"]) {
    if (s["split"] == "test") EXPECT_EQ(s["kind"], "crop");
  }
}

TEST_F(TinyRun, StageFailureNamesSource) {
  const auto dir = *root_ / "broken";
  fs::create_directories(dir);
  Manifest m = *manifest_;
  {
    std::ofstream bad(dir / "rising_001.wav", std::ios::binary);
    bad << "not a wav";
  }
  m.entries[1].path = dir / "rising_001.wav";
  try {
    run_pipeline(m, dir / "out", tiny_run());
    FAIL() << "expected a stage error";
  } catch (const Error& e) {
    const std::string w = e.what();
    EXPECT_NE(w.find("stage load [rising_001]"), std::string::npos) << w;
  }
}

}  // namespace
