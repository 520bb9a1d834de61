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

// adi-cli: command-line front end. Every step reads and writes the same layout
// under --out that `run` produces, so the steps can be chained by hand:
//
//   adi-cli synth --out corpus
//   adi-cli pitch --manifest corpus/manifest.tsv --out work
//   adi-cli contour ... ; adi-cli mine ... ; adi-cli cut ... ; adi-cli featurize ...
//   adi-cli train --out work ; adi-cli eval --out work

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "adi/pipeline.hpp"

namespace {

namespace fs = std::filesystem;
using namespace adi;
using namespace adi::pipeline;

struct Options {
  std::string manifest;
  std::string out;
  std::uint64_t seed = 1;
  std::size_t k = 8;
  std::string min_support;
  std::size_t min_len = 5;
  std::string model = "crnn";
  std::optional<std::size_t> batch, epochs, patience;
  std::string test_mode = "patterns";
  std::size_t workers = default_workers();
  bool quiet = false;

  // synth only
  std::size_t utterances = 120, test_per_dialect = 30;
  double snr_db = 20.0;
};

RunConfig config_of(const Options& o) {
  auto cfg = RunConfig::for_model(nn::parse_model_kind(o.model));
  cfg.seed = o.seed;
  cfg.k = o.k;
  cfg.min_len = o.min_len;
  if (!o.min_support.empty()) cfg.min_support = mining::SupportThreshold::parse(o.min_support);
  if (o.batch) cfg.train.batch_size = *o.batch;
  if (o.epochs) cfg.train.epochs = *o.epochs;
  if (o.patience) cfg.train.patience = *o.patience;
  cfg.test_mode = parse_test_mode(o.test_mode);
  cfg.validate();
  return cfg;
}

Logger logger_of(const Options& o) {
  if (o.quiet) return {};
  return [](const std::string& s) { std::cerr << s << '\n'; };
}

Manifest load_manifest(const Options& o) {
  auto m = Manifest::load(o.manifest);
  m.validate();
  return m;
}

// Utterance shells in manifest order, optionally with audio.
std::vector<Utterance> shells(const Manifest& m, bool with_audio, std::size_t workers) {
  std::vector<Utterance> utts(m.size());
  parallel_for(m.size(), workers, [&](std::size_t i, std::size_t) {
    const auto& e = m.entries[i];
    utts[i].id = e.id();
    utts[i].dialect = e.dialect;
    utts[i].split = e.split;
    if (with_audio) utts[i].clip = load_audio(e);
  });
  return utts;
}

std::map<std::string, const signal::AudioClip*> clip_map(const std::vector<Utterance>& utts) {
  std::map<std::string, const signal::AudioClip*> out;
  for (const auto& u : utts) out[u.id] = &u.clip;
  return out;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  write_text(path, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
}

// ------------------------------------------------------------- commands

void cmd_synth(const Options& o) {
  SynthConfig sc;
  sc.seed = o.seed;
  sc.utterances_per_dialect = o.utterances;
  sc.test_per_dialect = o.test_per_dialect;
  sc.snr_db = o.snr_db;
  const auto m = generate_corpus(o.out, sc);
  std::cout << "wrote " << m.size() << " utterances and " << (fs::path(o.out) / "manifest.tsv").string() << '\n';
}

void cmd_pitch(const Options& o) {
  const auto m = load_manifest(o);
  auto utts = shells(m, true, o.workers);
  parallel_for(utts.size(), o.workers, [&](std::size_t i, std::size_t) {
    utts[i].track = stage("pitch", utts[i].id, [&] { return pitch::extract_f0(utts[i].clip); });
  });
  write_pitch_tracks(fs::path(o.out) / "pitch", utts);
  std::cout << "pitch tracks for " << utts.size() << " utterances\n";
}

void cmd_contour(const Options& o) {
  const auto cfg = config_of(o);
  const auto m = load_manifest(o);
  auto utts = shells(m, false, o.workers);
  read_pitch_tracks(fs::path(o.out) / "pitch", utts);
  std::size_t n = 0;
  for (auto& u : utts) {
    u.contours = stage("contour", u.id, [&] { return contour::approximate_contours(u.track, cfg.contour()); });
    n += u.contours.size();
  }
  write_contours(fs::path(o.out) / "contours.tsv", utts);
  std::cout << n << " contours\n";
}

void cmd_mine(const Options& o) {
  const auto cfg = config_of(o);
  const auto m = load_manifest(o);
  const fs::path out(o.out);
  auto utts = shells(m, false, o.workers);
  attach_contours(utts, out / "contours.tsv");
  const auto labels = m.labels();
  const auto dicts = mine_dictionaries(utts, labels, cfg);
  write_labels(out / "labels.json", labels);
  write_dictionaries(out / "dictionaries", dicts);
  for (const auto& d : dicts) {
    std::cout << d.dialect << ": " << d.patterns.size() << " patterns (min support " << d.min_support << ")\n";
  }
}

void cmd_cut(const Options& o) {
  const auto cfg = config_of(o);
  const auto m = load_manifest(o);
  const fs::path out(o.out);
  auto utts = shells(m, true, o.workers);
  attach_contours(utts, out / "contours.tsv");
  const auto labels = read_labels(out / "labels.json");
  const auto dicts = read_dictionaries(out / "dictionaries", labels);
  const auto loc = locate_all(utts, dicts, labels, cfg);
  write_instances(out / "instances_train.tsv", loc.train);
  write_instances(out / "instances_val.tsv", loc.val);
  write_instances(out / "instances_test.tsv", loc.test);
  const auto clips = clip_map(utts);
  const std::pair<const char*, const std::vector<mining::PatternInstance>*> parts[] = {
      {"train", &loc.train}, {"val", &loc.val}, {"test", &loc.test}};
  for (const auto& [name, inst] : parts) {
    std::vector<signal::AudioClip> cut;
    for (const auto& i : *inst) {
      cut.push_back(stage("cut", i.source_id, [&] { return mining::cut_segments(*clips.at(i.source_id), {i}).front(); }));
    }
    write_segments(out / "segments" / name, cut);
  }
  std::cout << loc.train.size() << " train, " << loc.val.size() << " val, " << loc.test.size() << " test segments";
  if (!loc.fallback.empty()) std::cout << " (" << loc.fallback.size() << " whole-utterance fallbacks)";
  std::cout << '\n';
}

void cmd_featurize(const Options& o) {
  const auto cfg = config_of(o);
  const auto m = load_manifest(o);
  const fs::path out(o.out);
  const auto utts = shells(m, true, o.workers);
  const auto labels = read_labels(out / "labels.json");
  const auto clips = clip_map(utts);
  for (const std::string name : {"train", "val", "test"}) {
    const auto inst = read_instances(out / ("instances_" + name + ".tsv"));
    const auto seg = featurize(inst, clips, labels, cfg.frames, o.workers);
    features::write_archive(out / ("features_" + name + ".imel"), seg.features);
    std::cout << name << ": " << seg.features.size() << " spectrograms\n";
  }
}

void cmd_train(const Options& o) {
  const auto cfg = config_of(o);
  const fs::path out(o.out);
  const auto labels = read_labels(out / "labels.json");
  const auto tr = features::read_archive(out / "features_train.imel");
  const auto val = features::read_archive(out / "features_val.imel");
  auto [c, result] = train_classifier(tr, val, labels, cfg, logger_of(o));
  nn::save_checkpoint(out / "model.iadi", c);
  write_json(out / "training.json", {{"config", cfg.to_json()},
                                     {"history", history_json(result)},
                                     {"best_epoch", result.best_epoch},
                                     {"best_val_accuracy", result.best_val_accuracy},
                                     {"stopped_early", result.stopped_early}});
  std::cout << "best epoch " << result.best_epoch << ", val accuracy " << result.best_val_accuracy << '\n';
}

void cmd_eval(const Options& o) {
  const fs::path out(o.out);
  auto c = nn::load_checkpoint(out / "model.iadi");
  const auto raw = features::read_archive(out / "features_test.imel");
  const auto inst = read_instances(out / "instances_test.tsv");
  const auto ev = evaluate_utterances(c, raw, inst);
  write_json(out / "metrics.json",
             {{"segment", to_json(ev.segments, c.labels)}, {"utterance", to_json(ev.utterances, c.labels)}});
  std::printf("segment accuracy %.4f  F1 macro %.4f  F1 weighted %.4f\n", ev.segments.accuracy,
              ev.segments.f1_macro, ev.segments.f1_weighted);
  std::printf("utterance accuracy %.4f  F1 macro %.4f  F1 weighted %.4f\n", ev.utterances.accuracy,
              ev.utterances.f1_macro, ev.utterances.f1_weighted);
}

void cmd_run(const Options& o) {
  const auto cfg = config_of(o);
  const auto m = Manifest::load(o.manifest);
  const auto res = run_pipeline(m, o.out, cfg, logger_of(o), o.workers);
  std::printf("utterance accuracy %.4f  F1 macro %.4f  F1 weighted %.4f\n", res.evaluation.utterances.accuracy,
              res.evaluation.utterances.f1_macro, res.evaluation.utterances.f1_weighted);
  std::printf("pattern duration %.1f s of %.1f s (%.1f%%)\n", res.pattern_duration_s, res.corpus_duration_s,
              100.0 * res.pattern_fraction());
  std::cout << "report: " << (fs::path(o.out) / "report.json").string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Arabic dialect identification from intonation patterns"};
  app.require_subcommand(1);
  Options o;

  auto add_io = [&](CLI::App* c, bool manifest) {
    if (manifest) c->add_option("--manifest", o.manifest, "TSV: path, dialect, train|test")->required();
    c->add_option("--out", o.out, "output directory")->required();
    c->add_option("--workers", o.workers, "threads for audio analysis and features")->check(CLI::PositiveNumber);
  };
  auto add_contour = [&](CLI::App* c) { c->add_option("--k", o.k, "pitch levels (k-means clusters)")->check(CLI::PositiveNumber); };
  auto add_mining = [&](CLI::App* c) {
    c->add_option("--min-support", o.min_support, "fraction in (0,1] or absolute count");
    c->add_option("--min-len", o.min_len, "minimum pattern length")->check(CLI::PositiveNumber);
  };
  auto add_seed = [&](CLI::App* c) { c->add_option("--seed", o.seed, "master seed"); };
  auto add_test_mode = [&](CLI::App* c) {
    c->add_option("--test-mode", o.test_mode, "test segments")->check(CLI::IsMember({"patterns", "random-crops"}));
  };
  auto add_training = [&](CLI::App* c) {
    c->add_option("--model", o.model, "architecture")->check(CLI::IsMember({"crnn", "resblstm"}));
    c->add_option("--batch", o.batch, "batch size");
    c->add_option("--epochs", o.epochs, "maximum epochs");
    c->add_option("--patience", o.patience, "early-stopping patience");
    c->add_flag("--quiet", o.quiet, "no per-epoch log");
  };

  auto* synth = app.add_subcommand("synth", "generate the synthetic 3-dialect corpus");
  synth->add_option("--out", o.out, "corpus directory")->required();
  add_seed(synth);
  synth->add_option("--utterances", o.utterances, "utterances per dialect")->check(CLI::PositiveNumber);
  synth->add_option("--test-per-dialect", o.test_per_dialect, "test utterances per dialect");
  synth->add_option("--snr", o.snr_db, "babble SNR in dB");

  auto* pitch = app.add_subcommand("pitch", "f0 tracks -> <out>/pitch/");
  add_io(pitch, true);

  auto* contour = app.add_subcommand("contour", "pitch tracks -> <out>/contours.tsv");
  add_io(contour, true);
  add_contour(contour);

  auto* mine = app.add_subcommand("mine", "training contours -> <out>/dictionaries/");
  add_io(mine, true);
  add_contour(mine);
  add_mining(mine);

  auto* cut = app.add_subcommand("cut", "locate instances -> <out>/instances_*.tsv, <out>/segments/");
  add_io(cut, true);
  add_seed(cut);
  add_test_mode(cut);

  auto* feat = app.add_subcommand("featurize", "segments -> <out>/features_*.imel");
  add_io(feat, true);

  auto* train = app.add_subcommand("train", "features -> <out>/model.iadi");
  train->add_option("--out", o.out, "work directory")->required();
  add_seed(train);
  add_training(train);

  auto* eval = app.add_subcommand("eval", "model + test features -> <out>/metrics.json");
  eval->add_option("--out", o.out, "work directory")->required();

  auto* run = app.add_subcommand("run", "full pipeline -> <out>/report.json");
  add_io(run, true);
  add_seed(run);
  add_contour(run);
  add_mining(run);
  add_test_mode(run);
  add_training(run);

  CLI11_PARSE(app, argc, argv);

  const std::map<CLI::App*, void (*)(const Options&)> dispatch = {
      {synth, cmd_synth}, {pitch, cmd_pitch}, {contour, cmd_contour}, {mine, cmd_mine}, {cut, cmd_cut},
      {feat, cmd_featurize}, {train, cmd_train}, {eval, cmd_eval}, {run, cmd_run}};
  try {
    for (const auto& [sub, fn] : dispatch) {
      if (*sub) fn(o);
    }
  } catch (const adi::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
