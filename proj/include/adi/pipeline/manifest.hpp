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

// Manifest: UTF-8 TSV, one utterance per line, `path<TAB>dialect<TAB>split`,
// no header. Relative paths resolve against the manifest's directory.

#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "adi/error.hpp"

namespace adi::pipeline {

enum class Split { kTrain, kTest };

inline std::string to_string(Split s) { return s == Split::kTrain ? "train" : "test"; }

struct ManifestEntry {
  std::filesystem::path path;
  std::string dialect;
  Split split = Split::kTrain;

  // Stable utterance id used in artifacts and error messages.
  std::string id() const { return path.stem().string(); }
};

struct Manifest {
  std::vector<ManifestEntry> entries;

  bool empty() const { return entries.empty(); }
  std::size_t size() const { return entries.size(); }

  // Sorted distinct dialects; the index is the class id.
  std::vector<std::string> labels() const {
    std::set<std::string> s;
    for (const auto& e : entries) s.insert(e.dialect);
    return {s.begin(), s.end()};
  }

  std::vector<std::size_t> indices(Split split) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (entries[i].split == split) out.push_back(i);
    }
    return out;
  }

  static Manifest parse(std::istream& is, const std::filesystem::path& base_dir = {}) {
    Manifest m;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      std::vector<std::string> f;
      std::stringstream ss(line);
      std::string tok;
      while (std::getline(ss, tok, '\t')) f.push_back(tok);
      const std::string where = "manifest line " + std::to_string(lineno);
      if (f.size() != 3) throw Error(ErrorCode::kMalformedFile, where + ": expected 3 tab-separated fields");
      if (f[0].empty() || f[1].empty()) throw Error(ErrorCode::kMalformedFile, where + ": empty path or dialect");
      ManifestEntry e;
      e.path = f[0];
      if (e.path.is_relative() && !base_dir.empty()) e.path = base_dir / e.path;
      e.dialect = f[1];
      if (f[2] == "train") {
        e.split = Split::kTrain;
      } else if (f[2] == "test") {
        e.split = Split::kTest;
      } else {
        throw Error(ErrorCode::kMalformedFile, where + ": split must be train or test, got '" + f[2] + "'");
      }
      m.entries.push_back(std::move(e));
    }
    return m;
  }

  static Manifest load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::kIoError, "cannot open manifest " + path.string());
    return parse(in, path.parent_path());
  }

  // Paths are written relative to the manifest's directory when possible.
  void save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::kIoError, "cannot create " + path.string());
    const auto base = path.parent_path();
    for (const auto& e : entries) {
      auto p = e.path;
      if (!base.empty()) {
        const auto rel = e.path.lexically_relative(base);
        if (!rel.empty() && *rel.begin() != "..") p = rel;
      }
      out << p.generic_string() << '\t' << e.dialect << '\t' << to_string(e.split) << '\n';
    }
  }

  // Run-time checks: nonempty, files present, unique ids, both splits used,
  // and every test dialect seen in training.
  void validate(bool check_files = true) const {
    const std::string ctx = "manifest validation: ";
    if (entries.empty()) throw Error(ErrorCode::kInvalidArgument, ctx + "manifest is empty");
    std::set<std::string> ids, train_labels;
    for (const auto& e : entries) {
      if (check_files && !std::filesystem::is_regular_file(e.path)) {
        throw Error(ErrorCode::kIoError, ctx + "missing audio file " + e.path.string());
      }
      if (!ids.insert(e.id()).second) throw Error(ErrorCode::kInvalidArgument, ctx + "duplicate utterance id " + e.id());
      if (e.split == Split::kTrain) train_labels.insert(e.dialect);
    }
    if (indices(Split::kTrain).empty() || indices(Split::kTest).empty()) {
      throw Error(ErrorCode::kInvalidArgument, ctx + "both train and test splits must be nonempty");
    }
    if (train_labels.size() < 2) {
      throw Error(ErrorCode::kInvalidArgument, ctx + "training split needs at least two dialects");
    }
    for (const auto& e : entries) {
      if (!train_labels.contains(e.dialect)) {
        throw Error(ErrorCode::kInvalidArgument, ctx + "dialect " + e.dialect + " has no training utterances");
      }
    }
  }
};

}  // namespace adi::pipeline
