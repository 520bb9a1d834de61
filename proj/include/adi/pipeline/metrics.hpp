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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "adi/error.hpp"
#include "json.hpp"

namespace adi::pipeline {

using Confusion = std::vector<std::vector<std::size_t>>;  // [truth][predicted]

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;  // true count
};

struct MetricsReport {
  double accuracy = 0.0;
  double f1_macro = 0.0;
  double f1_weighted = 0.0;
  Confusion confusion;
  std::vector<ClassMetrics> per_class;

  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& row : confusion) {
      for (auto v : row) n += v;
    }
    return n;
  }
};

// Undefined ratios (0/0) count as 0, so a class that is never predicted or
// never present gets F1 = 0 and still enters the macro mean.
inline MetricsReport metrics_from_confusion(const Confusion& conf) {
  const std::size_t c = conf.size();
  adi::detail::require(c > 0, ErrorCode::kInvalidArgument, "confusion matrix is empty");
  for (const auto& row : conf) {
    adi::detail::require(row.size() == c, ErrorCode::kShapeMismatch, "confusion matrix must be square");
  }
  MetricsReport r;
  r.confusion = conf;
  std::size_t total = 0, trace = 0;
  std::vector<std::size_t> col(c, 0);
  for (std::size_t i = 0; i < c; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      total += conf[i][j];
      col[j] += conf[i][j];
    }
    trace += conf[i][i];
  }
  adi::detail::require(total > 0, ErrorCode::kInvalidArgument, "confusion matrix has no counts");
  r.accuracy = static_cast<double>(trace) / static_cast<double>(total);
  for (std::size_t i = 0; i < c; ++i) {
    ClassMetrics m;
    for (auto v : conf[i]) m.support += v;
    const double tp = static_cast<double>(conf[i][i]);
    m.precision = col[i] ? tp / static_cast<double>(col[i]) : 0.0;
    m.recall = m.support ? tp / static_cast<double>(m.support) : 0.0;
    m.f1 = (m.precision + m.recall) > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    r.f1_macro += m.f1 / static_cast<double>(c);
    r.f1_weighted += m.f1 * static_cast<double>(m.support) / static_cast<double>(total);
    r.per_class.push_back(m);
  }
  return r;
}

inline MetricsReport compute_metrics(std::span<const int> truth, std::span<const int> pred, std::size_t n_classes) {
  adi::detail::require(truth.size() == pred.size(), ErrorCode::kShapeMismatch, "truth and prediction counts differ");
  adi::detail::require(!truth.empty(), ErrorCode::kInvalidArgument, "nothing to evaluate");
  Confusion conf(n_classes, std::vector<std::size_t>(n_classes, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    for (int v : {truth[i], pred[i]}) {
      if (v < 0 || static_cast<std::size_t>(v) >= n_classes) {
        throw Error(ErrorCode::kInvalidArgument, "label " + std::to_string(v) + " outside the model's label set");
      }
    }
    ++conf[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(pred[i])];
  }
  return metrics_from_confusion(conf);
}

inline nlohmann::json to_json(const MetricsReport& r, const std::vector<std::string>& labels) {
  nlohmann::json j;
  j["accuracy"] = r.accuracy;
  j["f1_macro"] = r.f1_macro;
  j["f1_weighted"] = r.f1_weighted;
  j["confusion"] = r.confusion;
  j["labels"] = labels;
  nlohmann::json pc = nlohmann::json::array();
  for (std::size_t i = 0; i < r.per_class.size(); ++i) {
    const auto& m = r.per_class[i];
    pc.push_back({{"label", i < labels.size() ? labels[i] : std::to_string(i)},
                  {"precision", m.precision},
                  {"recall", m.recall},
                  {"f1", m.f1},
                  {"support", m.support}});
  }
  j["per_class"] = pc;
  j["total"] = r.total();
  return j;
}

// Label-stratified split: each class keeps round(fraction * n) examples for
// training, clamped so both sides get at least one. Indices come back sorted.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_train_val(std::span<const int> labels,
                                                                                     double fraction,
                                                                                     std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "train fraction must lie in (0, 1); an empty validation split leaves early stopping undefined");
  }
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> train, val;
  for (auto& [label, idx] : by_class) {
    if (idx.size() < 2) {
      throw Error(ErrorCode::kInvalidArgument,
                  "class " + std::to_string(label) + " has fewer than 2 instances; cannot split");
    }
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n = idx.size();
    const auto keep = std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n))),
                                              1, n - 1);
    train.insert(train.end(), idx.begin(), idx.begin() + static_cast<long>(keep));
    val.insert(val.end(), idx.begin() + static_cast<long>(keep), idx.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(val.begin(), val.end());
  return {train, val};
}

// Majority vote over segment argmaxes. Ties go to the tied class with the
// highest mean probability, then to the lowest class index.
inline int vote(std::span<const float> probs, std::size_t n_classes) {
  adi::detail::require(n_classes > 0 && !probs.empty() && probs.size() % n_classes == 0, ErrorCode::kShapeMismatch,
                       "vote needs a nonempty [segments x classes] block");
  const std::size_t n = probs.size() / n_classes;
  std::vector<std::size_t> votes(n_classes, 0);
  std::vector<double> mean(n_classes, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    const auto row = probs.subspan(s * n_classes, n_classes);
    ++votes[static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin())];
    for (std::size_t c = 0; c < n_classes; ++c) mean[c] += row[c] / static_cast<double>(n);
  }
  const auto top = *std::max_element(votes.begin(), votes.end());
  int best = -1;
  for (std::size_t c = 0; c < n_classes; ++c) {
    if (votes[c] != top) continue;
    if (best < 0 || mean[c] > mean[static_cast<std::size_t>(best)]) best = static_cast<int>(c);
  }
  return best;
}

}  // namespace adi::pipeline
