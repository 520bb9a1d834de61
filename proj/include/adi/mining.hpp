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

// Closed sequential pattern mining (BIDE) over contour symbol sequences,
// per-dialect pattern dictionaries, occurrence localisation and audio cutting.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "adi/contour.hpp"
#include "adi/error.hpp"
#include "adi/signal.hpp"

namespace adi::mining {

using Sequence = std::vector<int>;

struct SequenceDB {
  std::vector<std::string> ids;
  std::vector<Sequence> sequences;
  std::set<int> alphabet;

  void add(std::string id, Sequence seq) {
    adi::detail::require(!seq.empty(), ErrorCode::kInvalidArgument,
                    "sequence database entries must be non-empty (" + id + ")");
    alphabet.insert(seq.begin(), seq.end());
    ids.push_back(std::move(id));
    sequences.push_back(std::move(seq));
  }

  std::size_t size() const { return sequences.size(); }
  bool empty() const { return sequences.empty(); }

  static SequenceDB from_sequences(const std::vector<Sequence>& seqs) {
    SequenceDB db;
    for (std::size_t i = 0; i < seqs.size(); ++i) db.add(std::to_string(i), seqs[i]);
    return db;
  }
};

struct Pattern {
  Sequence symbols;
  std::size_t support = 0;
  bool operator==(const Pattern&) const = default;
};

// True when `pattern` occurs in `seq` as a (not necessarily contiguous) subsequence.
inline bool contains(const Sequence& seq, const Sequence& pattern) {
  std::size_t j = 0;
  for (std::size_t i = 0; i < seq.size() && j < pattern.size(); ++i) {
    if (seq[i] == pattern[j]) ++j;
  }
  return j == pattern.size();
}

inline std::size_t support_of(const SequenceDB& db, const Sequence& pattern) {
  std::size_t s = 0;
  for (const auto& seq : db.sequences) s += contains(seq, pattern) ? 1 : 0;
  return s;
}

namespace detail {

class BideMiner {
 public:
  BideMiner(const SequenceDB& db, std::size_t min_support, std::size_t min_len)
      : db_(db), min_support_(min_support), min_len_(min_len) {}

  std::vector<Pattern> run() {
    std::map<int, std::vector<Entry>> roots;
    for (std::size_t s = 0; s < db_.sequences.size(); ++s) {
      const auto& seq = db_.sequences[s];
      std::set<int> seen;
      for (std::size_t p = 0; p < seq.size(); ++p) {
        if (seen.insert(seq[p]).second) roots[seq[p]].push_back({s, p + 1});
      }
    }
    Sequence prefix;
    for (const auto& [item, entries] : roots) {
      if (entries.size() < min_support_) continue;
      prefix.assign(1, item);
      grow(prefix, entries);
    }
    return std::move(out_);
  }

 private:
  // One sequence containing the prefix; pos is one past the end of the
  // prefix's first (leftmost) instance.
  struct Entry {
    std::size_t seq;
    std::size_t pos;
  };

  void grow(Sequence& prefix, const std::vector<Entry>& proj) {
    if (common_item_in_periods(prefix, proj, /*semi=*/true)) return;  // BackScan

    // Items in the projected suffixes, counted once per sequence.
    std::map<int, std::size_t> counts;
    std::set<int> seen;
    for (const auto& e : proj) {
      seen.clear();
      const auto& seq = db_.sequences[e.seq];
      for (std::size_t p = e.pos; p < seq.size(); ++p) {
        if (seen.insert(seq[p]).second) ++counts[seq[p]];
      }
    }
    const std::size_t support = proj.size();
    bool forward_ext = false;
    for (const auto& [item, c] : counts) forward_ext |= (c == support);
    if (!forward_ext && !common_item_in_periods(prefix, proj, /*semi=*/false)) {
      if (prefix.size() >= min_len_) out_.push_back({prefix, support});
    }

    for (const auto& [item, c] : counts) {
      if (c < min_support_) continue;
      std::vector<Entry> next;
      next.reserve(c);
      for (const auto& e : proj) {
        const auto& seq = db_.sequences[e.seq];
        for (std::size_t p = e.pos; p < seq.size(); ++p) {
          if (seq[p] == item) {
            next.push_back({e.seq, p + 1});
            break;
          }
        }
      }
      prefix.push_back(item);
      grow(prefix, next);
      prefix.pop_back();
    }
  }

  // For every i, checks whether some item occurs in the i-th maximum period
  // (semi == false: bounded by the last-in-last appearance) or semi-maximum
  // period (semi == true: bounded by the last-in-first appearance) of every
  // sequence in the projection.
  bool common_item_in_periods(const Sequence& prefix, const std::vector<Entry>& proj,
                              bool semi) const {
    const std::size_t n = prefix.size();
    // periods[e][i] = [lo, hi) in sequence e.
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> periods(proj.size());
    std::vector<std::size_t> first(n), bound(n);
    for (std::size_t k = 0; k < proj.size(); ++k) {
      const auto& seq = db_.sequences[proj[k].seq];
      std::size_t p = 0;
      for (std::size_t i = 0; i < n; ++i) {
        while (seq[p] != prefix[i]) ++p;
        first[i] = p++;
      }
      if (semi) {
        bound[n - 1] = first[n - 1];
      } else {
        std::size_t q = seq.size() - 1;
        while (seq[q] != prefix[n - 1]) --q;
        bound[n - 1] = q;
      }
      for (std::size_t i = n - 1; i-- > 0;) {
        std::size_t q = bound[i + 1] - 1;
        while (seq[q] != prefix[i]) --q;
        bound[i] = q;
      }
      auto& per = periods[k];
      per.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t lo = i == 0 ? 0 : first[i - 1] + 1;
        per[i] = {lo, std::max(lo, bound[i])};
      }
    }

    for (std::size_t i = 0; i < n; ++i) {
      std::set<int> candidates;
      {
        const auto& seq = db_.sequences[proj[0].seq];
        const auto [lo, hi] = periods[0][i];
        candidates.insert(seq.begin() + static_cast<long>(lo), seq.begin() + static_cast<long>(hi));
      }
      for (std::size_t k = 1; k < proj.size() && !candidates.empty(); ++k) {
        const auto& seq = db_.sequences[proj[k].seq];
        const auto [lo, hi] = periods[k][i];
        for (auto it = candidates.begin(); it != candidates.end();) {
          const bool present = std::find(seq.begin() + static_cast<long>(lo),
                                         seq.begin() + static_cast<long>(hi), *it) !=
                               seq.begin() + static_cast<long>(hi);
          it = present ? std::next(it) : candidates.erase(it);
        }
      }
      if (!candidates.empty()) return true;
    }
    return false;
  }

  const SequenceDB& db_;
  std::size_t min_support_;
  std::size_t min_len_;
  std::vector<Pattern> out_;
};

}  // namespace detail

// Frequent closed sequential patterns of length >= min_len. Support is the
// number of database sequences containing the pattern. Output order is the
// DFS order of the search (prefix-lexicographic).
inline std::vector<Pattern> bide_mine(const SequenceDB& db, std::size_t min_support,
                                      std::size_t min_len) {
  adi::detail::require(!db.empty(), ErrorCode::kInvalidArgument, "cannot mine an empty sequence database");
  adi::detail::require(min_support > 0, ErrorCode::kInvalidArgument, "min_support must be positive");
  adi::detail::require(min_len > 0, ErrorCode::kInvalidArgument, "min_len must be positive");
  for (const auto& s : db.sequences) {
    adi::detail::require(!s.empty(), ErrorCode::kInvalidArgument, "sequence database entries must be non-empty");
  }
  if (min_support > db.size()) return {};
  return detail::BideMiner(db, min_support, min_len).run();
}

// Either an absolute count or a fraction of the database size.
struct SupportThreshold {
  double value = 0.0;
  bool fractional = false;
  bool use_default = true;

  static SupportThreshold absolute(std::size_t n) { return {static_cast<double>(n), false, false}; }
  static SupportThreshold fraction(double f) { return {f, true, false}; }

  // Parses "0.05" (fraction) or "7" (count).
  static SupportThreshold parse(const std::string& text) {
    try {
      if (text.find_first_of(".eE") != std::string::npos) {
        const double f = std::stod(text);
        if (!(f > 0.0 && f <= 1.0)) throw std::out_of_range("fraction");
        return fraction(f);
      }
      const long n = std::stol(text);
      if (n <= 0) throw std::out_of_range("count");
      return absolute(static_cast<std::size_t>(n));
    } catch (const std::exception&) {
      throw Error(ErrorCode::kInvalidArgument, "min support must be a fraction in (0,1] or a positive count: " + text);
    }
  }

  std::size_t resolve(std::size_t db_size) const {
    if (use_default) {
      return std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(0.01 * static_cast<double>(db_size))));
    }
    if (fractional) {
      return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(value * static_cast<double>(db_size) - 1e-9)));
    }
    return static_cast<std::size_t>(value);
  }
};

struct MiningConfig {
  SupportThreshold min_support;
  std::size_t min_len = 5;
  std::size_t k = 8;
};

struct PatternDictionary {
  std::string dialect;
  std::size_t min_support = 0;  // resolved absolute count
  std::size_t min_len = 5;
  std::size_t k = 8;
  std::size_t db_size = 0;
  std::vector<Pattern> patterns;
};

// Sorted by support (desc), length (desc), then lexicographically.
inline void sort_patterns(std::vector<Pattern>& patterns) {
  std::sort(patterns.begin(), patterns.end(), [](const Pattern& a, const Pattern& b) {
    if (a.support != b.support) return a.support > b.support;
    if (a.symbols.size() != b.symbols.size()) return a.symbols.size() > b.symbols.size();
    return a.symbols < b.symbols;
  });
}

inline SequenceDB to_sequence_db(const std::vector<contour::Contour>& contours) {
  SequenceDB db;
  for (const auto& c : contours) {
    if (!c.symbols.empty()) db.add(c.source_id, c.symbols);
  }
  return db;
}

inline PatternDictionary build_dictionary(const std::vector<contour::Contour>& contours,
                                          const std::string& dialect, const MiningConfig& cfg) {
  adi::detail::require(!contours.empty(), ErrorCode::kInvalidArgument,
                  "no contours to mine for dialect " + dialect);
  const SequenceDB db = to_sequence_db(contours);
  adi::detail::require(!db.empty(), ErrorCode::kInvalidArgument,
                  "all contours of dialect " + dialect + " are single-segment");
  PatternDictionary dict;
  dict.dialect = dialect;
  dict.min_support = cfg.min_support.resolve(db.size());
  dict.min_len = cfg.min_len;
  dict.k = cfg.k;
  dict.db_size = db.size();
  dict.patterns = bide_mine(db, dict.min_support, cfg.min_len);
  sort_patterns(dict.patterns);
  return dict;
}

inline nlohmann::json to_json(const PatternDictionary& d) {
  nlohmann::json patterns = nlohmann::json::array();
  for (const auto& p : d.patterns) {
    patterns.push_back({{"symbols", p.symbols}, {"support", p.support}});
  }
  return {{"dialect", d.dialect},
          {"config", {{"min_support", d.min_support}, {"min_len", d.min_len}, {"k", d.k}}},
          {"patterns", patterns}};
}

inline PatternDictionary dictionary_from_json(const nlohmann::json& j) {
  try {
    PatternDictionary d;
    d.dialect = j.at("dialect").get<std::string>();
    const auto& cfg = j.at("config");
    d.min_support = cfg.at("min_support").get<std::size_t>();
    d.min_len = cfg.at("min_len").get<std::size_t>();
    d.k = cfg.at("k").get<std::size_t>();
    for (const auto& p : j.at("patterns")) {
      d.patterns.push_back({p.at("symbols").get<Sequence>(), p.at("support").get<std::size_t>()});
    }
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedFile, std::string("pattern dictionary: ") + e.what());
  }
}

struct Occurrence {
  std::size_t first_symbol = 0;
  std::size_t last_symbol = 0;
  double start_s = 0.0;
  double end_s = 0.0;
};

// Earliest minimal windows, scanned left to right without overlap: the
// earliest possible end is found greedily, then the latest start for that end.
inline std::vector<Occurrence> locate_occurrences(const Sequence& pattern, const contour::Contour& c) {
  std::vector<Occurrence> out;
  const auto& s = c.symbols;
  if (pattern.empty() || s.size() < pattern.size()) return out;
  std::size_t from = 0;
  while (from < s.size()) {
    std::size_t j = 0, end = from;
    for (; end < s.size(); ++end) {
      if (s[end] == pattern[j] && ++j == pattern.size()) break;
    }
    if (j < pattern.size()) break;
    std::size_t start = end;
    std::size_t k = pattern.size() - 1;
    while (true) {
      if (s[start] == pattern[k]) {
        if (k == 0) break;
        --k;
      }
      --start;
    }
    out.push_back({start, end, c.segments[start].start_s, c.segments[end + 1].end_s});
    from = end + 1;
  }
  return out;
}

struct PatternInstance {
  std::string dialect;
  std::string source_id;
  double start_s = 0.0;
  double end_s = 0.0;
  Sequence symbols;

  double duration() const { return end_s - start_s; }
};

// Keeps the earliest of any two instances whose overlap exceeds half of the
// shorter one. Instances are compared only within the same source.
inline std::vector<PatternInstance> dedupe_instances(std::vector<PatternInstance> instances,
                                                     double max_overlap = 0.5) {
  std::stable_sort(instances.begin(), instances.end(), [](const auto& a, const auto& b) {
    if (a.source_id != b.source_id) return a.source_id < b.source_id;
    if (a.start_s != b.start_s) return a.start_s < b.start_s;
    return a.end_s < b.end_s;
  });
  std::vector<PatternInstance> kept;
  std::size_t group_begin = 0;
  for (auto& inst : instances) {
    if (!kept.empty() && kept.back().source_id != inst.source_id) group_begin = kept.size();
    bool ok = true;
    for (std::size_t i = group_begin; i < kept.size() && ok; ++i) {
      const double overlap = std::min(kept[i].end_s, inst.end_s) - std::max(kept[i].start_s, inst.start_s);
      const double shorter = std::min(kept[i].duration(), inst.duration());
      if (overlap > max_overlap * shorter) ok = false;
    }
    if (ok) kept.push_back(std::move(inst));
  }
  return kept;
}

// All instances of the given dictionaries' patterns in one utterance's
// contours, labelled with `dialect` and deduplicated.
inline std::vector<PatternInstance> locate_instances(const std::vector<const PatternDictionary*>& dicts,
                                                     const std::vector<contour::Contour>& contours,
                                                     const std::string& dialect) {
  std::vector<PatternInstance> found;
  for (const auto* d : dicts) {
    for (const auto& p : d->patterns) {
      for (const auto& c : contours) {
        for (const auto& occ : locate_occurrences(p.symbols, c)) {
          found.push_back({dialect, c.source_id, occ.start_s, occ.end_s, p.symbols});
        }
      }
    }
  }
  return dedupe_instances(std::move(found));
}

// Child clips whose samples are copied verbatim from the parent.
inline std::vector<signal::AudioClip> cut_segments(const signal::AudioClip& clip,
                                                   const std::vector<PatternInstance>& instances) {
  std::vector<signal::AudioClip> out;
  out.reserve(instances.size());
  const auto samples = clip.samples();
  const double sr = clip.sample_rate();
  for (const auto& inst : instances) {
    const long first = std::lround(inst.start_s * sr);
    long last = std::lround(inst.end_s * sr);
    const auto n = static_cast<long>(samples.size());
    if (last == n + 1) last = n;  // rounding at the clip end
    if (inst.start_s < 0.0 || first >= last || last > n) {
      char buf[128];
      std::snprintf(buf, sizeof buf, "span [%.3f, %.3f] s outside clip of %.3f s", inst.start_s,
                    inst.end_s, clip.duration_s());
      throw Error(ErrorCode::kInvalidArgument, clip.source_id() + ": " + buf);
    }
    std::vector<float> part(samples.begin() + first, samples.begin() + last);
    char id[64];
    std::snprintf(id, sizeof id, "@%.3f-%.3f", inst.start_s, inst.end_s);
    out.emplace_back(std::move(part), clip.sample_rate(), clip.source_id() + id,
                     signal::TimeSpan{inst.start_s, inst.end_s});
  }
  return out;
}

inline std::string format_symbols(const Sequence& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(s[i]);
  }
  return out;
}

// dialect<TAB>source_id<TAB>start_s<TAB>end_s<TAB>symbols
inline void write_instances(std::ostream& os, const std::vector<PatternInstance>& instances) {
  char buf[64];
  for (const auto& i : instances) {
    std::snprintf(buf, sizeof buf, "%.6f\t%.6f", i.start_s, i.end_s);
    os << i.dialect << '\t' << i.source_id << '\t' << buf << '\t' << format_symbols(i.symbols) << '\n';
  }
}

inline std::vector<PatternInstance> read_instances(std::istream& is) {
  std::vector<PatternInstance> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, '\t')) f.push_back(tok);
    if (f.size() == 4) f.emplace_back();
    if (f.size() != 5) throw Error(ErrorCode::kMalformedFile, "instance file line " + std::to_string(lineno));
    PatternInstance inst;
    inst.dialect = f[0];
    inst.source_id = f[1];
    try {
      inst.start_s = std::stod(f[2]);
      inst.end_s = std::stod(f[3]);
    } catch (const std::exception&) {
      throw Error(ErrorCode::kMalformedFile, "instance file line " + std::to_string(lineno));
    }
    inst.symbols = contour::parse_symbols(f[4]);
    out.push_back(std::move(inst));
  }
  return out;
}

}  // namespace adi::mining
