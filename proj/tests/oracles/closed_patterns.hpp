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

// Brute-force closed sequential pattern enumeration, used only as a test
// oracle. Every distinct subsequence of every database sequence is counted;
// a frequent pattern is closed iff no single-symbol insertion keeps its support.

#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <vector>

namespace adi::oracle {

using Seq = std::vector<int>;

inline bool is_subsequence(const Seq& seq, const Seq& pat) {
  std::size_t j = 0;
  for (std::size_t i = 0; i < seq.size() && j < pat.size(); ++i) {
    if (seq[i] == pat[j]) ++j;
  }
  return j == pat.size();
}

inline std::size_t count_support(const std::vector<Seq>& db, const Seq& pat) {
  std::size_t n = 0;
  for (const auto& s : db) n += is_subsequence(s, pat) ? 1 : 0;
  return n;
}

// Map from pattern to support, for all closed frequent patterns with
// length >= min_len.
inline std::map<Seq, std::size_t> closed_patterns(const std::vector<Seq>& db, std::size_t min_support,
                                                  std::size_t min_len) {
  std::set<Seq> candidates;
  std::set<int> alphabet;
  for (const auto& s : db) {
    alphabet.insert(s.begin(), s.end());
    const std::size_t n = s.size();
    for (unsigned long mask = 1; mask < (1ul << n); ++mask) {
      Seq sub;
      for (std::size_t i = 0; i < n; ++i) {
        if (mask & (1ul << i)) sub.push_back(s[i]);
      }
      candidates.insert(sub);
    }
  }
  std::map<Seq, std::size_t> out;
  for (const auto& p : candidates) {
    const std::size_t sup = count_support(db, p);
    if (sup < min_support || sup == 0) continue;
    bool closed = true;
    for (std::size_t pos = 0; pos <= p.size() && closed; ++pos) {
      for (int a : alphabet) {
        Seq q(p);
        q.insert(q.begin() + static_cast<long>(pos), a);
        if (count_support(db, q) == sup) {
          closed = false;
          break;
        }
      }
    }
    if (closed && p.size() >= min_len) out[p] = sup;
  }
  return out;
}

}  // namespace adi::oracle
