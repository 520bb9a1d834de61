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

// Contour approximation: per-utterance univariate k-means over voiced f0
// values, maximal same-cluster runs as line segments, and signed centroid-rank
// differences between consecutive segments as the contour symbols.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "adi/error.hpp"
#include "adi/pitch.hpp"

namespace adi::contour {

struct Clustering1D {
  std::vector<double> centroids;         // strictly increasing
  std::vector<std::size_t> assignment;   // point -> cluster rank
  std::size_t k = 0;
  std::size_t requested_k = 0;           // > k when k was reduced to the distinct count
  std::vector<double> objective_trace;   // within-cluster sum of squares per iteration
  std::size_t iterations = 0;
  bool converged = false;

  bool reduced() const { return k < requested_k; }

  double within_ss(const std::vector<double>& values) const {
    double ss = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double d = values[i] - centroids[assignment[i]];
      ss += d * d;
    }
    return ss;
  }

  // Largest |x - centroid| over the points of each cluster.
  std::vector<double> radii(const std::vector<double>& values) const {
    std::vector<double> r(k, 0.0);
    for (std::size_t i = 0; i < values.size(); ++i) {
      const auto c = assignment[i];
      r[c] = std::max(r[c], std::abs(values[i] - centroids[c]));
    }
    return r;
  }
};

namespace detail {

// Nearest centroid; ties go to the lower index (centroids are kept sorted).
inline std::size_t nearest(double x, const std::vector<double>& centroids) {
  std::size_t best = 0;
  double best_d = std::abs(x - centroids[0]);
  for (std::size_t j = 1; j < centroids.size(); ++j) {
    const double d = std::abs(x - centroids[j]);
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  return best;
}

inline double sum_sq(const std::vector<double>& values, const std::vector<double>& centroids,
                     const std::vector<std::size_t>& assignment) {
  double ss = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double d = values[i] - centroids[assignment[i]];
    ss += d * d;
  }
  return ss;
}

}  // namespace detail

namespace detail {

struct LloydResult {
  std::vector<double> centroids;
  std::vector<std::size_t> assignment;
  std::size_t iterations = 0;
  bool converged = false;
};

// Lloyd iterations from the given seeds. Empty clusters are re-seeded with
// the point farthest from its centroid. Appends the objective after every
// iteration to `trace`.
inline LloydResult lloyd(const std::vector<double>& values, std::vector<double> centroids,
                         std::size_t max_iter, std::vector<double>& trace) {
  const std::size_t n = values.size();
  const std::size_t kk = centroids.size();
  std::sort(centroids.begin(), centroids.end());
  LloydResult r;
  std::vector<std::size_t> assignment(n, 0);
  std::vector<std::size_t> previous;
  for (std::size_t it = 0; it < max_iter; ++it) {
    for (std::size_t i = 0; i < n; ++i) assignment[i] = nearest(values[i], centroids);

    std::vector<double> sum(kk, 0.0);
    std::vector<std::size_t> count(kk, 0);
    for (std::size_t i = 0; i < n; ++i) {
      sum[assignment[i]] += values[i];
      ++count[assignment[i]];
    }
    for (std::size_t j = 0; j < kk; ++j) {
      if (count[j] > 0) centroids[j] = sum[j] / static_cast<double>(count[j]);
    }
    for (std::size_t j = 0; j < kk; ++j) {
      if (count[j] != 0) continue;
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (count[assignment[i]] < 2) continue;
        const double d = std::abs(values[i] - centroids[assignment[i]]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      if (far_d < 0.0) continue;
      const std::size_t from = assignment[far];
      sum[from] -= values[far];
      --count[from];
      centroids[from] = sum[from] / static_cast<double>(count[from]);
      assignment[far] = j;
      sum[j] = values[far];
      count[j] = 1;
      centroids[j] = values[far];
    }

    // Keep centroids sorted so that ranks are well defined and ties resolve low.
    std::vector<std::size_t> order(kk);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return centroids[a] < centroids[b]; });
    std::vector<std::size_t> rank_of(kk);
    std::vector<double> reordered(kk);
    for (std::size_t q = 0; q < kk; ++q) {
      rank_of[order[q]] = q;
      reordered[q] = centroids[order[q]];
    }
    centroids = std::move(reordered);
    for (auto& a : assignment) a = rank_of[a];

    trace.push_back(sum_sq(values, centroids, assignment));
    r.iterations = it + 1;
    if (assignment == previous) {
      r.converged = true;
      break;
    }
    previous = assignment;
  }
  r.centroids = std::move(centroids);
  r.assignment = std::move(assignment);
  return r;
}

// Centroids of the minimum-SSE partition of the sorted values into k
// contiguous groups (the optimal 1D k-means clusters are contiguous).
inline std::vector<double> optimal_partition_centroids(const std::vector<double>& sorted, std::size_t k) {
  const std::size_t n = sorted.size();
  std::vector<double> s1(n + 1, 0.0), s2(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    s1[i + 1] = s1[i] + sorted[i];
    s2[i + 1] = s2[i] + sorted[i] * sorted[i];
  }
  auto cost = [&](std::size_t a, std::size_t b) {
    const double m = static_cast<double>(b - a);
    const double s = s1[b] - s1[a];
    return std::max(0.0, (s2[b] - s2[a]) - s * s / m);
  };
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> prev(n + 1, inf), cur(n + 1, inf);
  std::vector<std::vector<std::size_t>> cut(k + 1, std::vector<std::size_t>(n + 1, 0));
  prev[0] = 0.0;
  for (std::size_t j = 1; j <= k; ++j) {
    std::fill(cur.begin(), cur.end(), inf);
    for (std::size_t i = j; i <= n; ++i) {
      for (std::size_t s = j - 1; s < i; ++s) {
        if (prev[s] == inf) continue;
        const double c = prev[s] + cost(s, i);
        if (c < cur[i]) {
          cur[i] = c;
          cut[j][i] = s;
        }
      }
    }
    std::swap(prev, cur);
  }
  std::vector<double> centroids(k);
  std::size_t end = n;
  for (std::size_t j = k; j >= 1; --j) {
    const std::size_t begin = cut[j][end];
    centroids[j - 1] = (s1[end] - s1[begin]) / static_cast<double>(end - begin);
    end = begin;
  }
  return centroids;
}

}  // namespace detail

// Lloyd's algorithm from deterministic quantile seeds (the i-th seed is the
// sorted value at quantile (i+0.5)/k), followed by a polish: when the optimal
// contiguous partition of the sorted values has a lower objective, Lloyd is
// continued from its centroids. The objective trace is non-increasing.
inline Clustering1D kmeans_1d(const std::vector<double>& values, std::size_t k,
                              std::size_t max_iter = 100) {
  adi::detail::require(k > 0, ErrorCode::kInvalidArgument, "k-means requires k >= 1");
  adi::detail::require(!values.empty(), ErrorCode::kInvalidArgument, "k-means requires at least one value");
  for (double v : values) {
    adi::detail::require(std::isfinite(v), ErrorCode::kInvalidArgument, "k-means values must be finite");
  }

  std::vector<double> sorted(values);
  std::sort(sorted.begin(), sorted.end());
  std::size_t n_distinct = 1;
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i] != sorted[i - 1]) ++n_distinct;
  }

  Clustering1D out;
  out.requested_k = k;
  const std::size_t kk = std::min(k, n_distinct);
  const std::size_t n = values.size();

  std::vector<double> seeds(kk);
  for (std::size_t i = 0; i < kk; ++i) {
    const auto idx = std::min(n - 1, static_cast<std::size_t>(std::floor((i + 0.5) / kk * n)));
    seeds[i] = sorted[idx];
  }
  auto best = detail::lloyd(values, seeds, max_iter, out.objective_trace);
  out.iterations = best.iterations;
  out.converged = best.converged;

  const double current = out.objective_trace.back();
  const auto optimal = detail::optimal_partition_centroids(sorted, kk);
  std::vector<std::size_t> opt_assign(n);
  for (std::size_t i = 0; i < n; ++i) opt_assign[i] = detail::nearest(values[i], optimal);
  if (detail::sum_sq(values, optimal, opt_assign) < current * (1.0 - 1e-12)) {
    std::vector<double> polish_trace;
    auto polished = detail::lloyd(values, optimal, max_iter, polish_trace);
    if (polish_trace.back() < current) {
      out.objective_trace.insert(out.objective_trace.end(), polish_trace.begin(), polish_trace.end());
      out.iterations += polished.iterations;
      out.converged = polished.converged;
      best = std::move(polished);
    }
  }

  // Final nearest-centroid pass and removal of any cluster that ended up
  // empty or coincident.
  const auto& centroids = best.centroids;
  std::vector<std::size_t> assignment(n);
  for (std::size_t i = 0; i < n; ++i) assignment[i] = detail::nearest(values[i], centroids);
  std::vector<std::size_t> count(kk, 0);
  for (auto a : assignment) ++count[a];
  std::vector<std::size_t> remap(kk, 0);
  std::vector<double> kept;
  for (std::size_t j = 0; j < kk; ++j) {
    if (count[j] == 0) continue;
    if (!kept.empty() && kept.back() >= centroids[j]) {
      remap[j] = kept.size() - 1;
      continue;
    }
    remap[j] = kept.size();
    kept.push_back(centroids[j]);
  }
  for (auto& a : assignment) a = remap[a];
  out.centroids = std::move(kept);
  out.k = out.centroids.size();
  out.assignment = std::move(assignment);
  return out;
}

struct Segment {
  std::size_t cluster_rank = 0;
  double start_s = 0.0;
  double end_s = 0.0;
  std::size_t n_points = 0;
};

struct Contour {
  std::vector<int> symbols;
  std::vector<Segment> segments;
  std::string source_id;
  std::size_t k = 0;

  // Checks the symbol/segment consistency invariants.
  void validate() const {
    if (segments.empty()) {
      adi::detail::require(symbols.empty(), ErrorCode::kState, "contour without segments has symbols");
      return;
    }
    adi::detail::require(symbols.size() + 1 == segments.size(), ErrorCode::kState,
                    "contour must have one more segment than symbols");
    for (std::size_t i = 0; i < symbols.size(); ++i) {
      const long diff = static_cast<long>(segments[i + 1].cluster_rank) -
                        static_cast<long>(segments[i].cluster_rank);
      adi::detail::require(symbols[i] == diff && symbols[i] != 0, ErrorCode::kState,
                      "contour symbol does not match its segment ranks");
    }
  }
};

struct ContourConfig {
  std::size_t k = 8;
  double gap_max_s = 0.150;
  std::size_t max_iter = 100;
};

// All contours of one utterance: voiced runs split wherever the unvoiced gap
// exceeds gap_max, all sharing one clustering of the utterance's f0 values.
inline std::vector<Contour> approximate_contours(const pitch::PitchTrack& track,
                                                 const ContourConfig& cfg = {}) {
  adi::detail::require(cfg.k > 0, ErrorCode::kInvalidArgument, "contour k must be positive");
  const auto points = pitch::voiced_points(track);
  if (points.empty()) {
    throw Error(ErrorCode::kInvalidArgument, track.source_id + ": no voiced frames for contour approximation");
  }
  std::vector<double> f0(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) f0[i] = points[i].f0;
  const auto clusters = kmeans_1d(f0, cfg.k, cfg.max_iter);

  const double step = track.frame_step_s();
  const double half = track.half_window_s();
  std::vector<Contour> out;
  Contour current;
  current.source_id = track.source_id;
  current.k = clusters.k;

  auto flush = [&] {
    if (!current.segments.empty()) out.push_back(std::move(current));
    current = Contour{};
    current.source_id = track.source_id;
    current.k = clusters.k;
  };

  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto rank = clusters.assignment[i];
    if (i > 0) {
      const double gap = points[i].time_s - points[i - 1].time_s - step;
      if (gap > cfg.gap_max_s + 1e-9) flush();
    }
    const double start = std::max(0.0, points[i].time_s - half);
    const double end = points[i].time_s + half;
    if (!current.segments.empty() && current.segments.back().cluster_rank == rank) {
      auto& seg = current.segments.back();
      seg.end_s = end;
      ++seg.n_points;
    } else {
      if (!current.segments.empty()) {
        current.symbols.push_back(static_cast<int>(rank) -
                                  static_cast<int>(current.segments.back().cluster_rank));
      }
      current.segments.push_back({rank, start, end, 1});
    }
  }
  flush();
  return out;
}

// The longest contour (most segments, earliest on ties).
inline Contour approximate_contour(const pitch::PitchTrack& track, std::size_t k) {
  ContourConfig cfg;
  cfg.k = k;
  auto all = approximate_contours(track, cfg);
  std::size_t best = 0;
  for (std::size_t i = 1; i < all.size(); ++i) {
    if (all[i].segments.size() > all[best].segments.size()) best = i;
  }
  return std::move(all[best]);
}

// Contour dump: source_id<TAB>sym1,sym2,...<TAB>start:end;start:end;...
inline void write_contour(std::ostream& os, const Contour& c) {
  os << c.source_id << '\t';
  for (std::size_t i = 0; i < c.symbols.size(); ++i) {
    if (i) os << ',';
    os << c.symbols[i];
  }
  os << '\t';
  char buf[64];
  for (std::size_t i = 0; i < c.segments.size(); ++i) {
    if (i) os << ';';
    std::snprintf(buf, sizeof buf, "%.3f:%.3f", c.segments[i].start_s, c.segments[i].end_s);
    os << buf;
  }
  os << '\n';
}

inline std::vector<int> parse_symbols(const std::string& field) {
  std::vector<int> out;
  if (field.empty()) return out;
  std::stringstream ss(field);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      out.push_back(std::stoi(tok));
    } catch (const std::exception&) {
      throw Error(ErrorCode::kMalformedFile, "bad contour symbol '" + tok + "'");
    }
  }
  return out;
}

// Reads a contour dump. Ranks are rebuilt from the symbols (lowest rank 0).
inline std::vector<Contour> read_contours(std::istream& is) {
  std::vector<Contour> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) {
      throw Error(ErrorCode::kMalformedFile, "contour dump line " + std::to_string(lineno));
    }
    Contour c;
    c.source_id = line.substr(0, t1);
    c.symbols = parse_symbols(line.substr(t1 + 1, t2 - t1 - 1));
    std::stringstream segs(line.substr(t2 + 1));
    std::string tok;
    long rank = 0, lowest = 0;
    std::vector<long> ranks;
    while (std::getline(segs, tok, ';')) {
      const auto colon = tok.find(':');
      if (colon == std::string::npos) {
        throw Error(ErrorCode::kMalformedFile, "contour dump line " + std::to_string(lineno));
      }
      Segment s;
      s.start_s = std::stod(tok.substr(0, colon));
      s.end_s = std::stod(tok.substr(colon + 1));
      s.n_points = 1;
      if (!c.segments.empty()) rank += c.symbols.at(c.segments.size() - 1);
      lowest = std::min(lowest, rank);
      ranks.push_back(rank);
      c.segments.push_back(s);
    }
    long highest = 0;
    for (std::size_t i = 0; i < c.segments.size(); ++i) {
      c.segments[i].cluster_rank = static_cast<std::size_t>(ranks[i] - lowest);
      highest = std::max(highest, ranks[i] - lowest);
    }
    c.k = static_cast<std::size_t>(highest + 1);
    c.validate();
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace adi::contour
