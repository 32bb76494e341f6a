// Copyright 2026 The EVA Coreset Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Deliberately naive reference implementations used only by tests. Nothing
// here may call into the production scorers or selectors.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

namespace eva::oracle {

/// Explicit mean, then mean of squared deviations.
inline double brute_variance(const std::vector<double>& values) {
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double acc = 0.0;
  for (double v : values) acc += (v - mean) * (v - mean);
  return acc / static_cast<double>(values.size());
}

inline double brute_mean(const std::vector<double>& values) {
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

/// Counts 1 -> 0 transitions in a correctness sequence.
inline int brute_forgetting(const std::vector<int>& correct) {
  int events = 0;
  for (std::size_t t = 1; t < correct.size(); ++t) {
    if (correct[t - 1] == 1 && correct[t] == 0) ++events;
  }
  return events;
}

/// sqrt of the squared distance to an explicitly built one-hot vector.
inline double brute_error(const std::vector<double>& probs, std::size_t label) {
  std::vector<double> onehot(probs.size(), 0.0);
  onehot[label] = 1.0;
  double ss = 0.0;
  for (std::size_t j = 0; j < probs.size(); ++j) ss += std::pow(probs[j] - onehot[j], 2);
  return std::sqrt(ss);
}

/// Indices of the m best values by exhaustive pairwise ranking, ascending.
inline std::vector<std::size_t> brute_top(const std::vector<double>& v, std::size_t m, bool higher) {
  std::vector<std::pair<std::size_t, std::size_t>> rank;  // (#better, index)
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::size_t better = 0;
    for (std::size_t j = 0; j < v.size(); ++j) {
      const bool beats = higher ? v[j] > v[i] : v[j] < v[i];
      if (beats || (v[j] == v[i] && j < i)) ++better;
    }
    rank.emplace_back(better, i);
  }
  std::vector<std::size_t> out;
  for (auto [b, i] : rank) {
    if (b < m) out.push_back(i);
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Spearman rank correlation with average ranks for ties.
inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) { return v[x] < v[y]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = 0.5 * static_cast<double>(i + j);
      i = j + 1;
    }
    return r;
  };
  const auto ra = ranks(a);
  const auto rb = ranks(b);
  const double ma = brute_mean(ra);
  const double mb = brute_mean(rb);
  double num = 0.0, da = 0.0, db = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    num += (ra[i] - ma) * (rb[i] - mb);
    da += (ra[i] - ma) * (ra[i] - ma);
    db += (rb[i] - mb) * (rb[i] - mb);
  }
  return num / std::sqrt(da * db);
}

}  // namespace eva::oracle
