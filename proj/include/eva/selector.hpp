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

// Coreset selection: plain top-M and coverage-centric stratified sampling.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "eva/detail/rng.hpp"
#include "eva/error.hpp"
#include "eva/score_io.hpp"
#include "eva/scorers.hpp"

namespace eva {

/// Selected sample indices, strictly ascending.
struct Coreset {
  std::vector<std::size_t> indices;
  double alpha = 1.0;
  std::string method;
  std::uint64_t seed = 0;
  nlohmann::json params = nlohmann::json::object();

  [[nodiscard]] std::size_t size() const { return indices.size(); }
};

inline void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw ValidationError("selection rate must lie in (0, 1], got " + detail::format_g17(alpha));
  }
}

/// M = ceil(alpha * N). Products within 1e-9 (relative) of an integer are
/// treated as that integer, so e.g. 0.07 * 100 gives 7 rather than 8.
inline std::size_t coreset_size(std::size_t n, double alpha) {
  check_alpha(alpha);
  const double x = alpha * static_cast<double>(n);
  const double r = std::nearbyint(x);
  const double m = std::abs(x - r) <= 1e-9 * std::max(1.0, x) ? r : std::ceil(x);
  return std::clamp<std::size_t>(static_cast<std::size_t>(m), std::min<std::size_t>(1, n), n);
}

/// All indices ordered from most to least important; ties by ascending index.
inline std::vector<std::size_t> importance_order(const ScoreVector& scores) {
  for (std::size_t i = 0; i < scores.values.size(); ++i) {
    if (!std::isfinite(scores.values[i])) throw ValidationError("non-finite score at index " + std::to_string(i));
  }
  std::vector<std::size_t> order(scores.values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto& v = scores.values;
  if (scores.higher_is_important) {
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] > v[b] || (v[a] == v[b] && a < b); });
  } else {
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b] || (v[a] == v[b] && a < b); });
  }
  return order;
}

/// The ceil(alpha*N) most important samples.
inline Coreset select_top(const ScoreVector& scores, double alpha) {
  if (scores.values.empty()) throw ValidationError("cannot select from an empty score vector");
  const std::size_t m = coreset_size(scores.size(), alpha);
  auto order = importance_order(scores);
  order.resize(m);
  std::sort(order.begin(), order.end());
  return Coreset{std::move(order), alpha, std::string(method_tag(scores.method)), 0, {{"selector", "top"}}};
}

/// Splits a budget over bins: bins are visited smallest first, each taking
/// min(size, ceil(budget / bins_left)). Returns per-bin counts.
inline std::vector<std::size_t> allocate_budget(std::span<const std::size_t> bin_sizes, std::size_t budget) {
  std::vector<std::size_t> order(bin_sizes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return bin_sizes[a] < bin_sizes[b]; });
  std::vector<std::size_t> take(bin_sizes.size(), 0);
  std::size_t bins_left = 0;
  for (auto s : bin_sizes) bins_left += s > 0 ? 1 : 0;
  for (std::size_t b : order) {
    if (bin_sizes[b] == 0) continue;
    const std::size_t share = (budget + bins_left - 1) / bins_left;
    take[b] = std::min(bin_sizes[b], share);
    budget -= take[b];
    --bins_left;
  }
  return take;
}

struct CcsOptions {
  std::size_t n_strata = 50;
  double beta = 0.0;
  std::uint64_t seed = 0;
};

/// Coverage-centric selection: prune the floor(beta*N) most important
/// ("hardest") samples, bin the remaining score range into equal-width
/// strata, split the budget across strata and sample uniformly inside each.
inline Coreset ccs_select(const ScoreVector& scores, double alpha, const CcsOptions& opt = {}) {
  if (scores.values.empty()) throw ValidationError("cannot select from an empty score vector");
  if (opt.n_strata < 1) throw ValidationError("ccs needs at least one stratum");
  if (!(opt.beta >= 0.0 && opt.beta < 1.0)) throw ValidationError("ccs pruning fraction beta must lie in [0, 1)");
  const std::size_t n = scores.size();
  const std::size_t m = coreset_size(n, alpha);
  const auto pruned = static_cast<std::size_t>(std::floor(opt.beta * static_cast<double>(n)));
  if (m > n - pruned) {
    throw ValidationError("ccs budget " + std::to_string(m) + " exceeds the " + std::to_string(n - pruned) +
                          " samples left after pruning");
  }

  const auto order = importance_order(scores);
  std::vector<std::size_t> kept(order.begin() + static_cast<std::ptrdiff_t>(pruned), order.end());
  std::sort(kept.begin(), kept.end());

  double lo = scores.values[kept.front()];
  double hi = lo;
  for (auto i : kept) {
    lo = std::min(lo, scores.values[i]);
    hi = std::max(hi, scores.values[i]);
  }
  const double width = (hi - lo) / static_cast<double>(opt.n_strata);
  std::vector<std::vector<std::size_t>> bins(opt.n_strata);
  for (auto i : kept) {
    std::size_t b = 0;
    if (width > 0.0) {
      b = static_cast<std::size_t>(std::floor((scores.values[i] - lo) / width));
      b = std::min(b, opt.n_strata - 1);
    }
    bins[b].push_back(i);
  }

  std::vector<std::size_t> sizes(bins.size());
  for (std::size_t b = 0; b < bins.size(); ++b) sizes[b] = bins[b].size();
  const auto take = allocate_budget(sizes, m);

  std::mt19937_64 rng(opt.seed);
  std::vector<std::size_t> picked;
  picked.reserve(m);
  for (std::size_t b = 0; b < bins.size(); ++b) {
    auto& bin = bins[b];
    // Partial Fisher-Yates: the first take[b] slots become a uniform sample.
    for (std::size_t k = 0; k < take[b]; ++k) {
      const std::size_t j = k + static_cast<std::size_t>(detail::uniform_below(rng, bin.size() - k));
      std::swap(bin[k], bin[j]);
      picked.push_back(bin[k]);
    }
  }
  std::sort(picked.begin(), picked.end());
  return Coreset{std::move(picked), alpha, "ccs:" + std::string(method_tag(scores.method)), opt.seed,
                 {{"selector", "ccs"}, {"n_strata", opt.n_strata}, {"beta", opt.beta}}};
}

namespace detail {

inline std::string format_shortest(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace detail

// Index file: "# alpha=<a> method=<m> seed=<s>" then one index per line.

inline void write_indices(const Coreset& coreset, std::ostream& out) {
  out << "# alpha=" << detail::format_shortest(coreset.alpha) << " method=" << coreset.method
      << " seed=" << coreset.seed << '\n';
  for (auto i : coreset.indices) out << i << '\n';
}

inline void write_indices(const Coreset& coreset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_indices(coreset, out);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

/// Parses an index file. When `n_total` is given, indices must be < n_total.
inline Coreset read_indices(std::istream& in, std::optional<std::size_t> n_total = std::nullopt) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("index file is empty");
  detail::strip_cr(line);
  if (!line.starts_with("# ")) throw FormatError("index file header comment is missing");
  Coreset c;
  bool have_alpha = false;
  std::istringstream fields(line.substr(2));
  std::string kv;
  while (fields >> kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw FormatError("malformed header field '" + kv + "'");
    const std::string key = kv.substr(0, eq);
    const std::string_view val = std::string_view(kv).substr(eq + 1);
    if (key == "alpha") {
      c.alpha = detail::parse_double(val, "alpha");
      have_alpha = true;
    } else if (key == "method") {
      c.method = std::string(val);
    } else if (key == "seed") {
      c.seed = detail::parse_uint<std::uint64_t>(val, "seed");
    }
  }
  if (!have_alpha) throw FormatError("index file header lacks alpha");
  if (!(c.alpha > 0.0 && c.alpha <= 1.0)) throw FormatError("index file alpha outside (0, 1]");

  while (std::getline(in, line)) {
    detail::strip_cr(line);
    if (line.empty() || line.front() == '#') continue;
    const auto idx = detail::parse_uint<std::size_t>(line, "index");
    if (!c.indices.empty() && idx <= c.indices.back()) {
      throw FormatError(idx == c.indices.back() ? "duplicate index " + std::to_string(idx)
                                                : "indices not ascending at " + std::to_string(idx));
    }
    if (n_total && idx >= *n_total) {
      throw FormatError("index " + std::to_string(idx) + " out of range for " + std::to_string(*n_total) +
                        " samples");
    }
    c.indices.push_back(idx);
  }
  if (c.indices.empty()) throw FormatError("index file lists no samples but alpha > 0");
  return c;
}

inline Coreset read_indices(const std::filesystem::path& path, std::optional<std::size_t> n_total = std::nullopt) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open index file " + path.string());
  return read_indices(in, n_total);
}

}  // namespace eva
