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

// Dual-window grid search and the shipped per-dataset optimal windows.

#include <algorithm>
#include <array>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <json.hpp>

#include "eva/dynlog.hpp"
#include "eva/error.hpp"
#include "eva/scorers.hpp"
#include "eva/selector.hpp"

namespace eva {

struct SearchGrid {
  std::vector<std::size_t> starts;
  std::size_t K = 10;
  std::size_t T = 200;

  void validate() const {
    if (starts.empty()) throw ValidationError("search grid has no start epochs");
    if (K < 2) throw ValidationError("search grid window length K must be >= 2");
    for (std::size_t i = 0; i < starts.size(); ++i) {
      if (starts[i] < 1) throw ValidationError("search grid start epochs must be >= 1");
      if (starts[i] + K - 1 > T) {
        throw ValidationError("grid start " + std::to_string(starts[i]) + " + K - 1 exceeds T = " +
                              std::to_string(T));
      }
      if (i > 0 && starts[i] <= starts[i - 1]) throw ValidationError("grid starts must be strictly ascending");
    }
  }
};

/// {1} U {10, 20, ...} up to the last start whose window fits in T.
inline SearchGrid default_grid(std::size_t T = 200, std::size_t K = 10) {
  SearchGrid g{{1}, K, T};
  for (std::size_t s = 10; s + K - 1 <= T; s += 10) g.starts.push_back(s);
  return g;
}

/// All non-overlapping (t_e, t_l) pairs, ordered lexicographically.
inline std::vector<WindowSpec> enumerate_windows(const SearchGrid& grid) {
  grid.validate();
  std::vector<WindowSpec> out;
  for (std::size_t a = 0; a < grid.starts.size(); ++a) {
    for (std::size_t b = a + 1; b < grid.starts.size(); ++b) {
      const WindowSpec w{grid.starts[a], grid.starts[b], grid.K};
      if (w.early_end() < w.t_l) out.push_back(w);
    }
  }
  return out;
}

/// Trains on a coreset with the given seed and returns test accuracy in [0, 1].
using CoresetEvaluator = std::function<double(const Coreset&, std::uint64_t seed)>;

struct SearchRow {
  WindowSpec window;
  std::vector<double> accuracies;  // one per seed, in seed order
  double mean_accuracy = 0.0;
};

struct SearchResult {
  double alpha = 0.0;
  std::vector<std::uint64_t> seeds;
  std::vector<SearchRow> rows;  // sorted by (t_e, t_l)
  WindowSpec best;
  nlohmann::json proxy = nlohmann::json::object();  // evaluator settings, e.g. reduced epochs

  [[nodiscard]] nlohmann::json to_json() const {
    nlohmann::json rows_json = nlohmann::json::array();
    for (const auto& r : rows) {
      rows_json.push_back({{"t_e", r.window.t_e},
                           {"t_E", r.window.early_end()},
                           {"t_l", r.window.t_l},
                           {"t_L", r.window.late_end()},
                           {"K", r.window.K},
                           {"accuracies", r.accuracies},
                           {"mean", r.mean_accuracy}});
    }
    return {{"alpha", alpha},
            {"seeds", seeds},
            {"candidates", rows_json},
            {"best", {{"t_e", best.t_e}, {"t_l", best.t_l}, {"K", best.K}}},
            {"proxy", proxy}};
  }

  [[nodiscard]] std::string to_text() const {
    std::ostringstream out;
    out << "# window search alpha=" << detail::format_shortest(alpha) << " candidates=" << rows.size()
        << " proxy=" << proxy.dump() << '\n';
    out << "t_e\tt_E\tt_l\tt_L";
    for (auto s : seeds) out << "\tacc[seed=" << s << ']';
    out << "\tmean\n";
    for (const auto& r : rows) {
      out << r.window.t_e << '\t' << r.window.early_end() << '\t' << r.window.t_l << '\t' << r.window.late_end();
      for (double a : r.accuracies) out << '\t' << detail::format_shortest(a);
      out << '\t' << detail::format_shortest(r.mean_accuracy) << '\n';
    }
    out << "best\t(" << best.t_e << ", " << best.t_l << ")\n";
    return out.str();
  }
};

struct SearchOptions {
  std::size_t jobs = 1;
  nlohmann::json proxy = nlohmann::json::object();
};

/// Scores, selects and evaluates every candidate window for every seed.
/// Candidates run independently (up to `jobs` at once); the evaluator must be
/// safe to call concurrently when jobs > 1.
inline SearchResult search(const DynamicsLog& log, const SearchGrid& grid, double alpha,
                           const CoresetEvaluator& evaluator, std::span<const std::uint64_t> seeds,
                           const SearchOptions& opt = {}) {
  check_alpha(alpha);
  if (seeds.empty()) throw ValidationError("search needs at least one seed");
  if (grid.T != log.n_epochs()) {
    throw ValidationError("search grid T = " + std::to_string(grid.T) + " does not match log T = " +
                          std::to_string(log.n_epochs()));
  }
  const auto candidates = enumerate_windows(grid);
  if (candidates.empty()) throw ValidationError("search grid yields no non-overlapping window pair");

  SearchResult result;
  result.alpha = alpha;
  result.seeds.assign(seeds.begin(), seeds.end());
  result.proxy = opt.proxy;
  result.rows.resize(candidates.size());

  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr first_error;
  auto worker = [&] {
    for (std::size_t c = next++; c < candidates.size(); c = next++) {
      {
        std::lock_guard lock(err_mu);
        if (first_error) return;
      }
      const WindowSpec& w = candidates[c];
      try {
        const Coreset coreset = select_top(eva_score(log, w), alpha);
        SearchRow row{w, {}, 0.0};
        for (auto seed : seeds) {
          const double acc = evaluator(coreset, seed);
          if (!(acc >= 0.0 && acc <= 1.0)) throw std::runtime_error("accuracy outside [0, 1]");
          row.accuracies.push_back(acc);
        }
        double sum = 0.0;
        for (double a : row.accuracies) sum += a;
        row.mean_accuracy = sum / static_cast<double>(row.accuracies.size());
        result.rows[c] = std::move(row);
      } catch (const std::exception& e) {
        std::lock_guard lock(err_mu);
        if (!first_error) {
          first_error = std::make_exception_ptr(std::runtime_error(
              "evaluation failed for window (" + std::to_string(w.t_e) + ", " + std::to_string(w.t_l) +
              "): " + e.what()));
        }
      }
    }
  };
  const std::size_t n_threads = std::clamp<std::size_t>(opt.jobs, 1, candidates.size());
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  if (first_error) std::rethrow_exception(first_error);

  // Candidates are already lexicographic; the first maximum wins ties.
  std::size_t best = 0;
  for (std::size_t c = 1; c < result.rows.size(); ++c) {
    if (result.rows[c].mean_accuracy > result.rows[best].mean_accuracy) best = c;
  }
  result.best = result.rows[best].window;
  return result;
}

struct WindowPreset {
  std::string_view dataset;
  double alpha;
  std::size_t t_e;
  std::size_t t_l;
};

/// Optimal (t_e, t_l) per dataset and selection rate, K = 10.
inline constexpr std::array<WindowPreset, 26> kWindowPresets{{
    {"OrganAMNIST", 0.02, 1, 190},   {"OrganAMNIST", 0.05, 1, 190},   {"OrganAMNIST", 0.10, 100, 190},
    {"OrganAMNIST", 0.20, 1, 150},   {"OrganAMNIST", 0.30, 90, 150},  {"OrganAMNIST", 0.50, 90, 150},
    {"OrganAMNIST", 0.70, 1, 190},   {"OrganAMNIST", 0.90, 90, 190},  {"OrganSMNIST", 0.02, 90, 100},
    {"OrganSMNIST", 0.05, 150, 190}, {"OrganSMNIST", 0.10, 100, 190}, {"OrganSMNIST", 0.20, 100, 190},
    {"OrganSMNIST", 0.30, 170, 190}, {"OrganSMNIST", 0.50, 150, 190}, {"OrganSMNIST", 0.70, 90, 150},
    {"OrganSMNIST", 0.90, 1, 100},   {"CIFAR-10", 0.02, 1, 100},      {"CIFAR-10", 0.05, 1, 150},
    {"CIFAR-10", 0.10, 1, 190},      {"CIFAR-10", 0.20, 1, 100},      {"CIFAR-10", 0.30, 100, 190},
    {"CIFAR-100", 0.02, 170, 190},   {"CIFAR-100", 0.05, 100, 190},   {"CIFAR-100", 0.10, 170, 190},
    {"CIFAR-100", 0.20, 100, 190},   {"CIFAR-100", 0.30, 90, 190},
}};

namespace detail {

// "CIFAR-10", "cifar10" and "Cifar_10" all compare equal.
inline std::string normalize_dataset_name(std::string_view name) {
  std::string out;
  for (char ch : name) {
    if (std::isalnum(static_cast<unsigned char>(ch))) out.push_back(static_cast<char>(std::tolower(ch)));
  }
  return out;
}

}  // namespace detail

inline std::optional<WindowSpec> find_preset(std::string_view dataset, double alpha) {
  const std::string key = detail::normalize_dataset_name(dataset);
  for (const auto& p : kWindowPresets) {
    if (detail::normalize_dataset_name(p.dataset) == key && std::abs(p.alpha - alpha) < 1e-9) {
      return WindowSpec{p.t_e, p.t_l, 10};
    }
  }
  return std::nullopt;
}

inline WindowSpec preset_windows(std::string_view dataset, double alpha) {
  if (auto w = find_preset(dataset, alpha)) return *w;
  throw ValidationError("no preset window for dataset '" + std::string(dataset) + "' at alpha " +
                        detail::format_shortest(alpha));
}

}  // namespace eva
