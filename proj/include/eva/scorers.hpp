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

// Per-sample importance scores computed from a training-dynamics log.
//
// Every scorer is a pure function of (log, parameters). Statistics over the
// error score S_t are accumulated in double precision from the stored
// float32 values.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "eva/detail/rng.hpp"
#include "eva/dynlog.hpp"
#include "eva/error.hpp"

namespace eva {

enum class Method { eva, el2n, forgetting, entropy, aum, random, var_single, exp_single, exp_dual, var_entire };

inline constexpr std::string_view method_tag(Method m) {
  switch (m) {
    case Method::eva: return "eva";
    case Method::el2n: return "el2n";
    case Method::forgetting: return "forgetting";
    case Method::entropy: return "entropy";
    case Method::aum: return "aum";
    case Method::random: return "random";
    case Method::var_single: return "var_single";
    case Method::exp_single: return "exp_single";
    case Method::exp_dual: return "exp_dual";
    case Method::var_entire: return "var_entire";
  }
  return "unknown";
}

inline Method parse_method(std::string_view tag) {
  for (Method m : {Method::eva, Method::el2n, Method::forgetting, Method::entropy, Method::aum, Method::random,
                   Method::var_single, Method::exp_single, Method::exp_dual, Method::var_entire}) {
    if (method_tag(m) == tag) return m;
  }
  throw ValidationError("unknown scoring method '" + std::string(tag) + "'");
}

/// One importance value per training sample.
struct ScoreVector {
  Method method = Method::eva;
  std::vector<double> values;
  bool higher_is_important = true;
  nlohmann::json params = nlohmann::json::object();
  std::string source_log;

  [[nodiscard]] std::size_t size() const { return values.size(); }
};

/// Dual-window parameters. Windows are [t_e, t_e+K-1] and [t_l, t_l+K-1], 1-based.
struct WindowSpec {
  std::size_t t_e = 1;
  std::size_t t_l = 1;
  std::size_t K = 10;

  [[nodiscard]] std::size_t early_end() const { return t_e + K - 1; }
  [[nodiscard]] std::size_t late_end() const { return t_l + K - 1; }

  /// Throws ValidationError naming the violated constraint.
  void validate(std::size_t n_epochs) const {
    if (K < 2) throw ValidationError("window length K must be >= 2 (got " + std::to_string(K) + ")");
    if (t_e < 1) throw ValidationError("early window must start at epoch >= 1");
    if (early_end() >= t_l) {
      throw ValidationError("windows overlap: t_e + K - 1 = " + std::to_string(early_end()) +
                            " must be < t_l = " + std::to_string(t_l));
    }
    if (late_end() > n_epochs) {
      throw ValidationError("late window ends at epoch " + std::to_string(late_end()) + " beyond recorded T = " +
                            std::to_string(n_epochs));
    }
  }

  friend auto operator<=>(const WindowSpec&, const WindowSpec&) = default;
};

namespace detail {

inline void check_window(const DynamicsLog& log, std::size_t start, std::size_t K, std::size_t min_k) {
  if (K < min_k) {
    throw ValidationError("window length K must be >= " + std::to_string(min_k) + " (got " + std::to_string(K) +
                          ")");
  }
  if (start < 1 || start + K - 1 > log.n_epochs()) {
    throw ValidationError("window [" + std::to_string(start) + ", " + std::to_string(start + K - 1) +
                          "] outside recorded epochs 1.." + std::to_string(log.n_epochs()));
  }
}

// Accumulated relative to the first value in the window, so a constant
// sequence yields its value exactly (and a variance of exactly 0).
inline std::vector<double> window_means(const DynamicsLog& log, std::size_t start, std::size_t K) {
  const auto first = log.epoch_records(start);
  std::vector<double> base(first.size());
  for (std::size_t i = 0; i < base.size(); ++i) base[i] = static_cast<double>(first[i].error_l2);
  std::vector<double> dev(base.size(), 0.0);
  for (std::size_t t = start + 1; t < start + K; ++t) {
    const auto block = log.epoch_records(t);
    for (std::size_t i = 0; i < dev.size(); ++i) dev[i] += static_cast<double>(block[i].error_l2) - base[i];
  }
  for (std::size_t i = 0; i < base.size(); ++i) base[i] += dev[i] / static_cast<double>(K);
  return base;
}

inline std::vector<double> window_variances(const DynamicsLog& log, std::size_t start, std::size_t K) {
  const std::vector<double> mean = window_means(log, start, K);
  std::vector<double> ss(log.n_samples(), 0.0);
  for (std::size_t t = start; t < start + K; ++t) {
    const auto block = log.epoch_records(t);
    for (std::size_t i = 0; i < ss.size(); ++i) {
      const double d = static_cast<double>(block[i].error_l2) - mean[i];
      ss[i] += d * d;
    }
  }
  for (double& s : ss) s /= static_cast<double>(K);
  return ss;
}

inline ScoreVector make_scores(Method m, std::vector<double> values, bool higher, nlohmann::json params) {
  return ScoreVector{m, std::move(values), higher, std::move(params), {}};
}

}  // namespace detail

/// Population variance (divide by K) of S over epochs [start, start+K-1].
inline ScoreVector window_variance(const DynamicsLog& log, std::size_t start, std::size_t K) {
  detail::check_window(log, start, K, 2);
  return detail::make_scores(Method::var_single, detail::window_variances(log, start, K), true,
                             {{"start", start}, {"K", K}});
}

/// Mean of S over epochs [start, start+K-1].
inline ScoreVector window_expectation(const DynamicsLog& log, std::size_t start, std::size_t K) {
  detail::check_window(log, start, K, 1);
  return detail::make_scores(Method::exp_single, detail::window_means(log, start, K), true,
                             {{"start", start}, {"K", K}});
}

/// EVA: sum of the early- and late-window variances.
inline ScoreVector eva_score(const DynamicsLog& log, const WindowSpec& w) {
  w.validate(log.n_epochs());
  const auto early = detail::window_variances(log, w.t_e, w.K);
  const auto late = detail::window_variances(log, w.t_l, w.K);
  std::vector<double> v(early.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = early[i] + late[i];
  return detail::make_scores(Method::eva, std::move(v), true, {{"t_e", w.t_e}, {"t_l", w.t_l}, {"K", w.K}});
}

/// Exp-D ablation arm: arithmetic mean of the two window means.
inline ScoreVector exp_dual_score(const DynamicsLog& log, const WindowSpec& w) {
  w.validate(log.n_epochs());
  const auto early = detail::window_means(log, w.t_e, w.K);
  const auto late = detail::window_means(log, w.t_l, w.K);
  std::vector<double> v(early.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.5 * (early[i] + late[i]);
  return detail::make_scores(Method::exp_dual, std::move(v), true,
                             {{"t_e", w.t_e}, {"t_l", w.t_l}, {"K", w.K}, {"combiner", "mean"}});
}

/// Variance over the whole recorded run, i.e. window_variance(1, T).
inline ScoreVector var_entire_score(const DynamicsLog& log) {
  ScoreVector s = window_variance(log, 1, log.n_epochs());
  s.method = Method::var_entire;
  return s;
}

/// Mean error score over a window, averaged across one or more runs.
inline ScoreVector el2n_score(std::span<const DynamicsLog> logs, std::size_t start = 1, std::size_t K = 10) {
  if (logs.empty()) throw ValidationError("el2n needs at least one log");
  const auto& first = logs.front();
  std::vector<double> acc(first.n_samples(), 0.0);
  for (const auto& log : logs) {
    if (log.n_samples() != first.n_samples() || log.n_classes() != first.n_classes() ||
        !std::ranges::equal(log.labels(), first.labels())) {
      throw ValidationError("el2n logs disagree on samples, classes or labels");
    }
    detail::check_window(log, start, K, 1);
    const auto m = detail::window_means(log, start, K);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += m[i];
  }
  if (logs.size() > 1) {
    for (double& a : acc) a /= static_cast<double>(logs.size());
  }
  return detail::make_scores(Method::el2n, std::move(acc), true,
                             {{"start", start}, {"K", K}, {"runs", logs.size()}});
}

inline ScoreVector el2n_score(const DynamicsLog& log, std::size_t start = 1, std::size_t K = 10) {
  return el2n_score(std::span<const DynamicsLog>(&log, 1), start, K);
}

/// Number of correct -> incorrect transitions. Samples never classified
/// correctly get the sentinel T.
inline ScoreVector forgetting_score(const DynamicsLog& log) {
  const std::size_t T = log.n_epochs();
  if (T < 2) throw ValidationError("forgetting needs at least 2 recorded epochs");
  const auto labels = log.labels();
  std::vector<double> count(log.n_samples(), 0.0);
  std::vector<char> prev(log.n_samples(), 0);
  std::vector<char> ever(log.n_samples(), 0);
  for (std::size_t t = 1; t <= T; ++t) {
    const auto block = log.epoch_records(t);
    for (std::size_t i = 0; i < count.size(); ++i) {
      const char correct = block[i].predicted_class == labels[i] ? 1 : 0;
      if (t > 1 && prev[i] && !correct) count[i] += 1.0;
      prev[i] = correct;
      ever[i] |= correct;
    }
  }
  for (std::size_t i = 0; i < count.size(); ++i) {
    if (!ever[i]) count[i] = static_cast<double>(T);
  }
  return detail::make_scores(Method::forgetting, std::move(count), true, {{"never_correct_sentinel", T}});
}

/// Prediction entropy at a single epoch (0 selects the final epoch T).
inline ScoreVector entropy_score(const DynamicsLog& log, std::size_t epoch = 0) {
  if (epoch == 0) epoch = log.n_epochs();
  if (epoch < 1 || epoch > log.n_epochs()) {
    throw ValidationError("entropy epoch " + std::to_string(epoch) + " outside 1.." +
                          std::to_string(log.n_epochs()));
  }
  const auto block = log.epoch_records(epoch);
  std::vector<double> v(block.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(block[i].entropy);
  return detail::make_scores(Method::entropy, std::move(v), true, {{"epoch", epoch}});
}

/// Mean probability margin p_target - p_max_other over all epochs. Low
/// values mark important samples.
inline ScoreVector aum_score(const DynamicsLog& log) {
  const std::size_t T = log.n_epochs();
  if (T < 1) throw ValidationError("aum needs at least 1 recorded epoch");
  // Shifted accumulation: a constant margin sequence reproduces its value exactly.
  const auto first = log.epoch_records(1);
  std::vector<double> base(first.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    base[i] = static_cast<double>(first[i].p_target) - static_cast<double>(first[i].p_max_other);
  }
  std::vector<double> dev(base.size(), 0.0);
  for (std::size_t t = 2; t <= T; ++t) {
    const auto block = log.epoch_records(t);
    for (std::size_t i = 0; i < dev.size(); ++i) {
      dev[i] += (static_cast<double>(block[i].p_target) - static_cast<double>(block[i].p_max_other)) - base[i];
    }
  }
  for (std::size_t i = 0; i < base.size(); ++i) base[i] += dev[i] / static_cast<double>(T);
  return detail::make_scores(Method::aum, std::move(base), false, {{"margin", "probability"}});
}

/// Seeded uniform scores in [0, 1).
inline ScoreVector random_score(std::int64_t n, std::uint64_t seed) {
  if (n <= 0) throw ValidationError("random scores need n > 0");
  std::mt19937_64 rng(seed);
  std::vector<double> v(static_cast<std::size_t>(n));
  for (double& x : v) x = detail::uniform01(rng);
  return ScoreVector{Method::random, std::move(v), true, {{"seed", seed}}, {}};
}

}  // namespace eva
