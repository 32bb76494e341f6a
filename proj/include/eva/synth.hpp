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

// Synthetic training-dynamics logs with known per-sample ground truth.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "eva/detail/rng.hpp"
#include "eva/dynlog.hpp"
#include "eva/error.hpp"

namespace eva {

enum class TrajectoryProfile { constant, linear_improving, oscillating, random_walk, mixed };

inline TrajectoryProfile parse_profile(std::string_view name) {
  if (name == "constant") return TrajectoryProfile::constant;
  if (name == "linear-improving" || name == "linear_improving") return TrajectoryProfile::linear_improving;
  if (name == "oscillating") return TrajectoryProfile::oscillating;
  if (name == "random-walk" || name == "random_walk") return TrajectoryProfile::random_walk;
  if (name == "mixed") return TrajectoryProfile::mixed;
  throw ValidationError("unknown trajectory profile '" + std::string(name) + "'");
}

inline std::string_view profile_name(TrajectoryProfile p) {
  switch (p) {
    case TrajectoryProfile::constant: return "constant";
    case TrajectoryProfile::linear_improving: return "linear-improving";
    case TrajectoryProfile::oscillating: return "oscillating";
    case TrajectoryProfile::random_walk: return "random-walk";
    case TrajectoryProfile::mixed: return "mixed";
  }
  return "unknown";
}

struct SynthOptions {
  /// Per-sample oscillation amplitude override (oscillating samples only).
  std::optional<std::vector<double>> amplitudes;
  /// Oscillations grow or decay over the run with a per-sample rate.
  bool envelope = true;
};

/// Generated log plus the raw probability trajectories it was derived from.
struct SyntheticLog {
  DynamicsLog log;
  std::vector<double> probs;  // T x N x C, epoch-major
  std::vector<TrajectoryProfile> profiles;
  std::vector<double> amplitudes;  // 0 for non-oscillating samples

  [[nodiscard]] std::span<const double> row(std::size_t epoch, std::size_t sample) const {
    const std::size_t n = log.n_samples();
    const std::size_t c = log.n_classes();
    return std::span<const double>(probs).subspan(((epoch - 1) * n + sample) * c, c);
  }
};

/// Generates per-sample target-probability trajectories following `profile`
/// (mixed cycles through the four basic profiles by sample index) and
/// converts them into log records with the standard derivation.
inline SyntheticLog gen_synthetic_log(std::size_t n, std::size_t c, std::size_t t, std::uint64_t seed,
                                      TrajectoryProfile profile, const SynthOptions& opt = {}) {
  if (n < 1 || t < 1) throw ValidationError("synthetic log needs n >= 1 and t >= 1");
  if (c < 2) throw ValidationError("synthetic log needs at least 2 classes");
  if (opt.amplitudes && opt.amplitudes->size() != n) throw ValidationError("amplitude override must have n entries");

  std::mt19937_64 rng(seed);
  std::vector<std::uint16_t> labels(n);
  std::vector<TrajectoryProfile> profiles(n);
  std::vector<double> amplitudes(n, 0.0);
  std::vector<double> target(t * n);  // q[epoch][sample]
  std::vector<double> other_w(n * c);  // non-target mass split, fixed per sample

  constexpr double kLo = 0.02;
  constexpr double kHi = 0.98;
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = static_cast<std::uint16_t>(detail::uniform_below(rng, c));
    profiles[i] = profile == TrajectoryProfile::mixed ? static_cast<TrajectoryProfile>(i % 4) : profile;

    double wsum = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double w = j == labels[i] ? 0.0 : 0.1 + detail::uniform01(rng);
      other_w[i * c + j] = w;
      wsum += w;
    }
    for (std::size_t j = 0; j < c; ++j) other_w[i * c + j] /= wsum;

    auto q = [&](std::size_t epoch) -> double& { return target[(epoch - 1) * n + i]; };
    switch (profiles[i]) {
      case TrajectoryProfile::constant: {
        const double level = 0.05 + 0.9 * detail::uniform01(rng);
        for (std::size_t e = 1; e <= t; ++e) q(e) = level;
        break;
      }
      case TrajectoryProfile::linear_improving: {
        const double q0 = 0.05 + 0.25 * detail::uniform01(rng);
        const double q1 = 0.8 + 0.18 * detail::uniform01(rng);
        for (std::size_t e = 1; e <= t; ++e) {
          const double frac = t == 1 ? 1.0 : static_cast<double>(e - 1) / static_cast<double>(t - 1);
          q(e) = q0 + (q1 - q0) * frac;
        }
        break;
      }
      case TrajectoryProfile::oscillating: {
        const double base = 0.3 + 0.4 * detail::uniform01(rng);
        const double amp = opt.amplitudes ? (*opt.amplitudes)[i] : 0.02 + 0.16 * detail::uniform01(rng);
        const double rate = opt.envelope ? 2.0 * detail::uniform01(rng) - 1.0 : 0.0;
        const double drift = opt.envelope ? 0.2 * detail::uniform01(rng) - 0.1 : 0.0;
        amplitudes[i] = amp;
        for (std::size_t e = 1; e <= t; ++e) {
          const double pos = static_cast<double>(e) / static_cast<double>(t);
          const double env = std::exp(rate * (pos - 0.5));
          const double sign = e % 2 == 0 ? 1.0 : -1.0;
          q(e) = std::clamp(base + drift * pos + sign * amp * env, kLo, kHi);
        }
        break;
      }
      case TrajectoryProfile::random_walk: {
        double level = 0.2 + 0.6 * detail::uniform01(rng);
        for (std::size_t e = 1; e <= t; ++e) {
          q(e) = level;
          level = std::clamp(level + 0.05 * detail::normal01(rng), kLo, kHi);
        }
        break;
      }
      case TrajectoryProfile::mixed: break;
    }
  }

  SyntheticLog out{DynamicsLog(labels, static_cast<std::uint32_t>(c),
                               {{"source", "synthetic"},
                                {"profile", profile_name(profile)},
                                {"seed", seed},
                                {"envelope", opt.envelope}}),
                   std::vector<double>(t * n * c), std::move(profiles), std::move(amplitudes)};
  for (std::size_t e = 1; e <= t; ++e) {
    std::span<double> block(out.probs.data() + (e - 1) * n * c, n * c);
    for (std::size_t i = 0; i < n; ++i) {
      const double qi = target[(e - 1) * n + i];
      for (std::size_t j = 0; j < c; ++j) {
        block[i * c + j] = j == labels[i] ? qi : (1.0 - qi) * other_w[i * c + j];
      }
    }
    out.log.push_epoch(derive_epoch<double>(block, out.log.labels(), c));
  }
  return out;
}

}  // namespace eva
