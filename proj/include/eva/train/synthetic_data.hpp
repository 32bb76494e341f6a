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

// Easy, linearly separable image datasets for desk-scale end-to-end runs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "eva/detail/rng.hpp"
#include "eva/error.hpp"
#include "eva/train/dataset.hpp"

namespace eva::train {

struct SeparableSpec {
  std::size_t n_train = 2000;
  std::size_t n_val = 0;
  std::size_t n_test = 500;
  std::uint32_t n_classes = 4;
  std::uint32_t height = 16;
  std::uint32_t width = 16;
  double noise = 40.0;  // pixel noise standard deviation (0..255 scale)
  std::uint64_t seed = 0;
};

/// Each class owns a random +/- block pattern (4x4 blocks); images are the
/// class pattern plus Gaussian pixel noise. Labels are balanced round-robin.
inline Dataset make_separable_dataset(const SeparableSpec& opts) {
  if (opts.n_classes < 2) throw ValidationError("separable dataset needs at least 2 classes");
  if (opts.n_train == 0 || opts.n_test == 0) throw ValidationError("separable dataset needs train and test samples");
  std::mt19937_64 rng(opts.seed);
  const std::size_t pixels = static_cast<std::size_t>(opts.height) * opts.width;
  std::vector<std::vector<double>> prototypes(opts.n_classes, std::vector<double>(pixels));
  for (auto& proto : prototypes) {
    const std::size_t bh = (opts.height + 3) / 4;
    const std::size_t bw = (opts.width + 3) / 4;
    std::vector<double> blocks(bh * bw);
    for (auto& b : blocks) b = eva::detail::uniform01(rng) < 0.5 ? -1.0 : 1.0;
    for (std::size_t y = 0; y < opts.height; ++y) {
      for (std::size_t x = 0; x < opts.width; ++x) proto[y * opts.width + x] = blocks[(y / 4) * bw + x / 4];
    }
  }
  auto fill = [&](Split& split, std::size_t n) {
    split.labels.resize(n);
    split.images.resize(n * pixels);
    for (std::size_t i = 0; i < n; ++i) {
      const auto y = static_cast<std::uint16_t>(i % opts.n_classes);
      split.labels[i] = y;
      for (std::size_t p = 0; p < pixels; ++p) {
        const double v = 128.0 + 60.0 * prototypes[y][p] + opts.noise * eva::detail::normal01(rng);
        split.images[i * pixels + p] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  };
  Dataset d;
  d.ref.name = "separable";
  d.ref.n_classes = opts.n_classes;
  d.ref.shape = {opts.height, opts.width, 1};
  fill(d.train, opts.n_train);
  fill(d.val, opts.n_val);
  fill(d.test, opts.n_test);
  d.ref.n_train = opts.n_train;
  d.ref.n_val = opts.n_val;
  d.ref.n_test = opts.n_test;
  return d;
}

}  // namespace eva::train
