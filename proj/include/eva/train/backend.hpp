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

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>

#include "eva/train/dataset.hpp"

namespace eva::train {

/// Training/inference contract the harness drives. One instance is one model.
class Backend {
 public:
  virtual ~Backend() = default;

  [[nodiscard]] virtual std::size_t n_classes() const = 0;

  /// One optimizer step on `batch` (indices into `data`).
  virtual void train_step(const Split& data, std::span<const std::size_t> batch, double lr,
                          std::mt19937_64& rng) = 0;

  /// Post-softmax probabilities for every sample of `data`, in index order,
  /// written row-major into `out` (size() x n_classes()). Must not alter
  /// model state.
  virtual void predict_proba(const Split& data, std::span<float> out) const = 0;

  virtual void save(const std::filesystem::path& path) const = 0;
};

}  // namespace eva::train
