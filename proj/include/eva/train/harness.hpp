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

// Full-data training with dynamics logging, coreset retraining, evaluation.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "eva/detail/rng.hpp"
#include "eva/dynlog.hpp"
#include "eva/error.hpp"
#include "eva/selector.hpp"
#include "eva/train/backend.hpp"
#include "eva/train/config.hpp"
#include "eva/train/dataset.hpp"
#include "eva/train/small_cnn.hpp"

namespace eva::train {

inline std::unique_ptr<Backend> make_backend(const TrainConfig& cfg, const DatasetRef& ref) {
  cfg.validate();
  resolve_device(cfg);
  if (cfg.model == "small_cnn") {
    return std::make_unique<SmallCnn>(CnnShape{ref.shape, cfg.conv1_channels, cfg.conv2_channels, ref.n_classes}, cfg);
  }
  throw ValidationError("model '" + cfg.model + "' is not available; the reference backend provides small_cnn");
}

/// Top-1 accuracy of `model` on `split`.
inline double evaluate(const Backend& model, const Split& split) {
  if (split.size() == 0) throw ValidationError("cannot evaluate on an empty split");
  const std::size_t c = model.n_classes();
  std::vector<float> probs(split.size() * c);
  model.predict_proba(split, probs);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < split.size(); ++i) {
    const float* row = probs.data() + i * c;
    std::size_t arg = 0;
    for (std::size_t j = 1; j < c; ++j) {
      if (row[j] > row[arg]) arg = j;
    }
    correct += arg == split.labels[i] ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(split.size());
}

namespace detail {

// Separate streams so that logging or evaluation never perturbs training.
inline constexpr std::uint64_t kShuffleStream = 0x9E3779B97F4A7C15ULL;

/// Trains `model` on `indices` of the train split. After every epoch, if
/// `writer` is set, runs inference over the whole train split in index
/// order and appends the epoch to the log.
inline void run_training(Backend& model, const Dataset& data, std::span<const std::size_t> indices,
                         const TrainConfig& cfg, LogWriter* writer) {
  std::vector<std::size_t> order(indices.begin(), indices.end());
  std::mt19937_64 rng(cfg.seed ^ kShuffleStream);
  std::vector<float> probs;
  if (writer) probs.resize(data.train.size() * model.n_classes());
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    for (std::size_t k = order.size(); k > 1; --k) {
      std::swap(order[k - 1], order[eva::detail::uniform_below(rng, k)]);
    }
    const double lr = cfg.lr_at(e);
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), b + cfg.batch_size);
      model.train_step(data.train, std::span<const std::size_t>(order).subspan(b, end - b), lr, rng);
    }
    if (writer) {
      model.predict_proba(data.train, probs);
      writer->append_epoch(e + 1, std::span<const float>(probs));
    }
  }
}

}  // namespace detail

struct FullRun {
  std::unique_ptr<Backend> model;
  DynamicsLog log;  // empty when logging was disabled
  double test_accuracy = 0.0;
};

/// Trains on the whole training split. When `log_path` is non-empty, every
/// epoch's predictions are recorded there.
inline FullRun train_full(const Dataset& data, const TrainConfig& cfg, const std::filesystem::path& log_path) {
  auto model = make_backend(cfg, data.ref);
  std::vector<std::size_t> all(data.train.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::optional<LogWriter> writer;
  if (!log_path.empty()) {
    writer.emplace(log_path, data.train.labels, data.ref.n_classes,
                   nlohmann::json{{"source", log_path.filename().string()},
                                  {"dataset", data.ref.name},
                                  {"model", cfg.model},
                                  {"seed", cfg.seed},
                                  {"config", cfg.to_json()}});
  }
  detail::run_training(*model, data, all, cfg, writer ? &*writer : nullptr);
  FullRun run;
  run.test_accuracy = evaluate(*model, data.test);
  run.model = std::move(model);
  if (writer) {
    writer.reset();
    run.log = read_log(log_path);
  }
  return run;
}

struct SubsetRun {
  std::unique_ptr<Backend> model;
  double test_accuracy = 0.0;
};

/// Trains only on the coreset's samples with the same hyperparameters.
inline SubsetRun train_subset_model(const Dataset& data, const Coreset& coreset, const TrainConfig& cfg) {
  if (coreset.indices.empty()) throw ValidationError("cannot train on an empty coreset");
  for (std::size_t k = 0; k < coreset.indices.size(); ++k) {
    if (coreset.indices[k] >= data.train.size() || (k > 0 && coreset.indices[k] <= coreset.indices[k - 1])) {
      throw ValidationError("coreset indices must be ascending and below " + std::to_string(data.train.size()));
    }
  }
  auto model = make_backend(cfg, data.ref);
  detail::run_training(*model, data, coreset.indices, cfg, nullptr);
  SubsetRun run;
  run.test_accuracy = evaluate(*model, data.test);
  run.model = std::move(model);
  return run;
}

inline double train_subset(const Dataset& data, const Coreset& coreset, const TrainConfig& cfg) {
  return train_subset_model(data, coreset, cfg).test_accuracy;
}

}  // namespace eva::train
