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

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include <json.hpp>

#include "eva/error.hpp"

namespace eva::train {

/// Training hyperparameters. Defaults follow the full-scale protocol
/// (200 epochs, batch 256, SGD momentum 0.9, weight decay 5e-4, lr 0.1
/// with cosine annealing).
struct TrainConfig {
  std::size_t epochs = 200;
  std::size_t batch_size = 256;
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::string schedule = "cosine";  // cosine | constant
  std::uint64_t seed = 0;
  std::string model = "small_cnn";
  std::size_t conv1_channels = 8;
  std::size_t conv2_channels = 16;
  std::string device = "cpu";
  bool augment = false;  // random horizontal flips during training
  bool deterministic = true;

  void validate() const {
    if (epochs < 1) throw ValidationError("epochs must be >= 1");
    if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
    if (!(lr > 0.0)) throw ValidationError("learning rate must be > 0");
    if (momentum < 0.0 || momentum >= 1.0) throw ValidationError("momentum must lie in [0, 1)");
    if (weight_decay < 0.0) throw ValidationError("weight_decay must be >= 0");
    if (schedule != "cosine" && schedule != "constant") throw ValidationError("schedule must be cosine or constant");
    if (conv1_channels < 1 || conv2_channels < 1) throw ValidationError("channel counts must be >= 1");
  }

  /// Learning rate for 0-based epoch `e` (stepped once per epoch).
  [[nodiscard]] double lr_at(std::size_t e) const {
    if (schedule == "constant") return lr;
    return 0.5 * lr * (1.0 + std::cos(3.14159265358979323846 * static_cast<double>(e) / static_cast<double>(epochs)));
  }

  [[nodiscard]] nlohmann::json to_json() const {
    return {{"epochs", epochs},
            {"batch_size", batch_size},
            {"lr", lr},
            {"momentum", momentum},
            {"weight_decay", weight_decay},
            {"schedule", schedule},
            {"seed", seed},
            {"model", model},
            {"conv1_channels", conv1_channels},
            {"conv2_channels", conv2_channels},
            {"device", device},
            {"augment", augment},
            {"deterministic", deterministic},
            {"normalization", "x/127.5 - 1"}};
  }
};

/// Flat view of an INI-style config file: keys are "section.key".
///
///   [train]
///   epochs = 30
///   [search]
///   starts = 1, 10, 20
class ConfigFile {
 public:
  ConfigFile() = default;

  static ConfigFile parse(std::istream& in) {
    ConfigFile cfg;
    std::string line;
    std::string section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.resize(hash);
      trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') throw ValidationError("config line " + std::to_string(lineno) + ": bad section");
        section = line.substr(1, line.size() - 2);
        trim(section);
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw ValidationError("config line " + std::to_string(lineno) + ": expected key = value");
      }
      std::string key = line.substr(0, eq);
      std::string value = line.substr(eq + 1);
      trim(key);
      trim(value);
      cfg.values_[section.empty() ? key : section + "." + key] = value;
    }
    return cfg;
  }

  static ConfigFile load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config file " + path.string());
    return parse(in);
  }

  [[nodiscard]] const std::map<std::string, std::string>& values() const { return values_; }

  [[nodiscard]] const std::string* find(const std::string& key) const {
    auto it = values_.find(key);
    return it == values_.end() ? nullptr : &it->second;
  }

 private:
  static void trim(std::string& s) {
    auto ws = [](unsigned char c) { return std::isspace(c) != 0; };
    while (!s.empty() && ws(static_cast<unsigned char>(s.back()))) s.pop_back();
    std::size_t i = 0;
    while (i < s.size() && ws(static_cast<unsigned char>(s[i]))) ++i;
    s.erase(0, i);
  }

  std::map<std::string, std::string> values_;
};

/// Applies the [train] section onto `cfg`; unknown train keys are rejected.
inline void apply_config(const ConfigFile& file, TrainConfig& cfg) {
  for (const auto& [key, value] : file.values()) {
    if (!key.starts_with("train.")) continue;
    const std::string k = key.substr(6);
    try {
      if (k == "epochs") cfg.epochs = std::stoul(value);
      else if (k == "batch_size") cfg.batch_size = std::stoul(value);
      else if (k == "lr") cfg.lr = std::stod(value);
      else if (k == "momentum") cfg.momentum = std::stod(value);
      else if (k == "weight_decay") cfg.weight_decay = std::stod(value);
      else if (k == "schedule") cfg.schedule = value;
      else if (k == "seed") cfg.seed = std::stoull(value);
      else if (k == "model") cfg.model = value;
      else if (k == "conv1_channels") cfg.conv1_channels = std::stoul(value);
      else if (k == "conv2_channels") cfg.conv2_channels = std::stoul(value);
      else if (k == "device") cfg.device = value;
      else if (k == "augment") cfg.augment = value == "true" || value == "1";
      else if (k == "deterministic") cfg.deterministic = value == "true" || value == "1";
      else throw ValidationError("unknown config key '" + key + "'");
    } catch (const std::logic_error& e) {
      if (dynamic_cast<const ValidationError*>(&e)) throw;
      throw ValidationError("bad value for config key '" + key + "': " + value);
    }
  }
}

/// Device from EVA_DEVICE (if set) or the config. The reference backend runs on CPU only.
inline std::string resolve_device(const TrainConfig& cfg) {
  const char* env = std::getenv("EVA_DEVICE");
  const std::string device = env && *env ? env : cfg.device;
  if (device != "cpu") throw ValidationError("device '" + device + "' is not supported by the reference backend");
  return device;
}

}  // namespace eva::train
