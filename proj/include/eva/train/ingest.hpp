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

// Importers into the canonical dataset layout: MedMNIST-style .npz archives
// and CIFAR binary batches.

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "eva/error.hpp"
#include "eva/train/dataset.hpp"
#include "eva/train/npz.hpp"

namespace eva::train {

/// Class counts of known 2D MedMNIST and CIFAR datasets, keyed by lowercase name.
inline std::optional<std::uint32_t> known_class_count(std::string name) {
  for (auto& ch : name) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  static const std::pair<const char*, std::uint32_t> kKnown[] = {
      {"organamnist", 11}, {"organcmnist", 11}, {"organsmnist", 11}, {"pathmnist", 9},  {"dermamnist", 7},
      {"octmnist", 4},     {"pneumoniamnist", 2}, {"retinamnist", 5}, {"breastmnist", 2}, {"bloodmnist", 8},
      {"tissuemnist", 8},  {"cifar10", 10},     {"cifar-10", 10},   {"cifar100", 100}, {"cifar-100", 100}};
  for (const auto& [k, c] : kKnown) {
    if (name == k) return c;
  }
  return std::nullopt;
}

struct IngestOptions {
  std::string name;                       // defaults to the archive stem
  std::optional<std::uint32_t> n_classes;  // defaults to the known table, then max label + 1
};

namespace detail {

inline const NpyArray& member(const std::map<std::string, NpyArray>& npz, const std::string& key) {
  auto it = npz.find(key);
  if (it == npz.end()) throw FormatError("archive missing entry '" + key + "'");
  return it->second;
}

}  // namespace detail

/// Imports a MedMNIST-style archive with train/val/test images and labels.
inline DatasetRef ingest_npz(const std::filesystem::path& archive, const std::filesystem::path& out_dir,
                             IngestOptions opt = {}) {
  const auto npz = read_npz(archive);
  Dataset d;
  d.ref.name = opt.name.empty() ? archive.stem().string() : opt.name;
  Split* splits[3] = {&d.train, &d.val, &d.test};
  std::uint64_t max_label = 0;
  for (int s = 0; s < 3; ++s) {
    const std::string base = kSplitNames[s];
    const auto& img = detail::member(npz, base + "_images");
    const auto& lbl = detail::member(npz, base + "_labels");
    if (img.dtype.substr(1) != "u1") throw FormatError("'" + base + "_images' must be uint8");
    if (img.shape.size() != 3 && img.shape.size() != 4) {
      throw FormatError("'" + base + "_images' must have shape (N, H, W) or (N, H, W, C)");
    }
    const ImageShape shape{static_cast<std::uint32_t>(img.shape[1]), static_cast<std::uint32_t>(img.shape[2]),
                           img.shape.size() == 4 ? static_cast<std::uint32_t>(img.shape[3]) : 1U};
    if (s == 0) {
      d.ref.shape = shape;
    } else if (!(shape == d.ref.shape)) {
      throw FormatError("image shape of '" + base + "_images' differs from train");
    }
    const std::size_t n = img.shape[0];
    if (lbl.shape.empty() || (lbl.shape.size() == 2 && lbl.shape[1] != 1) || lbl.shape.size() > 2) {
      throw FormatError("'" + base + "_labels' must have shape (N,) or (N, 1)");
    }
    if (lbl.shape[0] != n) {
      throw FormatError("count mismatch in " + base + ": " + std::to_string(n) + " images vs " +
                        std::to_string(lbl.shape[0]) + " labels");
    }
    splits[s]->images = img.data;
    splits[s]->labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto y = lbl.uint_at(i);
      if (y > 0xFFFF) throw FormatError("label out of range in " + base + " at index " + std::to_string(i));
      splits[s]->labels[i] = static_cast<std::uint16_t>(y);
      max_label = std::max(max_label, y);
    }
  }
  if (opt.n_classes) {
    d.ref.n_classes = *opt.n_classes;
  } else if (auto known = known_class_count(d.ref.name)) {
    d.ref.n_classes = *known;
  } else {
    d.ref.n_classes = std::max<std::uint32_t>(2, static_cast<std::uint32_t>(max_label + 1));
  }
  return save_dataset(std::move(d), out_dir);
}

/// Imports CIFAR binary batches from `dir`: data_batch_{1..5}.bin and
/// test_batch.bin for CIFAR-10, train.bin and test.bin (fine labels) for
/// CIFAR-100. Images are converted from CHW to HWC. No validation split.
inline DatasetRef ingest_cifar(const std::filesystem::path& dir, const std::filesystem::path& out_dir,
                               int variant = 10) {
  if (variant != 10 && variant != 100) throw ValidationError("CIFAR variant must be 10 or 100");
  constexpr std::size_t kPixels = 32 * 32 * 3;
  const std::size_t label_bytes = variant == 10 ? 1 : 2;
  const std::size_t record = label_bytes + kPixels;

  auto load = [&](const std::vector<std::string>& files, Split& split) {
    for (const auto& f : files) {
      std::ifstream in(dir / f, std::ios::binary);
      if (!in) throw FormatError("CIFAR directory missing '" + f + "'");
      const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
      if (bytes.empty() || bytes.size() % record != 0) throw FormatError("'" + f + "' is not a whole number of records");
      for (std::size_t off = 0; off < bytes.size(); off += record) {
        const std::uint8_t y = bytes[off + label_bytes - 1];
        if (y >= variant) throw FormatError("label out of range in '" + f + "'");
        split.labels.push_back(y);
        const std::uint8_t* chw = bytes.data() + off + label_bytes;
        for (std::size_t p = 0; p < 32 * 32; ++p) {
          for (std::size_t ch = 0; ch < 3; ++ch) split.images.push_back(chw[ch * 1024 + p]);
        }
      }
    }
  };

  Dataset d;
  d.ref.name = variant == 10 ? "CIFAR-10" : "CIFAR-100";
  d.ref.n_classes = static_cast<std::uint32_t>(variant);
  d.ref.shape = {32, 32, 3};
  if (variant == 10) {
    load({"data_batch_1.bin", "data_batch_2.bin", "data_batch_3.bin", "data_batch_4.bin", "data_batch_5.bin"},
         d.train);
    load({"test_batch.bin"}, d.test);
  } else {
    load({"train.bin"}, d.train);
    load({"test.bin"}, d.test);
  }
  return save_dataset(std::move(d), out_dir);
}

}  // namespace eva::train
