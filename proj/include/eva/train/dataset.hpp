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

// Canonical on-disk dataset layout:
//   <dir>/meta.json              name, n_classes, image_shape [H, W, Ch], counts
//   <dir>/<split>_images.u8      N x H x W x Ch raw uint8 (HWC)
//   <dir>/<split>_labels.u16     N x u16 little-endian
// for split in {train, val, test}.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "eva/detail/endian.hpp"
#include "eva/error.hpp"

namespace eva::train {

struct ImageShape {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::uint32_t channels = 1;

  [[nodiscard]] std::size_t pixels() const {
    return static_cast<std::size_t>(height) * width * channels;
  }
  friend bool operator==(const ImageShape&, const ImageShape&) = default;
};

struct DatasetRef {
  std::string name;
  std::size_t n_train = 0;
  std::size_t n_val = 0;
  std::size_t n_test = 0;
  std::uint32_t n_classes = 0;
  ImageShape shape;
  std::filesystem::path path;
};

/// One split held in memory.
struct Split {
  std::vector<std::uint8_t> images;  // size() x pixels, HWC
  std::vector<std::uint16_t> labels;

  [[nodiscard]] std::size_t size() const { return labels.size(); }
};

struct Dataset {
  DatasetRef ref;
  Split train;
  Split val;
  Split test;
};

inline constexpr const char* kSplitNames[3] = {"train", "val", "test"};

/// Checks sizes and labels; the validation split may be empty.
inline void validate_dataset(const Dataset& d) {
  if (d.ref.n_classes < 2) throw ValidationError("dataset needs at least 2 classes");
  if (d.ref.shape.pixels() == 0) throw ValidationError("dataset image shape is empty");
  const Split* splits[3] = {&d.train, &d.val, &d.test};
  for (int s = 0; s < 3; ++s) {
    const Split& sp = *splits[s];
    if (sp.images.size() != sp.size() * d.ref.shape.pixels()) {
      throw ValidationError(std::string("count mismatch in ") + kSplitNames[s] + ": " +
                            std::to_string(sp.images.size() / d.ref.shape.pixels()) + " images vs " +
                            std::to_string(sp.size()) + " labels");
    }
    for (std::size_t i = 0; i < sp.size(); ++i) {
      if (sp.labels[i] >= d.ref.n_classes) {
        throw ValidationError(std::string("label out of range in ") + kSplitNames[s] + " at index " +
                              std::to_string(i) + ": " + std::to_string(sp.labels[i]));
      }
    }
  }
  if (d.train.size() == 0 || d.test.size() == 0) throw ValidationError("train and test splits must be non-empty");
}

namespace detail {

inline void write_file(const std::filesystem::path& path, const void* data, std::size_t bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("missing dataset file " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace detail

inline nlohmann::json dataset_meta(const DatasetRef& ref) {
  return {{"name", ref.name},
          {"n_classes", ref.n_classes},
          {"image_shape", {ref.shape.height, ref.shape.width, ref.shape.channels}},
          {"counts", {{"train", ref.n_train}, {"val", ref.n_val}, {"test", ref.n_test}}}};
}

/// Writes `d` into `out_dir` in the canonical layout and returns its ref.
inline DatasetRef save_dataset(Dataset d, const std::filesystem::path& out_dir) {
  d.ref.n_train = d.train.size();
  d.ref.n_val = d.val.size();
  d.ref.n_test = d.test.size();
  validate_dataset(d);
  std::filesystem::create_directories(out_dir);
  const Split* splits[3] = {&d.train, &d.val, &d.test};
  for (int s = 0; s < 3; ++s) {
    const std::string base = kSplitNames[s];
    detail::write_file(out_dir / (base + "_images.u8"), splits[s]->images.data(), splits[s]->images.size());
    std::string lbl;
    for (auto y : splits[s]->labels) eva::detail::put_le<std::uint16_t>(lbl, y);
    detail::write_file(out_dir / (base + "_labels.u16"), lbl.data(), lbl.size());
  }
  d.ref.path = out_dir;
  const std::string meta = dataset_meta(d.ref).dump(2) + "\n";
  detail::write_file(out_dir / "meta.json", meta.data(), meta.size());
  return d.ref;
}

inline DatasetRef read_dataset_ref(const std::filesystem::path& dir) {
  std::ifstream in(dir / "meta.json");
  if (!in) throw ValidationError("no dataset at " + dir.string() + " (meta.json missing)");
  const auto meta = nlohmann::json::parse(in, nullptr, false);
  if (meta.is_discarded()) throw FormatError("dataset meta.json is not valid JSON");
  try {
    DatasetRef ref;
    ref.name = meta.at("name").get<std::string>();
    ref.n_classes = meta.at("n_classes").get<std::uint32_t>();
    const auto& shp = meta.at("image_shape");
    ref.shape = {shp.at(0).get<std::uint32_t>(), shp.at(1).get<std::uint32_t>(), shp.at(2).get<std::uint32_t>()};
    ref.n_train = meta.at("counts").at("train").get<std::size_t>();
    ref.n_val = meta.at("counts").at("val").get<std::size_t>();
    ref.n_test = meta.at("counts").at("test").get<std::size_t>();
    ref.path = dir;
    return ref;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("dataset meta.json incomplete: ") + e.what());
  }
}

inline Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset d;
  d.ref = read_dataset_ref(dir);
  Split* splits[3] = {&d.train, &d.val, &d.test};
  const std::size_t counts[3] = {d.ref.n_train, d.ref.n_val, d.ref.n_test};
  for (int s = 0; s < 3; ++s) {
    const std::string base = kSplitNames[s];
    splits[s]->images = detail::read_file(dir / (base + "_images.u8"));
    const auto lbl = detail::read_file(dir / (base + "_labels.u16"));
    if (lbl.size() != counts[s] * 2 || splits[s]->images.size() != counts[s] * d.ref.shape.pixels()) {
      throw FormatError("count mismatch in " + base + " split of " + dir.string());
    }
    splits[s]->labels.resize(counts[s]);
    for (std::size_t i = 0; i < counts[s]; ++i) {
      splits[s]->labels[i] = eva::detail::get_le<std::uint16_t>(lbl.data() + 2 * i);
    }
  }
  validate_dataset(d);
  return d;
}

}  // namespace eva::train
