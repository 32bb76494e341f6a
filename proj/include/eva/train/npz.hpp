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

// Minimal reader for NumPy .npz archives (zip of .npy members, stored or
// deflated, including the zip64 extra fields numpy writes).

#include <zlib.h>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <regex>
#include <string>
#include <vector>

#include "eva/detail/endian.hpp"
#include "eva/error.hpp"

namespace eva::train {

struct NpyArray {
  std::string dtype;  // numpy descr, e.g. "|u1", "<i8"
  std::vector<std::size_t> shape;
  std::vector<std::uint8_t> data;

  [[nodiscard]] std::size_t count() const {
    std::size_t n = 1;
    for (auto s : shape) n *= s;
    return n;
  }
  [[nodiscard]] std::size_t item_size() const { return static_cast<std::size_t>(std::stoul(dtype.substr(2))); }

  /// Element i as an unsigned integer (rejects negative values).
  [[nodiscard]] std::uint64_t uint_at(std::size_t i) const {
    const std::size_t w = item_size();
    const unsigned char* p = data.data() + i * w;
    const char kind = dtype[1];
    std::uint64_t raw = 0;
    for (std::size_t b = 0; b < w; ++b) raw |= static_cast<std::uint64_t>(p[b]) << (8 * b);
    if (kind == 'i' && w < 8 && (raw >> (8 * w - 1)) & 1U) throw FormatError("negative label value in npy array");
    if (kind == 'i' && w == 8 && (raw >> 63) & 1U) throw FormatError("negative label value in npy array");
    return raw;
  }
};

namespace detail {

inline NpyArray parse_npy(const std::vector<std::uint8_t>& bytes, const std::string& name) {
  static const unsigned char kMagic[6] = {0x93, 'N', 'U', 'M', 'P', 'Y'};
  if (bytes.size() < 10 || !std::equal(kMagic, kMagic + 6, bytes.begin())) {
    throw FormatError("member '" + name + "' is not an .npy array");
  }
  const unsigned major = bytes[6];
  std::size_t header_len = 0;
  std::size_t offset = 0;
  if (major == 1) {
    header_len = eva::detail::get_le<std::uint16_t>(bytes.data() + 8);
    offset = 10;
  } else if (major == 2 || major == 3) {
    if (bytes.size() < 12) throw FormatError("truncated npy header in '" + name + "'");
    header_len = eva::detail::get_le<std::uint32_t>(bytes.data() + 8);
    offset = 12;
  } else {
    throw FormatError("unsupported npy version in '" + name + "'");
  }
  if (offset + header_len > bytes.size()) throw FormatError("truncated npy header in '" + name + "'");
  const std::string header(bytes.begin() + static_cast<std::ptrdiff_t>(offset),
                           bytes.begin() + static_cast<std::ptrdiff_t>(offset + header_len));

  NpyArray arr;
  std::smatch m;
  if (!std::regex_search(header, m, std::regex(R"('descr'\s*:\s*'([<>|=][uib]\d+)')"))) {
    throw FormatError("unsupported dtype in '" + name + "' (integer arrays only)");
  }
  arr.dtype = m[1];
  if (arr.dtype[0] == '>' && arr.dtype != ">u1" && arr.dtype != ">i1") {
    throw FormatError("big-endian arrays are not supported ('" + name + "')");
  }
  if (arr.dtype[1] == 'b') arr.dtype[1] = 'u';
  if (std::regex_search(header, m, std::regex(R"('fortran_order'\s*:\s*True)"))) {
    throw FormatError("fortran-ordered arrays are not supported ('" + name + "')");
  }
  if (!std::regex_search(header, m, std::regex(R"('shape'\s*:\s*\(([^)]*)\))"))) {
    throw FormatError("npy header of '" + name + "' lacks a shape");
  }
  const std::string dims = m[1];
  std::regex num(R"(\d+)");
  for (auto it = std::sregex_iterator(dims.begin(), dims.end(), num); it != std::sregex_iterator(); ++it) {
    arr.shape.push_back(static_cast<std::size_t>(std::stoull(it->str())));
  }
  const std::size_t data_off = offset + header_len;
  const std::size_t need = arr.count() * arr.item_size();
  if (bytes.size() - data_off < need) throw FormatError("npy data of '" + name + "' is truncated");
  arr.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(data_off),
                  bytes.begin() + static_cast<std::ptrdiff_t>(data_off + need));
  return arr;
}

inline std::vector<std::uint8_t> inflate_raw(const std::uint8_t* src, std::size_t n, std::size_t expected) {
  std::vector<std::uint8_t> out(expected);
  z_stream zs{};
  if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) throw std::runtime_error("zlib init failed");
  zs.next_in = const_cast<Bytef*>(src);
  zs.avail_in = static_cast<uInt>(n);
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = inflate(&zs, Z_FINISH);
  const auto produced = zs.total_out;
  inflateEnd(&zs);
  if (rc != Z_STREAM_END || produced != expected) throw FormatError("corrupt deflate stream in archive");
  return out;
}

}  // namespace detail

/// Reads every .npy member of an .npz archive, keyed by name without ".npy".
inline std::map<std::string, NpyArray> read_npz(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open archive " + path.string());
  const std::vector<std::uint8_t> zip{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  using eva::detail::get_le;

  // End of central directory record, scanning backwards over a possible comment.
  if (zip.size() < 22) throw FormatError("archive too small to be a zip file");
  std::size_t eocd = zip.size() - 22;
  while (get_le<std::uint32_t>(zip.data() + eocd) != 0x06054b50U) {
    if (eocd == 0 || zip.size() - eocd > 22 + 65535) throw FormatError("zip end-of-directory record not found");
    --eocd;
  }
  std::uint64_t entries = get_le<std::uint16_t>(zip.data() + eocd + 10);
  std::uint64_t cd_offset = get_le<std::uint32_t>(zip.data() + eocd + 16);
  if ((cd_offset == 0xFFFFFFFFU || entries == 0xFFFFU) && eocd >= 20 &&
      get_le<std::uint32_t>(zip.data() + eocd - 20) == 0x07064b50U) {
    const std::uint64_t z64 = get_le<std::uint64_t>(zip.data() + eocd - 20 + 8);
    if (z64 + 56 > zip.size() || get_le<std::uint32_t>(zip.data() + z64) != 0x06064b50U) {
      throw FormatError("bad zip64 end-of-directory record");
    }
    entries = get_le<std::uint64_t>(zip.data() + z64 + 32);
    cd_offset = get_le<std::uint64_t>(zip.data() + z64 + 48);
  }

  std::map<std::string, NpyArray> out;
  std::size_t p = cd_offset;
  for (std::uint64_t e = 0; e < entries; ++e) {
    if (p + 46 > zip.size() || get_le<std::uint32_t>(zip.data() + p) != 0x02014b50U) {
      throw FormatError("corrupt zip central directory");
    }
    const auto method = get_le<std::uint16_t>(zip.data() + p + 10);
    std::uint64_t csize = get_le<std::uint32_t>(zip.data() + p + 20);
    std::uint64_t usize = get_le<std::uint32_t>(zip.data() + p + 24);
    const auto name_len = get_le<std::uint16_t>(zip.data() + p + 28);
    const auto extra_len = get_le<std::uint16_t>(zip.data() + p + 30);
    const auto comment_len = get_le<std::uint16_t>(zip.data() + p + 32);
    std::uint64_t local = get_le<std::uint32_t>(zip.data() + p + 42);
    if (p + 46 + name_len + extra_len > zip.size()) throw FormatError("corrupt zip central directory");
    std::string name(reinterpret_cast<const char*>(zip.data() + p + 46), name_len);

    // zip64 extra: only the fields saturated in the fixed record are present, in order.
    std::size_t x = p + 46 + name_len;
    const std::size_t x_end = x + extra_len;
    while (x + 4 <= x_end) {
      const auto id = get_le<std::uint16_t>(zip.data() + x);
      const auto sz = get_le<std::uint16_t>(zip.data() + x + 2);
      if (id == 0x0001) {
        std::size_t f = x + 4;
        if (usize == 0xFFFFFFFFU) { usize = get_le<std::uint64_t>(zip.data() + f); f += 8; }
        if (csize == 0xFFFFFFFFU) { csize = get_le<std::uint64_t>(zip.data() + f); f += 8; }
        if (local == 0xFFFFFFFFU) { local = get_le<std::uint64_t>(zip.data() + f); }
      }
      x += 4 + sz;
    }
    p = x_end + comment_len;

    if (local + 30 > zip.size() || get_le<std::uint32_t>(zip.data() + local) != 0x04034b50U) {
      throw FormatError("corrupt local header for '" + name + "'");
    }
    const std::size_t data_at = local + 30 + get_le<std::uint16_t>(zip.data() + local + 26) +
                                get_le<std::uint16_t>(zip.data() + local + 28);
    if (data_at + csize > zip.size()) throw FormatError("archive member '" + name + "' is truncated");
    std::vector<std::uint8_t> raw;
    if (method == 0) {
      raw.assign(zip.begin() + static_cast<std::ptrdiff_t>(data_at),
                 zip.begin() + static_cast<std::ptrdiff_t>(data_at + csize));
    } else if (method == 8) {
      raw = detail::inflate_raw(zip.data() + data_at, csize, usize);
    } else {
      throw FormatError("unsupported zip compression method for '" + name + "'");
    }
    if (name.ends_with(".npy")) name.resize(name.size() - 4);
    out.emplace(name, detail::parse_npy(raw, name));
  }
  return out;
}

}  // namespace eva::train
