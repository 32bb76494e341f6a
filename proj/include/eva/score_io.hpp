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

// Score file: a CSV-like text file.
//   index,score,method=<tag>,higher_is_important=<bool>,params=<json>
//   0,<value>
//   1,<value>
//   ...
// Values are printed with 17 significant digits so they round-trip exactly.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "eva/error.hpp"
#include "eva/scorers.hpp"

namespace eva {

namespace detail {

inline std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline double parse_double(std::string_view text, const std::string& what) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw FormatError("cannot parse " + what + " '" + std::string(text) + "'");
  return v;
}

template <typename UInt>
UInt parse_uint(std::string_view text, const std::string& what) {
  UInt v = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw FormatError("cannot parse " + what + " '" + std::string(text) + "'");
  }
  return v;
}

inline void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

}  // namespace detail

inline void write_scores(const ScoreVector& scores, std::ostream& out) {
  nlohmann::json params = scores.params;
  if (!scores.source_log.empty()) params["source_log"] = scores.source_log;
  out << "index,score,method=" << method_tag(scores.method)
      << ",higher_is_important=" << (scores.higher_is_important ? "true" : "false") << ",params=" << params.dump()
      << '\n';
  for (std::size_t i = 0; i < scores.values.size(); ++i) {
    out << i << ',' << detail::format_g17(scores.values[i]) << '\n';
  }
}

inline void write_scores(const ScoreVector& scores, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_scores(scores, out);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline ScoreVector read_scores(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("score file is empty");
  detail::strip_cr(line);
  constexpr std::string_view kPrefix = "index,score,method=";
  if (!line.starts_with(kPrefix)) throw FormatError("score file header is missing");
  ScoreVector s;
  const auto method_end = line.find(',', kPrefix.size());
  if (method_end == std::string::npos) throw FormatError("score header truncated after method");
  try {
    s.method = parse_method(std::string_view(line).substr(kPrefix.size(), method_end - kPrefix.size()));
  } catch (const ValidationError& e) {
    throw FormatError(e.what());
  }
  constexpr std::string_view kHigher = "higher_is_important=";
  std::string_view rest = std::string_view(line).substr(method_end + 1);
  if (!rest.starts_with(kHigher)) throw FormatError("score header lacks higher_is_important");
  rest.remove_prefix(kHigher.size());
  if (rest.starts_with("true,")) {
    s.higher_is_important = true;
    rest.remove_prefix(5);
  } else if (rest.starts_with("false,")) {
    s.higher_is_important = false;
    rest.remove_prefix(6);
  } else {
    throw FormatError("score header has invalid higher_is_important flag");
  }
  if (!rest.starts_with("params=")) throw FormatError("score header lacks params");
  rest.remove_prefix(7);
  s.params = nlohmann::json::parse(rest, nullptr, false);
  if (s.params.is_discarded() || !s.params.is_object()) throw FormatError("score params are not a JSON object");
  if (auto it = s.params.find("source_log"); it != s.params.end() && it->is_string()) {
    s.source_log = it->get<std::string>();
    s.params.erase(it);
  }

  while (std::getline(in, line)) {
    detail::strip_cr(line);
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw FormatError("malformed score line '" + line + "'");
    const auto idx = detail::parse_uint<std::size_t>(std::string_view(line).substr(0, comma), "index");
    if (idx != s.values.size()) {
      throw FormatError("score indices must be 0..N-1 ascending; found " + std::to_string(idx) + " at row " +
                        std::to_string(s.values.size()));
    }
    const double v = detail::parse_double(std::string_view(line).substr(comma + 1), "score");
    if (!std::isfinite(v)) throw FormatError("non-finite score at index " + std::to_string(idx));
    s.values.push_back(v);
  }
  if (s.values.empty()) throw FormatError("score file has no rows");
  return s;
}

inline ScoreVector read_scores(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open score file " + path.string());
  return read_scores(in);
}

}  // namespace eva
