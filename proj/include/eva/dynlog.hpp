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

// Training-dynamics log: per-epoch, per-sample derived prediction records.
//
// On-disk layout (all integers little-endian):
//   header : "DYNL" | u32 version=1 | u64 N | u32 C | u32 reserved
//            | N x u16 label | u32 len | len bytes of UTF-8 JSON metadata
//   epoch  : u32 epoch | N x (f32 error_l2, f32 p_target, f32 p_max_other,
//                             u16 predicted_class, f32 entropy)
// Epochs are 1-based and contiguous.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "eva/detail/endian.hpp"
#include "eva/error.hpp"

namespace eva {

inline constexpr char kLogMagic[4] = {'D', 'Y', 'N', 'L'};
inline constexpr std::uint32_t kLogVersion = 1;
inline constexpr std::size_t kRecordBytes = 18;
/// Maximum |sum(row) - 1| accepted by the recorder.
inline constexpr double kRowSumTolerance = 1e-4;

/// One sample at one epoch, as persisted (float32).
struct EpochSampleRecord {
  float error_l2 = 0.0F;
  float p_target = 0.0F;
  float p_max_other = 0.0F;
  std::uint16_t predicted_class = 0;
  float entropy = 0.0F;

  friend bool operator==(const EpochSampleRecord&, const EpochSampleRecord&) = default;
};

/// Full-precision values before float32 storage.
struct SampleDerivation {
  double error_l2 = 0.0;
  double p_target = 0.0;
  double p_max_other = 0.0;
  std::uint16_t predicted_class = 0;
  double entropy = 0.0;

  [[nodiscard]] EpochSampleRecord stored() const {
    return {static_cast<float>(error_l2), static_cast<float>(p_target), static_cast<float>(p_max_other),
            predicted_class, static_cast<float>(entropy)};
  }
};

namespace detail {

template <std::floating_point Real>
void check_row(std::span<const Real> prob_row, std::size_t label) {
  if (prob_row.size() < 2) throw ValidationError("probability row needs at least 2 classes");
  if (label >= prob_row.size()) {
    throw ValidationError("label " + std::to_string(label) + " out of range for " +
                          std::to_string(prob_row.size()) + " classes");
  }
  for (Real p : prob_row) {
    if (!std::isfinite(p)) throw ValidationError("probability row contains a non-finite entry");
  }
}

}  // namespace detail

/// L2 norm of (prediction - onehot(label)).
template <std::floating_point Real>
double error_score(std::span<const Real> prob_row, std::size_t label) {
  detail::check_row(prob_row, label);
  double sum_sq = 0.0;
  for (std::size_t j = 0; j < prob_row.size(); ++j) {
    const double d = static_cast<double>(prob_row[j]) - (j == label ? 1.0 : 0.0);
    sum_sq += d * d;
  }
  return std::sqrt(sum_sq);
}

inline double error_score(std::initializer_list<double> prob_row, std::size_t label) {
  return error_score(std::span<const double>(prob_row.begin(), prob_row.size()), label);
}

/// Derives all five record fields from one probability row.
template <std::floating_point Real>
SampleDerivation derive_record(std::span<const Real> prob_row, std::size_t label) {
  SampleDerivation out;
  out.error_l2 = error_score(prob_row, label);
  out.p_target = static_cast<double>(prob_row[label]);
  double best_other = 0.0;
  std::size_t argmax = 0;
  double entropy = 0.0;
  for (std::size_t j = 0; j < prob_row.size(); ++j) {
    const double p = static_cast<double>(prob_row[j]);
    if (p > static_cast<double>(prob_row[argmax])) argmax = j;
    if (j != label) best_other = std::max(best_other, p);
    if (p > 0.0) entropy -= p * std::log(p);
  }
  out.p_max_other = best_other;
  out.predicted_class = static_cast<std::uint16_t>(argmax);
  out.entropy = std::max(entropy, 0.0);
  return out;
}

/// In-memory training-dynamics log for one run.
class DynamicsLog {
 public:
  DynamicsLog() = default;

  DynamicsLog(std::vector<std::uint16_t> labels, std::uint32_t n_classes,
              nlohmann::json metadata = nlohmann::json::object())
      : labels_(std::move(labels)), n_classes_(n_classes), metadata_(std::move(metadata)) {
    if (labels_.empty()) throw ValidationError("dynamics log needs at least one sample");
    if (n_classes_ < 2) throw ValidationError("dynamics log needs at least 2 classes");
    if (n_classes_ > 65536U) throw ValidationError("class count exceeds u16 label range");
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      if (labels_[i] >= n_classes_) {
        throw ValidationError("label of sample " + std::to_string(i) + " out of range");
      }
    }
    if (!metadata_.is_object()) throw ValidationError("log metadata must be a JSON object");
  }

  [[nodiscard]] std::size_t n_samples() const { return labels_.size(); }
  [[nodiscard]] std::uint32_t n_classes() const { return n_classes_; }
  [[nodiscard]] std::size_t n_epochs() const { return n_samples() == 0 ? 0 : records_.size() / n_samples(); }
  [[nodiscard]] std::span<const std::uint16_t> labels() const { return labels_; }
  [[nodiscard]] const nlohmann::json& metadata() const { return metadata_; }
  nlohmann::json& metadata() { return metadata_; }

  /// Record of `sample` at 1-based `epoch`.
  [[nodiscard]] const EpochSampleRecord& at(std::size_t epoch, std::size_t sample) const {
    return records_[(epoch - 1) * n_samples() + sample];
  }

  [[nodiscard]] std::span<const EpochSampleRecord> epoch_records(std::size_t epoch) const {
    if (epoch < 1 || epoch > n_epochs()) {
      throw ValidationError("epoch " + std::to_string(epoch) + " outside recorded range 1.." +
                            std::to_string(n_epochs()));
    }
    return std::span<const EpochSampleRecord>(records_).subspan((epoch - 1) * n_samples(), n_samples());
  }

  /// Appends the next epoch (number n_epochs()+1).
  void push_epoch(std::span<const EpochSampleRecord> block) {
    if (block.size() != n_samples()) {
      throw ValidationError("epoch block has " + std::to_string(block.size()) + " records, expected " +
                            std::to_string(n_samples()));
    }
    records_.insert(records_.end(), block.begin(), block.end());
  }

  /// Checks every record against the record invariants; throws FormatError.
  void validate() const {
    constexpr float kTol = 1e-5F;
    const float max_err = static_cast<float>(std::sqrt(2.0)) + kTol;
    const float max_entropy = static_cast<float>(std::log(static_cast<double>(n_classes_))) + kTol;
    for (std::size_t t = 1; t <= n_epochs(); ++t) {
      const auto block = epoch_records(t);
      for (std::size_t i = 0; i < block.size(); ++i) {
        const auto& r = block[i];
        const bool ok = std::isfinite(r.error_l2) && std::isfinite(r.p_target) && std::isfinite(r.p_max_other) &&
                        std::isfinite(r.entropy) && r.error_l2 >= 0.0F && r.error_l2 <= max_err &&
                        r.p_target >= 0.0F && r.p_target <= 1.0F + kTol && r.p_max_other >= 0.0F &&
                        r.p_max_other <= 1.0F + kTol && r.p_target + r.p_max_other <= 1.0F + 2 * kTol &&
                        r.predicted_class < n_classes_ && r.entropy >= 0.0F && r.entropy <= max_entropy;
        if (!ok) {
          throw FormatError("invalid record for sample " + std::to_string(i) + " at epoch " + std::to_string(t));
        }
      }
    }
  }

  friend bool operator==(const DynamicsLog& a, const DynamicsLog& b) {
    return a.labels_ == b.labels_ && a.n_classes_ == b.n_classes_ && a.metadata_ == b.metadata_ &&
           a.records_ == b.records_;
  }

 private:
  std::vector<std::uint16_t> labels_;
  std::uint32_t n_classes_ = 0;
  nlohmann::json metadata_ = nlohmann::json::object();
  std::vector<EpochSampleRecord> records_;  // epoch-major
};

/// Computes one epoch of records from an N x C row-major probability matrix.
template <std::floating_point Real>
std::vector<EpochSampleRecord> derive_epoch(std::span<const Real> probs, std::span<const std::uint16_t> labels,
                                            std::size_t n_classes) {
  if (probs.size() != labels.size() * n_classes) {
    throw ValidationError("probability matrix has " + std::to_string(probs.size()) + " entries, expected " +
                          std::to_string(labels.size()) + " x " + std::to_string(n_classes));
  }
  std::vector<EpochSampleRecord> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto row = probs.subspan(i * n_classes, n_classes);
    double sum = 0.0;
    for (Real p : row) {
      if (!std::isfinite(p) || p < Real(0) || p > Real(1)) {
        throw ValidationError("row " + std::to_string(i) + " has an entry outside [0,1]");
      }
      sum += static_cast<double>(p);
    }
    if (std::abs(sum - 1.0) > kRowSumTolerance) {
      throw ValidationError("row " + std::to_string(i) + " sums to " + std::to_string(sum) + ", not 1");
    }
    out[i] = derive_record(row, labels[i]).stored();
  }
  return out;
}

namespace detail {

inline std::string encode_header(const DynamicsLog& log) {
  std::string buf(kLogMagic, 4);
  put_le<std::uint32_t>(buf, kLogVersion);
  put_le<std::uint64_t>(buf, log.n_samples());
  put_le<std::uint32_t>(buf, log.n_classes());
  put_le<std::uint32_t>(buf, 0);
  for (auto y : log.labels()) put_le<std::uint16_t>(buf, y);
  const std::string meta = log.metadata().dump();
  put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(meta.size()));
  buf += meta;
  return buf;
}

inline std::string encode_epoch(std::uint32_t epoch, std::span<const EpochSampleRecord> block) {
  std::string buf;
  buf.reserve(4 + block.size() * kRecordBytes);
  put_le<std::uint32_t>(buf, epoch);
  for (const auto& r : block) {
    put_f32(buf, r.error_l2);
    put_f32(buf, r.p_target);
    put_f32(buf, r.p_max_other);
    put_le<std::uint16_t>(buf, r.predicted_class);
    put_f32(buf, r.entropy);
  }
  return buf;
}

}  // namespace detail

/// Serializes a complete log to its byte representation.
inline std::string serialize_log(const DynamicsLog& log) {
  std::string out = detail::encode_header(log);
  for (std::size_t t = 1; t <= log.n_epochs(); ++t) {
    out += detail::encode_epoch(static_cast<std::uint32_t>(t), log.epoch_records(t));
  }
  return out;
}

inline void write_log(const DynamicsLog& log, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  const std::string bytes = serialize_log(log);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

/// Parses and fully validates a log from a byte stream.
inline DynamicsLog parse_log(std::istream& in) {
  unsigned char fixed[24];
  if (detail::read_some(in, fixed, sizeof(fixed)) != sizeof(fixed)) throw FormatError("truncated log header");
  if (!std::equal(fixed, fixed + 4, reinterpret_cast<const unsigned char*>(kLogMagic))) {
    throw FormatError("bad magic: not a dynamics log");
  }
  const auto version = detail::get_le<std::uint32_t>(fixed + 4);
  if (version != kLogVersion) throw FormatError("unsupported log version " + std::to_string(version));
  const auto n = detail::get_le<std::uint64_t>(fixed + 8);
  const auto c = detail::get_le<std::uint32_t>(fixed + 16);
  if (n == 0) throw FormatError("log declares zero samples");
  if (c < 2 || c > 65536U) throw FormatError("log declares invalid class count " + std::to_string(c));
  if (n > (std::uint64_t{1} << 40)) throw FormatError("log declares implausible sample count");

  std::vector<unsigned char> label_bytes(n * 2);
  if (detail::read_some(in, label_bytes.data(), label_bytes.size()) != label_bytes.size()) {
    throw FormatError("truncated label table");
  }
  std::vector<std::uint16_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = detail::get_le<std::uint16_t>(label_bytes.data() + 2 * i);
    if (labels[i] >= c) throw FormatError("label of sample " + std::to_string(i) + " out of range");
  }

  unsigned char len_bytes[4];
  if (detail::read_some(in, len_bytes, 4) != 4) throw FormatError("truncated metadata length");
  const auto meta_len = detail::get_le<std::uint32_t>(len_bytes);
  std::string meta_text(meta_len, '\0');
  if (detail::read_some(in, reinterpret_cast<unsigned char*>(meta_text.data()), meta_len) != meta_len) {
    throw FormatError("truncated metadata block");
  }
  nlohmann::json meta = nlohmann::json::parse(meta_text, nullptr, false);
  if (meta.is_discarded() || !meta.is_object()) throw FormatError("metadata is not a JSON object");

  DynamicsLog log(std::move(labels), c, std::move(meta));
  std::vector<unsigned char> block(n * kRecordBytes);
  std::vector<EpochSampleRecord> records(n);
  for (std::uint32_t expected = 1;; ++expected) {
    unsigned char head[4];
    const std::size_t got_head = detail::read_some(in, head, 4);
    if (got_head == 0) break;
    if (got_head != 4) throw FormatError("truncated header of epoch " + std::to_string(expected));
    const auto epoch = detail::get_le<std::uint32_t>(head);
    if (epoch != expected) {
      throw FormatError("non-contiguous epoch sequence: found " + std::to_string(epoch) + ", expected " +
                        std::to_string(expected));
    }
    const std::size_t got = detail::read_some(in, block.data(), block.size());
    if (got != block.size()) {
      throw FormatError("truncated epoch block: epoch " + std::to_string(epoch) + " incomplete (" +
                        std::to_string(got / kRecordBytes) + " of " + std::to_string(n) + " records)");
    }
    for (std::size_t i = 0; i < n; ++i) {
      const unsigned char* p = block.data() + i * kRecordBytes;
      records[i] = {detail::get_f32(p), detail::get_f32(p + 4), detail::get_f32(p + 8),
                    detail::get_le<std::uint16_t>(p + 12), detail::get_f32(p + 14)};
    }
    log.push_epoch(records);
  }
  log.validate();
  return log;
}

inline DynamicsLog read_log(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open log " + path.string());
  return parse_log(in);
}

inline DynamicsLog parse_log_bytes(const std::string& bytes) {
  std::istringstream in(bytes, std::ios::binary);
  return parse_log(in);
}

/// Single-writer appender. The header is written on construction and each
/// epoch is flushed as soon as it is appended, so an interrupted run leaves
/// a log that is valid up to the last complete epoch.
class LogWriter {
 public:
  LogWriter(const std::filesystem::path& path, std::vector<std::uint16_t> labels, std::uint32_t n_classes,
            nlohmann::json metadata = nlohmann::json::object())
      : shape_(std::move(labels), n_classes, std::move(metadata)), path_(path) {
    out_.open(path, std::ios::binary | std::ios::trunc);
    if (!out_) throw std::runtime_error("cannot open " + path.string() + " for writing");
    write_bytes(detail::encode_header(shape_));
  }

  [[nodiscard]] std::size_t last_epoch() const { return last_epoch_; }
  [[nodiscard]] std::size_t n_samples() const { return shape_.n_samples(); }
  [[nodiscard]] std::uint32_t n_classes() const { return shape_.n_classes(); }
  [[nodiscard]] const std::filesystem::path& path() const { return path_; }

  /// Derives and appends one epoch from an N x C row-major probability matrix.
  template <std::floating_point Real>
  void append_epoch(std::size_t epoch_index, std::span<const Real> probs) {
    if (epoch_index != last_epoch_ + 1) {
      throw ValidationError("gap in epoch sequence: got epoch " + std::to_string(epoch_index) + ", expected " +
                            std::to_string(last_epoch_ + 1));
    }
    if (probs.size() / shape_.n_classes() != shape_.n_samples() || probs.size() % shape_.n_classes() != 0) {
      throw ValidationError("row-count mismatch: expected " + std::to_string(shape_.n_samples()) + " rows of " +
                            std::to_string(shape_.n_classes()));
    }
    const auto block = derive_epoch(probs, shape_.labels(), shape_.n_classes());
    write_bytes(detail::encode_epoch(static_cast<std::uint32_t>(epoch_index), block));
    last_epoch_ = epoch_index;
  }

  template <std::floating_point Real>
  void append_epoch(std::size_t epoch_index, const std::vector<Real>& probs) {
    append_epoch(epoch_index, std::span<const Real>(probs));
  }

 private:
  void write_bytes(const std::string& bytes) {
    out_.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out_.flush();
    if (!out_) throw std::runtime_error("write failed: " + path_.string());
  }

  DynamicsLog shape_;
  std::filesystem::path path_;
  std::ofstream out_;
  std::size_t last_epoch_ = 0;
};

}  // namespace eva
