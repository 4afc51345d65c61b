#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dbar/tensor.hpp"

namespace dbar {

/// UnitBox: every coordinate lies in [0, 1] (normalized images).
/// Unbounded: raw real-valued signals such as time series.
enum class DomainMode : std::uint8_t { UnitBox = 0, Unbounded = 1 };

enum class DataFormat { Csv, RawF64 };

struct Example {
  Vec64 x;
  Label label = 0;
};

/// Immutable labelled dataset. The constructor validates every invariant:
/// shared dimension d, labels < m, finite features, UnitBox range.
class Dataset {
 public:
  Dataset(std::vector<Example> examples, std::size_t d, std::size_t m, DomainMode mode);

  std::size_t dim() const { return d_; }
  std::size_t num_classes() const { return m_; }
  DomainMode mode() const { return mode_; }
  std::size_t size() const { return examples_.size(); }
  bool empty() const { return examples_.empty(); }
  const Example& operator[](std::size_t i) const { return examples_[i]; }
  const std::vector<Example>& examples() const { return examples_; }

  /// FNV-1a 64 over the RawF64 encoding; identifies the data in reports.
  std::uint64_t content_hash() const;

 private:
  std::vector<Example> examples_;
  std::size_t d_;
  std::size_t m_;
  DomainMode mode_;
};

std::string to_string(DomainMode mode);
DomainMode domain_mode_from_string(const std::string& s);
DataFormat data_format_from_path(const std::filesystem::path& path);

std::string encode_csv(const Dataset& ds);
Dataset decode_csv(const std::string& text);
std::vector<std::uint8_t> encode_raw(const Dataset& ds);
Dataset decode_raw(const std::vector<std::uint8_t>& bytes);

Dataset load_dataset(const std::filesystem::path& path, DataFormat format);
void save_dataset(const Dataset& ds, const std::filesystem::path& path, DataFormat format);

/// Hex rendering used for hashes in reports.
std::string hex64(std::uint64_t v);

}  // namespace dbar
