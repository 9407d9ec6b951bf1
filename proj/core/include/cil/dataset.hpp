// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "cil/tensor.hpp"

namespace cil {

struct Sample {
  std::uint32_t id = 0;
  Vector input;
  std::uint32_t label = 0;

  bool operator==(const Sample&) const = default;
};

/// Labels lie in [0, class_count); sample ids are unique.
struct Dataset {
  std::vector<Sample> samples;
  std::size_t class_count = 0;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  std::size_t dim() const { return samples.empty() ? 0 : samples.front().input.size(); }

  /// Throws ValidationError on label range, id uniqueness or dimension
  /// violations.
  void validate() const;

  bool operator==(const Dataset&) const = default;
};

struct SyntheticSpec {
  std::size_t classes = 10;
  std::size_t dim = 32;
  std::size_t per_class = 100;
  double spread = 0.5;
  std::uint64_t seed = 0;
};

/// Gaussian blobs around random unit-norm class means. Means whose cosine
/// with an earlier mean reaches 0.9 are redrawn. Values are rounded to
/// float so the dataset survives the f32 file format bit-exactly. Samples
/// are grouped by class; ids are sequential from 0.
Dataset gen_synthetic(const SyntheticSpec& spec);

/// The class means gen_synthetic uses for `spec` (before any noise).
std::vector<Vector> synthetic_means(const SyntheticSpec& spec);

enum class DataFormat { csv, raw_f32 };

struct LoadOptions {
  DataFormat format = DataFormat::csv;
  bool has_header = false;
  /// Declared number of classes; 0 infers max label + 1.
  std::size_t class_count = 0;
};

/// CSV: one sample per row, features then the integer label in the last
/// column; ids are the zero-based row index among data rows.
/// raw-f32: "DDS1", u32 n, u32 dim, then n x (dim f32, u32 label), all
/// little-endian; ids are the record index.
Dataset load_dataset(const std::filesystem::path& path, const LoadOptions& options);

void save_dataset(const std::filesystem::path& path, const Dataset& data, DataFormat format, bool header = false);

/// Per-label sample counts, length class_count.
std::vector<std::size_t> label_histogram(const Dataset& data);

}  // namespace cil
