// SPDX-License-Identifier: Apache-2.0
#pragma once

// Binary container, little-endian throughout:
//
//   "DDE1" u32 layers
//          per layer: u32 rows, u32 cols, f32 weight[rows*cols], f32 bias[rows]
//          u32 classes, u32 dim, f32 classifier[classes*dim], f32 scale
//   "EXMP" u32 budget, u32 dim, u32 buckets
//          per bucket: u32 label, u32 count, per sample: u32 id, f32 input[dim]
//   "HEAD" u32 dim, u8 flags (1: previous head, 2: blended head),
//          f32 previous[dim] if flagged, f32 head[dim] if flagged,
//          f32 alpha, f32 beta
//   "PROG" u32 completed_step, u64 seed, u32 classes, u32 order[classes],
//          u32 rows, per row t: f64 accuracy[t+1]; f64 overall[rows]
//
// Values held in f32 sections are kept f32-representable in memory, so a
// save/load/save cycle is byte-identical.

#include <cstdint>
#include <string>
#include <vector>

#include "cil/metrics.hpp"
#include "cil/mer.hpp"
#include "cil/nn.hpp"
#include "cil/replay.hpp"

namespace cil {

struct RunProgress {
  std::uint32_t completed_step = 0;
  std::uint64_t seed = 0;
  std::vector<std::uint32_t> class_order;
  AccuracyMatrix matrix;
  std::vector<double> overall;

  bool operator==(const RunProgress&) const = default;
};

struct Checkpoint {
  Network network;
  ExemplarStore store;
  HeadState head;
  RunProgress progress;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& checkpoint);

/// Parses a complete container; FormatError on bad magic, truncation or
/// trailing bytes. Nothing is returned unless the whole file parses.
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::string& path);

/// Rounds every carried value to float precision (see the format note).
void quantize(Network& network);
void quantize(HeadState& head);

}  // namespace cil
