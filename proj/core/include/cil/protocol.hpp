// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "cil/dataset.hpp"

namespace cil {

/// T-step-R-replay layout. Classes are referred to by their position in
/// `class_order`; group g owns positions [group_begin(g), group_end(g)).
struct IncrementalProtocol {
  std::vector<std::uint32_t> class_order;  // position -> original class id
  std::vector<std::size_t> split_sizes;    // T + 1 entries
  std::size_t replay_per_class = 0;
  std::uint64_t seed = 0;

  std::size_t steps() const { return split_sizes.size() - 1; }
  std::size_t groups() const { return split_sizes.size(); }
  std::size_t group_begin(std::size_t group) const;
  std::size_t group_end(std::size_t group) const;
  std::size_t classes() const { return class_order.size(); }

  /// Inverse of class_order: original class id -> position.
  std::vector<std::uint32_t> positions() const;
  /// Group that first introduces the class at `position`.
  std::size_t group_of(std::size_t position) const;
};

/// Seeded Fisher-Yates permutation of 0..n-1 (see Rng for the pinned
/// generator). Requires n >= 2.
std::vector<std::uint32_t> order_classes(std::size_t num_classes, std::uint64_t seed);

/// First half of the order, then T equal splits. Requires an even class
/// count with (classes / 2) divisible by T.
IncrementalProtocol make_splits(std::vector<std::uint32_t> order, std::size_t steps);

/// Explicit split sizes (initial-task override); they must be positive and
/// sum to the class count.
IncrementalProtocol make_splits(std::vector<std::uint32_t> order, std::vector<std::size_t> sizes);

/// Relabels samples from original class ids to order positions.
Dataset to_positions(const Dataset& data, const IncrementalProtocol& protocol);

/// Samples (already in position labels) belonging to one group.
Dataset select_group(const Dataset& data, const IncrementalProtocol& protocol, std::size_t group);

}  // namespace cil
