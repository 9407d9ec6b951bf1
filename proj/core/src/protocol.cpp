// SPDX-License-Identifier: Apache-2.0
#include "cil/protocol.hpp"

#include <numeric>
#include <string>

#include "cil/error.hpp"
#include "cil/rng.hpp"

namespace cil {

std::size_t IncrementalProtocol::group_begin(std::size_t group) const {
  if (group >= split_sizes.size()) throw IndexError("group " + std::to_string(group) + " out of range");
  return std::accumulate(split_sizes.begin(), split_sizes.begin() + static_cast<std::ptrdiff_t>(group),
                         std::size_t{0});
}

std::size_t IncrementalProtocol::group_end(std::size_t group) const {
  return group_begin(group) + split_sizes[group];
}

std::vector<std::uint32_t> IncrementalProtocol::positions() const {
  std::vector<std::uint32_t> inverse(class_order.size());
  for (std::size_t p = 0; p < class_order.size(); ++p) inverse[class_order[p]] = static_cast<std::uint32_t>(p);
  return inverse;
}

std::size_t IncrementalProtocol::group_of(std::size_t position) const {
  std::size_t end = 0;
  for (std::size_t g = 0; g < split_sizes.size(); ++g) {
    end += split_sizes[g];
    if (position < end) return g;
  }
  throw IndexError("class position " + std::to_string(position) + " out of range");
}

std::vector<std::uint32_t> order_classes(std::size_t num_classes, std::uint64_t seed) {
  if (num_classes < 2) throw ConfigError("class ordering needs at least 2 classes");
  std::vector<std::uint32_t> order(num_classes);
  std::iota(order.begin(), order.end(), 0u);
  Rng rng(seed);
  rng.shuffle(order);
  return order;
}

namespace {

void check_permutation(const std::vector<std::uint32_t>& order) {
  std::vector<bool> seen(order.size(), false);
  for (auto c : order) {
    if (c >= order.size() || seen[c]) throw ConfigError("class order is not a permutation");
    seen[c] = true;
  }
}

}  // namespace

IncrementalProtocol make_splits(std::vector<std::uint32_t> order, std::size_t steps) {
  const std::size_t n = order.size();
  if (steps == 0) throw ConfigError("T must be at least 1");
  if (n % 2 != 0) throw ConfigError("class count " + std::to_string(n) + " is not even");
  const std::size_t half = n / 2;
  if (half % steps != 0) {
    throw ConfigError("T=" + std::to_string(steps) + " does not divide the " + std::to_string(half) +
                      " incremental classes evenly");
  }
  std::vector<std::size_t> sizes(steps + 1, half / steps);
  sizes[0] = half;
  return make_splits(std::move(order), std::move(sizes));
}

IncrementalProtocol make_splits(std::vector<std::uint32_t> order, std::vector<std::size_t> sizes) {
  check_permutation(order);
  if (sizes.size() < 2) throw ConfigError("need an initial split and at least one incremental split");
  std::size_t total = 0;
  for (auto s : sizes) {
    if (s == 0) throw ConfigError("split sizes must be positive");
    total += s;
  }
  if (total != order.size()) {
    throw ConfigError("split sizes sum to " + std::to_string(total) + " but there are " +
                      std::to_string(order.size()) + " classes");
  }
  IncrementalProtocol p;
  p.class_order = std::move(order);
  p.split_sizes = std::move(sizes);
  return p;
}

Dataset to_positions(const Dataset& data, const IncrementalProtocol& protocol) {
  if (data.class_count != protocol.classes()) throw ConfigError("dataset class count does not match the protocol");
  const auto pos = protocol.positions();
  Dataset out = data;
  for (auto& s : out.samples) s.label = pos[s.label];
  return out;
}

Dataset select_group(const Dataset& data, const IncrementalProtocol& protocol, std::size_t group) {
  const auto begin = protocol.group_begin(group);
  const auto end = protocol.group_end(group);
  Dataset out;
  out.class_count = data.class_count;
  for (const auto& s : data.samples) {
    if (s.label >= begin && s.label < end) out.samples.push_back(s);
  }
  return out;
}

}  // namespace cil
