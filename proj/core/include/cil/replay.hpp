// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "cil/dataset.hpp"
#include "cil/nn.hpp"
#include "cil/rng.hpp"

namespace cil {

enum class SelectionStrategy { herding, random };

/// Fixed per-class exemplar memory: at most `budget` samples per class,
/// every stored label equal to its bucket key.
class ExemplarStore {
 public:
  explicit ExemplarStore(std::size_t budget = 0) : budget_(budget) {}

  std::size_t budget() const { return budget_; }
  const std::map<std::uint32_t, std::vector<Sample>>& classes() const { return classes_; }
  std::size_t size() const;
  bool empty() const { return size() == 0; }

  void set_class(std::uint32_t label, std::vector<Sample> exemplars);

  /// Stored samples in ascending label order.
  std::vector<Sample> samples() const;

  bool operator==(const ExemplarStore&) const = default;

 private:
  std::size_t budget_;
  std::map<std::uint32_t, std::vector<Sample>> classes_;
};

/// Greedy nearest-mean selection. At each pick the candidate minimizing
/// ||mean(selected + candidate) - class_mean||_2 is taken; exact ties go to
/// the lowest id (ids default to the index).
std::vector<std::size_t> herding_select(std::span<const FeatureVector> features, std::size_t count,
                                        std::span<const std::uint32_t> ids = {});

/// Uniform sample of `count` of `n` indices without replacement.
std::vector<std::size_t> random_select(std::size_t n, std::size_t count, Rng& rng);

/// Adds exemplars for every class present in `finished_step_data` that the
/// store does not hold yet; classes already stored are left untouched.
/// Herding runs on L2-normalized features of `model`.
void update_store(ExemplarStore& store, const Dataset& finished_step_data, const Network& model,
                  SelectionStrategy strategy, Rng& rng);

/// New-step samples followed by every stored exemplar.
Dataset build_training_set(const Dataset& new_data, const ExemplarStore& store);

}  // namespace cil
