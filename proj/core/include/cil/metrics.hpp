// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cil/dataset.hpp"
#include "cil/mer.hpp"
#include "cil/nn.hpp"

namespace cil {

/// a[time][group]: accuracy after training step `time` on the classes first
/// learned at step `group`. Only group <= time is populated; rows are
/// appended one per evaluated step. Both indices are zero-based.
class AccuracyMatrix {
 public:
  void append_row(std::vector<double> row);

  std::size_t steps() const { return rows_.size(); }
  double at(std::size_t time, std::size_t group) const;
  const std::vector<std::vector<double>>& rows() const { return rows_; }

  bool operator==(const AccuracyMatrix&) const = default;

 private:
  std::vector<std::vector<double>> rows_;
};

struct EvaluationRow {
  std::vector<double> group_accuracy;
  double overall = 0.0;  // pooled over every test sample seen so far
};

/// Predicts with the unified classifier over all classes; uses debiased
/// logits when `mer` carries a head direction. Ties in argmax go to the
/// lower class index.
EvaluationRow evaluate(const Network& net, std::span<const Dataset> test_groups, const HeadState* mer = nullptr);

std::size_t predict(const Network& net, std::span<const double> input, const HeadState* mer = nullptr);

double average_incremental_accuracy(std::span<const double> overall_per_step);

/// F_t for a one-based step t in 2..steps(): the mean over earlier groups j
/// of max_{j <= l < t} a[l][j] - a[t][j] (one-based). Not clipped at 0.
double forgetting(const AccuracyMatrix& matrix, std::size_t t);

/// Mean of F_t for t = 2..steps().
double average_incremental_forgetting(const AccuracyMatrix& matrix);

}  // namespace cil
