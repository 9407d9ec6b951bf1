// SPDX-License-Identifier: Apache-2.0
#include "cil/metrics.hpp"

#include <algorithm>
#include <string>

#include "cil/error.hpp"

namespace cil {

void AccuracyMatrix::append_row(std::vector<double> row) {
  if (row.size() != rows_.size() + 1) {
    throw ShapeError("accuracy row for step " + std::to_string(rows_.size()) + " needs " +
                     std::to_string(rows_.size() + 1) + " groups");
  }
  for (double a : row) {
    if (!(a >= 0.0 && a <= 1.0)) throw ValidationError("accuracy outside [0, 1]");
  }
  rows_.push_back(std::move(row));
}

double AccuracyMatrix::at(std::size_t time, std::size_t group) const {
  if (time >= rows_.size() || group > time) {
    throw IndexError("accuracy entry (" + std::to_string(time) + ", " + std::to_string(group) + ") undefined");
  }
  return rows_[time][group];
}

std::size_t predict(const Network& net, std::span<const double> input, const HeadState* mer) {
  const auto x = forward_features(input, net);
  const auto z = (mer && mer->head) ? debiased_logits(x, *mer->head, mer->alpha, net.classifier)
                                    : cosine_logits(x, net.classifier);
  return static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
}

EvaluationRow evaluate(const Network& net, std::span<const Dataset> test_groups, const HeadState* mer) {
  EvaluationRow row;
  std::size_t correct_total = 0;
  std::size_t seen_total = 0;
  for (std::size_t g = 0; g < test_groups.size(); ++g) {
    const auto& group = test_groups[g];
    if (group.empty()) throw ValidationError("test set for group " + std::to_string(g) + " is empty");
    std::size_t correct = 0;
    for (const auto& s : group.samples) {
      if (s.label >= net.classifier.classes()) throw ValidationError("test label beyond the classifier vocabulary");
      correct += predict(net, s.input, mer) == s.label ? 1 : 0;
    }
    row.group_accuracy.push_back(static_cast<double>(correct) / static_cast<double>(group.size()));
    correct_total += correct;
    seen_total += group.size();
  }
  if (seen_total == 0) throw ValidationError("nothing to evaluate");
  row.overall = static_cast<double>(correct_total) / static_cast<double>(seen_total);
  return row;
}

double average_incremental_accuracy(std::span<const double> overall_per_step) {
  if (overall_per_step.empty()) throw ValidationError("average incremental accuracy of an empty sequence");
  double total = 0.0;
  for (double a : overall_per_step) total += a;
  return total / static_cast<double>(overall_per_step.size());
}

double forgetting(const AccuracyMatrix& matrix, std::size_t t) {
  if (t <= 1) throw ValidationError("forgetting is defined for t > 1");
  if (t > matrix.steps()) throw ValidationError("forgetting at t=" + std::to_string(t) + " needs more steps");
  const std::size_t now = t - 1;
  double total = 0.0;
  for (std::size_t j = 0; j < now; ++j) {
    double best = matrix.at(j, j);
    for (std::size_t l = j + 1; l < now; ++l) best = std::max(best, matrix.at(l, j));
    total += best - matrix.at(now, j);
  }
  return total / static_cast<double>(now);
}

double average_incremental_forgetting(const AccuracyMatrix& matrix) {
  if (matrix.steps() < 2) throw ValidationError("average forgetting needs at least two evaluated steps");
  double total = 0.0;
  for (std::size_t t = 2; t <= matrix.steps(); ++t) total += forgetting(matrix, t);
  return total / static_cast<double>(matrix.steps() - 1);
}

}  // namespace cil
