// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace cil {

using Vector = std::vector<double>;

/// Dense row-major tensor of doubles. Shape entries are positive and the
/// element count always equals their product.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  std::size_t rank() const { return shape_.size(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  // 2-D accessors; rank-1 tensors behave as a single row.
  std::size_t rows() const;
  std::size_t cols() const;
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  std::span<double> row(std::size_t r) { return std::span<double>(data_).subspan(r * cols(), cols()); }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(data_).subspan(r * cols(), cols());
  }

  /// Appends rows to a 2-D tensor (used when the classifier grows).
  void append_rows(std::span<const double> values);

  bool operator==(const Tensor&) const = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> a);

/// Cosine similarity; 0 when either argument has zero norm.
double cosine(std::span<const double> a, std::span<const double> b);

/// Unit-norm copy; the zero vector maps to itself.
Vector normalized(std::span<const double> a);

/// Rounds every entry to the nearest float. Values that cross a step
/// boundary (checkpoints, exemplar inputs) are kept f32-representable.
void round_to_float(std::span<double> values);

}  // namespace cil
