// SPDX-License-Identifier: Apache-2.0
#include "cil/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>
#include <string>

#include "cil/error.hpp"

namespace cil {

namespace {

std::size_t element_count(const std::vector<std::size_t>& shape) {
  if (shape.empty()) throw ShapeError("tensor shape must have at least one dimension");
  for (auto extent : shape) {
    if (extent == 0) throw ShapeError("tensor extents must be positive");
  }
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  const auto expected = element_count(shape_);
  if (data_.size() != expected) {
    throw ShapeError("tensor data has " + std::to_string(data_.size()) + " values, shape needs " +
                     std::to_string(expected));
  }
  for (double v : data_) {
    if (!std::isfinite(v)) throw ShapeError("tensor values must be finite");
  }
}

std::size_t Tensor::rows() const { return rank() == 1 ? 1 : shape_[0]; }

std::size_t Tensor::cols() const { return rank() == 1 ? shape_[0] : shape_[1]; }

void Tensor::append_rows(std::span<const double> values) {
  if (rank() != 2) throw ShapeError("append_rows needs a 2-D tensor");
  if (values.size() % cols() != 0) throw ShapeError("appended values are not a whole number of rows");
  data_.insert(data_.end(), values.begin(), values.end());
  shape_[0] += values.size() / cols();
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("dot: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double l2_norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double cosine(std::span<const double> a, std::span<const double> b) {
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

Vector normalized(std::span<const double> a) {
  Vector out(a.begin(), a.end());
  const double n = l2_norm(a);
  if (n > 0.0) {
    for (auto& v : out) v /= n;
  }
  return out;
}

void round_to_float(std::span<double> values) {
  for (auto& v : values) v = static_cast<double>(static_cast<float>(v));
}

}  // namespace cil
