// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>

#include "cil/nn.hpp"

namespace cil {

/// Frozen copy of the model that finished the previous step. It produces
/// old-space features and old-vocabulary logits for any input.
class ModelSnapshot {
 public:
  ModelSnapshot(Network network, std::size_t step) : network_(std::move(network)), step_(step) {}

  const Network& network() const { return network_; }
  std::size_t step() const { return step_; }
  std::size_t old_classes() const { return network_.classifier.classes(); }

  FeatureVector features(std::span<const double> input) const { return forward_features(input, network_); }
  Logits logits(std::span<const double> input) const {
    return cosine_logits(features(input), network_.classifier);
  }

 private:
  const Network network_;
  const std::size_t step_;
};

struct DistillGrad {
  double loss = 0.0;
  Vector grad;  // with respect to the new model's quantity
};

/// 1 - cos(x_new, x_old); cos of a zero vector is 0.
DistillGrad feature_distill(std::span<const double> x_new, std::span<const double> x_old);
double feature_distill_loss(std::span<const double> x_new, std::span<const double> x_old);

/// tau^2 * KL(softmax(old / tau) || softmax(new / tau)) over the old
/// vocabulary. Both logit vectors must have the same length.
DistillGrad label_distill(std::span<const double> logits_new, std::span<const double> logits_old, double temperature);
double label_distill_loss(std::span<const double> logits_new, std::span<const double> logits_old, double temperature);

}  // namespace cil
