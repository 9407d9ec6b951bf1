// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cil/rng.hpp"
#include "cil/tensor.hpp"

namespace cil {

using FeatureVector = Vector;
using Logits = Vector;

/// Fully connected layer followed by ReLU. weight is (out x in), bias (out).
struct DenseLayer {
  Tensor weight;
  Tensor bias;

  std::size_t inputs() const { return weight.cols(); }
  std::size_t outputs() const { return weight.rows(); }

  bool operator==(const DenseLayer&) const = default;
};

/// Scaled cosine-normalized classifier: logit_c = scale * cos(x, w_c).
/// Rows of weights are kept at unit norm after every optimizer step.
struct CosineClassifier {
  Tensor weights;  // classes x dim
  double scale = 4.0;

  std::size_t classes() const { return weights.rows(); }
  std::size_t dim() const { return weights.cols(); }

  void normalize_rows();
  /// Adds `count` random unit-norm class vectors.
  void add_classes(std::size_t count, Rng& rng);

  bool operator==(const CosineClassifier&) const = default;
};

struct Network {
  std::vector<DenseLayer> layers;
  CosineClassifier classifier;

  std::size_t input_dim() const;
  std::size_t feature_dim() const;

  /// Flat views over every trainable value, in a fixed order: per layer
  /// weight then bias, then classifier weights, then the scale.
  std::vector<std::span<double>> parameters();
  std::vector<std::span<const double>> parameters() const;
  std::size_t parameter_count() const;

  /// Same structure with every value zero; used as a gradient buffer.
  Network zeros_like() const;

  bool operator==(const Network&) const = default;
};

struct NetworkSpec {
  std::size_t input_dim = 32;
  std::vector<std::size_t> hidden = {64, 32};
  std::size_t classes = 0;
  double scale = 4.0;
};

/// He-normal weights, zero biases, random unit classifier rows.
Network make_network(const NetworkSpec& spec, Rng& rng);

FeatureVector forward_features(std::span<const double> input, const Network& net);

/// Zero-norm features give all-zero logits.
Logits cosine_logits(std::span<const double> x, const CosineClassifier& clf);

/// Intermediate values kept for backpropagation.
struct ForwardTrace {
  std::vector<Vector> layer_inputs;
  std::vector<Vector> preactivations;
  FeatureVector feature;
  Logits logits;
};

ForwardTrace forward(const Network& net, std::span<const double> input);

/// Accumulates into `grads` the gradient of a loss whose partials with
/// respect to this trace's logits and feature are given. `dfeature` may be
/// empty when the loss does not touch the feature directly.
void backward(const Network& net, const ForwardTrace& trace, std::span<const double> dlogits,
              std::span<const double> dfeature, Network& grads);

/// Max-subtracted softmax of logits / temperature.
Vector softmax(std::span<const double> logits, double temperature = 1.0);

struct LossGrad {
  double loss = 0.0;
  Vector dlogits;
};

/// -log softmax(logits)[label], with its gradient softmax - onehot.
LossGrad softmax_cross_entropy(std::span<const double> logits, std::size_t label);

}  // namespace cil
