// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "cil/nn.hpp"
#include "cil/tensor.hpp"

namespace cil {

/// Heavy-ball momentum without dampening:
///   v <- momentum * v + g
///   p <- p - learning_rate * v
struct OptimizerState {
  std::vector<Vector> velocity;
  double momentum = 0.9;
  double learning_rate = 0.05;
};

OptimizerState make_optimizer(const Network& net, double learning_rate, double momentum = 0.9);

void sgd_momentum_step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads,
                       OptimizerState& state);

/// Network update: the generic step, then classifier rows re-normalized to
/// unit norm and the scale held positive. With `learn_scale` false the scale
/// is restored after the step.
void sgd_momentum_step(Network& net, const Network& grads, OptimizerState& state, bool learn_scale = true);

}  // namespace cil
