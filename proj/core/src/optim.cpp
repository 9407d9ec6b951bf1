// SPDX-License-Identifier: Apache-2.0
#include "cil/optim.hpp"

#include <algorithm>

#include "cil/error.hpp"

namespace cil {

namespace {
constexpr double kMinScale = 1e-3;
}

OptimizerState make_optimizer(const Network& net, double learning_rate, double momentum) {
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("momentum must lie in [0, 1)");
  OptimizerState state;
  state.learning_rate = learning_rate;
  state.momentum = momentum;
  for (auto p : net.parameters()) state.velocity.emplace_back(p.size(), 0.0);
  return state;
}

void sgd_momentum_step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads,
                       OptimizerState& state) {
  if (params.size() != grads.size()) throw ShapeError("parameter and gradient counts differ");
  if (state.velocity.empty()) {
    for (auto p : params) state.velocity.emplace_back(p.size(), 0.0);
  }
  if (state.velocity.size() != params.size()) throw ShapeError("optimizer state does not match parameters");
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i];
    auto g = grads[i];
    auto& v = state.velocity[i];
    if (p.size() != g.size() || p.size() != v.size()) throw ShapeError("parameter shape mismatch in optimizer step");
    for (std::size_t k = 0; k < p.size(); ++k) {
      v[k] = state.momentum * v[k] + g[k];
      p[k] -= state.learning_rate * v[k];
    }
  }
}

void sgd_momentum_step(Network& net, const Network& grads, OptimizerState& state, bool learn_scale) {
  const double scale = net.classifier.scale;
  // The classifier may have grown since the state was created; new rows
  // start with zero velocity.
  auto params = net.parameters();
  if (state.velocity.size() == params.size()) {
    for (std::size_t i = 0; i < params.size(); ++i) state.velocity[i].resize(params[i].size(), 0.0);
  }
  const auto g = grads.parameters();
  sgd_momentum_step(params, g, state);
  net.classifier.normalize_rows();
  net.classifier.scale = learn_scale ? std::max(net.classifier.scale, kMinScale) : scale;
}

}  // namespace cil
