// SPDX-License-Identifier: Apache-2.0
#pragma once

// Incremental momentum effect removal. During a step the mean minibatch
// feature is accumulated with the optimizer momentum,
//   trace <- momentum * trace + batch_mean,
// its direction h_t is blended with the previous step's direction,
//   h = normalize((1 - beta) * h_prev + beta * h_t),
// and at inference the classifier response to the projection of x on h is
// removed:
//   logits = cosine_logits(x) - alpha * cosine_logits((x . h) h).

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "cil/dataset.hpp"
#include "cil/nn.hpp"
#include "cil/rng.hpp"

namespace cil {

inline constexpr double kDefaultAlpha = 0.5;
inline constexpr double kDefaultBeta = 0.8;

struct HeadState {
  Vector trace;
  std::size_t iterations = 0;
  double momentum = 0.9;
  std::optional<Vector> previous_head;  // h_{t-1}
  std::optional<Vector> step_head;      // h_t
  std::optional<Vector> head;           // blended h used at inference
  double alpha = kDefaultAlpha;
  double beta = kDefaultBeta;

  bool operator==(const HeadState&) const = default;
};

void update_trace(HeadState& state, std::span<const double> batch_mean_feature);

/// h_t = trace / ||trace||; stores it as step_head and resets the trace.
/// Throws HeadError on a zero trace.
Vector finalize_head(HeadState& state);

/// normalize((1 - beta) h_prev + beta h_t); without h_prev returns h_t.
Vector blend_head(const std::optional<Vector>& previous, std::span<const double> current, double beta);

/// Blends state.previous_head and state.step_head with state.beta into state.head.
void refresh_head(HeadState& state);

/// Moves the step head into previous_head before the next step starts.
void advance_head(HeadState& state);

Logits debiased_logits(std::span<const double> x, std::span<const double> head, double alpha,
                       const CosineClassifier& clf);

struct FinetuneSettings {
  std::size_t epochs = 30;
  double learning_rate = 0.1;
};

struct AlphaBetaFit {
  double alpha = kDefaultAlpha;
  double beta = kDefaultBeta;
  bool trained = false;
  std::vector<double> losses;  // full-subset loss before training and after every epoch
};

/// Mean cross-entropy of debiased logits over `subset`, with gradients in
/// alpha and beta. `step_head` and `previous_head` from state are used.
struct AlphaBetaLoss {
  double loss = 0.0;
  double d_alpha = 0.0;
  double d_beta = 0.0;
};
AlphaBetaLoss alpha_beta_loss(const Network& net, const Dataset& subset, const HeadState& state, double alpha,
                              double beta);

/// Fits alpha >= 0 and beta in [0, 1] on a class-balanced subset with the
/// network frozen, starting from state.alpha / state.beta (0.5 and 0.8 by
/// default). Full-batch gradient descent with step halving, so the loss
/// never increases. With replay_per_class == 0 no subset exists and the
/// starting values are returned untrained. The fitted values are written to
/// state and state.head is refreshed.
AlphaBetaFit learn_alpha_beta(const Network& net, const Dataset& subset, HeadState& state,
                              const FinetuneSettings& settings, std::size_t replay_per_class);

/// Equal per-class subset: the old-class exemplars as given plus `per_class`
/// random samples of every new class. Throws if a class cannot supply them.
Dataset balanced_subset(const Dataset& new_data, std::span<const Sample> exemplars, std::size_t per_class, Rng& rng);

}  // namespace cil
