// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <unordered_map>

#include "cil/dataset.hpp"
#include "cil/dce.hpp"
#include "cil/distill.hpp"
#include "cil/mer.hpp"
#include "cil/nn.hpp"
#include "cil/optim.hpp"
#include "cil/rng.hpp"

namespace cil {

struct DistillToggles {
  bool feature = false;
  bool label = false;
  double lambda_feat = 1.0;
  double lambda_label = 1.0;
  double temperature = 2.0;
};

/// Everything a minibatch update may read besides the batch itself.
/// `snapshot` is null at step 0; `cache` null selects plain cross-entropy, as does
/// an anchor the cache does not hold.
struct TrainContext {
  const ModelSnapshot* snapshot = nullptr;
  const NeighborCache* cache = nullptr;
  const std::unordered_map<std::uint32_t, const Sample*>* samples_by_id = nullptr;
  WeightScheme scheme;
  DistillToggles distill;
  HeadState* head = nullptr;  // batch-mean feature appended to its trace
  Rng* rng = nullptr;         // neighbour sampling for rand_k
  bool learn_scale = true;
};

struct StepReport {
  double loss = 0.0;          // batch-mean total loss before the update
  std::size_t forwards = 0;   // current-model feature forwards
  std::size_t clamped = 0;    // anchors whose effect hit the clamp
};

/// One SGD-with-momentum update on the batch-mean of
///   classification + lambda_feat * feature_distill + lambda_label * label_distill
/// where classification is the colliding-effect loss when a cache is given
/// and softmax cross-entropy otherwise.
StepReport train_step(std::span<const Sample* const> batch, Network& model, OptimizerState& optimizer,
                      const TrainContext& context);

/// Colliding-effect step; requires a snapshot and a cache (StateError).
StepReport dce_train_step(std::span<const Sample* const> batch, Network& model, OptimizerState& optimizer,
                          const TrainContext& context);

/// Accumulates the batch loss gradient without updating; used by the
/// gradient checks and by train_step.
StepReport batch_gradient(std::span<const Sample* const> batch, const Network& model, const TrainContext& context,
                          Network& grads);

}  // namespace cil
