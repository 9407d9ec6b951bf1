// SPDX-License-Identifier: Apache-2.0
#include "cil/train.hpp"

#include <string>

#include "cil/error.hpp"

namespace cil {

StepReport batch_gradient(std::span<const Sample* const> batch, const Network& model, const TrainContext& context,
                          Network& grads) {
  StepReport report;
  if (batch.empty()) return report;
  const bool colliding = context.cache != nullptr;
  if (colliding && (context.snapshot == nullptr || context.samples_by_id == nullptr)) {
    throw StateError("colliding-effect training needs a snapshot and a sample lookup");
  }
  if ((context.distill.feature || context.distill.label) && context.snapshot == nullptr) {
    throw StateError("distillation needs a snapshot of the previous model");
  }
  if (colliding && context.scheme.kind == WeightKind::rand_k && context.rng == nullptr) {
    throw StateError("rand_k needs a random stream");
  }

  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  const std::size_t dim = model.feature_dim();
  Vector mean_feature(dim, 0.0);
  Rng fallback(0);
  Rng& rng = context.rng ? *context.rng : fallback;

  for (const Sample* anchor : batch) {
    const bool effect = colliding && context.cache->contains(anchor->id);
    const auto trace = forward(model, anchor->input);
    ++report.forwards;
    for (std::size_t k = 0; k < dim; ++k) mean_feature[k] += trace.feature[k] * inv_batch;

    Vector dlogits(trace.logits.size(), 0.0);
    Vector dfeature;
    double loss = 0.0;

    if (effect) {
      const auto members = select_members(*context.cache, anchor->id, context.scheme, rng);
      const auto weights = member_weights(context.scheme, members);
      std::vector<ForwardTrace> traces;
      std::vector<Logits> logits{trace.logits};
      traces.reserve(members.size() - 1);
      for (std::size_t j = 1; j < members.size(); ++j) {
        const auto it = context.samples_by_id->find(members[j].id);
        if (it == context.samples_by_id->end()) {
          throw InternalError("neighbour id " + std::to_string(members[j].id) + " has no sample");
        }
        traces.push_back(forward(model, it->second->input));
        ++report.forwards;
        logits.push_back(traces.back().logits);
      }
      const auto ce = colliding_effect_loss(anchor->label, logits, weights);
      loss += ce.loss;
      report.clamped += ce.clamped ? 1 : 0;
      for (std::size_t c = 0; c < dlogits.size(); ++c) dlogits[c] = ce.dlogits[0][c] * inv_batch;
      for (std::size_t j = 1; j < members.size(); ++j) {
        Vector g = ce.dlogits[j];
        for (auto& v : g) v *= inv_batch;
        backward(model, traces[j - 1], g, {}, grads);
      }
    } else {
      const auto ce = softmax_cross_entropy(trace.logits, anchor->label);
      loss += ce.loss;
      for (std::size_t c = 0; c < dlogits.size(); ++c) dlogits[c] = ce.dlogits[c] * inv_batch;
    }

    if (context.distill.feature) {
      const auto old_feature = context.snapshot->features(anchor->input);
      const auto fd = feature_distill(trace.feature, old_feature);
      loss += context.distill.lambda_feat * fd.loss;
      dfeature.resize(dim);
      for (std::size_t k = 0; k < dim; ++k) dfeature[k] = context.distill.lambda_feat * fd.grad[k] * inv_batch;
    }
    if (context.distill.label) {
      const auto old_logits = context.snapshot->logits(anchor->input);
      const std::span<const double> restricted(trace.logits.data(), old_logits.size());
      const auto ld = label_distill(restricted, old_logits, context.distill.temperature);
      loss += context.distill.lambda_label * ld.loss;
      for (std::size_t c = 0; c < old_logits.size(); ++c) {
        dlogits[c] += context.distill.lambda_label * ld.grad[c] * inv_batch;
      }
    }
    backward(model, trace, dlogits, dfeature, grads);
    report.loss += loss * inv_batch;
  }
  if (context.head) update_trace(*context.head, mean_feature);
  return report;
}

StepReport train_step(std::span<const Sample* const> batch, Network& model, OptimizerState& optimizer,
                      const TrainContext& context) {
  auto grads = model.zeros_like();
  const auto report = batch_gradient(batch, model, context, grads);
  if (!batch.empty()) sgd_momentum_step(model, grads, optimizer, context.learn_scale);
  return report;
}

StepReport dce_train_step(std::span<const Sample* const> batch, Network& model, OptimizerState& optimizer,
                          const TrainContext& context) {
  if (context.snapshot == nullptr) throw StateError("colliding-effect step needs a snapshot (step t >= 1)");
  if (context.cache == nullptr) throw StateError("colliding-effect step needs a neighbour cache");
  return train_step(batch, model, optimizer, context);
}

}  // namespace cil
