// SPDX-License-Identifier: Apache-2.0
#include "cil/mer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "cil/error.hpp"
#include "cil/replay.hpp"

namespace cil {

void update_trace(HeadState& state, std::span<const double> batch_mean_feature) {
  if (state.trace.empty()) state.trace.assign(batch_mean_feature.size(), 0.0);
  if (state.trace.size() != batch_mean_feature.size()) throw ShapeError("trace dimension mismatch");
  for (std::size_t k = 0; k < state.trace.size(); ++k) {
    state.trace[k] = state.momentum * state.trace[k] + batch_mean_feature[k];
  }
  ++state.iterations;
}

Vector finalize_head(HeadState& state) {
  const double n = l2_norm(state.trace);
  if (!(n > 0.0)) throw HeadError("momentum trace is zero; no head direction");
  Vector h = state.trace;
  for (auto& v : h) v /= n;
  state.step_head = h;
  state.trace.assign(state.trace.size(), 0.0);
  state.iterations = 0;
  return h;
}

Vector blend_head(const std::optional<Vector>& previous, std::span<const double> current, double beta) {
  if (beta < 0.0 || beta > 1.0) throw ConfigError("beta must lie in [0, 1]");
  if (!previous) return {current.begin(), current.end()};
  if (previous->size() != current.size()) throw ShapeError("head dimension mismatch");
  Vector h(current.size());
  for (std::size_t k = 0; k < h.size(); ++k) h[k] = (1.0 - beta) * (*previous)[k] + beta * current[k];
  const double n = l2_norm(h);
  if (!(n > 1e-12)) throw HeadError("blended head direction vanished");
  for (auto& v : h) v /= n;
  return h;
}

void refresh_head(HeadState& state) {
  if (!state.step_head) throw StateError("no head direction for this step");
  state.head = blend_head(state.previous_head, *state.step_head, state.beta);
}

void advance_head(HeadState& state) {
  if (state.step_head) state.previous_head = state.step_head;
  state.step_head.reset();
}

Logits debiased_logits(std::span<const double> x, std::span<const double> head, double alpha,
                       const CosineClassifier& clf) {
  auto out = cosine_logits(x, clf);
  if (alpha == 0.0) return out;
  const double proj = dot(x, head);
  Vector xh(head.begin(), head.end());
  for (auto& v : xh) v *= proj;
  const auto bias = cosine_logits(xh, clf);
  for (std::size_t c = 0; c < out.size(); ++c) out[c] -= alpha * bias[c];
  return out;
}

namespace {

// Per-sample quantities that stay fixed while only alpha and beta move.
struct FrozenSample {
  Vector feature;
  Logits base;
  std::size_t label;
};

std::vector<FrozenSample> freeze(const Network& net, const Dataset& subset) {
  std::vector<FrozenSample> out;
  out.reserve(subset.size());
  for (const auto& s : subset.samples) {
    auto f = forward_features(s.input, net);
    auto base = cosine_logits(f, net.classifier);
    out.push_back({std::move(f), std::move(base), s.label});
  }
  return out;
}

AlphaBetaLoss loss_on(const std::vector<FrozenSample>& samples, const CosineClassifier& clf, const HeadState& state,
                      double alpha, double beta) {
  if (!state.step_head) throw StateError("alpha/beta fit needs a step head direction");
  const Vector& ht = *state.step_head;
  const std::size_t d = ht.size();
  Vector u(d);
  Vector du(d, 0.0);
  if (state.previous_head) {
    for (std::size_t k = 0; k < d; ++k) {
      u[k] = (1.0 - beta) * (*state.previous_head)[k] + beta * ht[k];
      du[k] = ht[k] - (*state.previous_head)[k];
    }
  } else {
    u = ht;
  }
  const double nu = l2_norm(u);
  if (!(nu > 1e-12)) throw HeadError("blended head direction vanished");
  Vector h = u;
  for (auto& v : h) v /= nu;
  // dh/dbeta = (du - h (h . du)) / ||u||
  const double hdu = dot(h, du);
  Vector dh(d);
  for (std::size_t k = 0; k < d; ++k) dh[k] = (du[k] - h[k] * hdu) / nu;

  // With unit h, cos((x.h) h, w_c) = sign(x.h) * (h . w_c) / ||w_c||.
  const std::size_t classes = clf.classes();
  Vector hw(classes);
  Vector dhw(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    const auto w = clf.weights.row(c);
    const double nw = l2_norm(w);
    hw[c] = nw > 0.0 ? dot(h, w) / nw : 0.0;
    dhw[c] = nw > 0.0 ? dot(dh, w) / nw : 0.0;
  }

  AlphaBetaLoss out;
  Vector z(classes);
  for (const auto& s : samples) {
    const double proj = dot(s.feature, h);
    const double sign = (proj > 0.0) - (proj < 0.0);
    for (std::size_t c = 0; c < classes; ++c) z[c] = s.base[c] - alpha * clf.scale * sign * hw[c];
    const auto ce = softmax_cross_entropy(z, s.label);
    out.loss += ce.loss;
    for (std::size_t c = 0; c < classes; ++c) {
      out.d_alpha += ce.dlogits[c] * (-clf.scale * sign * hw[c]);
      out.d_beta += ce.dlogits[c] * (-alpha * clf.scale * sign * dhw[c]);
    }
  }
  const double n = static_cast<double>(samples.size());
  out.loss /= n;
  out.d_alpha /= n;
  out.d_beta /= n;
  return out;
}

}  // namespace

AlphaBetaLoss alpha_beta_loss(const Network& net, const Dataset& subset, const HeadState& state, double alpha,
                              double beta) {
  if (subset.empty()) throw ValidationError("empty balanced subset");
  return loss_on(freeze(net, subset), net.classifier, state, alpha, beta);
}

AlphaBetaFit learn_alpha_beta(const Network& net, const Dataset& subset, HeadState& state,
                              const FinetuneSettings& settings, std::size_t replay_per_class) {
  AlphaBetaFit fit;
  fit.alpha = state.alpha;
  fit.beta = state.beta;
  if (replay_per_class == 0) {
    if (state.step_head) refresh_head(state);
    return fit;
  }
  if (subset.empty()) throw ValidationError("finetune stage needs a non-empty balanced subset");
  const auto samples = freeze(net, subset);
  double alpha = state.alpha;
  double beta = state.beta;
  auto current = loss_on(samples, net.classifier, state, alpha, beta);
  fit.losses.push_back(current.loss);
  for (std::size_t epoch = 0; epoch < settings.epochs; ++epoch) {
    double lr = settings.learning_rate;
    for (int attempt = 0; attempt < 30; ++attempt, lr *= 0.5) {
      const double a = std::max(0.0, alpha - lr * current.d_alpha);
      const double b = std::clamp(beta - lr * current.d_beta, 0.0, 1.0);
      const auto next = loss_on(samples, net.classifier, state, a, b);
      if (next.loss <= current.loss) {
        alpha = a;
        beta = b;
        current = next;
        break;
      }
    }
    fit.losses.push_back(current.loss);
  }
  fit.alpha = alpha;
  fit.beta = beta;
  fit.trained = true;
  state.alpha = alpha;
  state.beta = beta;
  refresh_head(state);
  return fit;
}

Dataset balanced_subset(const Dataset& new_data, std::span<const Sample> exemplars, std::size_t per_class, Rng& rng) {
  Dataset out;
  out.class_count = new_data.class_count;
  std::map<std::uint32_t, std::size_t> old_counts;
  for (const auto& s : exemplars) ++old_counts[s.label];
  for (const auto& [label, count] : old_counts) {
    if (count != per_class) {
      throw ValidationError("old class " + std::to_string(label) + " holds " + std::to_string(count) +
                            " exemplars, balanced subset needs " + std::to_string(per_class));
    }
  }
  out.samples.assign(exemplars.begin(), exemplars.end());
  std::map<std::uint32_t, std::vector<const Sample*>> by_class;
  for (const auto& s : new_data.samples) by_class[s.label].push_back(&s);
  for (const auto& [label, members] : by_class) {
    for (auto i : random_select(members.size(), per_class, rng)) out.samples.push_back(*members[i]);
  }
  for (const auto& s : out.samples) out.class_count = std::max<std::size_t>(out.class_count, s.label + 1);
  return out;
}

}  // namespace cil
