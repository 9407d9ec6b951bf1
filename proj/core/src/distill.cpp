// SPDX-License-Identifier: Apache-2.0
#include "cil/distill.hpp"

#include <algorithm>
#include <cmath>

#include "cil/error.hpp"

namespace cil {

DistillGrad feature_distill(std::span<const double> x_new, std::span<const double> x_old) {
  if (x_new.size() != x_old.size()) throw ShapeError("feature distillation: dimension mismatch");
  DistillGrad out;
  out.grad.assign(x_new.size(), 0.0);
  const double na = l2_norm(x_new);
  const double nb = l2_norm(x_old);
  if (na == 0.0 || nb == 0.0) {
    out.loss = 1.0;
    return out;
  }
  const double c = dot(x_new, x_old) / (na * nb);
  out.loss = 1.0 - c;
  for (std::size_t k = 0; k < x_new.size(); ++k) {
    out.grad[k] = -(x_old[k] / nb - c * x_new[k] / na) / na;
  }
  return out;
}

double feature_distill_loss(std::span<const double> x_new, std::span<const double> x_old) {
  return feature_distill(x_new, x_old).loss;
}

namespace {

Vector log_softmax(std::span<const double> z, double temperature) {
  Vector out(z.size());
  const double m = *std::max_element(z.begin(), z.end()) / temperature;
  double total = 0.0;
  for (double v : z) total += std::exp(v / temperature - m);
  const double lse = m + std::log(total);
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] / temperature - lse;
  return out;
}

}  // namespace

DistillGrad label_distill(std::span<const double> logits_new, std::span<const double> logits_old, double temperature) {
  if (!(temperature > 0.0)) throw ConfigError("distillation temperature must be positive");
  if (logits_new.size() != logits_old.size()) throw ShapeError("label distillation: vocabulary mismatch");
  DistillGrad out;
  out.grad.assign(logits_new.size(), 0.0);
  if (logits_new.empty()) return out;
  const auto lp = log_softmax(logits_old, temperature);
  const auto lq = log_softmax(logits_new, temperature);
  double kl = 0.0;
  for (std::size_t i = 0; i < lp.size(); ++i) {
    const double p = std::exp(lp[i]);
    kl += p * (lp[i] - lq[i]);
    out.grad[i] = temperature * (std::exp(lq[i]) - p);
  }
  out.loss = std::max(0.0, kl) * temperature * temperature;
  return out;
}

double label_distill_loss(std::span<const double> logits_new, std::span<const double> logits_old, double temperature) {
  return label_distill(logits_new, logits_old, temperature).loss;
}

}  // namespace cil
