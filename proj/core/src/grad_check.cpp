// SPDX-License-Identifier: Apache-2.0
#include "cil/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "cil/error.hpp"

namespace cil {

GradCheckReport grad_check(std::span<const std::span<double>> params,
                           std::span<const std::span<const double>> analytic,
                           const std::function<LossProbe()>& evaluate, double step) {
  if (params.size() != analytic.size()) throw ShapeError("grad_check: parameter/gradient count mismatch");
  GradCheckReport report;
  // A unit sitting exactly at zero flips sign under any perturbation of a
  // parameter feeding it, so the pattern comparison below also skips it.
  const auto base = evaluate().activation_pattern;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].size() != analytic[i].size()) throw ShapeError("grad_check: gradient shape mismatch");
    for (std::size_t k = 0; k < params[i].size(); ++k) {
      double& value = params[i][k];
      const double saved = value;
      value = saved + step;
      const auto plus = evaluate();
      value = saved - step;
      const auto minus = evaluate();
      value = saved;
      if (plus.activation_pattern != base || minus.activation_pattern != base) {
        ++report.skipped;
        continue;
      }
      const double numeric = static_cast<double>((plus.loss - minus.loss) / (2.0L * step));
      const double exact = analytic[i][k];
      const double rel = std::abs(exact - numeric) / std::max(1e-8, std::abs(exact) + std::abs(numeric));
      report.max_relative_error = std::max(report.max_relative_error, rel);
      ++report.checked;
    }
  }
  return report;
}

void append_pattern(const ForwardTrace& trace, std::vector<signed char>& pattern) {
  for (const auto& pre : trace.preactivations) {
    for (double v : pre) pattern.push_back(static_cast<signed char>((v > 0.0) - (v < 0.0)));
  }
}

namespace {

// Cross-entropy and ReLU signs of one input, recomputed in long double.
LossProbe extended_ce_probe(const Network& net, std::span<const double> input, std::size_t label) {
  LossProbe probe;
  std::vector<long double> x(input.begin(), input.end());
  for (const auto& layer : net.layers) {
    std::vector<long double> next(layer.outputs());
    for (std::size_t r = 0; r < next.size(); ++r) {
      long double s = layer.bias.data()[r];
      for (std::size_t c = 0; c < x.size(); ++c) s += static_cast<long double>(layer.weight.at(r, c)) * x[c];
      probe.activation_pattern.push_back(static_cast<signed char>((s > 0.0L) - (s < 0.0L)));
      next[r] = s > 0.0L ? s : 0.0L;
    }
    x = std::move(next);
  }
  long double xn = 0.0L;
  for (auto v : x) xn += v * v;
  xn = std::sqrt(xn);
  const auto& w = net.classifier.weights;
  std::vector<long double> z(w.rows(), 0.0L);
  for (std::size_t c = 0; c < z.size(); ++c) {
    long double d = 0.0L;
    long double wn = 0.0L;
    for (std::size_t k = 0; k < x.size(); ++k) {
      d += static_cast<long double>(w.at(c, k)) * x[k];
      wn += static_cast<long double>(w.at(c, k)) * w.at(c, k);
    }
    const long double denom = xn * std::sqrt(wn);
    if (denom > 0.0L) z[c] = static_cast<long double>(net.classifier.scale) * d / denom;
  }
  const long double m = *std::max_element(z.begin(), z.end());
  long double sum = 0.0L;
  for (auto v : z) sum += std::exp(v - m);
  probe.loss = m + std::log(sum) - z[label];
  return probe;
}

}  // namespace

GradCheckReport grad_check(Network& net, std::span<const double> input, std::size_t label, double step) {
  auto grads = net.zeros_like();
  const auto trace = forward(net, input);
  const auto ce = softmax_cross_entropy(trace.logits, label);
  backward(net, trace, ce.dlogits, {}, grads);
  auto evaluate = [&] { return extended_ce_probe(net, input, label); };
  const auto params = net.parameters();
  const auto g = std::as_const(grads).parameters();
  return grad_check(params, g, evaluate, step);
}

}  // namespace cil
