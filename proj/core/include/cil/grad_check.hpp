// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "cil/nn.hpp"

namespace cil {

/// One evaluation of a scalar loss. `activation_pattern` records the sign
/// (-1, 0, +1) of every ReLU pre-activation visited; a parameter whose
/// perturbation changes the pattern straddles a kink and is skipped. The
/// loss is long double so probes can be evaluated in extended precision:
/// in double, rounding at step 1e-4 leaves about 1e-12 of noise, which the
/// 1e-8 floor of the score magnifies to ~1e-4 on near-zero gradients.
struct LossProbe {
  long double loss = 0.0L;
  std::vector<signed char> activation_pattern;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
};

/// Central differences with `step` against the analytic gradient, scored as
///   |g_a - g_fd| / max(1e-8, |g_a| + |g_fd|).
GradCheckReport grad_check(std::span<const std::span<double>> params,
                           std::span<const std::span<const double>> analytic,
                           const std::function<LossProbe()>& evaluate, double step = 1e-4);

/// Appends the ReLU sign pattern of a trace.
void append_pattern(const ForwardTrace& trace, std::vector<signed char>& pattern);

/// Softmax cross-entropy of `net` on one labelled input; the probe runs the
/// network in long double.
GradCheckReport grad_check(Network& net, std::span<const double> input, std::size_t label, double step = 1e-4);

}  // namespace cil
