// SPDX-License-Identifier: Apache-2.0
#include "cil/nn.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cil/error.hpp"

namespace cil {

void CosineClassifier::normalize_rows() {
  for (std::size_t c = 0; c < classes(); ++c) {
    auto row = weights.row(c);
    const double n = l2_norm(row);
    if (n > 0.0) {
      for (auto& v : row) v /= n;
    }
  }
}

void CosineClassifier::add_classes(std::size_t count, Rng& rng) {
  Vector fresh(count * dim());
  for (auto& v : fresh) v = rng.normal();
  for (std::size_t c = 0; c < count; ++c) {
    std::span<double> row(fresh.data() + c * dim(), dim());
    const double n = l2_norm(row);
    for (auto& v : row) v /= n;
  }
  weights.append_rows(fresh);
}

std::size_t Network::input_dim() const { return layers.front().inputs(); }

std::size_t Network::feature_dim() const { return layers.back().outputs(); }

std::vector<std::span<double>> Network::parameters() {
  std::vector<std::span<double>> out;
  for (auto& layer : layers) {
    out.push_back(layer.weight.data());
    out.push_back(layer.bias.data());
  }
  out.push_back(classifier.weights.data());
  out.emplace_back(&classifier.scale, 1);
  return out;
}

std::vector<std::span<const double>> Network::parameters() const {
  std::vector<std::span<const double>> out;
  for (const auto& layer : layers) {
    out.push_back(layer.weight.data());
    out.push_back(layer.bias.data());
  }
  out.push_back(classifier.weights.data());
  out.emplace_back(&classifier.scale, 1);
  return out;
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (auto p : parameters()) n += p.size();
  return n;
}

Network Network::zeros_like() const {
  Network out;
  for (const auto& layer : layers) {
    out.layers.push_back({Tensor(layer.weight.shape()), Tensor(layer.bias.shape())});
  }
  out.classifier.weights = Tensor(classifier.weights.shape());
  out.classifier.scale = 0.0;
  return out;
}

Network make_network(const NetworkSpec& spec, Rng& rng) {
  if (spec.hidden.empty()) throw ConfigError("network needs at least one hidden layer");
  if (spec.classes == 0) throw ConfigError("network needs at least one class");
  if (!(spec.scale > 0.0)) throw ConfigError("classifier scale must be positive");
  Network net;
  std::size_t fan_in = spec.input_dim;
  for (auto width : spec.hidden) {
    DenseLayer layer{Tensor({width, fan_in}), Tensor({width})};
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (auto& w : layer.weight.data()) w = rng.normal() * stddev;
    net.layers.push_back(std::move(layer));
    fan_in = width;
  }
  Vector rows(spec.classes * fan_in);
  for (auto& v : rows) v = rng.normal();
  net.classifier.weights = Tensor({spec.classes, fan_in}, std::move(rows));
  net.classifier.normalize_rows();
  net.classifier.scale = spec.scale;
  return net;
}

namespace {

void check_input(const Network& net, std::span<const double> input) {
  if (net.layers.empty()) throw ShapeError("network has no layers");
  if (input.size() != net.input_dim()) {
    throw ShapeError("input has dimension " + std::to_string(input.size()) + ", network expects " +
                     std::to_string(net.input_dim()));
  }
}

void affine(const DenseLayer& layer, std::span<const double> in, Vector& out) {
  out.assign(layer.outputs(), 0.0);
  for (std::size_t r = 0; r < layer.outputs(); ++r) {
    const auto w = layer.weight.row(r);
    double acc = layer.bias.data()[r];
    for (std::size_t c = 0; c < in.size(); ++c) acc += w[c] * in[c];
    out[r] = acc;
  }
}

}  // namespace

FeatureVector forward_features(std::span<const double> input, const Network& net) {
  check_input(net, input);
  Vector act(input.begin(), input.end());
  Vector pre;
  for (const auto& layer : net.layers) {
    affine(layer, act, pre);
    for (auto& v : pre) v = std::max(v, 0.0);
    act.swap(pre);
  }
  return act;
}

Logits cosine_logits(std::span<const double> x, const CosineClassifier& clf) {
  if (x.size() != clf.dim()) throw ShapeError("feature dimension does not match classifier");
  Logits out(clf.classes(), 0.0);
  const double nx = l2_norm(x);
  if (nx == 0.0) return out;
  for (std::size_t c = 0; c < clf.classes(); ++c) {
    const auto w = clf.weights.row(c);
    const double nw = l2_norm(w);
    if (nw == 0.0) continue;
    out[c] = clf.scale * dot(x, w) / (nx * nw);
  }
  return out;
}

ForwardTrace forward(const Network& net, std::span<const double> input) {
  check_input(net, input);
  ForwardTrace trace;
  Vector act(input.begin(), input.end());
  for (const auto& layer : net.layers) {
    Vector pre;
    affine(layer, act, pre);
    trace.layer_inputs.push_back(std::move(act));
    act = pre;
    for (auto& v : act) v = std::max(v, 0.0);
    trace.preactivations.push_back(std::move(pre));
  }
  trace.feature = std::move(act);
  trace.logits = cosine_logits(trace.feature, net.classifier);
  return trace;
}

void backward(const Network& net, const ForwardTrace& trace, std::span<const double> dlogits,
              std::span<const double> dfeature, Network& grads) {
  const auto& clf = net.classifier;
  const auto& x = trace.feature;
  const std::size_t dim = x.size();
  if (dlogits.size() != clf.classes()) throw ShapeError("dlogits length does not match classifier");
  if (!dfeature.empty() && dfeature.size() != dim) throw ShapeError("dfeature length mismatch");

  Vector dx(dim, 0.0);
  if (!dfeature.empty()) std::copy(dfeature.begin(), dfeature.end(), dx.begin());

  const double nx = l2_norm(x);
  if (nx > 0.0) {
    for (std::size_t c = 0; c < clf.classes(); ++c) {
      const double g = dlogits[c];
      if (g == 0.0) continue;
      const auto w = clf.weights.row(c);
      const double nw = l2_norm(w);
      if (nw == 0.0) continue;
      const double cos_c = dot(x, w) / (nx * nw);
      grads.classifier.scale += g * cos_c;
      auto gw = grads.classifier.weights.row(c);
      const double s = g * clf.scale;
      for (std::size_t k = 0; k < dim; ++k) {
        const double xh = x[k] / nx;
        const double wh = w[k] / nw;
        dx[k] += s * (wh - cos_c * xh) / nx;
        gw[k] += s * (xh - cos_c * wh) / nw;
      }
    }
  }

  Vector upstream = std::move(dx);
  for (std::size_t l = net.layers.size(); l-- > 0;) {
    const auto& layer = net.layers[l];
    const auto& pre = trace.preactivations[l];
    const auto& in = trace.layer_inputs[l];
    auto& gl = grads.layers[l];
    Vector down(layer.inputs(), 0.0);
    for (std::size_t r = 0; r < layer.outputs(); ++r) {
      if (!(pre[r] > 0.0)) continue;
      const double d = upstream[r];
      if (d == 0.0) continue;
      gl.bias.data()[r] += d;
      auto gw = gl.weight.row(r);
      const auto w = layer.weight.row(r);
      for (std::size_t c = 0; c < in.size(); ++c) {
        gw[c] += d * in[c];
        down[c] += d * w[c];
      }
    }
    upstream.swap(down);
  }
}

Vector softmax(std::span<const double> logits, double temperature) {
  Vector p(logits.size());
  if (logits.empty()) return p;
  const double m = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp((logits[i] - m) / temperature);
    total += p[i];
  }
  for (auto& v : p) v /= total;
  return p;
}

LossGrad softmax_cross_entropy(std::span<const double> logits, std::size_t label) {
  if (label >= logits.size()) {
    throw IndexError("label " + std::to_string(label) + " out of range for " + std::to_string(logits.size()) +
                     " classes");
  }
  const double m = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double z : logits) total += std::exp(z - m);
  LossGrad out;
  out.loss = std::log(total) + m - logits[label];
  out.dlogits = softmax(logits);
  out.dlogits[label] -= 1.0;
  return out;
}

}  // namespace cil
