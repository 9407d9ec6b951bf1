// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "cil/error.hpp"
#include "cil/grad_check.hpp"
#include "cil/nn.hpp"
#include "cil/optim.hpp"
#include "oracles.hpp"

using namespace cil;

namespace {

Network tiny(std::uint64_t seed, std::size_t in = 6, std::vector<std::size_t> hidden = {5, 4},
             std::size_t classes = 4) {
  Rng rng(seed);
  NetworkSpec spec;
  spec.input_dim = in;
  spec.hidden = std::move(hidden);
  spec.classes = classes;
  auto net = make_network(spec, rng);
  for (auto& layer : net.layers) {
    for (auto& b : layer.bias.data()) b = 0.1 * rng.normal();
  }
  return net;
}

std::vector<std::vector<double>> rows_of(const Tensor& t) {
  std::vector<std::vector<double>> out;
  for (std::size_t r = 0; r < t.rows(); ++r) out.emplace_back(t.row(r).begin(), t.row(r).end());
  return out;
}

}  // namespace

TEST_CASE("tensor shape and finiteness") {
  CHECK_THROWS_AS(Tensor({2, 3}, std::vector<double>(5, 0.0)), ShapeError);
  CHECK_THROWS_AS(Tensor({2}, std::vector<double>{1.0, NAN}), ShapeError);
  Tensor t({2, 3}, 1.5);
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  CHECK(t.size() == 6);
}

TEST_CASE("zero network gives a zero feature") {
  auto net = tiny(1);
  for (auto p : net.parameters()) std::fill(p.begin(), p.end(), 0.0);
  const auto f = forward_features(std::vector<double>{1, 2, 3, 4, 5, 6}, net);
  for (double v : f) CHECK(v == 0.0);
}

TEST_CASE("identity layer clips negatives") {
  Network net;
  net.layers.push_back({Tensor({2, 2}, {1, 0, 0, 1}), Tensor({2}, 0.0)});
  net.classifier.weights = Tensor({1, 2}, {1, 0});
  const auto f = forward_features(std::vector<double>{1, -1}, net);
  CHECK(f == Vector{1, 0});
}

TEST_CASE("forward matches a hand-rolled matrix product") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto net = tiny(seed);
    Rng rng(seed + 100);
    const auto x = oracle::random_vector(rng, net.input_dim());
    std::vector<double> h = x;
    for (const auto& layer : net.layers) {
      const std::vector<double> b(layer.bias.data().begin(), layer.bias.data().end());
      h = oracle::matvec_relu(rows_of(layer.weight), b, h);
    }
    const auto f = forward_features(x, net);
    REQUIRE(f.size() == h.size());
    for (std::size_t i = 0; i < h.size(); ++i) CHECK(f[i] == doctest::Approx(h[i]).epsilon(1e-12));
  }
}

TEST_CASE("forward rejects a wrong input width") {
  const auto net = tiny(2);
  CHECK_THROWS_AS(forward_features(std::vector<double>(5, 1.0), net), ShapeError);
}

TEST_CASE("cosine logits") {
  CosineClassifier clf;
  clf.weights = Tensor({2, 2}, {1, 0, 0, 1});
  clf.scale = 1.0;
  CHECK(cosine_logits(std::vector<double>{1, 0}, clf)[0] == doctest::Approx(1.0));
  clf.scale = 4.0;
  CHECK(cosine_logits(std::vector<double>{0, 3}, clf)[0] == 0.0);
  clf.scale = 2.0;
  CHECK(cosine_logits(std::vector<double>{3, 4}, clf)[0] == doctest::Approx(1.2));
  const auto zero = cosine_logits(std::vector<double>{0, 0}, clf);
  CHECK(zero == Logits{0, 0});
}

TEST_CASE("cosine logits stay within the scale") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    auto net = tiny(trial, 6, {5, 4}, 7);
    net.classifier.scale = 0.5 + 10.0 * rng.uniform();
    const auto z = forward(net, oracle::random_vector(rng, 6, 3.0)).logits;
    for (double v : z) CHECK(std::abs(v) <= net.classifier.scale + 1e-12);
  }
}

TEST_CASE("softmax cross-entropy") {
  CHECK(softmax_cross_entropy(std::vector<double>{0.3, 0.3, 0.3, 0.3}, 2).loss ==
        doctest::Approx(std::log(4.0)).epsilon(1e-12));
  CHECK(softmax_cross_entropy(std::vector<double>{10, 0, 0}, 0).loss < 1e-4);
  CHECK(softmax_cross_entropy(std::vector<double>{1, 2}, 0).loss ==
        doctest::Approx(std::log(1.0 + std::exp(1.0))).epsilon(1e-12));
  CHECK_THROWS_AS(softmax_cross_entropy(std::vector<double>{1, 2}, 2), IndexError);
  for (std::size_t c = 2; c < 9; ++c) {
    CHECK(std::abs(softmax_cross_entropy(Vector(c, -1.7), 0).loss - std::log(double(c))) < 1e-9);
  }
}

TEST_CASE("cross-entropy against an independent log-sum-exp") {
  Rng rng(9);
  for (int trial = 0; trial < 500; ++trial) {
    const auto z = oracle::random_vector(rng, 2 + rng.below(8), 5.0);
    const std::size_t y = rng.below(z.size());
    const auto ce = softmax_cross_entropy(z, y);
    CHECK(std::abs(ce.loss - oracle::cross_entropy(z, y)) < 1e-12);
    const auto p = oracle::softmax(z);
    for (std::size_t c = 0; c < z.size(); ++c) CHECK(std::abs(ce.dlogits[c] - (p[c] - (c == y))) < 1e-12);
  }
}

TEST_CASE("sgd with momentum") {
  std::vector<double> p{0.0};
  std::vector<double> g{1.0};
  OptimizerState state;
  state.velocity = {{0.0}};
  state.momentum = 0.9;
  state.learning_rate = 0.1;
  std::vector<std::span<double>> ps{p};
  std::vector<std::span<const double>> gs{g};
  sgd_momentum_step(ps, gs, state);
  CHECK(state.velocity[0][0] == doctest::Approx(1.0));
  CHECK(p[0] == doctest::Approx(-0.1));
  sgd_momentum_step(ps, gs, state);
  CHECK(state.velocity[0][0] == doctest::Approx(1.9));
  CHECK(p[0] == doctest::Approx(-0.29));

  g[0] = 0.0;
  state.velocity = {{1.0}};
  for (int k = 1; k <= 10; ++k) {
    sgd_momentum_step(ps, gs, state);
    CHECK(state.velocity[0][0] == doctest::Approx(std::pow(0.9, k)));
  }
}

TEST_CASE("zero momentum is plain gradient descent") {
  Rng rng(12);
  std::vector<double> p = oracle::random_vector(rng, 8);
  auto expected = p;
  OptimizerState state;
  state.velocity = {Vector(8, 0.0)};
  state.momentum = 0.0;
  state.learning_rate = 0.05;
  for (int step = 0; step < 20; ++step) {
    const auto g = oracle::random_vector(rng, 8);
    for (std::size_t i = 0; i < 8; ++i) expected[i] = expected[i] - 0.05 * g[i];
    std::vector<std::span<double>> ps{p};
    std::vector<std::span<const double>> gs{g};
    sgd_momentum_step(ps, gs, state);
    CHECK(p == expected);
  }
}

TEST_CASE("sgd rejects mismatched shapes") {
  std::vector<double> p(3, 0.0);
  std::vector<double> g(2, 0.0);
  OptimizerState state;
  state.velocity = {Vector(3, 0.0)};
  std::vector<std::span<double>> ps{p};
  std::vector<std::span<const double>> gs{g};
  CHECK_THROWS_AS(sgd_momentum_step(ps, gs, state), ShapeError);
}

TEST_CASE("network step keeps classifier rows unit norm") {
  auto net = tiny(4);
  auto opt = make_optimizer(net, 0.5);
  Rng rng(4);
  for (int step = 0; step < 10; ++step) {
    auto grads = net.zeros_like();
    const auto t = forward(net, oracle::random_vector(rng, 6));
    backward(net, t, softmax_cross_entropy(t.logits, 1).dlogits, {}, grads);
    sgd_momentum_step(net, grads, opt);
    for (std::size_t c = 0; c < net.classifier.classes(); ++c) {
      CHECK(l2_norm(net.classifier.weights.row(c)) == doctest::Approx(1.0).epsilon(1e-12));
    }
    CHECK(net.classifier.scale > 0.0);
  }
}

TEST_CASE("gradient check on random networks") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto net = tiny(seed);
    Rng rng(seed + 77);
    const auto x = oracle::random_vector(rng, 6);
    const auto report = grad_check(net, x, rng.below(4));
    CHECK(report.checked > 0);
    CHECK(report.max_relative_error < 1e-4);
  }
}

TEST_CASE("gradient check is exact for a quadratic") {
  std::vector<double> w{0.7};
  std::vector<double> g{2.0 * (0.7 - 3.0)};
  std::vector<std::span<double>> ps{w};
  std::vector<std::span<const double>> gs{g};
  const auto report = grad_check(ps, gs, [&] {
    LossProbe p;
    p.loss = (static_cast<long double>(w[0]) - 3.0L) * (w[0] - 3.0L);
    return p;
  });
  CHECK(report.max_relative_error < 1e-7);
}

TEST_CASE("gradient check skips a unit sitting on its kink") {
  Network net;
  net.layers.push_back({Tensor({2, 2}, {1, 0, 0, 1}), Tensor({2}, 0.0)});
  net.classifier.weights = Tensor({2, 2}, {1, 0, 0.6, 0.8});
  net.classifier.scale = 3.0;
  // Second unit has pre-activation exactly 0.
  const auto report = grad_check(net, std::vector<double>{1.0, 0.0}, 1);
  CHECK(report.skipped > 0);
  CHECK(report.max_relative_error < 1e-4);
}

TEST_CASE("forward is deterministic") {
  const auto net = tiny(3);
  const std::vector<double> x{0.1, -0.2, 0.3, 0.4, -0.5, 0.6};
  CHECK(forward(net, x).logits == forward(net, x).logits);
}
