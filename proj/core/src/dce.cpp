// SPDX-License-Identifier: Apache-2.0
#include "cil/dce.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iostream>

#include "cil/error.hpp"
#include "cil/replay.hpp"

namespace cil {

void NeighborCache::insert(std::uint32_t id, std::span<const double> feature) {
  if (index_.count(id) != 0) throw InternalError("neighbour cache already holds sample id " + std::to_string(id));
  if (ids_.empty()) {
    dim_ = feature.size();
  } else if (feature.size() != dim_) {
    throw ShapeError("neighbour cache feature dimension mismatch");
  }
  const auto unit = normalized(feature);
  index_.emplace(id, ids_.size());
  ids_.push_back(id);
  data_.insert(data_.end(), unit.begin(), unit.end());
}

std::span<const double> NeighborCache::feature(std::uint32_t id) const {
  const auto it = index_.find(id);
  if (it == index_.end()) throw IndexError("sample id " + std::to_string(id) + " is not in the neighbour cache");
  return feature_at(it->second);
}

NeighborCache build_cache(const Dataset& training_set, const ModelSnapshot& snapshot) {
  NeighborCache cache;
  for (const auto& s : training_set.samples) cache.insert(s.id, snapshot.features(s.input));
  return cache;
}

namespace {

std::size_t anchor_index(const NeighborCache& cache, std::uint32_t anchor, std::size_t k) {
  if (!cache.contains(anchor)) throw IndexError("anchor " + std::to_string(anchor) + " is not in the cache");
  if (k >= cache.size()) {
    throw IndexError("K=" + std::to_string(k) + " needs more than " + std::to_string(cache.size()) +
                     " cached samples");
  }
  const auto& ids = cache.ids();
  return static_cast<std::size_t>(std::find(ids.begin(), ids.end(), anchor) - ids.begin());
}

std::vector<Neighbor> others_by_distance(const NeighborCache& cache, std::size_t anchor_at) {
  const auto a = cache.feature_at(anchor_at);
  std::vector<Neighbor> out;
  out.reserve(cache.size() - 1);
  for (std::size_t i = 0; i < cache.size(); ++i) {
    if (i == anchor_at) continue;
    const double d = std::max(0.0, 1.0 - dot(a, cache.feature_at(i)));
    out.push_back({cache.ids()[i], d});
  }
  return out;
}

bool nearer(const Neighbor& x, const Neighbor& y) {
  return x.distance < y.distance || (x.distance == y.distance && x.id < y.id);
}

}  // namespace

std::vector<Neighbor> knn_query(const NeighborCache& cache, std::uint32_t anchor, std::size_t k) {
  const auto at = anchor_index(cache, anchor, k);
  auto others = others_by_distance(cache, at);
  std::partial_sort(others.begin(), others.begin() + static_cast<std::ptrdiff_t>(k), others.end(), nearer);
  std::vector<Neighbor> out{{anchor, 0.0}};
  out.insert(out.end(), others.begin(), others.begin() + static_cast<std::ptrdiff_t>(k));
  return out;
}

std::vector<Neighbor> farthest_query(const NeighborCache& cache, std::uint32_t anchor, std::size_t k) {
  const auto at = anchor_index(cache, anchor, k);
  auto others = others_by_distance(cache, at);
  auto farther = [](const Neighbor& x, const Neighbor& y) {
    return x.distance > y.distance || (x.distance == y.distance && x.id < y.id);
  };
  std::partial_sort(others.begin(), others.begin() + static_cast<std::ptrdiff_t>(k), others.end(), farther);
  std::vector<Neighbor> out{{anchor, 0.0}};
  out.insert(out.end(), others.begin(), others.begin() + static_cast<std::ptrdiff_t>(k));
  return out;
}

std::vector<Neighbor> random_query(const NeighborCache& cache, std::uint32_t anchor, std::size_t k, Rng& rng) {
  const auto at = anchor_index(cache, anchor, k);
  const auto others = others_by_distance(cache, at);
  std::vector<Neighbor> out{{anchor, 0.0}};
  for (auto i : random_select(others.size(), k, rng)) out.push_back(others[i]);
  return out;
}

WeightKind parse_weight_kind(const std::string& name) {
  if (name == "top_k") return WeightKind::top_k;
  if (name == "rand_k") return WeightKind::rand_k;
  if (name == "bottom_k") return WeightKind::bottom_k;
  if (name == "variant1") return WeightKind::variant1;
  if (name == "variant2") return WeightKind::variant2;
  throw ConfigError("unknown weight scheme '" + name + "'");
}

std::string to_string(WeightKind kind) {
  switch (kind) {
    case WeightKind::top_k: return "top_k";
    case WeightKind::rand_k: return "rand_k";
    case WeightKind::bottom_k: return "bottom_k";
    case WeightKind::variant1: return "variant1";
    case WeightKind::variant2: return "variant2";
  }
  return "unknown";
}

void check_weights(std::span<const double> weights) {
  if (weights.empty()) throw InternalError("empty weight vector");
  double total = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!(weights[i] >= 0.0)) throw InternalError("negative colliding weight");
    if (i > 0 && weights[i] > weights[i - 1]) throw InternalError("colliding weights must be nonincreasing");
    total += weights[i];
  }
  if (std::abs(total - 1.0) > 1e-9) throw InternalError("colliding weights must sum to 1");
}

Vector assign_weights(const WeightScheme& scheme, std::span<const double> similarities) {
  const std::size_t k = scheme.k;
  Vector w;
  switch (scheme.kind) {
    case WeightKind::top_k:
    case WeightKind::rand_k:
    case WeightKind::bottom_k:
      if (k == 0) {
        w = {1.0};
      } else {
        w.assign(k + 1, 0.5 / static_cast<double>(k));
        w[0] = 0.5;
      }
      break;
    case WeightKind::variant1:
      w.assign(k + 1, 1.0 / static_cast<double>(k + 1));
      break;
    case WeightKind::variant2: {
      if (similarities.size() != k + 1) throw ShapeError("variant2 needs one similarity per member");
      w = softmax(similarities);
      // Similarities from a sorted neighbour list are nonincreasing, so the
      // softmax is too; exact ties can still differ in the last bit.
      for (std::size_t i = 1; i < w.size(); ++i) w[i] = std::min(w[i], w[i - 1]);
      double total = 0.0;
      for (double v : w) total += v;
      for (auto& v : w) v /= total;
      break;
    }
  }
  check_weights(w);
  return w;
}

std::vector<Neighbor> select_members(const NeighborCache& cache, std::uint32_t anchor, const WeightScheme& scheme,
                                     Rng& rng) {
  switch (scheme.kind) {
    case WeightKind::rand_k: return random_query(cache, anchor, scheme.k, rng);
    case WeightKind::bottom_k: return farthest_query(cache, anchor, scheme.k);
    default: return knn_query(cache, anchor, scheme.k);
  }
}

Vector member_weights(const WeightScheme& scheme, std::span<const Neighbor> members) {
  if (members.size() != scheme.k + 1) throw ShapeError("member list does not match K");
  if (scheme.kind != WeightKind::variant2) return assign_weights(scheme);
  Vector sims;
  sims.reserve(members.size());
  for (const auto& m : members) sims.push_back(1.0 - m.distance);
  return assign_weights(scheme, sims);
}

CollidingLoss colliding_effect_loss(std::size_t label, std::span<const Logits> member_logits,
                                    std::span<const double> weights) {
  if (member_logits.size() != weights.size()) throw ShapeError("weights must align with members");
  if (member_logits.empty()) throw ShapeError("colliding effect needs at least the anchor");
  CollidingLoss out;
  std::vector<Vector> probs;
  probs.reserve(member_logits.size());
  for (std::size_t j = 0; j < member_logits.size(); ++j) {
    if (label >= member_logits[j].size()) throw IndexError("label out of range for member logits");
    probs.push_back(softmax(member_logits[j]));
    out.effect += weights[j] * probs.back()[label];
  }
  double effect = out.effect;
  if (!(effect > kMinEffect)) {
    effect = kMinEffect;
    out.clamped = true;
    // Logged for the first few occurrences only; StepReport carries the full count.
    static std::atomic<int> logged{0};
    const int seen = logged.fetch_add(1);
    if (seen < 5) std::clog << "warning: colliding effect " << out.effect << " clamped to " << kMinEffect << '\n';
    if (seen == 5) std::clog << "warning: further colliding-effect clamps are not logged\n";
  }
  out.loss = -std::log(effect);
  out.dlogits.reserve(probs.size());
  for (std::size_t j = 0; j < probs.size(); ++j) {
    // d(-log E)/dz_j = (W_j p_j[y] / E) * (p_j - e_y)
    const double coef = weights[j] * probs[j][label] / effect;
    Vector g(probs[j].size());
    for (std::size_t c = 0; c < g.size(); ++c) g[c] = coef * (c == label ? probs[j][c] - 1.0 : probs[j][c]);
    out.dlogits.push_back(std::move(g));
  }
  return out;
}

CollidingLoss colliding_effect_loss(std::size_t label, std::span<const std::span<const double>> member_inputs,
                                    std::span<const double> weights, const Network& net, Network& grads) {
  std::vector<ForwardTrace> traces;
  std::vector<Logits> logits;
  traces.reserve(member_inputs.size());
  for (auto in : member_inputs) {
    traces.push_back(forward(net, in));
    logits.push_back(traces.back().logits);
  }
  auto out = colliding_effect_loss(label, logits, weights);
  for (std::size_t j = 0; j < traces.size(); ++j) backward(net, traces[j], out.dlogits[j], {}, grads);
  return out;
}

}  // namespace cil
