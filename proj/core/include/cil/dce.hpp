// SPDX-License-Identifier: Apache-2.0
#pragma once

// Colliding-effect distillation: every training sample of a step is
// embedded once by the frozen previous model; each anchor is then supervised
// through the weighted prediction of itself and its old-space neighbours,
//   Effect = sum_j W_j * P(y_anchor | N_j),   loss = -log(Effect),
// with W nonnegative, nonincreasing along the neighbour order, summing to 1.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "cil/dataset.hpp"
#include "cil/distill.hpp"
#include "cil/nn.hpp"
#include "cil/rng.hpp"

namespace cil {

/// Unit-normalized old-space features keyed by sample id. Immutable once
/// built; concurrent queries are safe.
class NeighborCache {
 public:
  void insert(std::uint32_t id, std::span<const double> feature);

  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }
  bool contains(std::uint32_t id) const { return index_.count(id) != 0; }
  std::size_t dim() const { return dim_; }
  const std::vector<std::uint32_t>& ids() const { return ids_; }
  std::span<const double> feature(std::uint32_t id) const;
  std::span<const double> feature_at(std::size_t index) const {
    return std::span<const double>(data_).subspan(index * dim_, dim_);
  }

 private:
  std::vector<std::uint32_t> ids_;
  Vector data_;
  std::size_t dim_ = 0;
  std::unordered_map<std::uint32_t, std::size_t> index_;
};

NeighborCache build_cache(const Dataset& training_set, const ModelSnapshot& snapshot);

struct Neighbor {
  std::uint32_t id = 0;
  double distance = 0.0;  // 1 - cos, clamped at 0; the anchor is exactly 0
};

/// Anchor first, then the K nearest by cosine distance (ties: lower id).
/// Exact brute-force scan.
std::vector<Neighbor> knn_query(const NeighborCache& cache, std::uint32_t anchor, std::size_t k);

/// Anchor first, then the K farthest samples.
std::vector<Neighbor> farthest_query(const NeighborCache& cache, std::uint32_t anchor, std::size_t k);

/// Anchor first, then K distinct non-anchor samples drawn uniformly.
std::vector<Neighbor> random_query(const NeighborCache& cache, std::uint32_t anchor, std::size_t k, Rng& rng);

enum class WeightKind { top_k, rand_k, bottom_k, variant1, variant2 };

WeightKind parse_weight_kind(const std::string& name);
std::string to_string(WeightKind kind);

struct WeightScheme {
  WeightKind kind = WeightKind::top_k;
  std::size_t k = 10;
};

/// Weights over anchor + K neighbours.
///   top_k, rand_k, bottom_k: anchor 1/2, each neighbour 1/(2K); K = 0 -> [1]
///   variant1: uniform 1/(K+1)
///   variant2: softmax of `similarities` (anchor first, similarity 1)
/// The result is checked against the constraints and InternalError thrown
/// on violation.
Vector assign_weights(const WeightScheme& scheme, std::span<const double> similarities = {});

/// Throws InternalError unless weights are nonnegative, nonincreasing and
/// sum to 1 within 1e-9.
void check_weights(std::span<const double> weights);

/// Members of one colliding group for a scheme: knn / random / farthest
/// according to the kind.
std::vector<Neighbor> select_members(const NeighborCache& cache, std::uint32_t anchor, const WeightScheme& scheme,
                                     Rng& rng);

/// Weights for a member list produced by select_members.
Vector member_weights(const WeightScheme& scheme, std::span<const Neighbor> members);

struct CollidingLoss {
  double loss = 0.0;
  double effect = 0.0;
  bool clamped = false;
  std::vector<Vector> dlogits;  // one per member, same order
};

inline constexpr double kMinEffect = 1e-12;

/// -log(sum_j W_j softmax(logits_j)[label]) from member logits. Effect is
/// clamped at 1e-12.
CollidingLoss colliding_effect_loss(std::size_t label, std::span<const Logits> member_logits,
                                    std::span<const double> weights);

/// Same loss evaluated with `net` on member inputs; gradients accumulate
/// into `grads` through all member forward passes.
CollidingLoss colliding_effect_loss(std::size_t label, std::span<const std::span<const double>> member_inputs,
                                    std::span<const double> weights, const Network& net, Network& grads);

}  // namespace cil
