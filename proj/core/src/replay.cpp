// SPDX-License-Identifier: Apache-2.0
#include "cil/replay.hpp"

#include <limits>
#include <numeric>
#include <string>
#include <unordered_set>

#include "cil/error.hpp"

namespace cil {

std::size_t ExemplarStore::size() const {
  std::size_t n = 0;
  for (const auto& [label, exemplars] : classes_) n += exemplars.size();
  return n;
}

void ExemplarStore::set_class(std::uint32_t label, std::vector<Sample> exemplars) {
  if (exemplars.size() > budget_) {
    throw InternalError("class " + std::to_string(label) + " would exceed the exemplar budget");
  }
  for (const auto& s : exemplars) {
    if (s.label != label) throw InternalError("exemplar label does not match its class bucket");
  }
  if (exemplars.empty()) {
    classes_.erase(label);
  } else {
    classes_[label] = std::move(exemplars);
  }
}

std::vector<Sample> ExemplarStore::samples() const {
  std::vector<Sample> out;
  for (const auto& [label, exemplars] : classes_) out.insert(out.end(), exemplars.begin(), exemplars.end());
  return out;
}

std::vector<std::size_t> herding_select(std::span<const FeatureVector> features, std::size_t count,
                                        std::span<const std::uint32_t> ids) {
  const std::size_t n = features.size();
  if (count > n) {
    throw ValidationError("cannot select " + std::to_string(count) + " exemplars from " + std::to_string(n) +
                          " samples");
  }
  if (!ids.empty() && ids.size() != n) throw ShapeError("herding ids must align with features");
  if (count == 0) return {};
  const std::size_t d = features.front().size();
  Vector mean(d, 0.0);
  for (const auto& f : features) {
    if (f.size() != d) throw ShapeError("herding features have inconsistent dimension");
    for (std::size_t k = 0; k < d; ++k) mean[k] += f[k];
  }
  for (auto& v : mean) v /= static_cast<double>(n);

  auto id_of = [&](std::size_t i) { return ids.empty() ? static_cast<std::uint64_t>(i) : ids[i]; };
  std::vector<bool> taken(n, false);
  Vector running(d, 0.0);
  std::vector<std::size_t> picked;
  picked.reserve(count);
  while (picked.size() < count) {
    const double k1 = static_cast<double>(picked.size() + 1);
    std::size_t best = n;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      double dist = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double diff = (running[k] + features[i][k]) / k1 - mean[k];
        dist += diff * diff;
      }
      if (dist < best_dist || (dist == best_dist && id_of(i) < id_of(best))) {
        best = i;
        best_dist = dist;
      }
    }
    if (best == n) throw ValidationError("herding features are not finite");
    taken[best] = true;
    for (std::size_t k = 0; k < d; ++k) running[k] += features[best][k];
    picked.push_back(best);
  }
  return picked;
}

std::vector<std::size_t> random_select(std::size_t n, std::size_t count, Rng& rng) {
  if (count > n) throw ValidationError("cannot select " + std::to_string(count) + " of " + std::to_string(n));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  // Partial Fisher-Yates from the front.
  for (std::size_t i = 0; i < count; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(count);
  return idx;
}

void update_store(ExemplarStore& store, const Dataset& finished_step_data, const Network& model,
                  SelectionStrategy strategy, Rng& rng) {
  const std::size_t budget = store.budget();
  if (budget == 0) return;
  std::map<std::uint32_t, std::vector<const Sample*>> by_class;
  for (const auto& s : finished_step_data.samples) by_class[s.label].push_back(&s);
  for (const auto& [label, members] : by_class) {
    if (store.classes().count(label) != 0) continue;
    const std::size_t count = std::min(budget, members.size());
    std::vector<std::size_t> chosen;
    if (strategy == SelectionStrategy::herding) {
      std::vector<FeatureVector> feats;
      std::vector<std::uint32_t> ids;
      feats.reserve(members.size());
      for (const auto* s : members) {
        feats.push_back(normalized(forward_features(s->input, model)));
        ids.push_back(s->id);
      }
      chosen = herding_select(feats, count, ids);
    } else {
      chosen = random_select(members.size(), count, rng);
    }
    std::vector<Sample> exemplars;
    exemplars.reserve(chosen.size());
    for (auto i : chosen) exemplars.push_back(*members[i]);
    store.set_class(label, std::move(exemplars));
  }
}

Dataset build_training_set(const Dataset& new_data, const ExemplarStore& store) {
  Dataset out = new_data;
  std::unordered_set<std::uint32_t> ids;
  for (const auto& s : out.samples) {
    if (!ids.insert(s.id).second) throw InternalError("duplicate sample id " + std::to_string(s.id));
  }
  for (auto& s : store.samples()) {
    if (!ids.insert(s.id).second) throw InternalError("exemplar id " + std::to_string(s.id) + " collides");
    if (s.label >= out.class_count) out.class_count = s.label + 1;
    out.samples.push_back(std::move(s));
  }
  return out;
}

}  // namespace cil
