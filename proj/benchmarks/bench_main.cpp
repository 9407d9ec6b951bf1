// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <unordered_map>

#include "cil/dce.hpp"
#include "cil/optim.hpp"
#include "cil/train.hpp"

namespace {

cil::Dataset data(std::size_t per_class) {
  cil::SyntheticSpec spec;
  spec.classes = 10;
  spec.dim = 32;
  spec.per_class = per_class;
  spec.spread = 0.3;
  return cil::gen_synthetic(spec);
}

cil::Network network() {
  cil::Rng rng(1);
  cil::NetworkSpec spec;
  spec.input_dim = 32;
  spec.hidden = {64, 32};
  spec.classes = 10;
  spec.scale = 16.0;
  return cil::make_network(spec, rng);
}

void BM_Forward(benchmark::State& state) {
  const auto d = data(10);
  const auto net = network();
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(cil::forward(net, d.samples[i++ % d.size()].input));
  }
}
BENCHMARK(BM_Forward);

void BM_KnnQuery(benchmark::State& state) {
  const auto d = data(static_cast<std::size_t>(state.range(0)) / 10);
  const cil::ModelSnapshot snap(network(), 0);
  const auto cache = cil::build_cache(d, snap);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(cil::knn_query(cache, cache.ids()[i++ % cache.size()], 10));
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_KnnQuery)->RangeMultiplier(4)->Range(100, 6400)->Complexity(benchmark::oN);

void BM_TrainStep(benchmark::State& state) {
  const auto d = data(20);
  auto net = network();
  const cil::ModelSnapshot snap(net, 0);
  const auto cache = cil::build_cache(d, snap);
  std::unordered_map<std::uint32_t, const cil::Sample*> by_id;
  for (const auto& s : d.samples) by_id.emplace(s.id, &s);
  auto opt = cil::make_optimizer(net, 0.05);
  cil::TrainContext ctx;
  const auto k = static_cast<std::size_t>(state.range(0));
  if (k > 0) {
    ctx.snapshot = &snap;
    ctx.cache = &cache;
    ctx.samples_by_id = &by_id;
    ctx.scheme = {cil::WeightKind::top_k, k};
  }
  std::vector<const cil::Sample*> batch;
  for (std::size_t i = 0; i < 32; ++i) batch.push_back(&d.samples[i * 5]);
  for (auto _ : state) benchmark::DoNotOptimize(cil::train_step(batch, net, opt, ctx));
}
BENCHMARK(BM_TrainStep)->Arg(0)->Arg(1)->Arg(10);

}  // namespace

BENCHMARK_MAIN();
