#include <benchmark/benchmark.h>

#include <map>
#include <memory>

#include "gnnrisk/attacks.hpp"
#include "gnnrisk/graph_ops.hpp"
#include "gnnrisk/model.hpp"
#include "gnnrisk/train.hpp"

using namespace gnnrisk;

namespace {

/// Cora-sized synthetic graph: roughly 2.5k nodes and 1.4k binary features.
Graph cora_like(int nodes) {
  const int per_block = nodes / 7;
  SbmParams p;
  p.block_sizes.assign(7, per_block);
  p.p_in = 3.0 / per_block;
  p.p_out = 0.6 / nodes;
  p.feature_dim = 1400;
  p.feature_signal = 0.05;
  p.feature_noise = 0.01;
  return synthetic_sbm(1, p);
}

const Graph& shared_graph(int nodes) {
  static std::map<int, std::unique_ptr<Graph>> cache;
  auto& slot = cache[nodes];
  if (!slot) slot = std::make_unique<Graph>(cora_like(nodes));
  return *slot;
}

std::shared_ptr<const TrainedModel> surrogate_for(const Graph& g) {
  ModelConfig cfg;
  cfg.arch = Arch::kSgc;
  cfg.max_epochs = 50;
  cfg.learning_rate = 0.05;
  cfg.seed = 3;
  return std::make_shared<const TrainedModel>(train(cfg, g, random_split(g, 2)));
}

TrainedModel victim_for(const Graph& g) {
  ModelConfig cfg;
  cfg.hidden = 16;
  cfg.max_epochs = 30;
  cfg.seed = 4;
  return train(cfg, g, random_split(g, 2));
}

NodeId busiest(const Graph& g) {
  NodeId best = 0;
  for (NodeId v = 1; v < g.num_nodes(); ++v) {
    if (g.degree(v) > g.degree(best)) best = v;
  }
  return best;
}

void BM_ForwardGcn2(benchmark::State& state) {
  const Graph& g = shared_graph(static_cast<int>(state.range(0)));
  const TrainedModel m = victim_for(g);
  for (auto _ : state) benchmark::DoNotOptimize(predict_logits(m, g));
}
BENCHMARK(BM_ForwardGcn2)->Arg(700)->Arg(2800)->Unit(benchmark::kMillisecond);

void BM_ForwardSgc(benchmark::State& state) {
  const Graph& g = shared_graph(static_cast<int>(state.range(0)));
  const auto m = surrogate_for(g);
  for (auto _ : state) benchmark::DoNotOptimize(predict_logits(*m, g));
}
BENCHMARK(BM_ForwardSgc)->Arg(700)->Arg(2800)->Unit(benchmark::kMillisecond);

void BM_TargetAdjacencyGradient(benchmark::State& state) {
  const Graph& g = shared_graph(static_cast<int>(state.range(0)));
  const auto m = surrogate_for(g);
  const NodeId t = busiest(g);
  for (auto _ : state) benchmark::DoNotOptimize(target_adjacency_gradient(*m, g, t, g.label(t)));
}
BENCHMARK(BM_TargetAdjacencyGradient)->Arg(700)->Arg(2800)->Unit(benchmark::kMillisecond);

void BM_Attack(benchmark::State& state, AttackKind kind) {
  const Graph& g = shared_graph(static_cast<int>(state.range(0)));
  const auto m = surrogate_for(g);
  const NodeId t = busiest(g);
  const AttackContext ctx{&g, m, 9, 0.1};
  for (auto _ : state) benchmark::DoNotOptimize(run_attack(kind, ctx, t, 5));
}
BENCHMARK_CAPTURE(BM_Attack, nettack_lite, AttackKind::kNettackLite)->Arg(700)->Arg(2800)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Attack, fga, AttackKind::kFga)->Arg(700)->Arg(2800)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Attack, l1d_rnd, AttackKind::kL1dRnd)->Arg(700)->Arg(2800)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
