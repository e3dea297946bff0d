#include "gnnrisk/graph_ops.hpp"

#include <algorithm>
#include <string>

#include "gnnrisk/rng.hpp"

namespace gnnrisk {

double jaccard_coefficient(const Graph& g, NodeId u, NodeId v) {
  const auto& x = g.features();
  std::size_t both = 0;
  std::size_t either = 0;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const bool a = x(u, j) > 0.0;
    const bool b = x(v, j) > 0.0;
    both += (a && b) ? 1 : 0;
    either += (a || b) ? 1 : 0;
  }
  if (either == 0) return 1.0;
  return static_cast<double>(both) / static_cast<double>(either);
}

Graph jaccard_prune(const Graph& g, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw GraphError("jaccard threshold must lie in [0, 1], got " + std::to_string(threshold));
  }
  std::vector<Edge> kept;
  kept.reserve(g.num_edges());
  for (const auto& e : g.edges()) {
    if (jaccard_coefficient(g, e.u, e.v) >= threshold) kept.push_back(e);
  }
  return g.with_edges(std::move(kept));
}

Graph synthetic_sbm(std::uint64_t seed, const SbmParams& params) {
  if (params.block_sizes.empty()) throw GraphError("synthetic_sbm needs at least one block");
  for (int s : params.block_sizes) {
    if (s <= 0) throw GraphError("synthetic_sbm block sizes must be positive");
  }
  auto in_unit = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!in_unit(params.p_in) || !in_unit(params.p_out) || !in_unit(params.feature_signal) ||
      !in_unit(params.feature_noise)) {
    throw GraphError("synthetic_sbm probabilities must lie in [0, 1]");
  }
  if (params.feature_dim < 1) throw GraphError("synthetic_sbm feature_dim must be positive");

  const int blocks = static_cast<int>(params.block_sizes.size());
  std::vector<int> labels;
  for (int b = 0; b < blocks; ++b) labels.insert(labels.end(), static_cast<std::size_t>(params.block_sizes[static_cast<std::size_t>(b)]), b);
  const auto n = static_cast<NodeId>(labels.size());

  Rng edge_rng(derive_seed(seed, {1}));
  std::bernoulli_distribution same(params.p_in);
  std::bernoulli_distribution cross(params.p_out);
  std::vector<Edge> edges;
  for (NodeId u = 0; u < n; ++u) {
    for (NodeId v = u + 1; v < n; ++v) {
      const bool same_block = labels[static_cast<std::size_t>(u)] == labels[static_cast<std::size_t>(v)];
      if (same_block ? same(edge_rng) : cross(edge_rng)) edges.emplace_back(u, v);
    }
  }

  Rng feature_rng(derive_seed(seed, {2}));
  std::bernoulli_distribution on_signal(params.feature_signal);
  std::bernoulli_distribution on_noise(params.feature_noise);
  const int dim = params.feature_dim;
  Matrix x = Matrix::Zero(n, dim);
  for (NodeId v = 0; v < n; ++v) {
    const int b = labels[static_cast<std::size_t>(v)];
    const int lo = b * dim / blocks;
    const int hi = std::max(lo + 1, (b + 1) * dim / blocks);
    for (int j = 0; j < dim; ++j) {
      const bool indicative = j >= lo && j < hi;
      x(v, j) = (indicative ? on_signal(feature_rng) : on_noise(feature_rng)) ? 1.0 : 0.0;
    }
  }
  return Graph(std::move(x), std::move(edges), std::move(labels), std::max(2, blocks));
}

}  // namespace gnnrisk
