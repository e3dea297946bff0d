#pragma once

#include <cstdint>
#include <vector>

#include "gnnrisk/graph.hpp"

namespace gnnrisk {

/// Set-Jaccard similarity of the supports {j : x_j > 0} of two feature rows.
/// Two empty supports count as identical (1.0).
double jaccard_coefficient(const Graph& g, NodeId u, NodeId v);

/// Copy of `g` without the edges whose endpoint Jaccard similarity is below
/// `threshold`. Throws GraphError if threshold is outside [0, 1].
Graph jaccard_prune(const Graph& g, double threshold);

struct SbmParams {
  std::vector<int> block_sizes;
  double p_in = 0.5;
  double p_out = 0.05;
  int feature_dim = 16;
  /// Probability that a class-indicative feature is switched on.
  double feature_signal = 0.6;
  /// Probability that any other feature is switched on.
  double feature_noise = 0.05;
};

/// Stochastic block model with binary, class-indicative noisy features.
/// Labels are block ids. Each block owns a contiguous slice of the feature
/// columns. Pure function of (params, seed).
Graph synthetic_sbm(std::uint64_t seed, const SbmParams& params);

}  // namespace gnnrisk
