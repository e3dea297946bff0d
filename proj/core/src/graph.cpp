#include "gnnrisk/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "gnnrisk/rng.hpp"

namespace gnnrisk {

FeatureStore::FeatureStore(Matrix values) : dense(std::move(values)) {
  sparse = dense.sparseView();
  sparse.makeCompressed();
}

Graph::Graph(Matrix features, std::vector<Edge> edges, std::vector<int> labels, int num_classes)
    : Graph(std::make_shared<const FeatureStore>(std::move(features)), std::move(edges),
            std::move(labels), num_classes) {}

Graph::Graph(std::shared_ptr<const FeatureStore> features, std::vector<Edge> edges,
             std::vector<int> labels, int num_classes)
    : num_classes_(num_classes),
      features_(std::move(features)),
      edges_(std::move(edges)),
      labels_(std::move(labels)) {
  const auto rows = features_->dense.rows();
  if (rows > std::numeric_limits<NodeId>::max()) {
    throw GraphError("graph too large: " + std::to_string(rows) + " nodes");
  }
  num_nodes_ = static_cast<NodeId>(rows);
  if (labels_.size() != static_cast<std::size_t>(num_nodes_)) {
    throw GraphError("inconsistent node counts: " + std::to_string(num_nodes_) + " feature rows, " +
                     std::to_string(labels_.size()) + " labels");
  }
  if (num_classes_ < 2) {
    throw GraphError("need at least 2 classes, got " + std::to_string(num_classes_));
  }
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] < 0 || labels_[i] >= num_classes_) {
      throw GraphError("label out of range at node " + std::to_string(i) + ": " +
                       std::to_string(labels_[i]));
    }
  }
  if (!features_->dense.allFinite()) {
    throw GraphError("non-finite feature value");
  }
  for (auto& e : edges_) {
    if (e.u == e.v) {
      throw GraphError("self-loop at node " + std::to_string(e.u));
    }
    if (e.u < 0 || e.v >= num_nodes_) {
      throw GraphError("edge (" + std::to_string(e.u) + "," + std::to_string(e.v) +
                       ") out of range for " + std::to_string(num_nodes_) + " nodes");
    }
  }
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
  build_index();
}

void Graph::build_index() {
  std::vector<std::size_t> counts(static_cast<std::size_t>(num_nodes_) + 1, 0);
  for (const auto& e : edges_) {
    ++counts[static_cast<std::size_t>(e.u) + 1];
    ++counts[static_cast<std::size_t>(e.v) + 1];
  }
  std::partial_sum(counts.begin(), counts.end(), counts.begin());
  offsets_ = counts;
  adjacency_.assign(2 * edges_.size(), 0);
  std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
  // Edges are sorted, so each node's list comes out sorted for the u side.
  for (const auto& e : edges_) {
    adjacency_[cursor[static_cast<std::size_t>(e.u)]++] = e.v;
    adjacency_[cursor[static_cast<std::size_t>(e.v)]++] = e.u;
  }
  for (NodeId v = 0; v < num_nodes_; ++v) {
    auto first = adjacency_.begin() + static_cast<std::ptrdiff_t>(offsets_[static_cast<std::size_t>(v)]);
    auto last = adjacency_.begin() + static_cast<std::ptrdiff_t>(offsets_[static_cast<std::size_t>(v) + 1]);
    std::sort(first, last);
  }
}

void Graph::check_node(NodeId v) const {
  if (v < 0 || v >= num_nodes_) {
    throw GraphError("node " + std::to_string(v) + " out of range [0, " + std::to_string(num_nodes_) +
                     ")");
  }
}

std::size_t Graph::degree(NodeId v) const {
  check_node(v);
  const auto i = static_cast<std::size_t>(v);
  return offsets_[i + 1] - offsets_[i];
}

std::span<const NodeId> Graph::neighbors(NodeId v) const {
  check_node(v);
  const auto i = static_cast<std::size_t>(v);
  return {adjacency_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
}

bool Graph::has_edge(NodeId u, NodeId v) const {
  auto nb = neighbors(u);
  check_node(v);
  return std::binary_search(nb.begin(), nb.end(), v);
}

Graph Graph::with_edges(std::vector<Edge> edges) const {
  return Graph(features_, std::move(edges), labels_, num_classes_);
}

Split random_split(const Graph& g, std::uint64_t seed, SplitRatios ratios) {
  if (ratios.train <= 0 || ratios.valid <= 0 || ratios.test <= 0) {
    throw GraphError("split ratios must be positive");
  }
  const double total = ratios.train + ratios.valid + ratios.test;
  if (std::abs(total - 1.0) > 1e-6) {
    throw GraphError("split ratios must sum to 1, got " + std::to_string(total));
  }
  const auto n = static_cast<std::size_t>(g.num_nodes());
  // The epsilon keeps 0.1 * 100 from flooring to 9.
  const auto n_train = static_cast<std::size_t>(std::floor(ratios.train * static_cast<double>(n) + 1e-9));
  const auto n_valid = static_cast<std::size_t>(std::floor(ratios.valid * static_cast<double>(n) + 1e-9));
  if (n_train == 0 || n_valid == 0 || n_train + n_valid >= n) {
    throw GraphError("graph with " + std::to_string(n) + " nodes is too small for the requested split");
  }
  std::vector<NodeId> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  Split split;
  const auto mid = order.begin() + static_cast<std::ptrdiff_t>(n_train);
  const auto tail = mid + static_cast<std::ptrdiff_t>(n_valid);
  split.train.assign(order.begin(), mid);
  split.valid.assign(mid, tail);
  split.test.assign(tail, order.end());
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.valid.begin(), split.valid.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

void validate_split(const Graph& g, const Split& split) {
  std::vector<char> seen(static_cast<std::size_t>(g.num_nodes()), 0);
  auto mark = [&](const std::vector<NodeId>& ids, const char* name) {
    for (NodeId v : ids) {
      if (v < 0 || v >= g.num_nodes()) {
        throw GraphError(std::string(name) + " index " + std::to_string(v) + " out of range");
      }
      auto& s = seen[static_cast<std::size_t>(v)];
      if (s) {
        throw GraphError("node " + std::to_string(v) + " appears in more than one split set");
      }
      s = 1;
    }
  };
  mark(split.train, "train");
  mark(split.valid, "valid");
  mark(split.test, "test");
}

SparseMatrix normalize_adjacency(const Graph& g) {
  const NodeId n = g.num_nodes();
  std::vector<double> inv_sqrt(static_cast<std::size_t>(n));
  for (NodeId v = 0; v < n; ++v) {
    inv_sqrt[static_cast<std::size_t>(v)] = 1.0 / std::sqrt(static_cast<double>(g.degree(v)) + 1.0);
  }
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(2 * g.num_edges() + static_cast<std::size_t>(n));
  for (NodeId v = 0; v < n; ++v) {
    const double dv = inv_sqrt[static_cast<std::size_t>(v)];
    triplets.emplace_back(v, v, dv * dv);
  }
  for (const auto& e : g.edges()) {
    // Same product in both orders keeps the matrix bitwise symmetric.
    const double w = inv_sqrt[static_cast<std::size_t>(e.u)] * inv_sqrt[static_cast<std::size_t>(e.v)];
    triplets.emplace_back(e.u, e.v, w);
    triplets.emplace_back(e.v, e.u, w);
  }
  SparseMatrix a(n, n);
  a.setFromTriplets(triplets.begin(), triplets.end());
  a.makeCompressed();
  return a;
}

Matrix normalize_adjacency_dense(const Graph& g) { return Matrix(normalize_adjacency(g)); }

Matrix dense_adjacency(const Graph& g) {
  Matrix a = Matrix::Zero(g.num_nodes(), g.num_nodes());
  for (const auto& e : g.edges()) {
    a(e.u, e.v) = 1.0;
    a(e.v, e.u) = 1.0;
  }
  return a;
}

}  // namespace gnnrisk
