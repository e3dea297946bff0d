#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace gnnrisk {

using NodeId = std::int32_t;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

class GraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unordered node pair, stored with u < v.
struct Edge {
  NodeId u = 0;
  NodeId v = 0;

  Edge() = default;
  Edge(NodeId a, NodeId b) : u(a < b ? a : b), v(a < b ? b : a) {}

  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Node features, held once and shared by every structural variant of a graph.
struct FeatureStore {
  Matrix dense;
  SparseMatrix sparse;  // same values, used by the training kernels

  explicit FeatureStore(Matrix values);
};

/// Undirected attributed graph with integer class labels.
///
/// Edges are kept as a sorted, duplicate-free list of unordered pairs; a CSR
/// neighbor index is built on construction. Instances are immutable: every
/// structural change produces a new Graph that shares the feature store.
class Graph {
 public:
  Graph() = default;

  /// Canonicalizes `edges` (orients, sorts, dedups). Throws GraphError on
  /// self-loops, out-of-range endpoints, bad labels or non-finite features.
  Graph(Matrix features, std::vector<Edge> edges, std::vector<int> labels, int num_classes);

  NodeId num_nodes() const { return num_nodes_; }
  std::size_t num_edges() const { return edges_.size(); }
  Eigen::Index feature_dim() const { return features_->dense.cols(); }
  int num_classes() const { return num_classes_; }

  const std::vector<Edge>& edges() const { return edges_; }
  const Matrix& features() const { return features_->dense; }
  const SparseMatrix& sparse_features() const { return features_->sparse; }
  const std::shared_ptr<const FeatureStore>& feature_store() const { return features_; }
  const std::vector<int>& labels() const { return labels_; }
  int label(NodeId v) const { return labels_.at(static_cast<std::size_t>(v)); }

  /// Neighbor count excluding self. Throws GraphError when v is out of range.
  std::size_t degree(NodeId v) const;
  /// Sorted neighbor ids.
  std::span<const NodeId> neighbors(NodeId v) const;
  bool has_edge(NodeId u, NodeId v) const;

  /// Same nodes, features and labels with a different edge set.
  Graph with_edges(std::vector<Edge> edges) const;

  bool same_structure(const Graph& other) const { return edges_ == other.edges_; }

 private:
  Graph(std::shared_ptr<const FeatureStore> features, std::vector<Edge> edges,
        std::vector<int> labels, int num_classes);
  void check_node(NodeId v) const;
  void build_index();

  NodeId num_nodes_ = 0;
  int num_classes_ = 0;
  std::shared_ptr<const FeatureStore> features_;
  std::vector<Edge> edges_;
  std::vector<int> labels_;
  std::vector<std::size_t> offsets_;
  std::vector<NodeId> adjacency_;
};

/// Disjoint train / validation / test node index sets.
struct Split {
  std::vector<NodeId> train;
  std::vector<NodeId> valid;
  std::vector<NodeId> test;

  friend bool operator==(const Split&, const Split&) = default;
};

struct SplitRatios {
  double train = 0.1;
  double valid = 0.1;
  double test = 0.8;

  friend bool operator==(const SplitRatios&, const SplitRatios&) = default;
};

/// Seeded shuffle then prefix slicing; train and valid sizes are floored and
/// test takes the remainder.
Split random_split(const Graph& g, std::uint64_t seed, SplitRatios ratios = {});

/// Throws GraphError unless the three sets are pairwise disjoint and in range.
void validate_split(const Graph& g, const Split& split);

/// D^{-1/2}(A+I)D^{-1/2} with D the degree matrix of A+I.
SparseMatrix normalize_adjacency(const Graph& g);
Matrix normalize_adjacency_dense(const Graph& g);

/// Dense 0/1 adjacency without self-loops.
Matrix dense_adjacency(const Graph& g);

}  // namespace gnnrisk
