#pragma once

// Shared fixtures and straight-line reference computations for the test
// suites. Nothing here calls into the library's math kernels; the oracles are
// written with plain loops so they fail independently of the code under test.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "gnnrisk/graph.hpp"
#include "gnnrisk/model.hpp"

namespace testkit {

using gnnrisk::Edge;
using gnnrisk::Graph;
using gnnrisk::Matrix;
using gnnrisk::NodeId;
using gnnrisk::Vector;

inline Graph make_graph(int n, std::vector<Edge> edges, int feature_dim = 2, int classes = 2) {
  Matrix x = Matrix::Ones(n, feature_dim);
  std::vector<int> y(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] = i % classes;
  return Graph(std::move(x), std::move(edges), std::move(y), classes);
}

inline Graph path_graph(int n) {
  std::vector<Edge> e;
  for (int i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
  return make_graph(n, e);
}

inline Graph star_graph(int leaves) {
  std::vector<Edge> e;
  for (int i = 1; i <= leaves; ++i) e.emplace_back(0, i);
  return make_graph(leaves + 1, e);
}

inline Graph complete_graph(int n) {
  std::vector<Edge> e;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) e.emplace_back(i, j);
  }
  return make_graph(n, e);
}

/// Erdős–Rényi graph with dense Gaussian features and random labels.
inline Graph random_graph(std::uint64_t seed, int n, double p, int feature_dim, int classes,
                          bool nonneg_features = false) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(p);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<int> cls(0, classes - 1);
  std::vector<Edge> e;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (coin(rng)) e.emplace_back(i, j);
    }
  }
  Matrix x(n, feature_dim);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < feature_dim; ++j) {
      const double v = gauss(rng);
      x(i, j) = nonneg_features ? (v > 0.3 ? 1.0 : 0.0) : v;
    }
  }
  std::vector<int> y(static_cast<std::size_t>(n));
  for (auto& v : y) v = cls(rng);
  return Graph(std::move(x), std::move(e), std::move(y), classes);
}

inline Matrix random_matrix(std::mt19937_64& rng, int rows, int cols, double scale = 1.0) {
  std::normal_distribution<double> gauss(0.0, scale);
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = gauss(rng);
  }
  return m;
}

/// 0/1 adjacency as nested vectors.
inline std::vector<std::vector<double>> adjacency_of(const Graph& g) {
  const auto n = static_cast<std::size_t>(g.num_nodes());
  std::vector<std::vector<double>> a(n, std::vector<double>(n, 0.0));
  for (const auto& e : g.edges()) {
    a[static_cast<std::size_t>(e.u)][static_cast<std::size_t>(e.v)] = 1.0;
    a[static_cast<std::size_t>(e.v)][static_cast<std::size_t>(e.u)] = 1.0;
  }
  return a;
}

/// D^{-1/2}(A+I)D^{-1/2} by explicit loops over a (possibly fractional) A.
inline Matrix ref_normalize(const std::vector<std::vector<double>>& a) {
  const auto n = a.size();
  std::vector<double> d(n, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) d[i] += a[i][j];
  }
  Matrix out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double aij = a[i][j] + (i == j ? 1.0 : 0.0);
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = aij / std::sqrt(d[i] * d[j]);
    }
  }
  return out;
}

inline Matrix ref_matmul(const Matrix& a, const Matrix& b) {
  Matrix c = Matrix::Zero(a.rows(), b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index k = 0; k < a.cols(); ++k) {
      for (Eigen::Index j = 0; j < b.cols(); ++j) c(i, j) += a(i, k) * b(k, j);
    }
  }
  return c;
}

inline Matrix ref_gcn2(const Matrix& a_hat, const Matrix& x, const Matrix& w1, const Matrix& w2) {
  Matrix h = ref_matmul(ref_matmul(a_hat, x), w1);
  for (Eigen::Index i = 0; i < h.rows(); ++i) {
    for (Eigen::Index j = 0; j < h.cols(); ++j) h(i, j) = h(i, j) > 0.0 ? h(i, j) : 0.0;
  }
  return ref_matmul(ref_matmul(a_hat, h), w2);
}

inline Matrix ref_sgc(const Matrix& a_hat, const Matrix& x, const Matrix& w, int hops) {
  Matrix h = x;
  for (int k = 0; k < hops; ++k) h = ref_matmul(a_hat, h);
  return ref_matmul(h, w);
}

inline Matrix ref_logits(gnnrisk::Arch arch, const std::vector<std::vector<double>>& a, const Matrix& x,
                         const std::vector<Matrix>& w, int hops = 2) {
  const Matrix a_hat = ref_normalize(a);
  return arch == gnnrisk::Arch::kGcn2 ? ref_gcn2(a_hat, x, w[0], w[1]) : ref_sgc(a_hat, x, w[0], hops);
}

/// Mean softmax cross-entropy over `nodes`.
inline double ref_cross_entropy(const Matrix& z, const std::vector<NodeId>& nodes, const std::vector<int>& y) {
  double total = 0.0;
  for (NodeId v : nodes) {
    double mx = -INFINITY;
    for (Eigen::Index c = 0; c < z.cols(); ++c) mx = std::max(mx, z(v, c));
    double s = 0.0;
    for (Eigen::Index c = 0; c < z.cols(); ++c) s += std::exp(z(v, c) - mx);
    total += -(z(v, y[static_cast<std::size_t>(v)]) - mx - std::log(s));
  }
  return total / static_cast<double>(nodes.size());
}

/// True-class score minus the best other score, by loop.
inline double ref_margin(const Matrix& z, NodeId v, int y) {
  double best_other = -INFINITY;
  for (Eigen::Index c = 0; c < z.cols(); ++c) {
    if (c != y) best_other = std::max(best_other, z(v, c));
  }
  return z(v, y) - best_other;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max({1e-8, std::abs(a), std::abs(b)}); }

/// Relative error, except that two entries both below 1e-6 in magnitude agree:
/// a central difference with h = 1e-4 carries O(h²) truncation error, so a
/// vanishing derivative shows up as ~1e-9 noise rather than 0.
inline double grad_err(double analytic, double numeric) {
  if (std::abs(analytic) < 1e-6 && std::abs(numeric) < 1e-6) return 0.0;
  return std::abs(analytic - numeric) / std::max(std::abs(analytic), std::abs(numeric));
}

struct GradCheck {
  double weight_err = 0.0;     // worst relative error over weight entries
  double adjacency_err = 0.0;  // worst relative error over adjacency pairs
  std::size_t entries = 0;
};

/// Compares analytic gradients with central differences of the loop oracle,
/// step h, perturbing weight entries one at a time and adjacency pairs (u,v)
/// symmetrically.
inline GradCheck finite_difference_check(const gnnrisk::ModelConfig& cfg, const Graph& g,
                                         const std::vector<Matrix>& w, const std::vector<NodeId>& nodes,
                                         double h = 1e-4) {
  const auto analytic = gnnrisk::loss_and_grads(cfg, w, g, nodes);
  const auto a0 = adjacency_of(g);
  const Matrix x = g.features();
  auto loss = [&](const std::vector<std::vector<double>>& a, const std::vector<Matrix>& ws) {
    return ref_cross_entropy(ref_logits(cfg.arch, a, x, ws, cfg.hops), nodes, g.labels());
  };
  GradCheck out;
  for (std::size_t k = 0; k < w.size(); ++k) {
    for (Eigen::Index i = 0; i < w[k].rows(); ++i) {
      for (Eigen::Index j = 0; j < w[k].cols(); ++j) {
        auto plus = w, minus = w;
        plus[k](i, j) += h;
        minus[k](i, j) -= h;
        const double num = (loss(a0, plus) - loss(a0, minus)) / (2 * h);
        out.weight_err = std::max(out.weight_err, grad_err(analytic.weight_grads[k](i, j), num));
        ++out.entries;
      }
    }
  }
  const auto n = a0.size();
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = u + 1; v < n; ++v) {
      auto plus = a0, minus = a0;
      plus[u][v] += h;
      plus[v][u] += h;
      minus[u][v] -= h;
      minus[v][u] -= h;
      const double num = (loss(plus, w) - loss(minus, w)) / (2 * h);
      const double ana = analytic.adjacency_grad(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(v));
      out.adjacency_err = std::max(out.adjacency_err, grad_err(ana, num));
      ++out.entries;
    }
  }
  return out;
}

/// Directory holding the checked-in fixtures, set by CMake.
inline std::filesystem::path fixture_dir() { return std::filesystem::path(GNNRISK_FIXTURE_DIR); }

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("gnnrisk_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testkit
