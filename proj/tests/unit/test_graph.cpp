#include <doctest.h>

#include <fstream>
#include <set>

#include "gnnrisk/graph.hpp"
#include "gnnrisk/graph_ops.hpp"
#include "gnnrisk/io.hpp"
#include "test_support.hpp"

using namespace gnnrisk;
using testkit::make_graph;

namespace {

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

}  // namespace

TEST_CASE("graph canonicalizes edges and counts degrees") {
  const Graph g = make_graph(4, {{1, 0}, {0, 1}, {2, 1}, {3, 2}});
  CHECK(g.num_edges() == 3);
  CHECK(g.edges().front() == Edge(0, 1));
  CHECK(g.degree(1) == 2);
  CHECK(g.has_edge(1, 0));
  CHECK_FALSE(g.has_edge(0, 3));
  std::size_t total = 0;
  for (NodeId v = 0; v < g.num_nodes(); ++v) total += g.degree(v);
  CHECK(total == 2 * g.num_edges());
}

TEST_CASE("degree examples") {
  CHECK(testkit::star_graph(4).degree(0) == 4);
  const Graph iso = make_graph(3, {{0, 1}});
  CHECK(iso.degree(2) == 0);
  CHECK_THROWS_AS(iso.degree(3), GraphError);
  CHECK_THROWS_AS(iso.degree(-1), GraphError);
}

TEST_CASE("graph rejects invalid input") {
  CHECK_THROWS_AS(make_graph(3, {{1, 1}}), GraphError);
  CHECK_THROWS_AS(make_graph(3, {{0, 3}}), GraphError);
  CHECK_THROWS_AS(Graph(Matrix::Ones(2, 1), {}, {0, 2}, 2), GraphError);
  Matrix bad = Matrix::Ones(2, 1);
  bad(1, 0) = std::nan("");
  CHECK_THROWS_AS(Graph(bad, {{0, 1}}, {0, 1}, 2), GraphError);
  CHECK_THROWS_AS(Graph(Matrix::Ones(2, 1), {{0, 1}}, {0}, 2), GraphError);
}

TEST_CASE("normalize_adjacency examples") {
  SUBCASE("single node") {
    const Matrix a = normalize_adjacency_dense(make_graph(1, {}));
    CHECK(a(0, 0) == 1.0);
  }
  SUBCASE("one edge") {
    const Matrix a = normalize_adjacency_dense(make_graph(2, {{0, 1}}));
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) CHECK(a(i, j) == doctest::Approx(0.5).epsilon(1e-15));
    }
  }
  SUBCASE("path 0-1-2 by hand") {
    const Matrix a = normalize_adjacency_dense(testkit::path_graph(3));
    CHECK(a(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(a(1, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(a(2, 2) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(a(0, 1) == doctest::Approx(1.0 / std::sqrt(6.0)).epsilon(1e-15));
    CHECK(a(1, 2) == doctest::Approx(1.0 / std::sqrt(6.0)).epsilon(1e-15));
    CHECK(a(0, 2) == 0.0);
  }
}

TEST_CASE("normalized adjacency is bitwise symmetric and matches the loop oracle") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Graph g = testkit::random_graph(seed, 15, 0.3, 3, 2);
    const Matrix a = normalize_adjacency_dense(g);
    const Matrix ref = testkit::ref_normalize(testkit::adjacency_of(g));
    const SparseMatrix s = normalize_adjacency(g);
    for (int i = 0; i < g.num_nodes(); ++i) {
      double row = 0.0, mx = 0.0;
      for (int j = 0; j < g.num_nodes(); ++j) {
        CHECK(a(i, j) == a(j, i));
        CHECK(s.coeff(i, j) == s.coeff(j, i));
        CHECK(a(i, j) == doctest::Approx(ref(i, j)).epsilon(1e-14));
        CHECK((a(i, j) != 0.0) == (i == j || g.has_edge(i, j)));
        row += a(i, j);
        mx = std::max(mx, a(i, j));
      }
      CHECK(row <= 1.0 + static_cast<double>(g.degree(i)) * mx + 1e-12);
    }
  }
}

TEST_CASE("load_graph examples") {
  const auto dir = testkit::scratch_dir("load");
  SUBCASE("minimal one-node graph") {
    write_file(dir / "x.csv", "0.5\n");
    write_file(dir / "e.csv", "");
    write_file(dir / "y.csv", "0\n");
    const Graph g = load_graph(dir / "x.csv", dir / "e.csv", dir / "y.csv");
    CHECK(g.num_nodes() == 1);
    CHECK(g.num_edges() == 0);
    CHECK(g.feature_dim() == 1);
  }
  SUBCASE("reversed duplicates collapse, headers skipped") {
    write_file(dir / "x.csv", "a,b\n1,0\n0,1\n");
    write_file(dir / "e.csv", "src,dst\n0,1\n1,0\n");
    write_file(dir / "y.csv", "label\n0\n1\n");
    const Graph g = load_graph(dir / "x.csv", dir / "e.csv", dir / "y.csv");
    CHECK(g.num_edges() == 1);
    CHECK(g.num_classes() == 2);
  }
  SUBCASE("tab separated features") {
    write_file(dir / "x.tsv", "1\t2\n3\t4\n");
    write_file(dir / "e.csv", "0 1\n");
    write_file(dir / "y.csv", "1\n0\n");
    const Graph g = load_graph(dir / "x.tsv", dir / "e.csv", dir / "y.csv");
    CHECK(g.features()(1, 1) == 4.0);
  }
  SUBCASE("errors") {
    write_file(dir / "x.csv", "1\n1\n");
    write_file(dir / "y.csv", "0\n1\n");
    write_file(dir / "loop.csv", "1,1\n");
    CHECK_THROWS_AS(load_graph(dir / "x.csv", dir / "loop.csv", dir / "y.csv"), GraphError);
    write_file(dir / "none.csv", "");
    CHECK_THROWS_AS(load_graph(dir / "x.csv", dir / "none.csv", dir / "y.csv"), GraphError);
    write_file(dir / "far.csv", "0,5\n");
    CHECK_THROWS_AS(load_graph(dir / "x.csv", dir / "far.csv", dir / "y.csv"), GraphError);
    write_file(dir / "e.csv", "0,1\n");
    write_file(dir / "y3.csv", "0\n1\n1\n");
    CHECK_THROWS_AS(load_graph(dir / "x.csv", dir / "e.csv", dir / "y3.csv"), GraphError);
    write_file(dir / "ybad.csv", "0\n-1\n");
    CHECK_THROWS_AS(load_graph(dir / "x.csv", dir / "e.csv", dir / "ybad.csv"), GraphError);
    write_file(dir / "ybig.csv", "0\n4\n");
    CHECK_THROWS_AS(load_graph(dir / "x.csv", dir / "e.csv", dir / "ybig.csv", 3), GraphError);
    write_file(dir / "xbad.csv", "1\nfoo\n");
    CHECK_THROWS(load_graph(dir / "xbad.csv", dir / "e.csv", dir / "y.csv"));
    CHECK_THROWS(load_graph(dir / "missing.csv", dir / "e.csv", dir / "y.csv"));
  }
}

TEST_CASE("write_graph then load_graph round-trips byte for byte") {
  const auto dir = testkit::scratch_dir("roundtrip");
  const Graph g = testkit::random_graph(3, 12, 0.3, 4, 3);
  write_graph(g, dir / "x.csv", dir / "e.csv", dir / "y.csv.gz");
  const Graph h = load_graph(dir / "x.csv", dir / "e.csv", dir / "y.csv.gz");
  CHECK(h.same_structure(g));
  CHECK(h.features() == g.features());
  CHECK(h.labels() == g.labels());
  write_graph(h, dir / "x2.csv", dir / "e2.csv", dir / "y2.csv.gz");
  CHECK(read_text_file(dir / "x.csv") == read_text_file(dir / "x2.csv"));
  CHECK(read_text_file(dir / "e.csv") == read_text_file(dir / "e2.csv"));
  CHECK(read_text_file(dir / "y.csv.gz") == read_text_file(dir / "y2.csv.gz"));
}

TEST_CASE("format_double is shortest round-trip") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1.0) == "1");
  const double x = 1.0 / 3.0;
  CHECK(std::stod(format_double(x)) == x);
}

TEST_CASE("jaccard examples") {
  Matrix x(4, 3);
  x << 1, 1, 0,  //
      1, 1, 0,   //
      0, 0, 1,   //
      0, 0, 0;
  const Graph g(x, {{0, 1}, {1, 2}, {2, 3}}, {0, 1, 0, 1}, 2);
  CHECK(jaccard_coefficient(g, 0, 1) == 1.0);
  CHECK(jaccard_coefficient(g, 1, 2) == 0.0);
  CHECK(jaccard_prune(g, 1.0).has_edge(0, 1));
  CHECK_FALSE(jaccard_prune(g, 0.01).has_edge(1, 2));
  CHECK(jaccard_prune(g, 0.0).num_edges() == 3);
  CHECK_THROWS_AS(jaccard_prune(g, 1.5), GraphError);
  CHECK_THROWS_AS(jaccard_prune(g, -0.1), GraphError);
}

TEST_CASE("jaccard_prune equals a per-edge brute-force filter") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Graph g = testkit::random_graph(seed, 8, 0.5, 6, 2, true);
    const Graph pruned = jaccard_prune(g, 0.2);
    std::vector<Edge> expect;
    for (const auto& e : g.edges()) {
      int inter = 0, uni = 0;
      for (int j = 0; j < g.feature_dim(); ++j) {
        const bool a = g.features()(e.u, j) > 0, b = g.features()(e.v, j) > 0;
        inter += a && b;
        uni += a || b;
      }
      const double jac = uni == 0 ? 1.0 : static_cast<double>(inter) / uni;
      if (jac >= 0.2) expect.push_back(e);
    }
    CHECK(pruned.edges() == expect);
    CHECK(pruned.features() == g.features());
    CHECK(pruned.labels() == g.labels());
  }
}

TEST_CASE("synthetic_sbm examples") {
  SUBCASE("deterministic limit gives two triangles") {
    const Graph g = synthetic_sbm(7, {.block_sizes = {3, 3}, .p_in = 1.0, .p_out = 0.0, .feature_dim = 4});
    const std::vector<Edge> expect{{0, 1}, {0, 2}, {1, 2}, {3, 4}, {3, 5}, {4, 5}};
    CHECK(g.edges() == expect);
    CHECK(g.labels() == std::vector<int>{0, 0, 0, 1, 1, 1});
  }
  SUBCASE("same seed same graph") {
    const SbmParams p{.block_sizes = {5, 6}, .p_in = 0.4, .p_out = 0.1};
    const Graph a = synthetic_sbm(11, p), b = synthetic_sbm(11, p);
    CHECK(a.same_structure(b));
    CHECK(a.features() == b.features());
  }
  SUBCASE("edge count within 3 sigma of the binomial expectation") {
    // 2 blocks of 10: 2*C(10,2)=90 within-block pairs, 100 cross pairs.
    const double mean = 90 * 0.8 + 100 * 0.05;
    const double sd = std::sqrt(90 * 0.8 * 0.2 + 100 * 0.05 * 0.95);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const Graph g = synthetic_sbm(seed, {.block_sizes = {10, 10}, .p_in = 0.8, .p_out = 0.05});
      CHECK(std::abs(static_cast<double>(g.num_edges()) - mean) <= 3 * sd);
    }
  }
  SUBCASE("errors") {
    CHECK_THROWS(synthetic_sbm(0, {.block_sizes = {3, 0}}));
    CHECK_THROWS(synthetic_sbm(0, {.block_sizes = {3}, .p_in = 1.5}));
    CHECK_THROWS(synthetic_sbm(0, {.block_sizes = {}}));
  }
}

TEST_CASE("random_split examples") {
  const Graph g = synthetic_sbm(0, {.block_sizes = {50, 50}, .p_in = 0.1, .p_out = 0.01});
  const Split s = random_split(g, 42);
  CHECK(s.train.size() == 10);
  CHECK(s.valid.size() == 10);
  CHECK(s.test.size() == 80);
  CHECK_NOTHROW(validate_split(g, s));
  CHECK(random_split(g, 42) == s);

  std::set<NodeId> all;
  for (const auto* part : {&s.train, &s.valid, &s.test}) all.insert(part->begin(), part->end());
  CHECK(all.size() == 100);

  const Graph big = synthetic_sbm(1, {.block_sizes = {500, 500}, .p_in = 0.01, .p_out = 0.001});
  CHECK(random_split(big, 1).train != random_split(big, 2).train);

  CHECK_THROWS_AS(random_split(make_graph(5, {{0, 1}}), 0), GraphError);
  CHECK_THROWS(random_split(g, 0, {0.5, 0.5, 0.5}));
}

TEST_CASE("validate_split catches overlap") {
  const Graph g = testkit::path_graph(4);
  CHECK_THROWS_AS(validate_split(g, {{0}, {0}, {1, 2}}), GraphError);
  CHECK_THROWS_AS(validate_split(g, {{0}, {1}, {4}}), GraphError);
}
