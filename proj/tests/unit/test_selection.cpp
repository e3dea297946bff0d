#include <doctest.h>

#include <set>

#include "gnnrisk/graph_ops.hpp"
#include "gnnrisk/rng.hpp"
#include "gnnrisk/selection.hpp"
#include "gnnrisk/train.hpp"
#include "test_support.hpp"

using namespace gnnrisk;

namespace {

ModelConfig quick(double lr = 0.01, int hidden = 8) {
  ModelConfig c;
  c.hidden = hidden;
  c.learning_rate = lr;
  c.max_epochs = 100;
  c.patience = 20;
  return c;
}

Graph separable_toy() {
  return synthetic_sbm(21, {.block_sizes = {12, 12}, .p_in = 0.5, .p_out = 0.0, .feature_dim = 6,
                            .feature_signal = 0.9, .feature_noise = 0.0});
}

}  // namespace

TEST_CASE("config grid") {
  CHECK_THROWS_AS(ConfigGrid({}), std::invalid_argument);
  CHECK_THROWS_AS(ConfigGrid({quick(), quick()}), std::invalid_argument);
  CHECK(ConfigGrid::from_axes(GridAxes{}).size() == 4);
  GridAxes sgc{.arch = Arch::kSgc};
  sgc.hidden = {16, 32, 64};
  sgc.dropout = {0.1, 0.5};
  const ConfigGrid g = ConfigGrid::from_axes(sgc);
  CHECK(g.size() == 2);  // only the learning-rate axis matters
  for (const auto& c : g.configs()) CHECK(c.arch == Arch::kSgc);
}

TEST_CASE("select examples") {
  const Graph g = separable_toy();
  const Split s = random_split(g, 4, {0.4, 0.3, 0.3});

  SUBCASE("singleton grid") {
    const auto r = select(ConfigGrid({quick()}), g, s);
    CHECK(r.best_index == 0);
    CHECK(r.table.size() == 1);
  }
  SUBCASE("sane learning rate beats a divergent one") {
    const auto r = select(ConfigGrid({quick(0.01), quick(1e6)}), g, s);
    CHECK(r.best.learning_rate == 0.01);
    const auto& diverged = r.table[1];
    if (diverged.valid_accuracy) {
      CHECK(*diverged.valid_accuracy <= *r.table[0].valid_accuracy);
    } else {
      CHECK_FALSE(diverged.error.empty());
    }
  }
  SUBCASE("ties go to grid order") {
    // Zero epochs of useful signal: lr tiny and 1 epoch gives identical scores.
    ModelConfig a = quick(1e-12);
    a.max_epochs = 1;
    ModelConfig b = a;
    b.weight_decay = 0.0;
    const auto r = select(ConfigGrid({a, b}), g, s, 3);
    REQUIRE(r.table[0].valid_accuracy == r.table[1].valid_accuracy);
    CHECK(r.best_index == 0);
  }
  SUBCASE("all failing configurations is an error") {
    ModelConfig bad = quick(1e300);
    bad.max_epochs = 5;
    CHECK_THROWS_AS(select(ConfigGrid({bad}), g, s), std::runtime_error);
  }
}

TEST_CASE("select only sees train and validation nodes") {
  const Graph g = separable_toy();
  Split s = random_split(g, 4, {0.4, 0.3, 0.3});
  const auto clean = select(ConfigGrid({quick(), quick(0.05)}), g, s, 1);
  // Indices that would throw if anything touched them.
  s.test = {-7, 1 << 30};
  const auto poisoned = select(ConfigGrid({quick(), quick(0.05)}), g, s, 1);
  CHECK(clean.best == poisoned.best);
  CHECK(clean.table[0].valid_accuracy == poisoned.table[0].valid_accuracy);
}

TEST_CASE("selection table csv lists every entry") {
  const Graph g = separable_toy();
  const Split s = random_split(g, 4, {0.4, 0.3, 0.3});
  const auto r = select(ConfigGrid({quick(), quick(0.05)}), g, s);
  const std::string csv = selection_table_csv(r);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}

namespace {

/// Independent target selection: explicit sort keys (key, id) and a separate
/// pass per category.
TargetSet reference_targets(const Matrix& z, const Graph& g, const std::vector<NodeId>& test, std::uint64_t seed,
                            std::size_t k) {
  struct Row {
    NodeId id;
    double degree;
    double margin;
  };
  std::vector<Row> pool;
  for (NodeId v : test) {
    int arg = 0;
    for (int c = 1; c < z.cols(); ++c) {
      if (z(v, c) > z(v, arg)) arg = c;
    }
    if (arg == g.label(v)) pool.push_back({v, static_cast<double>(g.degree(v)), testkit::ref_margin(z, v, g.label(v))});
  }
  std::set<NodeId> used;
  auto top = [&](auto key) {
    std::vector<std::pair<std::pair<double, NodeId>, NodeId>> keyed;
    for (const auto& r : pool) {
      if (!used.contains(r.id)) keyed.push_back({{key(r), r.id}, r.id});
    }
    std::sort(keyed.begin(), keyed.end());
    std::vector<NodeId> out;
    for (std::size_t i = 0; i < k; ++i) out.push_back(keyed[i].second);
    used.insert(out.begin(), out.end());
    return out;
  };
  TargetSet t;
  t.high_degree = top([](const Row& r) { return -r.degree; });
  t.low_degree = top([](const Row& r) { return r.degree; });
  t.high_margin = top([](const Row& r) { return -r.margin; });
  t.low_margin = top([](const Row& r) { return r.margin; });
  std::vector<NodeId> rest;
  for (const auto& r : pool) {
    if (!used.contains(r.id)) rest.push_back(r.id);
  }
  std::sort(rest.begin(), rest.end());
  Rng rng(seed);
  std::shuffle(rest.begin(), rest.end(), rng);
  t.random.assign(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(t.random.begin(), t.random.end());
  return t;
}

}  // namespace

TEST_CASE("node_select matches a brute-force sort on a 60-node instance") {
  const Graph g = synthetic_sbm(8, {.block_sizes = {30, 30}, .p_in = 0.2, .p_out = 0.02});
  const Split s = random_split(g, 3, {0.1, 0.1, 0.8});
  // Logits planted so that nearly all test nodes are correct with distinct margins.
  Matrix z = Matrix::Zero(g.num_nodes(), 2);
  for (NodeId v = 0; v < g.num_nodes(); ++v) z(v, g.label(v)) = 0.01 * (v % 37) + (v % 11 == 0 ? -1.0 : 0.5);
  const TargetSet got = node_select(z, g, s.test, 99, 8);
  const TargetSet want = reference_targets(z, g, s.test, 99, 8);
  CHECK(got == want);
  CHECK_FALSE(got.overlapping);
  CHECK(got.unique_count() == 40);

  double min_high = INFINITY, max_low = -INFINITY;
  for (NodeId v : got.high_margin) min_high = std::min(min_high, testkit::ref_margin(z, v, g.label(v)));
  for (NodeId v : got.low_margin) max_low = std::max(max_low, testkit::ref_margin(z, v, g.label(v)));
  CHECK(min_high >= max_low);
  for (const auto& [c, v] : got.all()) {
    CHECK(std::find(s.test.begin(), s.test.end(), v) != s.test.end());
    CHECK(argmax_class(z.row(v).transpose()) == g.label(v));
  }
  CHECK(node_select(z, g, s.test, 99, 8) == got);
}

TEST_CASE("node_select small pool overlaps and flags it") {
  const Graph g = testkit::star_graph(6);
  Matrix z = Matrix::Zero(7, 2);
  for (NodeId v = 0; v < 7; ++v) z(v, g.label(v)) = 1.0;
  const std::vector<NodeId> test{0, 1, 2, 3, 4, 5, 6};
  const TargetSet t = node_select(z, g, test, 1, 3);
  CHECK(t.overlapping);
  CHECK(t.high_degree.front() == 0);  // the hub
  for (auto c : kTargetCategories) {
    const auto& l = t.list(c);
    CHECK(std::set<NodeId>(l.begin(), l.end()).size() == l.size());
  }
}

TEST_CASE("node_select errors when the pool is too small") {
  const Graph g = testkit::star_graph(6);
  Matrix z = Matrix::Zero(7, 2);
  for (NodeId v = 0; v < 7; ++v) z(v, 1 - g.label(v)) = 1.0;
  const std::vector<NodeId> test{0, 1, 2, 3, 4, 5, 6};
  CHECK_THROWS_AS(node_select(z, g, test, 1, 3), TargetSelectionError);
}
