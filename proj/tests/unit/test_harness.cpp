#include <doctest.h>

#include <nlohmann/json.hpp>

#include "gnnrisk/graph_ops.hpp"
#include "gnnrisk/harness.hpp"
#include "gnnrisk/train.hpp"
#include "protocol_oracle.hpp"
#include "test_support.hpp"

using namespace gnnrisk;

namespace {

/// Small, fast protocol on a 30-node synthetic graph.
RunSpec tiny_spec() {
  RunSpec s;
  s.splits = 2;
  s.runs = 2;
  s.budgets = {1, 2};
  s.attacks = {AttackKind::kRnd};
  s.victim_grid.hidden = {8};
  s.victim_grid.learning_rate = {0.05};
  s.victim_grid.max_epochs = 60;
  s.victim_grid.patience = 10;
  s.surrogate_grid.learning_rate = {0.05};
  s.surrogate_grid.max_epochs = 60;
  s.surrogate_grid.patience = 10;
  s.ratios = {0.3, 0.2, 0.5};
  s.targets_per_category = 1;
  s.master_seed = 12;
  return s;
}

Graph thirty_nodes() {
  return synthetic_sbm(5, {.block_sizes = {15, 15}, .p_in = 0.35, .p_out = 0.04, .feature_dim = 8,
                           .feature_signal = 0.7, .feature_noise = 0.1});
}

CellRecord cell(int split, int run, bool success, TargetCategory cat = TargetCategory::kRandom, NodeId v = 0) {
  CellRecord c;
  c.attack = AttackKind::kRnd;
  c.budget = 1;
  c.split = split;
  c.run = run;
  c.category = cat;
  c.target = v;
  c.success = success;
  return c;
}

const SummaryRow& overall(const std::vector<SummaryRow>& rows) {
  for (const auto& r : rows) {
    if (r.category == "all") return r;
  }
  throw std::runtime_error("no overall row");
}

}  // namespace

TEST_CASE("aggregate examples") {
  SUBCASE("identical flags give zero spread") {
    std::vector<CellRecord> cells;
    for (int i = 0; i < 3; ++i) {
      for (int r = 0; r < 2; ++r) cells.push_back(cell(i, r, true));
    }
    CHECK(overall(aggregate(cells)).std == 0.0);
    CHECK(overall(aggregate(cells)).mean == 1.0);
  }
  SUBCASE("balanced flags over two runs") {
    const auto row = overall(aggregate({cell(0, 0, false), cell(0, 1, true)}));
    CHECK(row.mean == 0.5);
    CHECK(row.std == 0.5);
  }
  SUBCASE("K=1 R=1 with 50 targets and 20 successes") {
    std::vector<CellRecord> cells;
    for (int v = 0; v < 50; ++v) cells.push_back(cell(0, 0, v < 20, TargetCategory::kRandom, v));
    const auto row = overall(aggregate(cells));
    CHECK(row.cells == 50);
    CHECK(row.mean == doctest::Approx(0.40).epsilon(1e-15));
  }
  SUBCASE("5x3 random flags match an independent statistics routine") {
    std::mt19937_64 rng(8);
    std::bernoulli_distribution coin(0.4);
    std::vector<CellRecord> cells;
    std::vector<double> rates;
    double total = 0;
    for (int i = 0; i < 5; ++i) {
      for (int r = 0; r < 3; ++r) {
        int hits = 0;
        for (int v = 0; v < 10; ++v) {
          const bool s = coin(rng);
          hits += s;
          cells.push_back(cell(i, r, s, kTargetCategories[static_cast<std::size_t>(v % 5)], v));
        }
        rates.push_back(hits / 10.0);
        total += hits;
      }
    }
    double mu = 0;
    for (double x : rates) mu += x;
    mu /= static_cast<double>(rates.size());
    double var = 0;
    for (double x : rates) var += (x - mu) * (x - mu);
    const double sd = std::sqrt(var / static_cast<double>(rates.size()));
    const auto rows = aggregate(cells);
    const auto row = overall(rows);
    CHECK(row.mean == doctest::Approx(total / 150.0).epsilon(1e-14));
    CHECK(row.std == doctest::Approx(sd).epsilon(1e-12));
    CHECK(row.groups == 15);
    CHECK(rows.size() == 6);  // overall + five categories
  }
  SUBCASE("dropped cells are excluded and counted") {
    CellRecord d = cell(0, 0, true);
    d.dropped = true;
    const auto row = overall(aggregate({cell(0, 0, false), d}));
    CHECK(row.cells == 1);
    CHECK(row.dropped == 1);
    CHECK(row.mean == 0.0);
  }
}

TEST_CASE("score_evasion examples") {
  // Two features indicating the class; node 0 has none and is labelled by its
  // neighborhood only.
  Matrix x(4, 2);
  x << 0, 0,  //
      0, 1,   //
      0, 1,   //
      1, 0;
  const Graph g(x, {{0, 1}, {0, 2}, {1, 2}}, {1, 1, 1, 0}, 2);
  TrainedModel victim;
  victim.config.arch = Arch::kSgc;
  victim.config.hops = 1;
  victim.weights = {Matrix::Identity(2, 2)};
  int pred = -1;
  CHECK_FALSE(score_evasion(victim, g, 0, 1, &pred));
  CHECK(pred == 1);
  const Graph cut = g.with_edges({{1, 2}});
  CHECK(score_evasion(victim, cut, 0, 1, &pred));
  CHECK(pred == 0);  // all-zero logits tie toward class 0
  // Tie with true label 0: prediction 0, no success.
  const Graph tie(x, {{1, 2}}, {0, 1, 1, 0}, 2);
  CHECK_FALSE(score_evasion(victim, tie, 0, 0, &pred));
}

TEST_CASE("score_poison examples") {
  const Graph base = synthetic_sbm(2, {.block_sizes = {6, 6}, .p_in = 1.0, .p_out = 0.0, .feature_dim = 4,
                                       .feature_signal = 1.0, .feature_noise = 0.0});
  // Append node 12 with no features, label 1, linked to block 1.
  Matrix x = Matrix::Zero(13, 4);
  x.topRows(12) = base.features();
  std::vector<Edge> edges = base.edges();
  for (NodeId u = 6; u < 12; ++u) edges.emplace_back(12, u);
  std::vector<int> labels = base.labels();
  labels.push_back(1);
  const Graph g(x, edges, labels, 2);
  Split split;
  split.train = {0, 1, 2, 6, 7, 8};
  split.valid = {3, 4, 9, 10};
  split.test = {5, 11, 12};
  ModelConfig cfg;
  cfg.hidden = 8;
  cfg.dropout = 0.0;
  cfg.learning_rate = 0.05;
  cfg.max_epochs = 100;
  cfg.seed = 4;
  const TrainedModel victim = train(cfg, g, split);
  REQUIRE(victim.predict(12) == 1);

  int pe = -1, pp = -1;
  const bool evasion = score_evasion(victim, g, 12, 1, &pe);
  const bool poison = score_poison(cfg, g, split, 12, 1, &pp);
  CHECK_FALSE(evasion);
  CHECK(poison == evasion);
  CHECK(pp == pe);
  CHECK(score_poison(cfg, g, split, 12, 1) == score_poison(cfg, g, split, 12, 1));

  // Rewire node 12 entirely into block 0.
  AttackPlan plan{12, {}, 12, false};
  for (NodeId u = 6; u < 12; ++u) plan.flips.push_back({12, u, FlipAction::kRemove});
  for (NodeId u = 0; u < 6; ++u) plan.flips.push_back({12, u, FlipAction::kAdd});
  CHECK(score_poison(cfg, apply_plan(g, plan), split, 12, 1));
}

TEST_CASE("no-op attack never succeeds and poison matches evasion") {
  RunSpec s = tiny_spec();
  s.attacks = {AttackKind::kNoop};
  const EvalReport r = run_benchmark(s, thirty_nodes());
  for (const auto& row : r.summary) CHECK(row.mean == 0.0);
  for (const auto& c : r.cells) CHECK_FALSE(c.success);
}

TEST_CASE("run_benchmark equals a straight-line replay of the protocol") {
  const RunSpec s = tiny_spec();
  const Graph g = thirty_nodes();
  const EvalReport r = run_benchmark(s, g);
  CHECK(r.dropped == 0);
  CHECK_FALSE(r.failed);
  CHECK(oracle::protocol_mismatches(oracle::replay_protocol(s, g), r.cells) == 0);
  // Denominator K * R * |targets| per (attack, budget, setting).
  for (const auto& row : r.summary) {
    if (row.category == "all") CHECK(row.cells == 2u * 2u * 5u);
  }
}

TEST_CASE("run_benchmark is independent of the worker count") {
  RunSpec s = tiny_spec();
  s.attacks = {AttackKind::kL1dRnd, AttackKind::kNettackLite, AttackKind::kFga};
  s.poison_budgets = {1};
  const Graph g = thirty_nodes();
  const EvalReport one = run_benchmark(s, g);
  s.threads = 3;
  const EvalReport three = run_benchmark(s, g);
  CHECK(cells_csv(one.cells) == cells_csv(three.cells));
  CHECK(one.summary == three.summary);
}

TEST_CASE("jaccard defense wraps the victim") {
  RunSpec s = tiny_spec();
  s.jaccard_threshold = 0.05;
  const Graph g = thirty_nodes();
  const EvalReport r = run_benchmark(s, g);
  CHECK(oracle::protocol_mismatches(oracle::replay_protocol(s, g), r.cells) == 0);
}

TEST_CASE("report serialization round-trips") {
  RunSpec s = tiny_spec();
  s.runs = 1;
  s.splits = 1;
  const EvalReport r = run_benchmark(s, thirty_nodes());
  CHECK(parse_cells_csv(cells_csv(r.cells)) == r.cells);
  CHECK(summary_from_json(nlohmann::json::parse(summary_json(r).dump())) == r.summary);
  CHECK(aggregate(parse_cells_csv(cells_csv(r.cells))) == r.summary);
  CHECK_THROWS(parse_cells_csv("nonsense\n"));
}

TEST_CASE("run spec validation and json") {
  RunSpec s = tiny_spec();
  s.jaccard_threshold = 0.1;
  s.poison_attacks = {AttackKind::kFga};
  const nlohmann::json j = s;
  CHECK(j.get<RunSpec>() == s);
  RunSpec bad = s;
  bad.splits = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = s;
  bad.budgets = {0};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = s;
  bad.budgets.clear();
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  CHECK(s.poison_enabled(AttackKind::kFga, 2));
  CHECK_FALSE(s.poison_enabled(AttackKind::kRnd, 2));
}

TEST_CASE("seed derivations are distinct per cell") {
  CHECK(split_seed(1, 0) != split_seed(1, 1));
  CHECK(run_seed(1, 0, 0, Stage::kTrainVictim) != run_seed(1, 0, 1, Stage::kTrainVictim));
  CHECK(run_seed(1, 0, 0, Stage::kTrainVictim) != run_seed(1, 0, 0, Stage::kTargets));
  CHECK(attack_seed(1, 0, 0, 5, AttackKind::kRnd) != attack_seed(1, 0, 0, 6, AttackKind::kRnd));
  CHECK(attack_seed(1, 0, 0, 5, AttackKind::kRnd) == attack_seed(1, 0, 0, 5, AttackKind::kRnd));
}
