#include "gnnrisk/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>
#include <tuple>

#include <nlohmann/json.hpp>

#include "gnnrisk/graph_ops.hpp"
#include "gnnrisk/io.hpp"
#include "gnnrisk/rng.hpp"
#include "gnnrisk/train.hpp"

namespace gnnrisk {

std::string to_string(Setting s) { return s == Setting::kEvasion ? "evasion" : "poison"; }

Setting parse_setting(const std::string& name) {
  if (name == "evasion") return Setting::kEvasion;
  if (name == "poison") return Setting::kPoison;
  throw std::invalid_argument("unknown setting '" + name + "'");
}

void RunSpec::validate() const {
  if (splits < 1) throw std::invalid_argument("splits (K) must be >= 1");
  if (runs < 1) throw std::invalid_argument("runs (R) must be >= 1");
  if (budgets.empty()) throw std::invalid_argument("budgets must be non-empty");
  for (auto b : budgets) {
    if (b == 0) throw std::invalid_argument("budgets must be positive");
  }
  if (attacks.empty()) throw std::invalid_argument("attacks must be non-empty");
  if (!(sample_ratio > 0.0 && sample_ratio <= 1.0)) throw std::invalid_argument("sample_ratio must lie in (0, 1]");
  if (jaccard_threshold && !(*jaccard_threshold >= 0.0 && *jaccard_threshold <= 1.0)) {
    throw std::invalid_argument("jaccard threshold must lie in [0, 1]");
  }
  if (targets_per_category == 0) throw std::invalid_argument("targets_per_category must be positive");
  if (!evasion && !poison) throw std::invalid_argument("enable at least one of evasion / poison");
  if (threads < 1) throw std::invalid_argument("threads must be >= 1");
  if (!(max_dropped_fraction >= 0.0 && max_dropped_fraction <= 1.0)) {
    throw std::invalid_argument("max_dropped_fraction must lie in [0, 1]");
  }
  // Building the grids validates them.
  (void)ConfigGrid::from_axes(victim_grid);
  (void)ConfigGrid::from_axes(surrogate_grid);
}

bool RunSpec::poison_enabled(AttackKind attack, std::size_t budget) const {
  if (!poison) return false;
  const bool budget_ok =
      poison_budgets.empty() || std::find(poison_budgets.begin(), poison_budgets.end(), budget) != poison_budgets.end();
  const bool attack_ok =
      poison_attacks.empty() || std::find(poison_attacks.begin(), poison_attacks.end(), attack) != poison_attacks.end();
  return budget_ok && attack_ok;
}

namespace {

std::vector<std::string> attack_strings(const std::vector<AttackKind>& kinds) {
  std::vector<std::string> out;
  for (auto k : kinds) out.push_back(to_string(k));
  return out;
}

std::vector<AttackKind> attack_kinds(const std::vector<std::string>& names) {
  std::vector<AttackKind> out;
  for (const auto& n : names) out.push_back(parse_attack(n));
  return out;
}

}  // namespace

void to_json(nlohmann::json& j, const GridAxes& a) {
  j = {{"arch", to_string(a.arch)},       {"hidden", a.hidden},         {"learning_rate", a.learning_rate},
       {"dropout", a.dropout},            {"weight_decay", a.weight_decay}, {"max_epochs", a.max_epochs},
       {"patience", a.patience},          {"hops", a.hops},             {"stop_metric", to_string(a.stop_metric)}};
}

void from_json(const nlohmann::json& j, GridAxes& a) {
  GridAxes d;
  if (j.contains("arch")) d.arch = parse_arch(j.at("arch").get<std::string>());
  if (d.arch == Arch::kSgc) {
    d.hidden = {ModelConfig{}.hidden};
    d.dropout = {0.0};
  }
  d.hidden = j.value("hidden", d.hidden);
  d.learning_rate = j.value("learning_rate", d.learning_rate);
  d.dropout = j.value("dropout", d.dropout);
  d.weight_decay = j.value("weight_decay", d.weight_decay);
  d.max_epochs = j.value("max_epochs", d.max_epochs);
  d.patience = j.value("patience", d.patience);
  d.hops = j.value("hops", d.hops);
  d.stop_metric = parse_stop_metric(j.value("stop_metric", to_string(d.stop_metric)));
  a = d;
}

void to_json(nlohmann::json& j, const RunSpec& s) {
  j = {{"splits", s.splits},
       {"runs", s.runs},
       {"budgets", s.budgets},
       {"attacks", attack_strings(s.attacks)},
       {"victim_grid", s.victim_grid},
       {"surrogate_grid", s.surrogate_grid},
       {"master_seed", s.master_seed},
       {"split_ratios", {s.ratios.train, s.ratios.valid, s.ratios.test}},
       {"sample_ratio", s.sample_ratio},
       {"targets_per_category", s.targets_per_category},
       {"evasion", s.evasion},
       {"poison", s.poison},
       {"poison_budgets", s.poison_budgets},
       {"poison_attacks", attack_strings(s.poison_attacks)},
       {"threads", s.threads},
       {"max_dropped_fraction", s.max_dropped_fraction}};
  if (s.jaccard_threshold) j["jaccard_threshold"] = *s.jaccard_threshold;
}

void from_json(const nlohmann::json& j, RunSpec& s) {
  RunSpec d;
  d.splits = j.value("splits", d.splits);
  d.runs = j.value("runs", d.runs);
  d.budgets = j.value("budgets", d.budgets);
  if (j.contains("attacks")) d.attacks = attack_kinds(j.at("attacks").get<std::vector<std::string>>());
  if (j.contains("victim_grid")) d.victim_grid = j.at("victim_grid").get<GridAxes>();
  if (j.contains("surrogate_grid")) {
    nlohmann::json sg = j.at("surrogate_grid");
    if (!sg.contains("arch")) sg["arch"] = "sgc";
    d.surrogate_grid = sg.get<GridAxes>();
  }
  d.master_seed = j.value("master_seed", d.master_seed);
  if (j.contains("split_ratios")) {
    const auto r = j.at("split_ratios").get<std::vector<double>>();
    if (r.size() != 3) throw std::invalid_argument("split_ratios needs three values");
    d.ratios = {r[0], r[1], r[2]};
  }
  d.sample_ratio = j.value("sample_ratio", d.sample_ratio);
  d.targets_per_category = j.value("targets_per_category", d.targets_per_category);
  d.evasion = j.value("evasion", d.evasion);
  d.poison = j.value("poison", d.poison);
  d.poison_budgets = j.value("poison_budgets", d.poison_budgets);
  if (j.contains("poison_attacks")) d.poison_attacks = attack_kinds(j.at("poison_attacks").get<std::vector<std::string>>());
  d.threads = j.value("threads", d.threads);
  d.max_dropped_fraction = j.value("max_dropped_fraction", d.max_dropped_fraction);
  if (j.contains("jaccard_threshold") && !j.at("jaccard_threshold").is_null()) {
    d.jaccard_threshold = j.at("jaccard_threshold").get<double>();
  }
  s = d;
}

std::uint64_t split_seed(std::uint64_t master, int split) {
  return derive_seed(master, {static_cast<std::uint64_t>(split), stage_tag(Stage::kSplit)});
}

std::uint64_t selection_seed(std::uint64_t master, int split, Stage stage) {
  return derive_seed(master, {static_cast<std::uint64_t>(split), stage_tag(stage)});
}

std::uint64_t run_seed(std::uint64_t master, int split, int run, Stage stage) {
  return derive_seed(master, {static_cast<std::uint64_t>(split), static_cast<std::uint64_t>(run), stage_tag(stage)});
}

std::uint64_t attack_seed(std::uint64_t master, int split, int run, NodeId target, AttackKind attack) {
  return derive_seed(master, {static_cast<std::uint64_t>(split), static_cast<std::uint64_t>(run),
                              static_cast<std::uint64_t>(target), stage_tag(Stage::kAttack),
                              static_cast<std::uint64_t>(attack)});
}

bool score_evasion(const TrainedModel& victim, const Graph& perturbed, NodeId target, int label, int* prediction) {
  const Matrix z = predict_logits(victim, perturbed);
  const int p = argmax_class(z.row(target).transpose());
  if (prediction) *prediction = p;
  return p != label;
}

bool score_poison(const ModelConfig& config, const Graph& perturbed, const Split& split, NodeId target, int label,
                  int* prediction) {
  const TrainedModel retrained = train(config, perturbed, split);
  const int p = retrained.predict(target);
  if (prediction) *prediction = p;
  return p != label;
}

namespace {

template <typename F>
void parallel_for(std::size_t n, int threads, F&& body) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) body(i);
    });
  }
}

Graph defended(const RunSpec& spec, const Graph& g) {
  return spec.jaccard_threshold ? jaccard_prune(g, *spec.jaccard_threshold) : g;
}

}  // namespace

EvalReport run_benchmark(const RunSpec& spec, const Graph& g, const LogFn& log) {
  spec.validate();
  auto say = [&](const std::string& msg) {
    if (log) log(msg);
  };
  const ConfigGrid victim_grid = ConfigGrid::from_axes(spec.victim_grid);
  const ConfigGrid surrogate_grid = ConfigGrid::from_axes(spec.surrogate_grid);
  const std::size_t max_budget = *std::max_element(spec.budgets.begin(), spec.budgets.end());
  std::vector<std::size_t> budgets = spec.budgets;
  std::sort(budgets.begin(), budgets.end());
  budgets.erase(std::unique(budgets.begin(), budgets.end()), budgets.end());
  const bool need_surrogate = std::any_of(spec.attacks.begin(), spec.attacks.end(), attack_needs_surrogate);

  EvalReport report;
  const Graph victim_graph = defended(spec, g);

  for (int i = 0; i < spec.splits; ++i) {
    const Split split = random_split(g, split_seed(spec.master_seed, i), spec.ratios);
    SplitInfo info;
    info.split = i;

    // Model selection on clean data, once per split.
    const SelectionResult victim_sel =
        select(victim_grid, victim_graph, split, selection_seed(spec.master_seed, i, Stage::kSelectVictim));
    info.victim_best = victim_sel.best;
    info.victim_table = victim_sel.table;
    say("split " + std::to_string(i) + ": victim " + victim_sel.best.describe() + " valid_acc=" +
        std::to_string(*victim_sel.table[victim_sel.best_index].valid_accuracy));

    std::shared_ptr<const TrainedModel> surrogate;
    if (need_surrogate) {
      const SelectionResult sur_sel =
          select(surrogate_grid, g, split, selection_seed(spec.master_seed, i, Stage::kSelectSurrogate));
      info.surrogate_best = sur_sel.best;
      info.surrogate_table = sur_sel.table;
      ModelConfig cfg = sur_sel.best;
      cfg.seed = selection_seed(spec.master_seed, i, Stage::kTrainSurrogate);
      surrogate = std::make_shared<const TrainedModel>(train(cfg, g, split));
      say("split " + std::to_string(i) + ": surrogate " + cfg.describe());
    }

    for (int r = 0; r < spec.runs; ++r) {
      ModelConfig victim_cfg = victim_sel.best;
      victim_cfg.seed = run_seed(spec.master_seed, i, r, Stage::kTrainVictim);
      const TrainedModel victim = train(victim_cfg, victim_graph, split);
      const TargetSet targets = node_select(victim.logits, g, split.test, run_seed(spec.master_seed, i, r, Stage::kTargets),
                                            spec.targets_per_category);
      info.targets.push_back(targets);
      const auto entries = targets.all();

      struct Task {
        AttackKind attack;
        TargetCategory category;
        NodeId target;
      };
      std::vector<Task> tasks;
      for (auto kind : spec.attacks) {
        for (const auto& [cat, v] : entries) tasks.push_back({kind, cat, v});
      }
      std::vector<std::vector<CellRecord>> results(tasks.size());

      parallel_for(tasks.size(), spec.threads, [&](std::size_t t) {
        const Task& task = tasks[t];
        const int label = g.label(task.target);
        auto base = [&](std::size_t budget, Setting setting) {
          CellRecord c;
          c.attack = task.attack;
          c.budget = budget;
          c.split = i;
          c.run = r;
          c.target = task.target;
          c.category = task.category;
          c.setting = setting;
          c.label = label;
          return c;
        };
        std::vector<CellRecord>& out = results[t];
        AttackContext ctx{&g, surrogate, attack_seed(spec.master_seed, i, r, task.target, task.attack),
                          spec.sample_ratio};
        std::optional<AttackPlan> full;
        std::string attack_error;
        try {
          full = run_attack(task.attack, ctx, task.target, max_budget);
        } catch (const std::exception& e) {
          attack_error = e.what();
        }
        for (std::size_t b : budgets) {
          std::vector<Setting> settings;
          if (spec.evasion) settings.push_back(Setting::kEvasion);
          if (spec.poison_enabled(task.attack, b)) settings.push_back(Setting::kPoison);
          if (!full) {
            for (auto s : settings) {
              CellRecord c = base(b, s);
              c.dropped = true;
              c.error = attack_error;
              out.push_back(std::move(c));
            }
            continue;
          }
          const AttackPlan plan = full->prefix(b);
          const Graph perturbed = defended(spec, apply_plan(g, plan));
          for (auto s : settings) {
            CellRecord c = base(b, s);
            c.flips = plan.flips.size();
            c.early_stop = plan.early_stop;
            try {
              c.success = s == Setting::kEvasion
                              ? score_evasion(victim, perturbed, task.target, label, &c.prediction)
                              : score_poison(victim_cfg, perturbed, split, task.target, label, &c.prediction);
            } catch (const std::exception& e) {
              c.dropped = true;
              c.error = e.what();
            }
            out.push_back(std::move(c));
          }
        }
      });
      for (auto& rs : results) {
        for (auto& c : rs) report.cells.push_back(std::move(c));
      }
      say("split " + std::to_string(i) + " run " + std::to_string(r) + ": " + std::to_string(entries.size()) +
          " targets, victim valid_acc=" + std::to_string(victim.best_valid_accuracy));
    }
    report.splits.push_back(std::move(info));
  }

  std::sort(report.cells.begin(), report.cells.end(), [](const CellRecord& a, const CellRecord& b) {
    return std::tuple(static_cast<int>(a.attack), a.budget, static_cast<int>(a.setting), a.split, a.run,
                      static_cast<int>(a.category), a.target) <
           std::tuple(static_cast<int>(b.attack), b.budget, static_cast<int>(b.setting), b.split, b.run,
                      static_cast<int>(b.category), b.target);
  });
  report.dropped = static_cast<std::size_t>(
      std::count_if(report.cells.begin(), report.cells.end(), [](const CellRecord& c) { return c.dropped; }));
  if (!report.cells.empty() && report.dropped == report.cells.size()) {
    throw std::runtime_error("every benchmark cell failed; first error: " + report.cells.front().error);
  }
  const double frac = report.cells.empty() ? 0.0 : static_cast<double>(report.dropped) / static_cast<double>(report.cells.size());
  if (frac > spec.max_dropped_fraction) {
    report.failed = true;
    report.failure = std::to_string(report.dropped) + " of " + std::to_string(report.cells.size()) +
                     " cells dropped, above the cap of " + std::to_string(spec.max_dropped_fraction);
  }
  report.summary = aggregate(report.cells);
  return report;
}

std::vector<SummaryRow> aggregate(const std::vector<CellRecord>& cells) {
  using Key = std::tuple<int, std::size_t, int, std::string>;
  struct Acc {
    std::size_t cells = 0, successes = 0, dropped = 0;
    std::map<std::pair<int, int>, std::pair<std::size_t, std::size_t>> groups;  // (split, run) -> (succ, n)
  };
  std::map<Key, Acc> acc;
  for (const auto& c : cells) {
    for (const std::string& cat : {std::string("all"), to_string(c.category)}) {
      auto& a = acc[Key{static_cast<int>(c.attack), c.budget, static_cast<int>(c.setting), cat}];
      if (c.dropped) {
        ++a.dropped;
        continue;
      }
      ++a.cells;
      auto& grp = a.groups[{c.split, c.run}];
      ++grp.second;
      if (c.success) {
        ++a.successes;
        ++grp.first;
      }
    }
  }
  std::vector<SummaryRow> rows;
  for (const auto& [key, a] : acc) {
    SummaryRow row;
    row.attack = static_cast<AttackKind>(std::get<0>(key));
    row.budget = std::get<1>(key);
    row.setting = static_cast<Setting>(std::get<2>(key));
    row.category = std::get<3>(key);
    row.cells = a.cells;
    row.successes = a.successes;
    row.dropped = a.dropped;
    row.groups = a.groups.size();
    if (a.cells > 0) row.mean = static_cast<double>(a.successes) / static_cast<double>(a.cells);
    if (!a.groups.empty()) {
      double mean_rate = 0.0;
      for (const auto& [k, g] : a.groups) mean_rate += static_cast<double>(g.first) / static_cast<double>(g.second);
      mean_rate /= static_cast<double>(a.groups.size());
      double var = 0.0;
      for (const auto& [k, g] : a.groups) {
        const double d = static_cast<double>(g.first) / static_cast<double>(g.second) - mean_rate;
        var += d * d;
      }
      row.std = std::sqrt(var / static_cast<double>(a.groups.size()));
    }
    rows.push_back(row);
  }
  return rows;
}

std::string cells_csv(const std::vector<CellRecord>& cells) {
  std::ostringstream out;
  out << "attack,budget,setting,split,run,target,category,label,prediction,success,flips,early_stop,dropped,error\n";
  for (const auto& c : cells) {
    std::string err = c.error;
    std::replace(err.begin(), err.end(), '"', '\'');
    std::replace(err.begin(), err.end(), '\n', ' ');
    out << to_string(c.attack) << ',' << c.budget << ',' << to_string(c.setting) << ',' << c.split << ',' << c.run
        << ',' << c.target << ',' << to_string(c.category) << ',' << c.label << ',' << c.prediction << ','
        << (c.success ? 1 : 0) << ',' << c.flips << ',' << (c.early_stop ? 1 : 0) << ',' << (c.dropped ? 1 : 0)
        << ",\"" << err << "\"\n";
  }
  return out.str();
}

std::vector<CellRecord> parse_cells_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<CellRecord> cells;
  if (!std::getline(in, line) || line.rfind("attack,budget,setting", 0) != 0) {
    throw std::runtime_error("cells CSV: missing header");
  }
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto quote = line.find(",\"");
    if (quote == std::string::npos || line.back() != '"') {
      throw std::runtime_error("cells CSV: malformed line " + std::to_string(lineno));
    }
    std::vector<std::string> f;
    std::istringstream fields(line.substr(0, quote));
    std::string tok;
    while (std::getline(fields, tok, ',')) f.push_back(tok);
    if (f.size() != 13) throw std::runtime_error("cells CSV: wrong field count on line " + std::to_string(lineno));
    try {
      CellRecord c;
      c.attack = parse_attack(f[0]);
      c.budget = std::stoul(f[1]);
      c.setting = parse_setting(f[2]);
      c.split = std::stoi(f[3]);
      c.run = std::stoi(f[4]);
      c.target = static_cast<NodeId>(std::stol(f[5]));
      c.category = parse_target_category(f[6]);
      c.label = std::stoi(f[7]);
      c.prediction = std::stoi(f[8]);
      c.success = f[9] == "1";
      c.flips = std::stoul(f[10]);
      c.early_stop = f[11] == "1";
      c.dropped = f[12] == "1";
      c.error = line.substr(quote + 2, line.size() - quote - 3);
      cells.push_back(std::move(c));
    } catch (const std::exception& e) {
      throw std::runtime_error("cells CSV: bad value on line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cells;
}

nlohmann::json summary_json(const EvalReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& s : report.summary) {
    rows.push_back({{"attack", to_string(s.attack)},
                    {"budget", s.budget},
                    {"setting", to_string(s.setting)},
                    {"category", s.category},
                    {"mean", s.mean},
                    {"std", s.std},
                    {"cells", s.cells},
                    {"successes", s.successes},
                    {"dropped", s.dropped},
                    {"groups", s.groups}});
  }
  nlohmann::json splits = nlohmann::json::array();
  for (const auto& sp : report.splits) {
    nlohmann::json targets = nlohmann::json::array();
    for (const auto& t : sp.targets) {
      nlohmann::json one;
      for (auto c : kTargetCategories) one[to_string(c)] = t.list(c);
      one["overlapping"] = t.overlapping;
      one["unique"] = t.unique_count();
      targets.push_back(one);
    }
    splits.push_back({{"split", sp.split},
                      {"victim_best", sp.victim_best},
                      {"surrogate_best", sp.surrogate_best},
                      {"targets", targets}});
  }
  return {{"summary", rows},
          {"cells", report.cells.size()},
          {"dropped", report.dropped},
          {"failed", report.failed},
          {"failure", report.failure},
          {"splits", splits}};
}

std::vector<SummaryRow> summary_from_json(const nlohmann::json& j) {
  std::vector<SummaryRow> rows;
  for (const auto& r : j.at("summary")) {
    SummaryRow s;
    s.attack = parse_attack(r.at("attack").get<std::string>());
    s.budget = r.at("budget").get<std::size_t>();
    s.setting = parse_setting(r.at("setting").get<std::string>());
    s.category = r.at("category").get<std::string>();
    s.mean = r.at("mean").get<double>();
    s.std = r.at("std").get<double>();
    s.cells = r.at("cells").get<std::size_t>();
    s.successes = r.at("successes").get<std::size_t>();
    s.dropped = r.at("dropped").get<std::size_t>();
    s.groups = r.at("groups").get<std::size_t>();
    rows.push_back(s);
  }
  return rows;
}

}  // namespace gnnrisk
