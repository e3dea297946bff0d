#include "commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gnnrisk/attacks.hpp"
#include "gnnrisk/graph_ops.hpp"
#include "gnnrisk/io.hpp"
#include "gnnrisk/train.hpp"
#include "run_config.hpp"

#ifndef GNNRISK_VERSION
#define GNNRISK_VERSION "dev"
#endif

namespace gnnrisk::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct GlobalOptions {
  std::string config;
  CLI::Option* config_opt = nullptr;
  std::string out;
  CLI::Option* out_opt = nullptr;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
  int threads = 1;
  CLI::Option* threads_opt = nullptr;
  int verbose = 0;
};

/// Config file with command-line overrides applied, validated.
RunConfig effective_config(const GlobalOptions& g) {
  if (!g.config_opt || g.config_opt->count() == 0) throw ConfigError("--config", "required for this command");
  RunConfig c = load_config(g.config);
  if (g.out_opt->count()) c.out_dir = fs::absolute(g.out).lexically_normal();
  if (g.seed_opt->count()) c.spec.master_seed = g.seed;
  if (g.threads_opt->count()) c.threads = g.threads;
  c.verbosity = std::max(c.verbosity, g.verbose);
  validate_config(c);
  c.spec.threads = resolve_threads(g.threads_opt->count() ? std::optional<int>(g.threads) : std::nullopt, c);
  return c;
}

void prepare_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw ConfigError("output.dir", "cannot create " + dir.string());
  const fs::path probe = dir / ".write-probe";
  try {
    write_text_file(probe, "");
  } catch (const std::exception&) {
    throw ConfigError("output.dir", "not writable: " + dir.string());
  }
  fs::remove(probe, ec);
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

Graph victim_view(const RunSpec& spec, const Graph& g) {
  return spec.jaccard_threshold ? jaccard_prune(g, *spec.jaccard_threshold) : g;
}

std::string selection_csv(const ModelConfig& best, const std::vector<SelectionEntry>& table) {
  SelectionResult r{best, 0, table};
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (table[i].config == best) r.best_index = i;
  }
  return selection_table_csv(r);
}

json seed_table(const RunSpec& spec) {
  json splits = json::array();
  for (int i = 0; i < spec.splits; ++i) {
    json runs = json::array();
    for (int r = 0; r < spec.runs; ++r) {
      runs.push_back({{"train_victim", run_seed(spec.master_seed, i, r, Stage::kTrainVictim)},
                      {"targets", run_seed(spec.master_seed, i, r, Stage::kTargets)}});
    }
    splits.push_back({{"split", split_seed(spec.master_seed, i)},
                      {"select_victim", selection_seed(spec.master_seed, i, Stage::kSelectVictim)},
                      {"select_surrogate", selection_seed(spec.master_seed, i, Stage::kSelectSurrogate)},
                      {"train_surrogate", selection_seed(spec.master_seed, i, Stage::kTrainSurrogate)},
                      {"runs", runs}});
  }
  return splits;
}

LogFn logger(const RunConfig& c, std::ostream& err) {
  if (c.verbosity <= 0) return {};
  return [&err](const std::string& msg) { err << msg << '\n'; };
}

int cmd_run(const GlobalOptions& opts, std::ostream& out, std::ostream& err) {
  const RunConfig c = effective_config(opts);
  prepare_dir(c.out_dir);
  const Graph g = load_dataset(c);
  const EvalReport report = run_benchmark(c.spec, g, logger(c, err));

  write_text_file(c.out_dir / "cells.csv", cells_csv(report.cells));
  write_text_file(c.out_dir / "summary.json", summary_json(report).dump(2) + "\n");
  write_text_file(c.out_dir / "config.resolved.toml", config_to_toml(c));
  const fs::path sel_dir = c.out_dir / "selection";
  fs::create_directories(sel_dir);
  std::vector<std::string> artifacts{"cells.csv", "summary.json", "config.resolved.toml"};
  for (const auto& info : report.splits) {
    const std::string stem = "split" + std::to_string(info.split);
    write_text_file(sel_dir / (stem + "_victim.csv"), selection_csv(info.victim_best, info.victim_table));
    artifacts.push_back("selection/" + stem + "_victim.csv");
    if (!info.surrogate_table.empty()) {
      write_text_file(sel_dir / (stem + "_surrogate.csv"), selection_csv(info.surrogate_best, info.surrogate_table));
      artifacts.push_back("selection/" + stem + "_surrogate.csv");
    }
  }

  json manifest = {{"tool", "gnnrisk"},
                   {"version", GNNRISK_VERSION},
                   {"created", utc_timestamp()},
                   {"config", config_to_tree(c)},
                   {"master_seed", c.spec.master_seed},
                   {"threads", c.spec.threads},
                   {"dataset",
                    {{"nodes", g.num_nodes()},
                     {"edges", g.num_edges()},
                     {"classes", g.num_classes()},
                     {"features", g.features().cols()}}},
                   {"seeds", seed_table(c.spec)},
                   {"artifacts", artifacts},
                   {"outcome", {{"cells", report.cells.size()}, {"dropped", report.dropped}, {"failed", report.failed}}}};
  write_text_file(c.out_dir / "manifest.json", manifest.dump(2) + "\n");

  for (Setting s : {Setting::kEvasion, Setting::kPoison}) {
    const std::string table = render_matrix(report.summary, s, "all", ReportFormat::kText, false);
    if (!table.empty()) out << table << '\n';
  }
  out << "wrote " << report.cells.size() << " cells to " << c.out_dir.string() << '\n';
  if (report.failed) {
    err << "error: " << report.failure << '\n';
    return kRuntimeFailure;
  }
  return kOk;
}

int cmd_select(const GlobalOptions& opts, int only_split, std::ostream& out, std::ostream& err) {
  const RunConfig c = effective_config(opts);
  if (only_split >= c.spec.splits) throw ConfigError("--split", "must be below run.splits");
  prepare_dir(c.out_dir / "selection");
  const Graph g = load_dataset(c);
  const Graph vg = victim_view(c.spec, g);
  const auto say = logger(c, err);
  for (int i = 0; i < c.spec.splits; ++i) {
    if (only_split >= 0 && i != only_split) continue;
    const Split split = random_split(g, split_seed(c.spec.master_seed, i), c.spec.ratios);
    const std::string stem = "split" + std::to_string(i);
    const auto victim = select(ConfigGrid::from_axes(c.spec.victim_grid), vg, split,
                               selection_seed(c.spec.master_seed, i, Stage::kSelectVictim));
    write_text_file(c.out_dir / "selection" / (stem + "_victim.csv"), selection_table_csv(victim));
    out << stem << " victim: " << victim.best.describe() << " valid_acc=" << *victim.table[victim.best_index].valid_accuracy
        << '\n';
    const auto sur = select(ConfigGrid::from_axes(c.spec.surrogate_grid), g, split,
                            selection_seed(c.spec.master_seed, i, Stage::kSelectSurrogate));
    write_text_file(c.out_dir / "selection" / (stem + "_surrogate.csv"), selection_table_csv(sur));
    out << stem << " surrogate: " << sur.best.describe() << " valid_acc=" << *sur.table[sur.best_index].valid_accuracy
        << '\n';
    if (say) say(stem + " done");
  }
  return kOk;
}

struct AttackOptions {
  std::string attack;
  NodeId target = 0;
  std::size_t budget = 0;
  int split = 0;
  int run = 0;
  std::string surrogate;
};

int cmd_attack(const GlobalOptions& opts, const AttackOptions& a, std::ostream& out) {
  AttackKind kind;
  try {
    kind = parse_attack(a.attack);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("--attack", e.what());
  }
  const RunConfig c = effective_config(opts);
  const Graph g = load_dataset(c);
  if (a.target < 0 || a.target >= g.num_nodes()) {
    throw ConfigError("--target", "node " + std::to_string(a.target) + " is not in the graph");
  }
  if (a.split < 0 || a.split >= c.spec.splits) throw ConfigError("--split", "must be in [0, run.splits)");
  if (a.run < 0 || a.run >= c.spec.runs) throw ConfigError("--run", "must be in [0, run.runs)");

  std::shared_ptr<const TrainedModel> surrogate;
  if (!a.surrogate.empty()) {
    if (!fs::is_regular_file(a.surrogate)) throw ConfigError("--surrogate", "file not found: " + a.surrogate);
    surrogate = std::make_shared<const TrainedModel>(model_from_json(json::parse(read_text_file(a.surrogate)), g));
  } else {
    // Same surrogate the benchmark would build for this split.
    const Split split = random_split(g, split_seed(c.spec.master_seed, a.split), c.spec.ratios);
    const auto sel = select(ConfigGrid::from_axes(c.spec.surrogate_grid), g, split,
                            selection_seed(c.spec.master_seed, a.split, Stage::kSelectSurrogate));
    ModelConfig cfg = sel.best;
    cfg.seed = selection_seed(c.spec.master_seed, a.split, Stage::kTrainSurrogate);
    surrogate = std::make_shared<const TrainedModel>(train(cfg, g, split));
  }

  const AttackContext ctx{&g, surrogate, attack_seed(c.spec.master_seed, a.split, a.run, a.target, kind),
                          c.spec.sample_ratio};
  const AttackPlan plan = run_attack(kind, ctx, a.target, a.budget);
  const json result = {{"attack", to_string(kind)},
                       {"target", a.target},
                       {"budget", a.budget},
                       {"split", a.split},
                       {"run", a.run},
                       {"plan", plan_to_json(plan)},
                       {"margin_before", surrogate_margin(*surrogate, g, a.target)},
                       {"margin_after", surrogate_margin(*surrogate, apply_plan(g, plan), a.target)}};
  out << result.dump(2) << '\n';
  return kOk;
}

struct ReportOptions {
  std::string dir;
  std::string format = "text";
  std::string setting = "all";
  std::string category = "all";
  bool bold_best = false;
};

int cmd_report(const ReportOptions& o, std::ostream& out, std::ostream& err) {
  const fs::path dir(o.dir);
  if (!fs::is_directory(dir)) throw ConfigError("DIR", "results directory not found: " + o.dir);
  const ReportFormat format = o.format == "markdown" ? ReportFormat::kMarkdown
                              : o.format == "csv"    ? ReportFormat::kCsv
                                                     : ReportFormat::kText;
  for (const char* name : {"summary.json", "cells.csv"}) {
    if (!fs::is_regular_file(dir / name)) {
      err << "error: missing " << (dir / name).string() << '\n';
      return kRuntimeFailure;
    }
  }
  std::vector<SummaryRow> stored;
  std::vector<CellRecord> cells;
  try {
    stored = summary_from_json(json::parse(read_text_file(dir / "summary.json")));
    cells = parse_cells_csv(read_text_file(dir / "cells.csv"));
  } catch (const std::exception& e) {
    err << "error: corrupt results in " << dir.string() << ": " << e.what() << '\n';
    return kRuntimeFailure;
  }
  if (aggregate(cells) != stored) {
    err << "error: summary.json does not match the aggregate of cells.csv\n";
    return kRuntimeFailure;
  }
  std::vector<Setting> settings;
  if (o.setting == "all") {
    settings = {Setting::kEvasion, Setting::kPoison};
  } else {
    settings = {parse_setting(o.setting)};
  }
  bool first = true;
  for (Setting s : settings) {
    const std::string table = render_matrix(stored, s, o.category, format, o.bold_best);
    if (table.empty()) continue;
    if (first) {
      out << table;
    } else if (format == ReportFormat::kCsv) {
      out << table.substr(table.find('\n') + 1);
    } else {
      out << '\n' << table;
    }
    first = false;
  }
  if (first) {
    err << "error: no rows for setting '" << o.setting << "' and category '" << o.category << "'\n";
    return kRuntimeFailure;
  }
  return kOk;
}

std::string fixed2(double x) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(2) << x;
  return s.str();
}

}  // namespace

std::string render_matrix(const std::vector<SummaryRow>& rows, Setting setting, const std::string& category,
                          ReportFormat format, bool bold_best) {
  std::vector<AttackKind> attacks;
  std::set<std::size_t> budget_set;
  std::map<std::pair<AttackKind, std::size_t>, const SummaryRow*> at;
  for (const auto& r : rows) {
    if (r.category != category) continue;
    // CSV blocks of different settings share one header, so use every budget.
    if (format == ReportFormat::kCsv) budget_set.insert(r.budget);
    if (r.setting != setting) continue;
    if (std::find(attacks.begin(), attacks.end(), r.attack) == attacks.end()) attacks.push_back(r.attack);
    budget_set.insert(r.budget);
    at[{r.attack, r.budget}] = &r;
  }
  if (attacks.empty()) return "";
  const std::vector<std::size_t> budgets(budget_set.begin(), budget_set.end());

  std::map<std::size_t, double> best;
  for (const auto& [key, r] : at) {
    if (r->cells == 0) continue;
    auto [it, fresh] = best.emplace(key.second, r->mean);
    if (!fresh) it->second = std::max(it->second, r->mean);
  }

  // Grid of plain strings; the first row and column are headers.
  std::vector<std::vector<std::string>> grid;
  std::vector<std::string> header{"attack"};
  for (auto b : budgets) header.push_back("budget " + std::to_string(b));
  grid.push_back(header);
  for (auto a : attacks) {
    std::vector<std::string> line{to_string(a)};
    for (auto b : budgets) {
      const auto it = at.find({a, b});
      if (it == at.end() || it->second->cells == 0) {
        line.emplace_back("-");
        continue;
      }
      const SummaryRow& r = *it->second;
      std::string cell = fixed2(100.0 * r.mean) + " ± " + fixed2(100.0 * r.std);
      if (bold_best && r.mean == best[b]) {
        cell = format == ReportFormat::kMarkdown ? "**" + cell + "**" : cell + " *";
      }
      line.push_back(cell);
    }
    grid.push_back(line);
  }

  const std::string title = to_string(setting) + ", " + category + " targets, misclassification % (mean ± std)";
  std::ostringstream out;
  if (format == ReportFormat::kCsv) {
    out << "setting,category";
    for (const auto& h : grid[0]) out << ',' << h;
    out << '\n';
    for (std::size_t i = 1; i < grid.size(); ++i) {
      out << to_string(setting) << ',' << category;
      for (const auto& v : grid[i]) out << ',' << v;
      out << '\n';
    }
    return out.str();
  }
  if (format == ReportFormat::kMarkdown) {
    out << "**" << title << "**\n\n";
    for (std::size_t i = 0; i < grid.size(); ++i) {
      out << '|';
      for (const auto& v : grid[i]) out << ' ' << v << " |";
      out << '\n';
      if (i == 0) {
        out << "| --- |";
        for (std::size_t j = 1; j < grid[0].size(); ++j) out << " ---: |";
        out << '\n';
      }
    }
    return out.str();
  }
  // Plain text: columns padded to their widest cell (counted in code points).
  auto width = [](const std::string& s) {
    return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](char c) { return (c & 0xC0) != 0x80; }));
  };
  std::vector<std::size_t> widths(grid[0].size(), 0);
  for (const auto& line : grid) {
    for (std::size_t j = 0; j < line.size(); ++j) widths[j] = std::max(widths[j], width(line[j]));
  }
  out << title << '\n';
  for (const auto& line : grid) {
    for (std::size_t j = 0; j < line.size(); ++j) {
      const std::string pad(widths[j] - width(line[j]), ' ');
      out << (j ? "  " : "") << (j == 0 ? line[j] + pad : pad + line[j]);
    }
    out << '\n';
  }
  return out.str();
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Adversarial robustness benchmark for graph neural networks", "gnnrisk"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", GNNRISK_VERSION);

  GlobalOptions g;
  g.config_opt = app.add_option("--config", g.config, "Run config (TOML) or a run manifest (JSON) to replay");
  g.out_opt = app.add_option("--out", g.out, "Output directory (overrides output.dir)");
  g.seed_opt = app.add_option("--seed", g.seed, "Master seed (overrides run.master_seed)");
  g.threads_opt = app.add_option("--threads", g.threads, std::string("Worker threads (default: config, then $") +
                                                               kThreadsEnv + ", then 1)")
                      ->check(CLI::PositiveNumber);
  app.add_flag("-v,--verbose", g.verbose, "Log progress to stderr (repeat for more)");

  CLI::App* run = app.add_subcommand("run", "Run the full benchmark and write results");
  CLI::App* sel = app.add_subcommand("select", "Run model selection only");
  int sel_split = -1;
  sel->add_option("--split", sel_split, "Only this split (default: all)")->check(CLI::NonNegativeNumber);

  CLI::App* atk = app.add_subcommand("attack", "Attack one target and print the plan");
  AttackOptions a;
  atk->add_option("--attack", a.attack, "Attack name")->required();
  atk->add_option("--target", a.target, "Target node id")->required();
  atk->add_option("--budget", a.budget, "Number of edge flips")->required();
  atk->add_option("--split", a.split, "Split index whose surrogate to use");
  atk->add_option("--run", a.run, "Run index used for the attack seed");
  atk->add_option("--surrogate", a.surrogate, "Surrogate model JSON instead of training one");

  CLI::App* rep = app.add_subcommand("report", "Render a results directory as a table");
  ReportOptions r;
  rep->add_option("dir", r.dir, "Results directory")->required();
  rep->add_option("--format", r.format, "text, markdown or csv")
      ->check(CLI::IsMember({"text", "markdown", "csv"}));
  rep->add_option("--setting", r.setting, "evasion, poison or all")->check(CLI::IsMember({"evasion", "poison", "all"}));
  rep->add_option("--category", r.category, "all or a target category");
  rep->add_flag("--bold-best", r.bold_best, "Mark the strongest attack per budget");

  std::vector<std::string> argv_store{"gnnrisk"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : argv_store) argv.push_back(s.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForVersion& e) {
    out << GNNRISK_VERSION << '\n';
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  }

  try {
    if (*run) return cmd_run(g, out, err);
    if (*sel) return cmd_select(g, sel_split, out, err);
    if (*atk) return cmd_attack(g, a, out);
    if (*rep) return cmd_report(r, out, err);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeFailure;
  }
  return kUsageError;
}

}  // namespace gnnrisk::cli
