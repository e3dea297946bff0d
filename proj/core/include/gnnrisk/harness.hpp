#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "gnnrisk/attacks.hpp"
#include "gnnrisk/graph.hpp"
#include "gnnrisk/model.hpp"
#include "gnnrisk/rng.hpp"
#include "gnnrisk/selection.hpp"

namespace gnnrisk {

enum class Setting { kEvasion, kPoison };
std::string to_string(Setting s);
Setting parse_setting(const std::string& name);

struct RunSpec {
  int splits = 5;  // K
  int runs = 3;    // R
  std::vector<std::size_t> budgets{1, 2, 3, 4, 5};
  std::vector<AttackKind> attacks{AttackKind::kL1dRnd, AttackKind::kFga, AttackKind::kNettackLite};
  GridAxes victim_grid{};
  GridAxes surrogate_grid{.arch = Arch::kSgc};
  /// Jaccard pruning applied to every graph the victim trains or predicts on.
  std::optional<double> jaccard_threshold;
  std::uint64_t master_seed = 0;
  SplitRatios ratios{};
  double sample_ratio = 0.1;
  std::size_t targets_per_category = 10;
  bool evasion = true;
  bool poison = true;
  /// Restrict the (expensive) poisoning retrains; empty means every budget / attack.
  std::vector<std::size_t> poison_budgets;
  std::vector<AttackKind> poison_attacks;
  int threads = 1;
  double max_dropped_fraction = 0.01;

  /// Throws std::invalid_argument.
  void validate() const;
  bool poison_enabled(AttackKind attack, std::size_t budget) const;

  friend bool operator==(const RunSpec&, const RunSpec&) = default;
};

void to_json(nlohmann::json& j, const RunSpec& s);
void from_json(const nlohmann::json& j, RunSpec& s);
void to_json(nlohmann::json& j, const GridAxes& a);
void from_json(const nlohmann::json& j, GridAxes& a);

/// One (attack, budget, split, run, target, setting) outcome. `success` means
/// the victim misclassifies the target.
struct CellRecord {
  AttackKind attack = AttackKind::kNoop;
  std::size_t budget = 0;
  int split = 0;
  int run = 0;
  NodeId target = 0;
  TargetCategory category = TargetCategory::kRandom;
  Setting setting = Setting::kEvasion;
  int label = 0;
  int prediction = -1;
  bool success = false;
  std::size_t flips = 0;
  bool early_stop = false;
  bool dropped = false;
  std::string error;

  friend bool operator==(const CellRecord&, const CellRecord&) = default;
};

struct SummaryRow {
  AttackKind attack = AttackKind::kNoop;
  std::size_t budget = 0;
  Setting setting = Setting::kEvasion;
  std::string category;  // "all" or a TargetCategory name
  double mean = 0.0;     // successes / scored cells
  double std = 0.0;      // population std of the per-(split, run) rates
  std::size_t cells = 0;
  std::size_t successes = 0;
  std::size_t dropped = 0;
  std::size_t groups = 0;

  friend bool operator==(const SummaryRow&, const SummaryRow&) = default;
};

struct SplitInfo {
  int split = 0;
  ModelConfig victim_best;
  ModelConfig surrogate_best;
  std::vector<SelectionEntry> victim_table;
  std::vector<SelectionEntry> surrogate_table;
  std::vector<TargetSet> targets;  // one per run
};

struct EvalReport {
  std::vector<CellRecord> cells;
  std::vector<SummaryRow> summary;
  std::vector<SplitInfo> splits;
  std::size_t dropped = 0;
  bool failed = false;  // dropped fraction above the cap
  std::string failure;
};

using LogFn = std::function<void(const std::string&)>;

/// Fair evaluation loop: per split, model selection on clean data, then per
/// run victim training, target selection, attack, evasion and poisoning
/// scoring, and aggregation. Pure function of (spec, g).
EvalReport run_benchmark(const RunSpec& spec, const Graph& g, const LogFn& log = {});

/// Frozen clean-trained victim evaluated on the perturbed structure.
bool score_evasion(const TrainedModel& victim, const Graph& perturbed, NodeId target, int label,
                   int* prediction = nullptr);

/// Victim retrained from scratch with `config` (its seed included) on the
/// perturbed graph.
bool score_poison(const ModelConfig& config, const Graph& perturbed, const Split& split, NodeId target, int label,
                  int* prediction = nullptr);

/// Mean and population std per (attack, budget, setting) overall and per
/// target category. Rows are ordered by (attack, budget, setting, category).
std::vector<SummaryRow> aggregate(const std::vector<CellRecord>& cells);

/// Per-seed derivations shared by the harness and replay tools.
std::uint64_t split_seed(std::uint64_t master, int split);
std::uint64_t selection_seed(std::uint64_t master, int split, Stage stage);
std::uint64_t run_seed(std::uint64_t master, int split, int run, Stage stage);
std::uint64_t attack_seed(std::uint64_t master, int split, int run, NodeId target, AttackKind attack);

std::string cells_csv(const std::vector<CellRecord>& cells);
std::vector<CellRecord> parse_cells_csv(const std::string& text);
nlohmann::json summary_json(const EvalReport& report);
std::vector<SummaryRow> summary_from_json(const nlohmann::json& j);

}  // namespace gnnrisk
