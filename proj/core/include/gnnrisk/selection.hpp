#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gnnrisk/graph.hpp"
#include "gnnrisk/model.hpp"
#include "gnnrisk/train.hpp"

namespace gnnrisk {

/// Axis values whose cartesian product forms the configuration grid.
struct GridAxes {
  Arch arch = Arch::kGcn2;
  std::vector<int> hidden{32, 64};
  std::vector<double> learning_rate{0.01, 0.001};
  std::vector<double> dropout{0.5};
  std::vector<double> weight_decay{5e-4};
  int max_epochs = 1000;
  int patience = 50;
  int hops = 2;
  StopMetric stop_metric = StopMetric::kValidAccuracy;

  friend bool operator==(const GridAxes&, const GridAxes&) = default;
};

class ConfigGrid {
 public:
  /// Throws std::invalid_argument when empty or when it holds duplicates.
  explicit ConfigGrid(std::vector<ModelConfig> configs);
  /// Cartesian product in axis order hidden, learning_rate, dropout,
  /// weight_decay. Axes an architecture ignores collapse to one value.
  static ConfigGrid from_axes(const GridAxes& axes);

  const std::vector<ModelConfig>& configs() const { return configs_; }
  std::size_t size() const { return configs_.size(); }

 private:
  std::vector<ModelConfig> configs_;
};

struct SelectionEntry {
  ModelConfig config;
  std::optional<double> valid_accuracy;  // empty when training failed
  std::string error;
};

struct SelectionResult {
  ModelConfig best;
  std::size_t best_index = 0;
  std::vector<SelectionEntry> table;
};

/// Trains every configuration on the train set with `seed` and scores it on
/// the validation set; argmax with ties to the earliest grid entry. Failed
/// configurations are kept in the table and skipped. Throws
/// std::runtime_error when every configuration fails.
SelectionResult select(const ConfigGrid& grid, const Graph& g, TrainingSets sets, std::uint64_t seed = 0);
inline SelectionResult select(const ConfigGrid& grid, const Graph& g, const Split& split, std::uint64_t seed = 0) {
  return select(grid, g, training_sets(split), seed);
}

/// Score table as CSV: index,config,valid_accuracy,error.
std::string selection_table_csv(const SelectionResult& result);

enum class TargetCategory { kHighDegree, kLowDegree, kHighMargin, kLowMargin, kRandom };
inline constexpr std::array<TargetCategory, 5> kTargetCategories{
    TargetCategory::kHighDegree, TargetCategory::kLowDegree, TargetCategory::kHighMargin, TargetCategory::kLowMargin,
    TargetCategory::kRandom};
std::string to_string(TargetCategory c);
TargetCategory parse_target_category(const std::string& name);

struct TargetSet {
  std::vector<NodeId> high_degree;
  std::vector<NodeId> low_degree;
  std::vector<NodeId> high_margin;
  std::vector<NodeId> low_margin;
  std::vector<NodeId> random;
  /// Set when lists overlap because the correctly classified pool was small.
  bool overlapping = false;

  const std::vector<NodeId>& list(TargetCategory c) const;
  /// (category, node) in category order, duplicates kept.
  std::vector<std::pair<TargetCategory, NodeId>> all() const;
  std::size_t unique_count() const;

  friend bool operator==(const TargetSet&, const TargetSet&) = default;
};

class TargetSelectionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Structurally diverse targets among correctly classified test nodes:
/// top/bottom `per_category` by degree and by margin, plus a seeded uniform
/// draw. Orderings tie-break by node id ascending. When the pool holds at
/// least 5 * per_category nodes the lists are disjoint, filled in category
/// order; otherwise each category draws from the full pool and `overlapping`
/// is set. Throws TargetSelectionError when the pool is smaller than
/// per_category.
TargetSet node_select(const Matrix& logits, const Graph& g, std::span<const NodeId> test, std::uint64_t seed,
                      std::size_t per_category = 10);
inline TargetSet node_select(const TrainedModel& model, const Graph& g, const Split& split, std::uint64_t seed,
                             std::size_t per_category = 10) {
  return node_select(model.logits, g, split.test, seed, per_category);
}

}  // namespace gnnrisk
