#include "gnnrisk/selection.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "gnnrisk/rng.hpp"

namespace gnnrisk {

ConfigGrid::ConfigGrid(std::vector<ModelConfig> configs) : configs_(std::move(configs)) {
  if (configs_.empty()) throw std::invalid_argument("configuration grid is empty");
  for (std::size_t i = 0; i < configs_.size(); ++i) {
    configs_[i].validate();
    for (std::size_t j = 0; j < i; ++j) {
      if (configs_[i] == configs_[j]) {
        throw std::invalid_argument("duplicate configuration in grid: " + configs_[i].describe());
      }
    }
  }
}

ConfigGrid ConfigGrid::from_axes(const GridAxes& axes) {
  const bool sgc = axes.arch == Arch::kSgc;
  const std::vector<int> hidden = sgc ? std::vector<int>{axes.hidden.empty() ? 0 : axes.hidden.front()} : axes.hidden;
  const std::vector<double> dropout =
      sgc ? std::vector<double>{axes.dropout.empty() ? 0.0 : axes.dropout.front()} : axes.dropout;
  std::vector<ModelConfig> out;
  for (int h : hidden) {
    for (double lr : axes.learning_rate) {
      for (double p : dropout) {
        for (double wd : axes.weight_decay) {
          ModelConfig c;
          c.arch = axes.arch;
          c.hidden = sgc ? ModelConfig{}.hidden : h;
          c.learning_rate = lr;
          c.dropout = sgc ? 0.0 : p;
          c.weight_decay = wd;
          c.max_epochs = axes.max_epochs;
          c.patience = axes.patience;
          c.hops = axes.hops;
          c.stop_metric = axes.stop_metric;
          out.push_back(c);
        }
      }
    }
  }
  return ConfigGrid(std::move(out));
}

SelectionResult select(const ConfigGrid& grid, const Graph& g, TrainingSets sets, std::uint64_t seed) {
  SelectionResult result;
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    SelectionEntry entry;
    entry.config = grid.configs()[i];
    entry.config.seed = seed;
    try {
      const TrainedModel m = train(entry.config, g, sets);
      entry.valid_accuracy = accuracy(m, g, sets.valid);
    } catch (const TrainingError& e) {
      entry.error = e.what();
    }
    if (entry.valid_accuracy &&
        (!best || *entry.valid_accuracy > *result.table[*best].valid_accuracy)) {
      best = i;
    }
    result.table.push_back(std::move(entry));
  }
  if (!best) throw std::runtime_error("model selection failed: every configuration failed to train");
  result.best_index = *best;
  result.best = result.table[*best].config;
  return result;
}

std::string selection_table_csv(const SelectionResult& result) {
  std::ostringstream out;
  out << "index,config,valid_accuracy,selected,error\n";
  for (std::size_t i = 0; i < result.table.size(); ++i) {
    const auto& e = result.table[i];
    out << i << ",\"" << e.config.describe() << "\",";
    if (e.valid_accuracy) out << *e.valid_accuracy;
    out << ',' << (i == result.best_index ? 1 : 0) << ",\"" << e.error << "\"\n";
  }
  return out.str();
}

std::string to_string(TargetCategory c) {
  switch (c) {
    case TargetCategory::kHighDegree: return "high_degree";
    case TargetCategory::kLowDegree: return "low_degree";
    case TargetCategory::kHighMargin: return "high_margin";
    case TargetCategory::kLowMargin: return "low_margin";
    case TargetCategory::kRandom: return "random";
  }
  return "unknown";
}

TargetCategory parse_target_category(const std::string& name) {
  for (auto c : kTargetCategories) {
    if (to_string(c) == name) return c;
  }
  throw std::invalid_argument("unknown target category '" + name + "'");
}

const std::vector<NodeId>& TargetSet::list(TargetCategory c) const {
  switch (c) {
    case TargetCategory::kHighDegree: return high_degree;
    case TargetCategory::kLowDegree: return low_degree;
    case TargetCategory::kHighMargin: return high_margin;
    case TargetCategory::kLowMargin: return low_margin;
    case TargetCategory::kRandom: return random;
  }
  return random;
}

std::vector<std::pair<TargetCategory, NodeId>> TargetSet::all() const {
  std::vector<std::pair<TargetCategory, NodeId>> out;
  for (auto c : kTargetCategories) {
    for (NodeId v : list(c)) out.emplace_back(c, v);
  }
  return out;
}

std::size_t TargetSet::unique_count() const {
  std::set<NodeId> s;
  for (const auto& [c, v] : all()) s.insert(v);
  return s.size();
}

TargetSet node_select(const Matrix& logits, const Graph& g, std::span<const NodeId> test, std::uint64_t seed,
                      std::size_t per_category) {
  struct Candidate {
    NodeId id;
    std::size_t degree;
    double margin;
  };
  std::vector<Candidate> pool;
  for (NodeId v : test) {
    const auto row = logits.row(v).transpose();
    const int y = g.label(v);
    if (argmax_class(row) == y) pool.push_back({v, g.degree(v), margin(row, y)});
  }
  std::sort(pool.begin(), pool.end(), [](const Candidate& a, const Candidate& b) { return a.id < b.id; });
  if (pool.size() < per_category) {
    throw TargetSelectionError("only " + std::to_string(pool.size()) + " correctly classified test nodes; need " +
                               std::to_string(per_category) + " (short by " +
                               std::to_string(per_category - pool.size()) + ")");
  }

  const bool disjoint = pool.size() >= kTargetCategories.size() * per_category;
  std::set<NodeId> taken;
  auto available = [&](const Candidate& c) { return !disjoint || !taken.contains(c.id); };
  auto take_sorted = [&](auto less) {
    std::vector<Candidate> rest;
    for (const auto& c : pool) {
      if (available(c)) rest.push_back(c);
    }
    std::stable_sort(rest.begin(), rest.end(), less);
    std::vector<NodeId> out;
    for (std::size_t i = 0; i < per_category; ++i) out.push_back(rest[i].id);
    for (NodeId v : out) taken.insert(v);
    return out;
  };
  // pool is id-sorted, so stable sorts break ties by ascending id.
  TargetSet t;
  t.high_degree = take_sorted([](const Candidate& a, const Candidate& b) { return a.degree > b.degree; });
  t.low_degree = take_sorted([](const Candidate& a, const Candidate& b) { return a.degree < b.degree; });
  t.high_margin = take_sorted([](const Candidate& a, const Candidate& b) { return a.margin > b.margin; });
  t.low_margin = take_sorted([](const Candidate& a, const Candidate& b) { return a.margin < b.margin; });

  std::vector<NodeId> remaining;
  for (const auto& c : pool) {
    if (!taken.contains(c.id)) remaining.push_back(c.id);
  }
  if (remaining.size() < per_category) {
    remaining.clear();
    for (const auto& c : pool) remaining.push_back(c.id);
  }
  Rng rng(seed);
  std::shuffle(remaining.begin(), remaining.end(), rng);
  t.random.assign(remaining.begin(), remaining.begin() + static_cast<std::ptrdiff_t>(per_category));
  std::sort(t.random.begin(), t.random.end());

  t.overlapping = t.unique_count() < t.all().size();
  return t;
}

}  // namespace gnnrisk
