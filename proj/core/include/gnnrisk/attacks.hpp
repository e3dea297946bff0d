#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "gnnrisk/graph.hpp"
#include "gnnrisk/model.hpp"

namespace gnnrisk {

class AttackError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class FlipAction { kAdd, kRemove };

struct Flip {
  NodeId u = 0;
  NodeId v = 0;
  FlipAction action = FlipAction::kAdd;

  friend bool operator==(const Flip&, const Flip&) = default;
};

/// Ordered edge flips against one target. Every applied flip consumes one
/// unit of budget, including a flip that undoes an earlier one.
struct AttackPlan {
  NodeId target = 0;
  std::vector<Flip> flips;
  std::size_t budget = 0;
  /// The attack ran out of useful moves before spending the budget.
  bool early_stop = false;

  /// The first `k` flips as a plan with budget k.
  AttackPlan prefix(std::size_t k) const;

  friend bool operator==(const AttackPlan&, const AttackPlan&) = default;
};

/// Throws AttackError when the plan exceeds its budget, touches a pair not
/// incident to the target, repeats a flip, or adds a present / removes an
/// absent edge at application time.
void validate_plan(const Graph& g, const AttackPlan& plan);

/// Perturbed copy of `g`; features and labels are shared. Validates first.
Graph apply_plan(const Graph& g, const AttackPlan& plan);

/// Gray-box attacker state. The surrogate must be trained on the same
/// train/validation data the victim uses.
struct AttackContext {
  const Graph* graph = nullptr;
  std::shared_ptr<const TrainedModel> surrogate;
  std::uint64_t seed = 0;
  double sample_ratio = 0.1;
};

enum class AttackKind { kNoop, kRnd, kL1dRnd, kFga, kNettackLite };

std::string to_string(AttackKind kind);
/// Accepts noop, rnd, l1d-rnd, fga, nettack-lite. Throws
/// std::invalid_argument listing the valid names otherwise.
AttackKind parse_attack(const std::string& name);
std::vector<std::string> attack_names();
bool attack_needs_surrogate(AttackKind kind);

/// Uniformly chosen distinct target-incident pairs, each flipped.
AttackPlan attack_rnd(const AttackContext& ctx, NodeId target, std::size_t budget);

/// Sum of |x_wj| over w in the closed neighborhood of u.
double influence_score(const Graph& g, NodeId u);

enum class L1dBranch { kCoin, kAddOnly, kRemoveOnly };

/// Coin-flip add/remove. Adds connect the target to the highest-degree node of
/// a floor(r·n) sample of its non-neighbors; removes cut the edge to the
/// highest-influence node of a sample of its original neighbors. An
/// impossible coin branch falls through to the other one. Forced branches
/// never fall through.
AttackPlan attack_l1d_rnd(const AttackContext& ctx, NodeId target, std::size_t budget,
                          L1dBranch branch = L1dBranch::kCoin);

/// Greedy first-order attack on the surrogate's cross-entropy at the target:
/// each step flips the target-incident pair whose adjacency gradient promises
/// the largest loss increase. Stops early when no pair has a usable gradient.
AttackPlan attack_fga(const AttackContext& ctx, NodeId target, std::size_t budget);

/// Greedy exact search with an SGC surrogate: each step evaluates the
/// surrogate margin of the target after every legal target-incident flip and
/// applies the minimizer (ties: removals first, then lower node id). Stops
/// early when every flip would raise the margin.
AttackPlan attack_nettack_lite(const AttackContext& ctx, NodeId target, std::size_t budget);

AttackPlan run_attack(AttackKind kind, const AttackContext& ctx, NodeId target, std::size_t budget);

/// Surrogate margin of `target` on `g` for its true label.
double surrogate_margin(const TrainedModel& surrogate, const Graph& g, NodeId target);

nlohmann::json plan_to_json(const AttackPlan& plan);
AttackPlan plan_from_json(const nlohmann::json& j);

}  // namespace gnnrisk
