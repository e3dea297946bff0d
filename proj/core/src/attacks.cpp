#include "gnnrisk/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "gnnrisk/rng.hpp"

namespace gnnrisk {

namespace {

std::string pair_text(NodeId u, NodeId v) { return "(" + std::to_string(u) + "," + std::to_string(v) + ")"; }

/// The clean graph plus toggled target-incident pairs.
class TargetView {
 public:
  TargetView(const Graph& g, NodeId t)
      : g_(g), t_(t), toggled_(static_cast<std::size_t>(g.num_nodes()), 0), linked_(toggled_) {
    if (t < 0 || t >= g.num_nodes()) throw AttackError("target " + std::to_string(t) + " out of range");
    for (NodeId u : g.neighbors(t)) linked_[static_cast<std::size_t>(u)] = 1;
    target_degree_ = g.degree(t);
  }

  NodeId target() const { return t_; }
  const Graph& graph() const { return g_; }
  bool linked(NodeId u) const { return linked_[static_cast<std::size_t>(u)] != 0; }
  bool toggled(NodeId u) const { return toggled_[static_cast<std::size_t>(u)] != 0; }

  std::size_t degree(NodeId u) const {
    if (u == t_) return target_degree_;
    std::size_t d = g_.degree(u);
    if (toggled(u)) d = linked(u) ? d + 1 : d - 1;
    return d;
  }

  /// Toggles the pair (target, u); returns the action it represents.
  FlipAction flip(NodeId u) {
    const auto i = static_cast<std::size_t>(u);
    const FlipAction action = linked_[i] ? FlipAction::kRemove : FlipAction::kAdd;
    linked_[i] ^= 1;
    toggled_[i] ^= 1;
    target_degree_ = action == FlipAction::kAdd ? target_degree_ + 1 : target_degree_ - 1;
    return action;
  }

  /// Open neighborhood of `a` in the perturbed graph.
  template <typename F>
  void for_each_neighbor(NodeId a, F&& f) const {
    if (a == t_) {
      for (NodeId u = 0; u < g_.num_nodes(); ++u) {
        if (linked(u)) f(u);
      }
      return;
    }
    for (NodeId j : g_.neighbors(a)) {
      if (j == t_ && toggled(a)) continue;  // removed
      f(j);
    }
    if (toggled(a) && linked(a)) f(t_);  // added
  }

 private:
  const Graph& g_;
  NodeId t_;
  std::vector<char> toggled_;
  std::vector<char> linked_;
  std::size_t target_degree_ = 0;
};

Flip make_flip(NodeId target, NodeId u, FlipAction action) { return Flip{target, u, action}; }

void check_context(const AttackContext& ctx) {
  if (ctx.graph == nullptr) throw AttackError("attack context has no graph");
  if (!(ctx.sample_ratio > 0.0 && ctx.sample_ratio <= 1.0)) {
    throw AttackError("sample ratio must lie in (0, 1]");
  }
}

const TrainedModel& require_surrogate(const AttackContext& ctx) {
  if (!ctx.surrogate) throw AttackError("attack needs a surrogate model");
  return *ctx.surrogate;
}

std::size_t sample_size(double ratio, std::size_t n) {
  auto k = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n)));
  if (k == 0 && n > 0) k = 1;
  return k;
}

}  // namespace

AttackPlan AttackPlan::prefix(std::size_t k) const {
  AttackPlan p;
  p.target = target;
  p.budget = k;
  const std::size_t n = std::min(k, flips.size());
  p.flips.assign(flips.begin(), flips.begin() + static_cast<std::ptrdiff_t>(n));
  p.early_stop = early_stop && flips.size() < k;
  return p;
}

void validate_plan(const Graph& g, const AttackPlan& plan) {
  if (plan.flips.size() > plan.budget) {
    throw AttackError("plan has " + std::to_string(plan.flips.size()) + " flips for budget " +
                      std::to_string(plan.budget));
  }
  if (plan.target < 0 || plan.target >= g.num_nodes()) throw AttackError("plan target out of range");
  std::set<std::tuple<NodeId, NodeId, int>> seen;
  for (const auto& f : plan.flips) {
    if (f.u != plan.target && f.v != plan.target) {
      throw AttackError("flip " + pair_text(f.u, f.v) + " does not touch target " + std::to_string(plan.target));
    }
    if (f.u == f.v) throw AttackError("flip " + pair_text(f.u, f.v) + " is a self-loop");
    if (f.u < 0 || f.v < 0 || f.u >= g.num_nodes() || f.v >= g.num_nodes()) {
      throw AttackError("flip " + pair_text(f.u, f.v) + " out of range");
    }
    const Edge e(f.u, f.v);
    if (!seen.insert({e.u, e.v, static_cast<int>(f.action)}).second) {
      throw AttackError("flip " + pair_text(f.u, f.v) + " repeated");
    }
  }
  // Replay against the target's neighborhood.
  std::set<NodeId> nbrs;
  for (NodeId u : g.neighbors(plan.target)) nbrs.insert(u);
  for (const auto& f : plan.flips) {
    const NodeId other = f.u == plan.target ? f.v : f.u;
    const bool has = nbrs.contains(other);
    if (f.action == FlipAction::kAdd) {
      if (has) throw AttackError("add " + pair_text(f.u, f.v) + " but the edge is present");
      nbrs.insert(other);
    } else {
      if (!has) throw AttackError("remove " + pair_text(f.u, f.v) + " but the edge is absent");
      nbrs.erase(other);
    }
  }
}

Graph apply_plan(const Graph& g, const AttackPlan& plan) {
  validate_plan(g, plan);
  if (plan.flips.empty()) return g;
  std::set<Edge> edges(g.edges().begin(), g.edges().end());
  for (const auto& f : plan.flips) {
    if (f.action == FlipAction::kAdd) {
      edges.insert(Edge(f.u, f.v));
    } else {
      edges.erase(Edge(f.u, f.v));
    }
  }
  return g.with_edges(std::vector<Edge>(edges.begin(), edges.end()));
}

std::string to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::kNoop: return "noop";
    case AttackKind::kRnd: return "rnd";
    case AttackKind::kL1dRnd: return "l1d-rnd";
    case AttackKind::kFga: return "fga";
    case AttackKind::kNettackLite: return "nettack-lite";
  }
  return "unknown";
}

std::vector<std::string> attack_names() { return {"noop", "rnd", "l1d-rnd", "fga", "nettack-lite"}; }

AttackKind parse_attack(const std::string& name) {
  for (auto k : {AttackKind::kNoop, AttackKind::kRnd, AttackKind::kL1dRnd, AttackKind::kFga,
                 AttackKind::kNettackLite}) {
    if (to_string(k) == name) return k;
  }
  std::string valid;
  for (const auto& n : attack_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw std::invalid_argument("unknown attack '" + name + "' (valid: " + valid + ")");
}

bool attack_needs_surrogate(AttackKind kind) { return kind == AttackKind::kFga || kind == AttackKind::kNettackLite; }

AttackPlan attack_rnd(const AttackContext& ctx, NodeId target, std::size_t budget) {
  check_context(ctx);
  const Graph& g = *ctx.graph;
  TargetView view(g, target);
  AttackPlan plan{target, {}, budget, false};
  if (budget == 0) return plan;
  std::vector<NodeId> pairs;
  for (NodeId u = 0; u < g.num_nodes(); ++u) {
    if (u != target) pairs.push_back(u);
  }
  if (pairs.empty()) throw AttackError("rnd: no legal move for target " + std::to_string(target));
  if (budget > pairs.size()) {
    throw AttackError("rnd: budget " + std::to_string(budget) + " exceeds the " + std::to_string(pairs.size()) +
                      " target-incident pairs");
  }
  Rng rng(ctx.seed);
  std::vector<NodeId> chosen;
  std::sample(pairs.begin(), pairs.end(), std::back_inserter(chosen), static_cast<std::ptrdiff_t>(budget), rng);
  std::shuffle(chosen.begin(), chosen.end(), rng);
  for (NodeId u : chosen) plan.flips.push_back(make_flip(target, u, view.flip(u)));
  return plan;
}

double influence_score(const Graph& g, NodeId u) {
  const auto& x = g.features();
  double s = x.row(u).cwiseAbs().sum();
  for (NodeId w : g.neighbors(u)) s += x.row(w).cwiseAbs().sum();
  return s;
}

AttackPlan attack_l1d_rnd(const AttackContext& ctx, NodeId target, std::size_t budget, L1dBranch branch) {
  check_context(ctx);
  const Graph& g = *ctx.graph;
  TargetView view(g, target);
  AttackPlan plan{target, {}, budget, false};
  if (budget == 0) return plan;

  Vector row_l1(g.num_nodes());
  for (NodeId v = 0; v < g.num_nodes(); ++v) row_l1[v] = g.features().row(v).cwiseAbs().sum();
  auto influence = [&](NodeId u) {
    double s = row_l1[u];
    view.for_each_neighbor(u, [&](NodeId w) { s += row_l1[w]; });
    return s;
  };

  Rng rng(ctx.seed);
  std::uniform_real_distribution<double> coin(0.0, 1.0);

  // Each pair is flipped at most once: new neighbors are never removed again
  // and removed neighbors are never re-added.
  auto add_candidates = [&] {
    std::vector<NodeId> out;
    for (NodeId u = 0; u < g.num_nodes(); ++u) {
      if (u != target && !view.linked(u) && !view.toggled(u)) out.push_back(u);
    }
    return out;
  };
  auto remove_candidates = [&] {
    std::vector<NodeId> out;
    view.for_each_neighbor(target, [&](NodeId u) {
      if (!view.toggled(u)) out.push_back(u);
    });
    return out;
  };
  auto pick = [&](const std::vector<NodeId>& pool, auto score) {
    std::vector<NodeId> sample;
    std::sample(pool.begin(), pool.end(), std::back_inserter(sample),
                static_cast<std::ptrdiff_t>(sample_size(ctx.sample_ratio, pool.size())), rng);
    // sample keeps ascending id order, so the first maximum has the lowest id.
    NodeId best = sample.front();
    double best_score = score(best);
    for (std::size_t i = 1; i < sample.size(); ++i) {
      const double s = score(sample[i]);
      if (s > best_score) {
        best = sample[i];
        best_score = s;
      }
    }
    return best;
  };

  while (plan.flips.size() < budget) {
    bool add = branch == L1dBranch::kAddOnly || (branch == L1dBranch::kCoin && coin(rng) > 0.5);
    const auto adds = add_candidates();
    const auto removes = remove_candidates();
    if (branch == L1dBranch::kCoin) {
      if (add && adds.empty()) {
        add = false;
      } else if (!add && removes.empty()) {
        add = true;
      }
    }
    const auto& pool = add ? adds : removes;
    if (pool.empty()) {
      throw AttackError("l1d-rnd: budget " + std::to_string(budget) + " exceeds the legal moves for target " +
                        std::to_string(target) + " after " + std::to_string(plan.flips.size()) + " flips");
    }
    if (add) {
      const NodeId u = pick(pool, [&](NodeId v) { return static_cast<double>(view.degree(v)); });
      plan.flips.push_back(make_flip(target, u, view.flip(u)));
    } else {
      const NodeId u = pick(pool, influence);
      plan.flips.push_back(make_flip(target, u, view.flip(u)));
    }
  }
  return plan;
}

AttackPlan attack_fga(const AttackContext& ctx, NodeId target, std::size_t budget) {
  check_context(ctx);
  const TrainedModel& surrogate = require_surrogate(ctx);
  const Graph& g = *ctx.graph;
  TargetView view(g, target);
  AttackPlan plan{target, {}, budget, false};
  const int label = g.label(target);
  std::vector<char> used(static_cast<std::size_t>(g.num_nodes()), 0);

  while (plan.flips.size() < budget) {
    const Graph current = apply_plan(g, plan);
    const Vector grad = target_adjacency_gradient(surrogate, current, target, label);
    NodeId best = -1;
    double best_score = 0.0;
    for (NodeId u = 0; u < g.num_nodes(); ++u) {
      if (u == target || used[static_cast<std::size_t>(u)]) continue;
      // Adding raises the loss where the gradient is positive, removing where negative.
      const double s = view.linked(u) ? -grad[u] : grad[u];
      if (s > best_score) {
        best_score = s;
        best = u;
      }
    }
    if (best < 0) {
      plan.early_stop = true;
      break;
    }
    used[static_cast<std::size_t>(best)] = 1;
    plan.flips.push_back(make_flip(target, best, view.flip(best)));
  }
  return plan;
}

namespace {

/// Target logits of Â'^hops · H by sparse propagation over the view.
Vector local_target_logits(const TargetView& view, const Matrix& h, int hops) {
  const NodeId n = view.graph().num_nodes();
  auto inv_sqrt = [&](NodeId v) { return 1.0 / std::sqrt(static_cast<double>(view.degree(v)) + 1.0); };
  std::vector<double> weight(static_cast<std::size_t>(n), 0.0);
  std::vector<char> in_next(static_cast<std::size_t>(n), 0);
  std::vector<NodeId> support{view.target()};
  weight[static_cast<std::size_t>(view.target())] = 1.0;
  for (int k = 0; k < hops; ++k) {
    std::vector<double> next(static_cast<std::size_t>(n), 0.0);
    std::vector<NodeId> next_support;
    auto push = [&](NodeId j, double w) {
      const auto i = static_cast<std::size_t>(j);
      if (!in_next[i]) {
        in_next[i] = 1;
        next_support.push_back(j);
      }
      next[i] += w;
    };
    for (NodeId a : support) {
      const double sa = inv_sqrt(a);
      const double w = weight[static_cast<std::size_t>(a)];
      push(a, w * sa * sa);
      view.for_each_neighbor(a, [&](NodeId j) { push(j, w * sa * inv_sqrt(j)); });
    }
    for (NodeId j : next_support) in_next[static_cast<std::size_t>(j)] = 0;
    weight.swap(next);
    support.swap(next_support);
  }
  Vector out = Vector::Zero(h.cols());
  for (NodeId j : support) out += weight[static_cast<std::size_t>(j)] * h.row(j).transpose();
  return out;
}

/// Exact two-hop target logits after toggling (target, u), for every u, from
/// cached neighborhood aggregates of the current view.
class TwoHopScorer {
 public:
  TwoHopScorer(const TargetView& view, const Matrix& h) : view_(view), h_(h) {
    const NodeId n = view.graph().num_nodes();
    const NodeId t = view.target();
    s_.resize(n);
    for (NodeId v = 0; v < n; ++v) s_[v] = 1.0 / std::sqrt(static_cast<double>(view.degree(v)) + 1.0);
    // closed[k] = Σ_{j ∈ N[k]} s_j H_j
    closed_ = Matrix(n, h.cols());
    for (NodeId k = 0; k < n; ++k) {
      Eigen::RowVectorXd acc = s_[k] * h.row(k);
      view.for_each_neighbor(k, [&](NodeId j) { acc += s_[j] * h.row(j); });
      closed_.row(k) = acc;
    }
    mark_.assign(static_cast<std::size_t>(n), 0.0);
    t1_ = Eigen::RowVectorXd::Zero(h.cols());
    s2_ = 0.0;
    view.for_each_neighbor(t, [&](NodeId k) {
      mark_[static_cast<std::size_t>(k)] = s_[k] * s_[k];
      t1_ += s_[k] * s_[k] * closed_.row(k);
      s2_ += s_[k] * s_[k];
    });
  }

  Vector current() const {
    const NodeId t = view_.target();
    return (s_[t] * (s_[t] * s_[t] * closed_.row(t) + t1_)).transpose();
  }

  Vector after_toggle(NodeId u) const {
    const NodeId t = view_.target();
    const bool add = !view_.linked(u);
    const double sigma = add ? 1.0 : -1.0;
    const double st = s_[t];
    const double su = s_[u];
    const double st2 = 1.0 / std::sqrt(static_cast<double>(view_.degree(t)) + 1.0 + sigma);
    const double su2 = 1.0 / std::sqrt(static_cast<double>(view_.degree(u)) + 1.0 + sigma);
    const auto ht = h_.row(t);
    const auto hu = h_.row(u);

    double common = 0.0;  // Σ s_k² over k adjacent to both t and u
    view_.for_each_neighbor(u, [&](NodeId j) { common += mark_[static_cast<std::size_t>(j)]; });

    Eigen::RowVectorXd rest_p = t1_;
    double rest_s = s2_;
    if (!add) {
      rest_p -= su * su * closed_.row(u);
      rest_s -= su * su;
    }
    Eigen::RowVectorXd sum_rest = rest_p + (st2 - st) * rest_s * ht + (su2 - su) * common * hu;

    Eigen::RowVectorXd p_t = closed_.row(t) + (st2 - st) * ht;
    p_t += add ? Eigen::RowVectorXd(su2 * hu) : Eigen::RowVectorXd(-su * hu);
    Eigen::RowVectorXd total = st2 * st2 * p_t + sum_rest;
    if (add) {
      const Eigen::RowVectorXd p_u = closed_.row(u) + (su2 - su) * hu + st2 * ht;
      total += su2 * su2 * p_u;
    }
    return (st2 * total).transpose();
  }

 private:
  const TargetView& view_;
  const Matrix& h_;
  Vector s_;
  Matrix closed_;
  std::vector<double> mark_;
  Eigen::RowVectorXd t1_;
  double s2_ = 0.0;
};

}  // namespace

AttackPlan attack_nettack_lite(const AttackContext& ctx, NodeId target, std::size_t budget) {
  check_context(ctx);
  const TrainedModel& surrogate = require_surrogate(ctx);
  if (surrogate.config.arch != Arch::kSgc) throw AttackError("nettack-lite needs an SGC surrogate");
  const Graph& g = *ctx.graph;
  TargetView view(g, target);
  AttackPlan plan{target, {}, budget, false};
  const int label = g.label(target);
  const int hops = surrogate.config.hops;
  const Matrix h = g.sparse_features() * surrogate.weights.at(0);
  std::vector<char> used(static_cast<std::size_t>(g.num_nodes()), 0);

  while (plan.flips.size() < budget) {
    std::optional<TwoHopScorer> scorer;
    if (hops == 2) scorer.emplace(view, h);
    auto logits_after = [&](NodeId u) {
      if (scorer) return scorer->after_toggle(u);
      view.flip(u);
      Vector z = local_target_logits(view, h, hops);
      view.flip(u);
      return z;
    };
    const double before = margin(scorer ? scorer->current() : local_target_logits(view, h, hops), label);

    NodeId best = -1;
    double best_margin = std::numeric_limits<double>::infinity();
    bool best_is_remove = false;
    for (NodeId u = 0; u < g.num_nodes(); ++u) {
      if (u == target || used[static_cast<std::size_t>(u)]) continue;
      const double m = margin(logits_after(u), label);
      const bool is_remove = view.linked(u);
      // Ascending u: a later candidate wins only if strictly better, or equal
      // and a removal displacing an addition.
      if (m < best_margin || (m == best_margin && is_remove && !best_is_remove)) {
        best = u;
        best_margin = m;
        best_is_remove = is_remove;
      }
    }
    if (best < 0) {
      if (plan.flips.empty()) throw AttackError("nettack-lite: no legal flip for target " + std::to_string(target));
      plan.early_stop = true;
      break;
    }
    if (best_margin > before) {
      plan.early_stop = true;
      break;
    }
    used[static_cast<std::size_t>(best)] = 1;
    plan.flips.push_back(make_flip(target, best, view.flip(best)));
  }
  return plan;
}

AttackPlan run_attack(AttackKind kind, const AttackContext& ctx, NodeId target, std::size_t budget) {
  switch (kind) {
    case AttackKind::kNoop: return AttackPlan{target, {}, budget, false};
    case AttackKind::kRnd: return attack_rnd(ctx, target, budget);
    case AttackKind::kL1dRnd: return attack_l1d_rnd(ctx, target, budget);
    case AttackKind::kFga: return attack_fga(ctx, target, budget);
    case AttackKind::kNettackLite: return attack_nettack_lite(ctx, target, budget);
  }
  throw AttackError("unknown attack kind");
}

double surrogate_margin(const TrainedModel& surrogate, const Graph& g, NodeId target) {
  const Matrix z = predict_logits(surrogate, g);
  return margin(z.row(target).transpose(), g.label(target));
}

nlohmann::json plan_to_json(const AttackPlan& plan) {
  nlohmann::json flips = nlohmann::json::array();
  for (const auto& f : plan.flips) {
    flips.push_back({{"u", f.u}, {"v", f.v}, {"action", f.action == FlipAction::kAdd ? "add" : "remove"}});
  }
  return {{"target", plan.target}, {"budget", plan.budget}, {"early_stop", plan.early_stop}, {"flips", flips}};
}

AttackPlan plan_from_json(const nlohmann::json& j) {
  AttackPlan p;
  p.target = j.at("target").get<NodeId>();
  p.budget = j.at("budget").get<std::size_t>();
  p.early_stop = j.value("early_stop", false);
  for (const auto& f : j.at("flips")) {
    const auto action = f.at("action").get<std::string>();
    if (action != "add" && action != "remove") throw AttackError("unknown flip action '" + action + "'");
    p.flips.push_back({f.at("u").get<NodeId>(), f.at("v").get<NodeId>(),
                       action == "add" ? FlipAction::kAdd : FlipAction::kRemove});
  }
  return p;
}

}  // namespace gnnrisk
