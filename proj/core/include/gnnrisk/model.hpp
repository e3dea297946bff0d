#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "gnnrisk/graph.hpp"

namespace gnnrisk {

enum class Arch {
  kGcn2,  // Â·ReLU(Â X W1)·W2
  kSgc,   // Â^hops X W
};

enum class StopMetric { kValidAccuracy, kValidLoss };

std::string to_string(Arch arch);
Arch parse_arch(const std::string& name);
std::string to_string(StopMetric metric);
StopMetric parse_stop_metric(const std::string& name);

/// One hyper-parameter configuration.
struct ModelConfig {
  Arch arch = Arch::kGcn2;
  int hidden = 64;  // GCN2 only
  double learning_rate = 0.01;
  double dropout = 0.5;  // GCN2 only
  double weight_decay = 5e-4;
  int max_epochs = 1000;
  int patience = 50;
  std::uint64_t seed = 0;
  int hops = 2;  // SGC only
  StopMetric stop_metric = StopMetric::kValidAccuracy;

  /// Throws std::invalid_argument on out-of-range values.
  void validate() const;
  /// Names of fields the architecture ignores (SGC: hidden, dropout).
  std::vector<std::string> unused_fields() const;
  std::string describe() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

/// Frozen weights plus logits cached on the graph the model was trained on.
struct TrainedModel {
  ModelConfig config;
  std::vector<Matrix> weights;  // GCN2: {M×h, h×C}; SGC: {M×C}
  std::shared_ptr<const SparseMatrix> norm_adj;
  Matrix logits;
  int epochs_run = 0;
  int best_epoch = 0;
  double best_valid_accuracy = 0.0;
  std::vector<double> valid_accuracy_history;

  /// argmax of the cached logits row; ties go to the lowest class id.
  int predict(NodeId v) const;
  int num_classes() const { return static_cast<int>(logits.cols()); }
};

/// Lowest-index argmax.
int argmax_class(const Eigen::Ref<const Vector>& row);

/// True-class score minus the best other-class score. Throws
/// std::invalid_argument for fewer than 2 classes or y out of range.
double margin(const Eigen::Ref<const Vector>& row, int y);

Matrix forward_gcn2(std::span<const Matrix> weights, const SparseMatrix& norm_adj, const SparseMatrix& features);
Matrix forward_gcn2(std::span<const Matrix> weights, const Matrix& norm_adj, const Matrix& features);
Matrix forward_sgc(const Matrix& weight, const SparseMatrix& norm_adj, const SparseMatrix& features, int hops = 2);
Matrix forward_sgc(const Matrix& weight, const Matrix& norm_adj, const Matrix& features, int hops = 2);

/// Logits of `model` evaluated on the structure of `g` (weights unchanged).
Matrix predict_logits(const TrainedModel& model, const Graph& g);

/// Exact cross-entropy gradients on a dense path.
struct LossGradients {
  double loss = 0.0;
  std::vector<Matrix> weight_grads;
  /// d loss / d A for the raw symmetric adjacency: entry (u,v) is the
  /// derivative for moving A_uv and A_vu together. The diagonal is zero.
  Matrix adjacency_grad;
};

/// Mean softmax cross-entropy over `nodes` (labels from `g`), no weight decay.
/// Throws std::invalid_argument for an empty node set.
LossGradients loss_and_grads(const ModelConfig& config, std::span<const Matrix> weights, const Graph& g,
                             std::span<const NodeId> nodes);
LossGradients loss_and_grads(const TrainedModel& model, const Graph& g, std::span<const NodeId> nodes);

/// Row `target` of the adjacency gradient of the cross-entropy at `target`
/// for class `label`, computed without materializing N×N matrices. Entry u
/// equals loss_and_grads(...).adjacency_grad(target, u) for node set {target}.
Vector target_adjacency_gradient(const TrainedModel& model, const Graph& g, NodeId target, int label);

/// Mean cross-entropy of logits rows against labels.
double cross_entropy(const Matrix& logits, std::span<const NodeId> nodes, const std::vector<int>& labels);

/// JSON snapshot: config plus weight matrices. Logits are not stored.
nlohmann::json model_to_json(const TrainedModel& model);
/// Restores weights and recomputes cached logits on `g`.
TrainedModel model_from_json(const nlohmann::json& j, const Graph& g);

}  // namespace gnnrisk
