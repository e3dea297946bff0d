#pragma once

#include <span>
#include <stdexcept>

#include "gnnrisk/graph.hpp"
#include "gnnrisk/model.hpp"

namespace gnnrisk {

class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, int epoch) : std::runtime_error(what), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

/// The only parts of a split that training and model selection may see.
struct TrainingSets {
  std::span<const NodeId> train;
  std::span<const NodeId> valid;
};

inline TrainingSets training_sets(const Split& s) { return {s.train, s.valid}; }

/// Adam on mean softmax cross-entropy over the train nodes, L2 weight decay
/// added to the gradient, dropout on the input features and hidden layer
/// (GCN2 only). Early stopping on the validation metric with `patience`;
/// returns the best-validation snapshot with logits cached on `g`.
///
/// Deterministic for a fixed config.seed. Throws TrainingError on a
/// non-finite loss and std::invalid_argument on an empty train set.
TrainedModel train(const ModelConfig& config, const Graph& g, TrainingSets sets);
inline TrainedModel train(const ModelConfig& config, const Graph& g, const Split& split) {
  return train(config, g, training_sets(split));
}

/// Fraction of `nodes` whose cached prediction equals the label.
double accuracy(const TrainedModel& model, const Graph& g, std::span<const NodeId> nodes);

}  // namespace gnnrisk
