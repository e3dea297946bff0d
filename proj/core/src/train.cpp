#include "gnnrisk/train.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "gnnrisk/rng.hpp"

namespace gnnrisk {

namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

Matrix glorot_uniform(Eigen::Index fan_in, Eigen::Index fan_out, std::uint64_t seed) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Rng rng(seed);
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix w(fan_in, fan_out);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
  return w;
}

struct Adam {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  int step = 0;

  explicit Adam(const std::vector<Matrix>& weights) {
    for (const auto& w : weights) {
      m.push_back(Matrix::Zero(w.rows(), w.cols()));
      v.push_back(Matrix::Zero(w.rows(), w.cols()));
    }
  }

  void update(std::vector<Matrix>& weights, const std::vector<Matrix>& grads, double lr) {
    ++step;
    const double c1 = 1.0 - std::pow(kBeta1, step);
    const double c2 = 1.0 - std::pow(kBeta2, step);
    for (std::size_t i = 0; i < weights.size(); ++i) {
      m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * grads[i];
      v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * grads[i].cwiseProduct(grads[i]);
      weights[i].array() -= lr * (m[i].array() / c1) / ((v[i].array() / c2).sqrt() + kAdamEps);
    }
  }
};

/// Cross-entropy over `nodes` of `z`, writing (softmax - onehot)/|nodes| into
/// the matching rows of `grad` (other rows zero).
double ce_with_grad(const Matrix& z, std::span<const NodeId> nodes, const std::vector<int>& labels, Matrix& grad) {
  grad.setZero(z.rows(), z.cols());
  const double inv = 1.0 / static_cast<double>(nodes.size());
  double loss = 0.0;
  for (NodeId v : nodes) {
    const auto row = z.row(v);
    const double mx = row.maxCoeff();
    const Eigen::RowVectorXd e = (row.array() - mx).exp().matrix();
    const double s = e.sum();
    const int y = labels[static_cast<std::size_t>(v)];
    loss += std::log(s) + mx - row[y];
    grad.row(v) = e / s * inv;
    grad(v, y) -= inv;
  }
  return loss * inv;
}

double accuracy_of(const Matrix& logits, std::span<const NodeId> nodes, const std::vector<int>& labels) {
  if (nodes.empty()) return 0.0;
  std::size_t hits = 0;
  for (NodeId v : nodes) {
    if (argmax_class(logits.row(v).transpose()) == labels[static_cast<std::size_t>(v)]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(nodes.size());
}

SparseMatrix drop_sparse(const SparseMatrix& x, double p, Rng& rng) {
  SparseMatrix out = x;
  std::bernoulli_distribution keep(1.0 - p);
  const double scale = 1.0 / (1.0 - p);
  double* values = out.valuePtr();
  for (Eigen::Index i = 0; i < out.nonZeros(); ++i) values[i] = keep(rng) ? values[i] * scale : 0.0;
  return out;
}

Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, Rng& rng) {
  Matrix mask(rows, cols);
  std::bernoulli_distribution keep(1.0 - p);
  const double scale = 1.0 / (1.0 - p);
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(rng) ? scale : 0.0;
  return mask;
}

/// Architecture-specific forward/backward used by the shared training loop.
class Trainer {
 public:
  virtual ~Trainer() = default;
  /// One training-mode forward/backward; returns the train loss.
  virtual double step(std::vector<Matrix>& weights, std::vector<Matrix>& grads) = 0;
  virtual Matrix evaluate(const std::vector<Matrix>& weights) const = 0;
};

class Gcn2Trainer final : public Trainer {
 public:
  Gcn2Trainer(const ModelConfig& c, const Graph& g, const SparseMatrix& a, std::span<const NodeId> train)
      : config_(c), g_(g), a_(a), train_(train), rng_(derive_seed(c.seed, {0xd20})) {}

  double step(std::vector<Matrix>& w, std::vector<Matrix>& grads) override {
    const double p = config_.dropout;
    const SparseMatrix& x_full = g_.sparse_features();
    SparseMatrix x_dropped;
    if (p > 0.0) x_dropped = drop_sparse(x_full, p, rng_);
    const SparseMatrix& x = p > 0.0 ? x_dropped : x_full;

    const Matrix xw = x * w[0];
    const Matrix pre = a_ * xw;
    Matrix hidden = pre.cwiseMax(0.0);
    Matrix mask;
    if (p > 0.0) {
      mask = dropout_mask(hidden.rows(), hidden.cols(), p, rng_);
      hidden = hidden.cwiseProduct(mask);
    }
    const Matrix q = hidden * w[1];
    const Matrix z = a_ * q;
    Matrix g_z;
    const double loss = ce_with_grad(z, train_, g_.labels(), g_z);

    const Matrix g_q = a_ * g_z;
    grads[1] = hidden.transpose() * g_q;
    Matrix g_hidden = g_q * w[1].transpose();
    if (p > 0.0) g_hidden = g_hidden.cwiseProduct(mask);
    const Matrix g_pre = g_hidden.cwiseProduct((pre.array() > 0.0).cast<double>().matrix());
    const Matrix g_xw = a_ * g_pre;
    grads[0] = x.transpose() * g_xw;
    return loss;
  }

  Matrix evaluate(const std::vector<Matrix>& w) const override {
    return forward_gcn2(w, a_, g_.sparse_features());
  }

 private:
  const ModelConfig& config_;
  const Graph& g_;
  const SparseMatrix& a_;
  std::span<const NodeId> train_;
  Rng rng_;
};

class SgcTrainer final : public Trainer {
 public:
  SgcTrainer(const ModelConfig& c, const Graph& g, const SparseMatrix& a, std::span<const NodeId> train)
      : g_(g), train_(train) {
    SparseMatrix prop = g.sparse_features();
    for (int k = 0; k < c.hops; ++k) {
      SparseMatrix next = (a * prop).pruned();
      prop.swap(next);
    }
    propagated_ = Matrix(prop);
  }

  double step(std::vector<Matrix>& w, std::vector<Matrix>& grads) override {
    // Only the train rows carry gradient.
    Matrix z = Matrix::Zero(propagated_.rows(), w[0].cols());
    for (NodeId v : train_) z.row(v) = propagated_.row(v) * w[0];
    Matrix g_z;
    const double loss = ce_with_grad(z, train_, g_.labels(), g_z);
    grads[0] = Matrix::Zero(w[0].rows(), w[0].cols());
    for (NodeId v : train_) grads[0] += propagated_.row(v).transpose() * g_z.row(v);
    return loss;
  }

  Matrix evaluate(const std::vector<Matrix>& w) const override { return propagated_ * w[0]; }

 private:
  const Graph& g_;
  std::span<const NodeId> train_;
  Matrix propagated_;
};

}  // namespace

TrainedModel train(const ModelConfig& config, const Graph& g, TrainingSets sets) {
  config.validate();
  if (sets.train.empty()) throw std::invalid_argument("train: empty train set");
  for (auto ids : {sets.train, sets.valid}) {
    for (NodeId v : ids) {
      if (v < 0 || v >= g.num_nodes()) throw std::invalid_argument("train: node index out of range");
    }
  }

  TrainedModel model;
  model.config = config;
  model.norm_adj = std::make_shared<const SparseMatrix>(normalize_adjacency(g));
  const SparseMatrix& a = *model.norm_adj;
  const auto m = g.feature_dim();
  const auto c = static_cast<Eigen::Index>(g.num_classes());

  std::vector<Matrix> weights;
  std::unique_ptr<Trainer> trainer;
  if (config.arch == Arch::kGcn2) {
    weights.push_back(glorot_uniform(m, config.hidden, derive_seed(config.seed, {1})));
    weights.push_back(glorot_uniform(config.hidden, c, derive_seed(config.seed, {2})));
    trainer = std::make_unique<Gcn2Trainer>(config, g, a, sets.train);
  } else {
    weights.push_back(glorot_uniform(m, c, derive_seed(config.seed, {1})));
    trainer = std::make_unique<SgcTrainer>(config, g, a, sets.train);
  }
  std::vector<Matrix> grads(weights.size());
  Adam adam(weights);

  // With no validation nodes the train set stands in for early stopping.
  const std::span<const NodeId> monitor = sets.valid.empty() ? sets.train : sets.valid;
  double best_score = -std::numeric_limits<double>::infinity();
  std::vector<Matrix> best_weights = weights;
  int since_best = 0;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const double loss = trainer->step(weights, grads);
    if (!std::isfinite(loss)) {
      throw TrainingError("non-finite training loss at epoch " + std::to_string(epoch), epoch);
    }
    for (std::size_t i = 0; i < weights.size(); ++i) grads[i] += config.weight_decay * weights[i];
    adam.update(weights, grads, config.learning_rate);

    const Matrix logits = trainer->evaluate(weights);
    if (!logits.allFinite()) {
      throw TrainingError("non-finite logits at epoch " + std::to_string(epoch), epoch);
    }
    const double acc = accuracy_of(logits, monitor, g.labels());
    model.valid_accuracy_history.push_back(acc);
    const double score =
        config.stop_metric == StopMetric::kValidAccuracy ? acc : -cross_entropy(logits, monitor, g.labels());
    model.epochs_run = epoch;
    if (score > best_score) {
      best_score = score;
      best_weights = weights;
      model.best_epoch = epoch;
      model.best_valid_accuracy = acc;
      model.logits = logits;
      since_best = 0;
    } else if (++since_best > config.patience) {
      break;
    }
  }
  model.weights = std::move(best_weights);
  return model;
}

double accuracy(const TrainedModel& model, const Graph& g, std::span<const NodeId> nodes) {
  return accuracy_of(model.logits, nodes, g.labels());
}

}  // namespace gnnrisk
