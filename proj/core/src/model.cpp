#include "gnnrisk/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

namespace gnnrisk {

std::string to_string(Arch arch) { return arch == Arch::kGcn2 ? "gcn2" : "sgc"; }

Arch parse_arch(const std::string& name) {
  if (name == "gcn2" || name == "gcn" || name == "GCN2" || name == "GCN") return Arch::kGcn2;
  if (name == "sgc" || name == "SGC") return Arch::kSgc;
  throw std::invalid_argument("unknown architecture '" + name + "' (expected gcn2 or sgc)");
}

std::string to_string(StopMetric metric) {
  return metric == StopMetric::kValidAccuracy ? "valid_accuracy" : "valid_loss";
}

StopMetric parse_stop_metric(const std::string& name) {
  if (name == "valid_accuracy" || name == "accuracy") return StopMetric::kValidAccuracy;
  if (name == "valid_loss" || name == "loss") return StopMetric::kValidLoss;
  throw std::invalid_argument("unknown stop metric '" + name + "' (expected valid_accuracy or valid_loss)");
}

void ModelConfig::validate() const {
  if (arch == Arch::kGcn2 && hidden < 1) throw std::invalid_argument("hidden must be >= 1 for gcn2");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw std::invalid_argument("learning_rate must be > 0");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("dropout must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("weight_decay must be >= 0");
  if (max_epochs < 1) throw std::invalid_argument("max_epochs must be >= 1");
  if (patience < 0) throw std::invalid_argument("patience must be >= 0");
  if (hops < 0) throw std::invalid_argument("hops must be >= 0");
}

std::vector<std::string> ModelConfig::unused_fields() const {
  if (arch == Arch::kSgc) return {"hidden", "dropout"};
  return {"hops"};
}

std::string ModelConfig::describe() const {
  std::ostringstream s;
  s << to_string(arch);
  if (arch == Arch::kGcn2) s << " hidden=" << hidden << " dropout=" << dropout;
  if (arch == Arch::kSgc) s << " hops=" << hops;
  s << " lr=" << learning_rate << " wd=" << weight_decay << " epochs=" << max_epochs
    << " patience=" << patience << " stop=" << to_string(stop_metric);
  return s.str();
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"arch", to_string(c.arch)},
                     {"hidden", c.hidden},
                     {"learning_rate", c.learning_rate},
                     {"dropout", c.dropout},
                     {"weight_decay", c.weight_decay},
                     {"max_epochs", c.max_epochs},
                     {"patience", c.patience},
                     {"seed", c.seed},
                     {"hops", c.hops},
                     {"stop_metric", to_string(c.stop_metric)}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  ModelConfig d;
  d.arch = parse_arch(j.value("arch", to_string(d.arch)));
  d.hidden = j.value("hidden", d.hidden);
  d.learning_rate = j.value("learning_rate", d.learning_rate);
  d.dropout = j.value("dropout", d.dropout);
  d.weight_decay = j.value("weight_decay", d.weight_decay);
  d.max_epochs = j.value("max_epochs", d.max_epochs);
  d.patience = j.value("patience", d.patience);
  d.seed = j.value("seed", d.seed);
  d.hops = j.value("hops", d.hops);
  d.stop_metric = parse_stop_metric(j.value("stop_metric", to_string(d.stop_metric)));
  c = d;
}

int TrainedModel::predict(NodeId v) const { return argmax_class(logits.row(v).transpose()); }

int argmax_class(const Eigen::Ref<const Vector>& row) {
  Eigen::Index best = 0;
  for (Eigen::Index c = 1; c < row.size(); ++c) {
    if (row[c] > row[best]) best = c;
  }
  return static_cast<int>(best);
}

double margin(const Eigen::Ref<const Vector>& row, int y) {
  if (row.size() < 2) throw std::invalid_argument("margin needs at least 2 classes");
  if (y < 0 || y >= row.size()) throw std::invalid_argument("margin: class id out of range");
  double other = -std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < row.size(); ++c) {
    if (c != y) other = std::max(other, row[c]);
  }
  return row[y] - other;
}

namespace {

template <typename Adj, typename Feat>
Matrix gcn2_impl(std::span<const Matrix> weights, const Adj& a, const Feat& x) {
  if (weights.size() != 2) throw std::invalid_argument("gcn2 expects 2 weight matrices");
  const Matrix& w1 = weights[0];
  const Matrix& w2 = weights[1];
  if (x.cols() != w1.rows() || w1.cols() != w2.rows() || a.rows() != a.cols() || a.cols() != x.rows()) {
    throw std::invalid_argument("gcn2 forward: shape mismatch");
  }
  Matrix xw = x * w1;
  Matrix hidden = (a * xw).cwiseMax(0.0);
  Matrix hw = hidden * w2;
  return a * hw;
}

template <typename Adj, typename Feat>
Matrix sgc_impl(const Matrix& w, const Adj& a, const Feat& x, int hops) {
  if (x.cols() != w.rows() || a.rows() != a.cols() || a.cols() != x.rows()) {
    throw std::invalid_argument("sgc forward: shape mismatch");
  }
  if (hops < 0) throw std::invalid_argument("sgc forward: negative hops");
  Matrix h = x * w;
  for (int k = 0; k < hops; ++k) {
    Matrix next = a * h;
    h.swap(next);
  }
  return h;
}

/// Cross-entropy gradient w.r.t. logits: (softmax - onehot) / |nodes| on the
/// listed rows, zero elsewhere.
Matrix logits_gradient(const Matrix& z, std::span<const NodeId> nodes, const std::vector<int>& labels, double& loss) {
  Matrix g = Matrix::Zero(z.rows(), z.cols());
  const double inv = 1.0 / static_cast<double>(nodes.size());
  loss = 0.0;
  for (NodeId v : nodes) {
    const auto row = z.row(v);
    const double mx = row.maxCoeff();
    const Eigen::RowVectorXd e = (row.array() - mx).exp().matrix();
    const double s = e.sum();
    const int y = labels[static_cast<std::size_t>(v)];
    loss += -(row[y] - mx - std::log(s));
    g.row(v) += e / s * inv;
    g(v, y) -= inv;
  }
  loss *= inv;
  return g;
}

/// Chain rule from d/dÂ to the symmetric raw adjacency.
Matrix normalized_to_raw(const Matrix& grad_a_hat, const Matrix& a_hat, const Vector& deg_plus_one) {
  const Eigen::Index n = a_hat.rows();
  Vector g_deg(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double s = grad_a_hat.row(i).dot(a_hat.row(i)) + grad_a_hat.col(i).dot(a_hat.col(i));
    g_deg[i] = -s / (2.0 * deg_plus_one[i]);
  }
  Matrix g_s(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      g_s(i, j) = grad_a_hat(i, j) / std::sqrt(deg_plus_one[i] * deg_plus_one[j]) + g_deg[i];
    }
  }
  Matrix sym = g_s + g_s.transpose();
  sym.diagonal().setZero();
  return sym;
}

}  // namespace

Matrix forward_gcn2(std::span<const Matrix> weights, const SparseMatrix& norm_adj, const SparseMatrix& features) {
  return gcn2_impl(weights, norm_adj, features);
}

Matrix forward_gcn2(std::span<const Matrix> weights, const Matrix& norm_adj, const Matrix& features) {
  return gcn2_impl(weights, norm_adj, features);
}

Matrix forward_sgc(const Matrix& weight, const SparseMatrix& norm_adj, const SparseMatrix& features, int hops) {
  return sgc_impl(weight, norm_adj, features, hops);
}

Matrix forward_sgc(const Matrix& weight, const Matrix& norm_adj, const Matrix& features, int hops) {
  return sgc_impl(weight, norm_adj, features, hops);
}

Matrix predict_logits(const TrainedModel& model, const Graph& g) {
  const SparseMatrix a = normalize_adjacency(g);
  if (model.config.arch == Arch::kGcn2) return forward_gcn2(model.weights, a, g.sparse_features());
  return forward_sgc(model.weights.at(0), a, g.sparse_features(), model.config.hops);
}

double cross_entropy(const Matrix& logits, std::span<const NodeId> nodes, const std::vector<int>& labels) {
  if (nodes.empty()) throw std::invalid_argument("cross_entropy over an empty node set");
  double loss = 0.0;
  for (NodeId v : nodes) {
    const auto row = logits.row(v);
    const double mx = row.maxCoeff();
    const double lse = mx + std::log((row.array() - mx).exp().sum());
    loss += lse - row[labels[static_cast<std::size_t>(v)]];
  }
  return loss / static_cast<double>(nodes.size());
}

LossGradients loss_and_grads(const ModelConfig& config, std::span<const Matrix> weights, const Graph& g,
                             std::span<const NodeId> nodes) {
  if (nodes.empty()) throw std::invalid_argument("loss_and_grads needs a non-empty node set");
  const Matrix a_hat = normalize_adjacency_dense(g);
  const Matrix& x = g.features();
  Vector deg_plus_one(g.num_nodes());
  for (NodeId v = 0; v < g.num_nodes(); ++v) deg_plus_one[v] = static_cast<double>(g.degree(v)) + 1.0;

  LossGradients out;
  Matrix grad_a_hat;
  if (config.arch == Arch::kGcn2) {
    if (weights.size() != 2) throw std::invalid_argument("gcn2 expects 2 weight matrices");
    const Matrix& w1 = weights[0];
    const Matrix& w2 = weights[1];
    const Matrix xw = x * w1;
    const Matrix pre = a_hat * xw;
    const Matrix hidden = pre.cwiseMax(0.0);
    const Matrix q = hidden * w2;
    const Matrix z = a_hat * q;
    const Matrix g_z = logits_gradient(z, nodes, g.labels(), out.loss);
    const Matrix g_q = a_hat.transpose() * g_z;
    const Matrix g_w2 = hidden.transpose() * g_q;
    Matrix g_pre = g_q * w2.transpose();
    g_pre = g_pre.cwiseProduct((pre.array() > 0.0).cast<double>().matrix());
    const Matrix g_w1 = (a_hat * x).transpose() * g_pre;
    grad_a_hat = g_z * q.transpose() + g_pre * xw.transpose();
    out.weight_grads = {g_w1, g_w2};
  } else {
    if (weights.size() != 1) throw std::invalid_argument("sgc expects 1 weight matrix");
    const int k = config.hops;
    // powers[j] = Â^j X W
    std::vector<Matrix> powers{x * weights[0]};
    for (int j = 0; j < k; ++j) powers.push_back(a_hat * powers.back());
    const Matrix& z = powers.back();
    const Matrix g_z = logits_gradient(z, nodes, g.labels(), out.loss);
    Matrix propagated_x = x;
    for (int j = 0; j < k; ++j) propagated_x = a_hat * propagated_x;
    out.weight_grads = {propagated_x.transpose() * g_z};
    grad_a_hat = Matrix::Zero(a_hat.rows(), a_hat.cols());
    Matrix left = g_z;  // (Â^T)^j G_Z
    for (int j = 0; j < k; ++j) {
      grad_a_hat += left * powers[static_cast<std::size_t>(k - 1 - j)].transpose();
      left = a_hat.transpose() * left;
    }
  }
  out.adjacency_grad = normalized_to_raw(grad_a_hat, a_hat, deg_plus_one);
  return out;
}

LossGradients loss_and_grads(const TrainedModel& model, const Graph& g, std::span<const NodeId> nodes) {
  return loss_and_grads(model.config, model.weights, g, nodes);
}

Vector target_adjacency_gradient(const TrainedModel& model, const Graph& g, NodeId target, int label) {
  const NodeId n = g.num_nodes();
  if (target < 0 || target >= n) throw std::invalid_argument("target out of range");
  const SparseMatrix a_hat = normalize_adjacency(g);
  Vector deg(n);
  for (NodeId v = 0; v < n; ++v) deg[v] = static_cast<double>(g.degree(v)) + 1.0;

  // d loss / dÂ = Σ_m left_m right_m^T
  std::vector<Vector> left;
  std::vector<Vector> right;
  auto unit = [n](NodeId v) {
    Vector e = Vector::Zero(n);
    e[v] = 1.0;
    return e;
  };

  if (model.config.arch == Arch::kGcn2) {
    const Matrix& w1 = model.weights.at(0);
    const Matrix& w2 = model.weights.at(1);
    const Matrix xw = g.sparse_features() * w1;
    const Matrix pre = a_hat * xw;
    const Matrix hidden = pre.cwiseMax(0.0);
    const Matrix q = hidden * w2;
    const Vector z = (a_hat.row(target) * q).transpose();
    Vector p = (z.array() - z.maxCoeff()).exp().matrix();
    p /= p.sum();
    p[label] -= 1.0;
    left.push_back(unit(target));
    right.push_back(q * p);
    const Vector w2p = w2 * p;
    // Hidden rows reached by the target's aggregation: its closed neighborhood.
    for (SparseMatrix::InnerIterator it(a_hat, target); it; ++it) {
      const auto k = static_cast<NodeId>(it.col());
      const Vector masked = w2p.cwiseProduct((pre.row(k).transpose().array() > 0.0).cast<double>().matrix());
      Vector l = Vector::Zero(n);
      l[k] = it.value();
      left.push_back(std::move(l));
      right.push_back(xw * masked);
    }
  } else {
    const int hops = model.config.hops;
    std::vector<Matrix> powers{g.sparse_features() * model.weights.at(0)};
    for (int j = 0; j < hops; ++j) powers.push_back(a_hat * powers.back());
    if (hops == 0) return Vector::Zero(n);
    const Vector z = powers.back().row(target).transpose();
    Vector p = (z.array() - z.maxCoeff()).exp().matrix();
    p /= p.sum();
    p[label] -= 1.0;
    Vector c = unit(target);
    for (int j = 0; j < hops; ++j) {
      left.push_back(c);
      right.push_back(powers[static_cast<std::size_t>(hops - 1 - j)] * p);
      c = a_hat * c;  // Â symmetric
    }
  }

  // g_deg[i] = -(Σ_l G_il Â_il + Σ_k G_ki Â_ki) / (2 d_i)
  Vector g_deg = Vector::Zero(n);
  Vector g_row = Vector::Zero(n);  // G_{target,u}
  Vector g_col = Vector::Zero(n);  // G_{u,target}
  for (std::size_t m = 0; m < left.size(); ++m) {
    const Vector a_right = a_hat * right[m];
    const Vector a_left = a_hat * left[m];
    g_deg += left[m].cwiseProduct(a_right) + right[m].cwiseProduct(a_left);
    g_row += left[m][target] * right[m];
    g_col += right[m][target] * left[m];
  }
  g_deg = (-g_deg.array() / (2.0 * deg.array())).matrix();

  Vector out(n);
  const double dt = deg[target];
  for (NodeId u = 0; u < n; ++u) {
    const double scale = 1.0 / std::sqrt(dt * deg[u]);
    out[u] = (g_row[u] + g_col[u]) * scale + g_deg[target] + g_deg[u];
  }
  out[target] = 0.0;
  return out;
}

nlohmann::json model_to_json(const TrainedModel& model) {
  nlohmann::json weights = nlohmann::json::array();
  for (const auto& w : model.weights) {
    std::vector<double> data(w.data(), w.data() + w.size());
    weights.push_back({{"rows", w.rows()}, {"cols", w.cols()}, {"data", data}});
  }
  return {{"format", "gnnrisk-model"},
          {"version", 1},
          {"config", model.config},
          {"epochs_run", model.epochs_run},
          {"best_epoch", model.best_epoch},
          {"best_valid_accuracy", model.best_valid_accuracy},
          {"weights", weights}};
}

TrainedModel model_from_json(const nlohmann::json& j, const Graph& g) {
  if (j.value("format", "") != "gnnrisk-model" || j.value("version", 0) != 1) {
    throw std::invalid_argument("not a version 1 gnnrisk model snapshot");
  }
  TrainedModel m;
  m.config = j.at("config").get<ModelConfig>();
  m.epochs_run = j.value("epochs_run", 0);
  m.best_epoch = j.value("best_epoch", 0);
  m.best_valid_accuracy = j.value("best_valid_accuracy", 0.0);
  for (const auto& w : j.at("weights")) {
    const auto rows = w.at("rows").get<Eigen::Index>();
    const auto cols = w.at("cols").get<Eigen::Index>();
    const auto data = w.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
      throw std::invalid_argument("weight matrix size does not match its shape");
    }
    m.weights.emplace_back(Eigen::Map<const Matrix>(data.data(), rows, cols));
  }
  m.norm_adj = std::make_shared<const SparseMatrix>(normalize_adjacency(g));
  m.logits = predict_logits(m, g);
  return m;
}

}  // namespace gnnrisk
