#include "run_config.hpp"

#include <cstdlib>
#include <set>

#include "gnnrisk/io.hpp"
#include "gnnrisk/selection.hpp"
#include "toml_lite.hpp"

namespace gnnrisk::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

/// Typed, key-checked view of one TOML table.
class Table {
 public:
  Table(const json* node, std::string path) : node_(node), path_(std::move(path)) {
    if (node_ && !node_->is_object()) throw ConfigError(path_, "expected a table");
  }

  bool has(const std::string& key) const { return node_ && node_->contains(key); }

  Table sub(const std::string& key) {
    seen_.insert(key);
    return Table(has(key) ? &node_->at(key) : nullptr, name(key));
  }

  std::int64_t integer(const std::string& key, std::int64_t fallback) { return integer_at(key, fallback); }

  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) {
    const json* v = get(key);
    if (!v) return fallback;
    if (v->is_number_unsigned()) return v->get<std::uint64_t>();
    if (v->is_number_integer()) throw ConfigError(name(key), "must be non-negative");
    throw ConfigError(name(key), "expected an integer");
  }

  double number(const std::string& key, double fallback) {
    const json* v = get(key);
    if (!v) return fallback;
    return as_number(*v, name(key));
  }

  bool boolean(const std::string& key, bool fallback) {
    const json* v = get(key);
    if (!v) return fallback;
    if (!v->is_boolean()) throw ConfigError(name(key), "expected true or false");
    return v->get<bool>();
  }

  std::string string(const std::string& key, const std::string& fallback) {
    const json* v = get(key);
    if (!v) return fallback;
    if (!v->is_string()) throw ConfigError(name(key), "expected a string");
    return v->get<std::string>();
  }

  template <class T, class Convert>
  std::vector<T> list(const std::string& key, std::vector<T> fallback, Convert convert) {
    const json* v = get(key);
    if (!v) return fallback;
    if (!v->is_array()) throw ConfigError(name(key), "expected an array");
    std::vector<T> out;
    for (std::size_t i = 0; i < v->size(); ++i) out.push_back(convert((*v)[i], name(key) + "[" + std::to_string(i) + "]"));
    return out;
  }

  /// Rejects keys nobody asked for.
  void finish() const {
    if (!node_) return;
    for (const auto& [k, v] : node_->items()) {
      if (!seen_.contains(k)) throw ConfigError(name(k), "unknown key");
    }
  }

  std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  static double as_number(const json& v, const std::string& where) {
    if (!v.is_number()) throw ConfigError(where, "expected a number");
    return v.get<double>();
  }

  static std::int64_t as_integer(const json& v, const std::string& where) {
    if (v.is_number_unsigned() && v.get<std::uint64_t>() > static_cast<std::uint64_t>(INT32_MAX)) {
      throw ConfigError(where, "integer out of range");
    }
    if (!v.is_number_integer()) throw ConfigError(where, "expected an integer");
    return v.get<std::int64_t>();
  }

 private:
  const json* get(const std::string& key) {
    seen_.insert(key);
    return has(key) ? &node_->at(key) : nullptr;
  }

  std::int64_t integer_at(const std::string& key, std::int64_t fallback) {
    const json* v = get(key);
    if (!v) return fallback;
    return as_integer(*v, name(key));
  }

  const json* node_;
  std::string path_;
  std::set<std::string> seen_;
};

int to_int(const json& v, const std::string& where) { return static_cast<int>(Table::as_integer(v, where)); }

std::size_t to_size(const json& v, const std::string& where) {
  const auto x = Table::as_integer(v, where);
  if (x < 0) throw ConfigError(where, "must be non-negative");
  return static_cast<std::size_t>(x);
}

double to_double(const json& v, const std::string& where) { return Table::as_number(v, where); }

std::string to_str(const json& v, const std::string& where) {
  if (!v.is_string()) throw ConfigError(where, "expected a string");
  return v.get<std::string>();
}

AttackKind to_attack(const json& v, const std::string& where) {
  try {
    return parse_attack(to_str(v, where));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where, e.what());
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return (path.is_absolute() ? path : base / path).lexically_normal();
}

GridAxes read_grid(Table t, Arch default_arch) {
  json arch_only = json::object();
  arch_only["arch"] = t.string("arch", to_string(default_arch));
  GridAxes a;
  try {
    a = arch_only.get<GridAxes>();
    a.stop_metric = parse_stop_metric(t.string("stop_metric", to_string(a.stop_metric)));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(t.name("arch"), e.what());
  }
  a.hidden = t.list("hidden", a.hidden, to_int);
  a.learning_rate = t.list("learning_rate", a.learning_rate, to_double);
  a.dropout = t.list("dropout", a.dropout, to_double);
  a.weight_decay = t.list("weight_decay", a.weight_decay, to_double);
  a.max_epochs = static_cast<int>(t.integer("max_epochs", a.max_epochs));
  a.patience = static_cast<int>(t.integer("patience", a.patience));
  a.hops = static_cast<int>(t.integer("hops", a.hops));
  t.finish();
  return a;
}

json grid_tree(const GridAxes& a) {
  json j = a;
  return j;
}

}  // namespace

RunConfig config_from_tree(const json& tree, const fs::path& base_dir) {
  RunConfig c;
  Table root(&tree, "");

  Table data = root.sub("dataset");
  if (data.has("features") || data.has("edges") || data.has("labels")) {
    FileDataset f;
    for (const char* key : {"features", "edges", "labels"}) {
      if (!data.has(key)) throw ConfigError(data.name(key), "missing");
    }
    f.features = resolve(base_dir, data.string("features", ""));
    f.edges = resolve(base_dir, data.string("edges", ""));
    f.labels = resolve(base_dir, data.string("labels", ""));
    if (data.has("num_classes")) f.num_classes = static_cast<int>(data.integer("num_classes", 0));
    c.files = f;
  }
  if (data.has("synthetic")) {
    Table syn = data.sub("synthetic");
    SyntheticDataset s;
    s.params.block_sizes = syn.list("block_sizes", std::vector<int>{}, to_int);
    s.params.p_in = syn.number("p_in", s.params.p_in);
    s.params.p_out = syn.number("p_out", s.params.p_out);
    s.params.feature_dim = static_cast<int>(syn.integer("feature_dim", s.params.feature_dim));
    s.params.feature_signal = syn.number("feature_signal", s.params.feature_signal);
    s.params.feature_noise = syn.number("feature_noise", s.params.feature_noise);
    s.seed = syn.unsigned_integer("seed", 0);
    syn.finish();
    c.synthetic = s;
  }
  data.finish();

  Table run = root.sub("run");
  RunSpec& s = c.spec;
  s.splits = static_cast<int>(run.integer("splits", s.splits));
  s.runs = static_cast<int>(run.integer("runs", s.runs));
  s.budgets = run.list("budgets", s.budgets, to_size);
  s.attacks = run.list("attacks", s.attacks, to_attack);
  s.master_seed = run.unsigned_integer("master_seed", s.master_seed);
  const auto ratios =
      run.list("split_ratios", std::vector<double>{s.ratios.train, s.ratios.valid, s.ratios.test}, to_double);
  if (ratios.size() != 3) throw ConfigError(run.name("split_ratios"), "expected [train, valid, test]");
  s.ratios = {ratios[0], ratios[1], ratios[2]};
  s.sample_ratio = run.number("sample_ratio", s.sample_ratio);
  const auto per_category = run.integer("targets_per_category", static_cast<std::int64_t>(s.targets_per_category));
  if (per_category < 1) throw ConfigError(run.name("targets_per_category"), "must be at least 1");
  s.targets_per_category = static_cast<std::size_t>(per_category);
  s.evasion = run.boolean("evasion", s.evasion);
  s.poison = run.boolean("poison", s.poison);
  s.poison_budgets = run.list("poison_budgets", s.poison_budgets, to_size);
  s.poison_attacks = run.list("poison_attacks", s.poison_attacks, to_attack);
  s.max_dropped_fraction = run.number("max_dropped_fraction", s.max_dropped_fraction);
  if (run.has("jaccard_threshold")) s.jaccard_threshold = run.number("jaccard_threshold", 0.0);
  if (run.has("threads")) {
    c.threads = static_cast<int>(run.integer("threads", 1));
    if (*c.threads < 1) throw ConfigError(run.name("threads"), "must be at least 1");
  }
  run.finish();

  s.victim_grid = read_grid(root.sub("victim"), Arch::kGcn2);
  s.surrogate_grid = read_grid(root.sub("surrogate"), Arch::kSgc);

  Table out = root.sub("output");
  c.out_dir = resolve(base_dir, out.string("dir", c.out_dir.string()));
  c.verbosity = static_cast<int>(out.integer("verbosity", 0));
  out.finish();
  root.finish();

  if (c.threads) s.threads = *c.threads;
  return c;
}

json config_to_tree(const RunConfig& c) {
  json t = json::object();
  json data = json::object();
  if (c.files) {
    data["features"] = c.files->features.string();
    data["edges"] = c.files->edges.string();
    data["labels"] = c.files->labels.string();
    if (c.files->num_classes) data["num_classes"] = *c.files->num_classes;
  }
  if (c.synthetic) {
    const SbmParams& p = c.synthetic->params;
    data["synthetic"] = {{"block_sizes", p.block_sizes},       {"p_in", p.p_in},
                         {"p_out", p.p_out},                   {"feature_dim", p.feature_dim},
                         {"feature_signal", p.feature_signal}, {"feature_noise", p.feature_noise},
                         {"seed", c.synthetic->seed}};
  }
  t["dataset"] = data;

  json run = c.spec;
  run.erase("victim_grid");
  run.erase("surrogate_grid");
  run.erase("threads");
  if (c.threads) run["threads"] = *c.threads;
  t["run"] = run;
  t["victim"] = grid_tree(c.spec.victim_grid);
  t["surrogate"] = grid_tree(c.spec.surrogate_grid);
  t["output"] = {{"dir", c.out_dir.string()}, {"verbosity", c.verbosity}};
  return t;
}

RunConfig load_config(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("", "config file not found: " + path.string());
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const std::exception& e) {
    throw ConfigError("", e.what());
  }
  const fs::path base = fs::absolute(path).parent_path();
  if (path.extension() == ".json") {
    json manifest;
    try {
      manifest = json::parse(text);
    } catch (const json::exception& e) {
      throw ConfigError("", "manifest is not valid JSON: " + std::string(e.what()));
    }
    if (!manifest.is_object() || !manifest.contains("config")) throw ConfigError("config", "manifest has no config");
    return config_from_tree(manifest.at("config"), base);
  }
  try {
    return config_from_tree(parse_toml(text), base);
  } catch (const TomlError& e) {
    throw ConfigError("", path.string() + ": " + e.what());
  }
}

std::string config_to_toml(const RunConfig& config) { return to_toml(config_to_tree(config)); }

void validate_config(const RunConfig& c) {
  if (c.files && c.synthetic) throw ConfigError("dataset", "give either files or [dataset.synthetic], not both");
  if (!c.files && !c.synthetic) {
    throw ConfigError("dataset", "needs features, edges and labels, or a [dataset.synthetic] table");
  }
  if (c.files) {
    const std::pair<const char*, const fs::path*> paths[] = {
        {"dataset.features", &c.files->features}, {"dataset.edges", &c.files->edges}, {"dataset.labels", &c.files->labels}};
    for (const auto& [key, p] : paths) {
      if (!fs::is_regular_file(*p)) throw ConfigError(key, "file not found: " + p->string());
    }
    if (c.files->num_classes && *c.files->num_classes < 2) throw ConfigError("dataset.num_classes", "must be at least 2");
  }
  if (c.synthetic) {
    const SbmParams& p = c.synthetic->params;
    if (p.block_sizes.size() < 2) throw ConfigError("dataset.synthetic.block_sizes", "needs at least two blocks");
    for (int b : p.block_sizes) {
      if (b < 1) throw ConfigError("dataset.synthetic.block_sizes", "block sizes must be positive");
    }
    for (const auto& [key, v] : {std::pair{"p_in", p.p_in}, std::pair{"p_out", p.p_out},
                                 std::pair{"feature_signal", p.feature_signal},
                                 std::pair{"feature_noise", p.feature_noise}}) {
      if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(std::string("dataset.synthetic.") + key, "must lie in [0, 1]");
    }
    if (p.feature_dim < static_cast<int>(p.block_sizes.size())) {
      throw ConfigError("dataset.synthetic.feature_dim", "needs at least one feature per block");
    }
  }
  for (const auto& [key, axes] : {std::pair{"victim", &c.spec.victim_grid}, std::pair{"surrogate", &c.spec.surrogate_grid}}) {
    try {
      const ConfigGrid grid = ConfigGrid::from_axes(*axes);
      for (const auto& m : grid.configs()) m.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(key, e.what());
    }
  }
  try {
    c.spec.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("run", e.what());
  }
  if (c.verbosity < 0) throw ConfigError("output.verbosity", "must be non-negative");
}

int resolve_threads(std::optional<int> flag, const RunConfig& config) {
  if (flag) {
    if (*flag < 1) throw ConfigError("--threads", "must be at least 1");
    return *flag;
  }
  if (config.threads) return *config.threads;
  if (const char* env = std::getenv(kThreadsEnv); env && *env) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (*end != '\0' || n < 1 || n > 4096) throw ConfigError(kThreadsEnv, "expected a positive integer");
    return static_cast<int>(n);
  }
  return 1;
}

Graph load_dataset(const RunConfig& c) {
  if (c.synthetic) return synthetic_sbm(c.synthetic->seed, c.synthetic->params);
  return load_graph(c.files->features, c.files->edges, c.files->labels, c.files->num_classes);
}

}  // namespace gnnrisk::cli
