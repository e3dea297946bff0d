#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "gnnrisk/graph.hpp"
#include "gnnrisk/graph_ops.hpp"
#include "gnnrisk/harness.hpp"

namespace gnnrisk::cli {

/// Invalid configuration or usage; maps to exit status 2. `key` names the
/// offending config entry when there is one (e.g. "dataset.features").
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& key, const std::string& what)
      : std::runtime_error(key.empty() ? what : key + ": " + what), key_(key) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

struct FileDataset {
  std::filesystem::path features;
  std::filesystem::path edges;
  std::filesystem::path labels;
  std::optional<int> num_classes;

  friend bool operator==(const FileDataset&, const FileDataset&) = default;
};

struct SyntheticDataset {
  SbmParams params;
  std::uint64_t seed = 0;

  friend bool operator==(const SyntheticDataset& a, const SyntheticDataset& b) {
    return a.seed == b.seed && a.params.block_sizes == b.params.block_sizes && a.params.p_in == b.params.p_in &&
           a.params.p_out == b.params.p_out && a.params.feature_dim == b.params.feature_dim &&
           a.params.feature_signal == b.params.feature_signal && a.params.feature_noise == b.params.feature_noise;
  }
};

struct RunConfig {
  std::optional<FileDataset> files;
  std::optional<SyntheticDataset> synthetic;
  RunSpec spec;
  /// Thread count from the config file; unset falls back to the environment.
  std::optional<int> threads;
  std::filesystem::path out_dir = "results";
  int verbosity = 0;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Environment variable holding the default worker count.
inline constexpr const char* kThreadsEnv = "GNNRISK_THREADS";

/// Builds a config from a parsed TOML tree. Relative paths resolve against
/// `base_dir`. Unknown keys, wrong types and out-of-range values throw
/// ConfigError naming the key.
RunConfig config_from_tree(const nlohmann::json& tree, const std::filesystem::path& base_dir);
/// Canonical tree with absolute paths and every field spelled out.
nlohmann::json config_to_tree(const RunConfig& config);

/// Reads a TOML config, or the "config" entry of a run manifest (".json").
RunConfig load_config(const std::filesystem::path& path);
std::string config_to_toml(const RunConfig& config);

/// Checks referenced files exist and the run spec is consistent.
void validate_config(const RunConfig& config);

/// flag > config > environment > 1.
int resolve_threads(std::optional<int> flag, const RunConfig& config);

Graph load_dataset(const RunConfig& config);

}  // namespace gnnrisk::cli
