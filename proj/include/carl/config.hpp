#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "carl/evaluation.hpp"
#include "carl/trainer.hpp"

namespace carl {

enum class DataKind { kGaussianMixture, kCifar10, kCsv };

struct DataConfig {
  DataKind kind = DataKind::kGaussianMixture;
  int num_classes = 8;
  std::size_t per_class = 200;
  std::size_t dim = 32;
  double separation = 6.0;
  std::uint64_t seed = 0;
  std::string path;         ///< CIFAR directory or CSV file
  std::size_t limit = 0;    ///< keep only the first `limit` training samples (0 = all)
  bool normalize_channels = true;  ///< image data: normalize with training-split channel stats
};

struct EvalConfig {
  ProbeConfig probe{};
  int probe_seeds = 3;
  double collapse_threshold = 0.05;
};

/// Everything a run needs, parsed from a sectioned key=value file.
struct RunConfig {
  DataConfig data{};
  TrainConfig trainer{};
  EvalConfig eval{};
};

struct ConfigKey {
  std::string name;  ///< "section.key"
  std::string default_value;
  std::string doc;
};

/// All recognized keys in serialization order.
const std::vector<ConfigKey>& config_keys();

/// Resolves a dotted key, or a bare key that is unique across sections.
/// Throws ConfigError for unknown or ambiguous names.
std::string canonical_key(std::string_view key);

void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value);
std::string get_config_value(const RunConfig& cfg, std::string_view key);

/// Lines are blank, comments (# or ;), "[section]" headers or "key = value".
/// Unknown sections or keys, duplicates and unparsable values raise ConfigError
/// carrying the 1-based line number.
RunConfig parse_run_config(std::string_view text);
RunConfig load_run_config(const std::filesystem::path& path);
/// Canonical text form: every key, in config_keys() order, grouped by section.
std::string serialize_run_config(const RunConfig& cfg);

}  // namespace carl
