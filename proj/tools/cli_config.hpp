#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dynaflow/pipeline.hpp"
#include "dynaflow/rankpool.hpp"
#include "dynaflow/tvl1.hpp"
#include "dynaflow/work_pool.hpp"

namespace dynaflow::cli {

struct Config {
  WindowSpec windows;
  float clip_bound = kDefaultClipBound;
  double svm_c = kDefaultSvmC;
  SolverConfig solver;
  Tvl1Params tvl1;
  int workers = default_worker_count();

  PoolSettings pool_settings() const;
  void validate() const;  // throws Configuration
};

struct ConfigKey {
  std::string name;
  std::string help;
};

// Every recognized key, in display order.
const std::vector<ConfigKey>& config_keys();

// Default value of a key, formatted as it would appear in a config file.
std::string default_value(std::string_view key);

using Settings = std::map<std::string, std::string>;

/// Flat "key = value" text; '#' starts a comment, blank lines are ignored.
/// Unknown keys and malformed lines are Configuration errors.
Settings parse_config_text(std::string_view text);
Settings read_config_file(const std::filesystem::path& path);

/// Defaults, overridden by `file`, overridden by `flags`.
Config resolve_config(const Settings& file, const Settings& flags);

/// The file named by an explicit --config flag, else by DYNAFLOW_CONFIG.
std::optional<std::filesystem::path> config_path(const std::optional<std::string>& flag);

}  // namespace dynaflow::cli
