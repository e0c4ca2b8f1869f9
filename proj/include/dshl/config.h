#pragma once

// Flat key=value pipeline configuration.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "dshl/generate.h"
#include "dshl/hashnet.h"
#include "dshl/neural.h"
#include "dshl/pipeline.h"

namespace dshl {

struct ConfigKey {
  std::string name;
  std::string default_value;
  std::string help;
};

/// Every recognised key, in snapshot order.
const std::vector<ConfigKey>& config_keys();

using ConfigMap = std::map<std::string, std::string>;

/// Defaults for every key.
ConfigMap default_config();

/// Reads `key = value` lines; '#' starts a comment. Unknown keys and
/// malformed lines throw ConfigError.
ConfigMap parse_config(std::istream& in, ConfigMap base = default_config());

void write_config(std::ostream& out, const ConfigMap& config);

struct PipelineConfig {
  std::vector<std::string> corpus;  // files or directories
  std::string workspace = "workspace";
  std::uint64_t seed = 1;

  int hidden = 128;
  int pretrain_epochs = 30;
  int batch = 64;
  AdamConfig adam;

  TrainConfig train;
  PairConfig pairs;

  GenerationConfig generation;
  int generations = 1;
  bool midi = false;
};

/// Typed view with range checks; throws ConfigError.
PipelineConfig resolve(const ConfigMap& config);

}  // namespace dshl
