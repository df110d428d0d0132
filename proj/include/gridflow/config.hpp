#pragma once

// Scenario files. A scenario is a YAML document with a `run` section and
// one workload section (`t0t1` or `proof`). Every key is checked against
// the schema; problems carry the dotted path and source line.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "gridflow/scenarios.hpp"

namespace gridflow::harness {

struct ConfigIssue {
  std::string path;
  int line = 0;  // 1-based; 0 when the value came from an override
  std::string message;

  std::string str() const;
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<ConfigIssue> issues);
  const std::vector<ConfigIssue>& issues() const { return issues_; }

 private:
  std::vector<ConfigIssue> issues_;
};

struct RunSettings {
  std::uint64_t seed = 1;
  double duration = 86400.0;
  double metrics_interval = 300.0;
};

struct ScenarioConfig {
  RunSettings run;
  std::variant<scenarios::T0T1Spec, scenarios::ProofSpec> spec;

  bool is_proof() const { return std::holds_alternative<scenarios::ProofSpec>(spec); }
};

YAML::Node load_yaml_file(const std::string& path);

/// Sets `dotted.key.path` to `value` (parsed as YAML) inside `root`,
/// creating intermediate maps as needed.
void apply_override(YAML::Node& root, const std::string& dotted_key, const std::string& value);

/// Splits "key=value" at the first '='.
std::pair<std::string, std::string> split_assignment(const std::string& text);

ScenarioConfig parse_config(const YAML::Node& root);
ScenarioConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {});

/// Fully materialized configuration, every default written out.
std::string dump_config(const ScenarioConfig& config);

scenarios::RunResult run_scenario(const ScenarioConfig& config);

}  // namespace gridflow::harness
