#pragma once

// JSON encoding of specs and results, and the strict experiment-config schema
// used by the CLI. Unknown keys are rejected with the offending key path.

#include "nlps/agents.hpp"
#include "nlps/envs.hpp"
#include "nlps/harness.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

namespace nlps::config {

using json = nlohmann::ordered_json;

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& message)
      : std::runtime_error(key + ": " + message), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

json to_json(const envs::EnvSpec& spec);
json to_json(const agents::PolicySpec& spec);
json to_json(const harness::AggregateCurve& curve);
json to_json(const harness::GridResult& result);

// `where` prefixes key names in error messages.
envs::EnvSpec env_from_json(const json& j, const std::string& where = "env");
// Starts from the default hyperparameters of the policy and problem group.
agents::PolicySpec policy_from_json(const json& j, harness::ProblemGroup group,
                                    const std::string& where = "policy");
harness::AggregateCurve aggregate_from_json(const json& j);
harness::GridResult grid_result_from_json(const json& j);

struct ExperimentConfig {
  envs::EnvSpec env;
  agents::PolicySpec policy;
  json policy_source;  // the policy entry as written, base for user grids
  std::int64_t steps = 600;
  std::size_t trials = 5;
  std::uint64_t seed = 1;
  std::string out;
  std::size_t workers = 1;
  // Grid: "standard" for the built-in candidates, or a list of policy
  // objects overriding the base policy.
  std::optional<json> grid;
  bool include_random = true;
};

ExperimentConfig parse_experiment(const json& j);
ExperimentConfig load_experiment(const std::filesystem::path& path);
json to_json(const ExperimentConfig& c);

}  // namespace nlps::config
