#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "fapi/bounds.hpp"
#include "fapi/envs.hpp"
#include "fapi/errors.hpp"
#include "fapi/federation.hpp"

namespace fapi {

/// Config problem tied to a line of the input (0 when not line-specific).
class ConfigError : public ContractViolation {
 public:
  ConfigError(std::size_t line, const std::string& message)
      : ContractViolation(line == 0 ? message : "line " + std::to_string(line) + ": " + message),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

enum class EnvKind { kTabular, kMountainCar };

/// Everything a CLI invocation needs.
///
/// The file format is flat `key = value` text grouped in `[section]`s. Lines
/// starting with ';' are comments. Hyperparameter table names are used
/// verbatim as keys, e.g. `#Clients (N) = 60` or `KL Target = 0.003`.
struct RunConfig {
  EnvKind env = EnvKind::kTabular;
  /// ensemble.num_clients is N for both environment kinds.
  EnsembleSpec ensemble;
  /// Load the tabular ensemble from this file instead of generating it.
  std::string ensemble_path;
  MountainCarParams mountain_car;
  /// "stepped", "linspace" or an explicit comma list of shifts.
  std::string shifts = "linspace";
  FederationConfig federation;
  std::size_t batch_size = 128;
  std::size_t timesteps_per_iteration = 2048;
  bool verify_enabled = true;
  VerifyOptions verify;
  std::string output_dir = ".";

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Parses config text; unknown sections or keys, duplicates and malformed
/// values raise ConfigError with the offending line. The PPO table entries
/// map as: gradient steps = ceil(Timestep per Iteration / Batch Size), and
/// Timestep per Iteration caps the steps a client simulates per local
/// iteration.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::string& path);
/// Writes every key, so parse_config(format_config(c)) == c.
std::string format_config(const RunConfig& config);

/// Shift list for the mountain-car population.
std::vector<double> resolve_shifts(const RunConfig& config);

/// The configured population: the tabular ensemble (loaded from
/// ensemble_path or generated) or the discretized mountain-car family.
Federation build_federation(const RunConfig& config, const Executor& exec = Executor{});

}  // namespace fapi
