#pragma once

// Configuration-driven experiments. A config is flat "key = value" text; '#'
// starts a comment. Keys:
//
//   scenario          catalog name (or give state)
//   state             path of a saved state
//   seed              required by seeded scenarios
//   n, N              grid (0 = scenario default)
//   flow.kind         donaldson | ymh | none
//   flow.dt, flow.T   macro step and end time
//   flow.samples      extra sample times, comma separated
//   target.epsilon    flatness target of the certificates
//   target.tol        flow-equivalence residual target
//   sweep.rho         rho values for sweep-rho, comma separated
//   assemble.rho      rho used to re-assemble a verified filtration
//   assemble.epsilon  flatness target of the re-assembled bundle
//   out.dir           output directory
//
// Exit codes: 0 all targets met, 1 a target failed, 2 bad config or input,
// 3 flow blow-up (the last healthy state is saved).

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace higgsflow {

enum ExitCode : int { kExitOk = 0, kExitTargetFailed = 1, kExitConfigError = 2, kExitBlowup = 3 };

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& key, const std::string& message)
      : std::runtime_error(key.empty() ? message : key + ": " + message), key(key) {}
  std::string key;
};

struct ExperimentConfig {
  std::string scenario;
  std::string state_file;
  std::optional<std::uint64_t> seed;
  int n = 0;
  int N = 0;
  std::string flow_kind = "donaldson";
  double dt = 1e-3;
  double T = 1.0;
  std::vector<double> samples;
  double epsilon = 0.05;
  double tol = 1e-3;
  std::vector<double> rhos{0.5, 0.25, 0.125, 0.0625, 0.03125};
  double assemble_rho = 0.1;
  double assemble_epsilon = 0.03;
  std::string out_dir = "out";

  static const std::vector<std::string>& keys();
  void set(const std::string& key, const std::string& value);
  void merge_text(std::istream& is, const std::string& origin = "config");
  static ExperimentConfig load(const std::string& path);
  /// Range and consistency checks; throws ConfigError.
  void validate() const;
  nlohmann::json to_json() const;
};

struct CommandResult {
  int exit_code = kExitOk;
  nlohmann::json report;
};

/// Verbs: run, catalog, validate, sweep-rho, verify-filtration, flow-equivalence.
/// Never throws for bad input: failures come back as exit code plus a report
/// with "status" and "reason".
CommandResult run_command(const std::string& verb, const ExperimentConfig& config);

const std::vector<std::string>& command_verbs();

}  // namespace higgsflow
