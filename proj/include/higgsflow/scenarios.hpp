#pragma once

// Shipped scenario presets and the seeded random-valid-state generator.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "higgsflow/extension_lab.hpp"

namespace higgsflow {

struct RhoTarget {
  double epsilon = 0.0;
  double rho = 0.0;
};

struct ScenarioInfo {
  std::string name;
  std::string description;
  int rank = 0;
  std::vector<int> dims;  // supported n
  int default_n = 1;
  int default_N = 32;
  bool needs_seed = false;
  nlohmann::json expected;  // documented verdicts
};

struct Scenario {
  ScenarioInfo info;
  HiggsBundleState state;
  std::vector<HiggsSubbundle> filtration;  // known flat-quotient filtration, if any
  std::optional<HiggsSubbundle> extension;  // sub-bundle used by the extension tools
  std::vector<FormField> sections;          // shipped phi-invariant sections
  std::vector<RhoTarget> rho_targets;       // documented (epsilon, rho) pairs
};

std::vector<ScenarioInfo> scenario_catalog();
const ScenarioInfo& scenario_info(const std::string& name);

/// n = 0 or N = 0 select the scenario's defaults. Seeded scenarios throw without a seed.
Scenario make_scenario(const std::string& name, int n = 0, int N = 0, std::optional<std::uint64_t> seed = std::nullopt);

/// Polynomials in one random matrix M for every component of a and phi, so the
/// data commute and are valid in any dimension, with a mode-one random metric
/// exp(S) of the given amplitude.
struct RandomState {
  HiggsBundleState state;
  Mat generator;  // M
  HiggsSubbundle eigenline;  // span of an eigenvector of M: invariant and holomorphic
};
RandomState random_valid_state(const TorusBase& base, int rank, std::uint64_t seed, double metric_amplitude = 0.1);

// Enumeration of constant sub-objects: for constant a and phi, the subspaces
// invariant under every component, their slopes, and the resulting verdict
// ("stable", "polystable", "strictly semistable" or "unstable").
struct SubobjectSlope {
  Mat basis;
  int rank = 0;
  double slope = 0.0;
};
struct SlopeEnumeration {
  std::vector<SubobjectSlope> subobjects;
  double slope = 0.0;
  std::string verdict;
  nlohmann::json to_json() const;
};
SlopeEnumeration enumerate_constant_subobjects(const HiggsBundleState& state);

}  // namespace higgsflow
