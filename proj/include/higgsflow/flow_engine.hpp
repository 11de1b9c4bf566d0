#pragma once

// Donaldson heat flow on metrics, Yang-Mills-Higgs flow on pairs over a fixed
// background metric, the complex gauge action relating them, and the
// correspondence check between the two flows.

#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "higgsflow/higgs_geometry.hpp"

namespace higgsflow {

/// (a, phi) over a fixed background metric H0; the pair's connection is the
/// Chern connection of (H0, dbar + a).
struct HiggsPair {
  HiggsStructure structure;
  HermitianMetric h0;

  HiggsPair(HiggsStructure s, HermitianMetric h);
  explicit HiggsPair(const HiggsBundleState& state) : HiggsPair(state.structure(), state.metric()) {}

  const FormField& a() const { return structure.a; }
  const FormField& phi() const { return structure.phi; }
  const TorusBase& base() const { return structure.base(); }
  int rank() const { return structure.rank(); }
  HiggsBundleState as_state() const { return {structure, h0}; }
};

/// Every curvature-derived quantity of one state, computed from a single
/// Hitchin-Simpson curvature evaluation.
struct Evaluation {
  HitchinSimpsonCurvature curvature;
  FormField deviation;          // H-self-adjoint part of i Lambda (F_H + [phi, phi^*]) - lambda Id
  double lambda = 0.0;
  std::vector<double> density;  // e = |F + [phi,phi^*]|^2 + 2 |del phi|^2
  double energy = 0.0;
  double dev_l2 = 0.0;
  double dev_sup = 0.0;
  double e_sup = 0.0;
  double phi_sup = 0.0;          // sup |phi|^2
  double selfadjoint_defect = 0.0;  // of the raw K: sup |H K - (H K)^dagger| / (1 + sup |H K|)
};

Evaluation evaluate(const HiggsBundleState& state);

/// The raw contraction is H-self-adjoint only up to truncation error; past this
/// relative defect the grid cannot resolve the metric and K is refused.
inline constexpr double kDeviationDefectLimit = 0.25;

FormField einstein_deviation(const HiggsBundleState& state);

/// Pointwise energy density and its integral.
std::vector<double> ymh_density(const HiggsBundleState& state);
double ymh_energy(const HiggsPair& pair);
inline double ymh_energy(const HiggsBundleState& state) { return ymh_energy(HiggsPair(state)); }

/// Raised when adaptive halving cannot tame a step; carries the last state
/// that passed the growth test.
class FlowBlowup : public std::runtime_error {
 public:
  FlowBlowup(const std::string& what, double t, HiggsBundleState last)
      : std::runtime_error(what), time(t), last_healthy(std::move(last)) {}
  double time;
  HiggsBundleState last_healthy;
};

/// One multiplicative step H' = H exp(-2 dt K); no step control.
HiggsBundleState donaldson_step(const HiggsBundleState& state, double dt);

struct Velocity {
  FormField a_dot;    // dbar K + [a, K]
  FormField phi_dot;  // -[K, phi]
};

Velocity ymh_velocity(const HiggsPair& pair);

enum class YmhScheme {
  GaugeExponential,  // pair' = sigma(pair), sigma = exp(-dt K)
  ExplicitEuler,     // pair' = pair + dt * velocity
};

HiggsPair ymh_step(const HiggsPair& pair, double dt, YmhScheme scheme = YmhScheme::GaugeExponential);

/// Dual of D_A on 1-forms through the Kahler identities, applied to a (1,1)-form F:
/// (i del_A Lambda F, -i dbar_A Lambda F). Matches the L2 adjoint of
/// beta -> (D_A beta)^{1,1} on 1-forms (up to discretisation terms).
struct OneForm {
  FormField part10;
  FormField part01;
};
OneForm kahler_codifferential(const FormField& f11, const HiggsPair& pair);

/// a' = sigma a sigma^{-1} - (dbar sigma) sigma^{-1}, phi' = sigma phi sigma^{-1}.
HiggsPair complex_gauge_apply(const FormField& sigma, const HiggsPair& pair);

/// g = (H0^{-1} H)^{1/2} in the H0-self-adjoint positive cone.
FormField gauge_from_metric(const HermitianMetric& h0, const HermitianMetric& h);

struct TraceRow {
  double t = 0.0;
  double ymh_energy = 0.0;
  double dev_l2 = 0.0;
  double dev_sup = 0.0;
  double e_sup = 0.0;
  double phi_sup = 0.0;
  double dt = 0.0;
  double residual_integrability = 0.0;
  double residual_holomorphy = 0.0;
  double residual_symmetry = 0.0;
};

struct FlowTrace {
  std::vector<TraceRow> rows;
  /// Energy at the start of every accepted macro step plus the final state.
  std::vector<double> step_energies;

  void write_csv(std::ostream& os) const;
  /// Least-squares slope p of log f ~ -p log t over samples with t >= t_min.
  double decay_exponent(double TraceRow::*column, double t_min = 1.0) const;
  nlohmann::json summary() const;
};

struct FlowOptions {
  double dt = 1e-3;
  double T = 1.0;
  std::vector<double> samples;  // extra sample times
  double growth_limit = 2.0;
  int max_halvings = 12;
  /// Split each macro step into 2^k equal substeps no longer than stable_step().
  bool stability_substeps = true;
  YmhScheme scheme = YmhScheme::GaugeExponential;
  /// Called at t = 0 and after every accepted macro step.
  std::function<void(double, const HiggsBundleState&, const Evaluation&)> on_step;
};

/// Explicit stability bound of both flows: their principal part is the flat
/// Laplacian, whose largest discrete eigenvalue is 2 n N^2; includes a 0.9 margin.
double stable_step(const TorusBase& base);

/// Geometric schedule 0, dt, 2dt, 4dt, ... plus extra samples plus T, as
/// integer multiples of dt.
std::vector<long long> sample_steps(const FlowOptions& opt);

struct DonaldsonResult {
  FlowTrace trace;
  HiggsBundleState final_state;
};
struct YmhResult {
  FlowTrace trace;
  HiggsPair final_pair;
};

DonaldsonResult run_donaldson(const HiggsBundleState& initial, const FlowOptions& opt);
YmhResult run_ymh(const HiggsPair& initial, const FlowOptions& opt);

struct EquivalenceSample {
  double t = 0.0;
  // Residuals of the three norm identities, metric side vs direct pair: sup over
  // the grid of the pointwise gap, divided by the largest value the identity's
  // sides take over the whole run (the flows decay to roundoff, so the
  // current value is not a usable scale late in a run).
  double del_phi = 0.0;
  double curvature = 0.0;
  double contracted = 0.0;
  // curvature gap relative to this sample's own magnitude
  double curvature_local = 0.0;
  // the same identities with the gauge-transported pair in place of the direct one
  double transported_del_phi = 0.0;
  double transported_curvature = 0.0;
  double transported_contracted = 0.0;
  // sup |g (F_H + [phi0, phi0^{*H}]) g^{-1} - (F_A + [phi, phi^{*H0}])| / scale
  double conjugation = 0.0;
  // largest entry difference between transported and direct pairs / scale
  double pair_discrepancy = 0.0;
  double energy_metric = 0.0;
  double energy_pair = 0.0;
};

struct EquivalenceReport {
  std::vector<EquivalenceSample> samples;
  double max_norm_residual = 0.0;          // over the three direct identities
  double max_transported_residual = 0.0;
  double max_conjugation = 0.0;
  double max_pair_discrepancy = 0.0;
  nlohmann::json to_json() const;
};

EquivalenceReport flow_equivalence_check(const HiggsBundleState& initial, double T, double dt,
                                         YmhScheme scheme = YmhScheme::GaugeExponential);

}  // namespace higgsflow
