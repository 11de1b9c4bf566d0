#pragma once

// Chern-Weil accounting, characteristic integrals, flatness certificates and
// parabolic energies of flow outputs.

#include <array>
#include <string>
#include <vector>

#include <json.hpp>

#include "higgsflow/flow_engine.hpp"

namespace higgsflow {

/// Coefficient of the top form dz^{1..n} ^ dzbar^{1..n} relative to omega^n/n!.
cplx top_form_volume_factor(int n);

/// Pointwise density (relative to omega^n/n!) of a top-degree scalar-valued
/// form, read from its single component after a trace.
std::vector<cplx> top_form_trace_density(const FormField& top);

struct ChernWeilReport {
  double lhs = 0.0;               // YMH energy
  double deviation_term = 0.0;    // int |K|^2
  double topological_term = 0.0;  // int tr(F ^ F) ^ omega^{n-2}/(n-2)!, 0 for n = 1
  double lambda_term = 0.0;       // lambda^2 r Vol
  double residual = 0.0;          // lhs - (deviation + topological + lambda)

  /// |residual| / max(1, |lhs|).
  double relative_residual() const;
  nlohmann::json to_json() const;
};

ChernWeilReport chern_weil_report(const HiggsBundleState& state);

struct TopologicalIntegrals {
  double c1_omega = 0.0;       // int c1 ^ omega^{n-1}
  double c2_term = 0.0;        // int (2 c2 - c1^2) ^ omega^{n-2}
  double ch2_omega = 0.0;      // int ch2 ^ omega^{n-2}
  double c1_squared = 0.0;     // int c1 ^ c1 ^ omega^{n-2}
  double c2_omega = 0.0;       // int c2 ^ omega^{n-2}
  nlohmann::json to_json() const;
};

/// From the Chern curvature of (H, a). For n = 1 the degree-four entries are 0.
TopologicalIntegrals topological_integrals(const HiggsBundleState& state);

/// e(A, phi) with respect to the pair's background metric.
std::vector<double> energy_density(const HiggsPair& pair);

/// Energy density fields sampled along a flow.
struct DensityHistory {
  TorusBase base;
  std::vector<double> times;
  std::vector<std::vector<double>> fields;

  explicit DensityHistory(const TorusBase& b) : base(b) {}
  void push(double t, std::vector<double> e);
  /// Attaches a recorder to opt.on_step (chaining any existing callback).
  void attach(FlowOptions& opt, double t_from = 0.0, double t_to = 1e300);
};

/// R^{2-2n} times the integral of e over B_R(x0) x [t0 - R^2, t0 + R^2], with
/// the periodic Euclidean ball and the trapezoidal rule in time.
double parabolic_energy(const DensityHistory& history, const std::array<double, 4>& x0, double t0, double R);

/// Weight of the grid cell around every point that lies inside B_R(x0).
std::vector<double> ball_weights(const TorusBase& base, const std::array<double, 4>& x0, double R);

struct FlatnessCertificate {
  double achieved = 0.0;               // sup |F_HS|_H
  double sup_curvature_bracket = 0.0;  // sup |F_H + [phi, phi^*]|
  double sup_del_phi = 0.0;
  double sup_dbar_phi_adjoint = 0.0;
  double sup_discretisation = 0.0;     // sup of the (2,0) and (0,2) parts of F_H
  int n = 1;
  int N = 0;
  double target = 0.0;
  bool pass = false;

  nlohmann::json to_json() const;
  std::string verdict_line() const;
};

FlatnessCertificate flatness_certificate(const HiggsBundleState& state, double eps_target);

/// Pairs (parabolic energy, sup e on the following cylinder) along a run.
struct RegularityRecord {
  double t0 = 0.0;
  double R = 0.0;
  double parabolic_energy = 0.0;  // max over the probed centres
  double sup_e_after = 0.0;       // sup e over [t0, t0 + R^2]
};

struct RegularityMonitor {
  std::vector<RegularityRecord> records;
  /// Whenever the parabolic energy does not grow from one record to the next,
  /// neither does the subsequent sup e (with relative slack).
  bool qualitative_ok(double slack = 1e-6) const;
  nlohmann::json to_json() const;
};

/// Probes centres on a coarse sub-lattice with `per_axis` points per real axis.
RegularityMonitor regularity_monitor(const DensityHistory& history, const std::vector<double>& t0s, double R,
                                     int per_axis = 4);

}  // namespace higgsflow
