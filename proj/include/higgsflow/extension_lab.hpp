#pragma once

// Sub-bundles, extensions and filtrations of Higgs bundles on the grid.
//
// A sub-bundle S is a field of H-orthogonal projectors. The quotient is
// realised as the H-orthogonal complement, and everything is read off in an
// adapted frame f = [frame of S | frame of S^perp], in which the pulled-back
// operators are block upper triangular:
//   f^{-1} (dbar + a) f = (dbar + a_S, gamma; 0, dbar + a_Q)
//   f^{-1} phi f        = (phi_S, zeta; 0, phi_Q)
//   f^dagger H f        = diag(H_S, H_Q)

#include <iosfwd>
#include <optional>
#include <vector>

#include <json.hpp>

#include "higgsflow/diagnostics.hpp"

namespace higgsflow {

struct HiggsSubbundle {
  FormField pi;  // r x r projectors (0,0)-form
  int rank = 0;

  HiggsSubbundle(FormField projector, int p);

  /// H-orthogonal projector onto the span of the constant columns of V.
  static HiggsSubbundle from_span(const HermitianMetric& h, const Mat& V);
  /// Same for an r x p frame field.
  static HiggsSubbundle from_frame(const HermitianMetric& h, const FormField& frame);
};

struct SubbundleResiduals {
  double idempotency = 0.0;  // sup |pi^2 - pi|
  double selfadjoint = 0.0;  // sup |H pi - pi^dagger H| / (1 + |H|)
  double rank = 0.0;         // sup |tr pi - p|
  double invariance = 0.0;   // sup |(1 - pi) phi pi|
  double holomorphy = 0.0;   // sup |(1 - pi)(dbar pi + [a, pi]) pi|
  double worst() const;
  nlohmann::json to_json() const;
};

SubbundleResiduals subbundle_residuals(const HiggsBundleState& state, const HiggsSubbundle& sub);

/// 1e-8 (1 + largest entry of a, phi or H).
double default_subbundle_tolerance(const HiggsBundleState& state);

/// Block decomposition of a rank-r field with respect to the splitting r = sum of sizes.
struct BlockSplit {
  std::vector<int> sizes;
  std::vector<int> offsets;
  explicit BlockSplit(std::vector<int> s);
  int blocks() const { return static_cast<int>(sizes.size()); }
  FormField block(const FormField& f, int i, int j) const;
  /// Inverse of block(): rows x cols of every block given.
  FormField assemble(const std::vector<std::vector<const FormField*>>& blocks, const TorusBase& base,
                     Bidegree degree) const;
};

/// Data pulled back along an adapted frame of a nested sequence of projectors.
struct AdaptedPullback {
  BlockSplit split;
  FormField frame;      // f, r x r
  FormField frame_inv;  // f^{-1}
  FormField a;          // f^{-1} dbar f + f^{-1} a f
  FormField phi;        // f^{-1} phi f
  FormField h;          // f^dagger H f
  double lower_residual = 0.0;     // largest block below the diagonal in a or phi
  double metric_offdiagonal = 0.0; // largest off-diagonal block of f^dagger H f, relative
};

/// projectors must be nested, ending with a proper sub-bundle; the full bundle
/// is appended as the last level.
AdaptedPullback adapted_pullback(const HiggsBundleState& state, const std::vector<HiggsSubbundle>& levels);

struct ExtensionData {
  HiggsStructure ambient;
  AdaptedPullback pullback;
  int p = 0;
  int q = 0;
  FormField a_s, a_q, gamma;  // gamma: (0,1) Hom(Q, S)
  FormField phi_s, phi_q, zeta;  // zeta: (1,0) Hom(Q, S)
  HermitianMetric h_s, h_q;
  SubbundleResiduals residuals;

  HiggsBundleState sub_state() const { return {HiggsStructure(a_s, phi_s), h_s}; }
  HiggsBundleState quotient_state() const { return {HiggsStructure(a_q, phi_q), h_q}; }
  nlohmann::json to_json() const;
};

ExtensionData split_extension(const HiggsBundleState& state, const HiggsSubbundle& sub,
                              std::optional<double> tolerance = std::nullopt);

/// All parts of the Hitchin-Simpson curvature of a rank-r state, by bidegree.
struct CurvatureParts {
  FormField f11;  // F + [phi, phi^*]
  FormField f20;  // del phi
  FormField f02;  // dbar phi^*
};

struct GaussCodazziReport {
  CurvatureParts assembled;  // blocks built from (a_S, a_Q, gamma, phi_S, phi_Q, zeta, H_S, H_Q)
  CurvatureParts ambient;    // f^{-1} F_HS(E) f
  double residual = 0.0;     // sup |assembled - ambient| in diag(H_S, H_Q)
  double scale = 0.0;        // sup |ambient|
  double relative() const { return residual / std::max(1.0, scale); }
  nlohmann::json to_json() const;
};

GaussCodazziReport gauss_codazzi_blocks(const HiggsBundleState& state, const HiggsSubbundle& sub);

struct ScaledMetric {
  HermitianMetric metric;        // on E
  double gamma_adjoint_gap = 0.0;  // sup |gamma^*_rho - rho^2 gamma^*_1|
  double zeta_adjoint_gap = 0.0;
};

/// f^{-dagger} diag(H_S, H_Q / rho^2) f^{-1}.
ScaledMetric scaled_extension_metric(const ExtensionData& ext, const HermitianMetric& h_s,
                                     const HermitianMetric& h_q, double rho);

struct RhoRow {
  double rho = 0.0;
  double sup_a = 0.0;   // diag(F_HS(S), F_HS(Q))
  double sup_b1 = 0.0;  // diagonal second-fundamental-form part at rho = 1
  double sup_c1 = 0.0;  // off-diagonal part at rho = 1
  double sup_f = 0.0;   // sup |F_HS| of E with the scaled metric
  double model = 0.0;   // sup sqrt(|A|^2 + rho^4 |B_1|^2 + rho^2 |C_1|^2)
};

struct RhoSweep {
  std::vector<RhoRow> rows;
  double floor = 0.0;  // sup |A|
  double slope = 0.0;  // least-squares slope of log(sup|F| - floor) against log rho
  void write_csv(std::ostream& os) const;
  /// (rho, sup|F|) only.
  void write_two_column_csv(std::ostream& os) const;
  nlohmann::json to_json() const;
};

RhoSweep rho_sweep(const ExtensionData& ext, const HermitianMetric& h_s, const HermitianMetric& h_q,
                   const std::vector<double>& rhos);
inline RhoSweep rho_sweep(const ExtensionData& ext, const std::vector<double>& rhos) {
  return rho_sweep(ext, ext.h_s, ext.h_q, rhos);
}

/// Sign structure of the second fundamental forms after the omega-trace:
/// tr (i/2pi) Lambda(gamma ^ gamma^*) <= 0 and tr (i/2pi) Lambda(zeta ^ zeta^*) >= 0, and
/// tr (i/2pi) Lambda F_{H_S} <= tr (i/2pi) Lambda (F_HS^{1,1}(E)|_S).
struct SecondFundamentalTraces {
  double max_gamma_part = 0.0;
  double min_zeta_part = 0.0;
  double min_combined = 0.0;         // of -gamma gamma^* + zeta zeta^*
  double min_restriction_gap = 0.0;  // of tr F^{1,1}_HS(E)|_S - tr F_{H_S}, same normalisation
  double max_restricted_trace = 0.0; // of tr (i/2pi) Lambda (F_HS^{1,1}(E)|_S)
  double epsilon = 0.0;              // sup |F_HS(E)| (constant taken to be 1)
  nlohmann::json to_json() const;
};

SecondFundamentalTraces second_fundamental_traces(const HiggsBundleState& state, const HiggsSubbundle& sub);

struct InvariantSectionReport {
  double holomorphy = 0.0;           // sup |dbar_E s|_H
  double invariance = 0.0;           // sup |phi s - eta s|_H after the pointwise fit
  double invariance_relative = 0.0;  // invariance / sup |phi s|
  std::vector<cplx> eta_mean;        // the fitted eta_j averaged over the grid
  double positivity_min = 0.0;       // min over points and unit V of i H([phi, phi^*] s, s)(V, Vbar)
  double g_form_min = 0.0;           // same from the sum |sum_j Vbar^j G_j|^2
  double min_norm = 0.0;             // min |s|_H
  bool positivity_ok(double tol = 1e-10) const { return positivity_min >= -tol; }
  nlohmann::json to_json() const;
};

/// s is an r x 1 (0,0)-form.
InvariantSectionReport invariant_section_check(const HiggsBundleState& state, const FormField& s);

struct QuotientCertificate {
  int level = 0;
  int rank = 0;
  ValidityReport validity;
  SubbundleResiduals residuals;  // of the level's sub-bundle (zero for the full bundle)
  FlatnessCertificate initial;
  FlatnessCertificate certificate;
  HiggsBundleState final_state;
  nlohmann::json to_json() const;
};

struct FiltrationReport {
  std::vector<QuotientCertificate> quotients;
  AdaptedPullback pullback;
  TopologicalIntegrals total;
  TopologicalIntegrals quotient_sum;
  double c1_additivity = 0.0;   // |c1(E) - sum c1(Q_i)|
  double ch2_additivity = 0.0;  // |ch2(E) - sum ch2(Q_i)|
  bool pass = false;
  nlohmann::json to_json() const;
};

/// subs: proper sub-bundles E_1 c ... c E_{l-1}; E itself is the last level.
/// Every quotient is flowed with `budget` (T = 0 for none) and certified.
FiltrationReport verify_filtration(const HiggsBundleState& state, const std::vector<HiggsSubbundle>& subs,
                                   double eps_target, const FlowOptions& budget,
                                   std::optional<double> tolerance = std::nullopt);

struct AssembledTotal {
  HermitianMetric metric;
  FlatnessCertificate certificate;
};

/// Glues the certified quotient metrics with level k scaled by rho^{-2(k-1)}.
AssembledTotal assemble_from_filtration(const HiggsBundleState& state, const FiltrationReport& report, double rho,
                                        double eps_target);

/// Experimental: nested sub-bundles spanned by eigenvectors of H0^{-1} H at the
/// first grid point whose log-eigenvalues are separated by more than min_log_gap.
/// Carries no correctness claim; candidates must still pass verify_filtration.
std::vector<HiggsSubbundle> suggest_filtration(const HermitianMetric& h0, const HermitianMetric& h,
                                               double min_log_gap = 0.5);

}  // namespace higgsflow
