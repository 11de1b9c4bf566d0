#pragma once

// Higgs bundle states on the grid and the geometry derived from them.
//
// A holomorphic structure is dbar_E = dbar + a with a an End(E)-valued
// (0,1)-form; the Higgs field phi is an End(E)-valued (1,0)-form. The Chern
// connection of (H, dbar_E) has (1,0) part del + b, and is recomputed from
// (H, a) whenever it is needed.

#include <iosfwd>
#include <optional>

#include "higgsflow/kahler_grid.hpp"
#include "higgsflow/metric.hpp"

namespace higgsflow {

struct HiggsStructure {
  FormField a;    // (0,1)
  FormField phi;  // (1,0)

  HiggsStructure(FormField a_, FormField phi_);
  int rank() const { return a.rows(); }
  const TorusBase& base() const { return a.base(); }

  /// a = 0, phi = 0.
  static HiggsStructure trivial(const TorusBase& base, int rank);
};

struct ValidityReport {
  double integrability = 0.0;   // sup |dbar a + a^a|
  double holomorphicity = 0.0;  // sup |dbar phi + a^phi + phi^a|
  double symmetry = 0.0;        // sup |phi^phi|
  double tolerance = 0.0;
  bool valid = false;
};

/// 1e-8 (1 + largest entry of a or phi).
double default_tolerance(const HiggsStructure& s);
ValidityReport validate(const HiggsStructure& s, std::optional<double> tolerance = std::nullopt);

class HiggsBundleState {
 public:
  HiggsBundleState(HiggsStructure structure, HermitianMetric metric);

  const HiggsStructure& structure() const { return structure_; }
  const HermitianMetric& metric() const { return metric_; }
  const FormField& a() const { return structure_.a; }
  const FormField& phi() const { return structure_.phi; }
  int rank() const { return structure_.rank(); }
  const TorusBase& base() const { return structure_.base(); }

  HiggsBundleState with_metric(HermitianMetric metric) const { return {structure_, std::move(metric)}; }

 private:
  HiggsStructure structure_;
  HermitianMetric metric_;
};

/// (1,0) connection form b with (dbar + a) + (del + b) unitary for H:
/// b = H^{-1} del H - H^{-1} a^dagger H.
FormField chern_connection(const HermitianMetric& h, const FormField& a);

struct ChernCurvature {
  FormField f11;  // dbar b + del a + a^b + b^a
  FormField f20;  // del b + b^b       (vanishes in the continuum)
  FormField f02;  // dbar a + a^a      (vanishes for integrable a)
};

ChernCurvature chern_curvature(const HermitianMetric& h, const FormField& a);
inline FormField curvature(const HermitianMetric& h, const FormField& a) { return chern_curvature(h, a).f11; }

/// phi^{*H} = H^{-1} phi^dagger H with dz -> dzbar.
FormField higgs_adjoint(const FormField& phi, const HermitianMetric& h);

/// Graded commutator of two 1-forms: x^y + y^x.
FormField graded_bracket(const FormField& x, const FormField& y);

// Covariant derivatives of a Hom(col, row)-valued k-form X:
//   D X = d X + A_row ^ X - (-1)^k X ^ A_col
FormField covariant_dbar(const FormField& x, const FormField& a_row, const FormField& a_col);
FormField covariant_del(const FormField& x, const FormField& b_row, const FormField& b_col);

struct HitchinSimpsonCurvature {
  FormField chern;             // F_H, (1,1)
  FormField bracket;           // [phi, phi^*], (1,1)
  FormField del_phi;           // D^{1,0} phi, (2,0)
  FormField dbar_phi_adjoint;  // dbar_E phi^*, (0,2)
  FormField chern_20;          // discretisation residuals of F_H
  FormField chern_02;

  FormField total_11() const { return chern + bracket; }
  /// sup_X |F_HS|_H over all bidegree parts.
  double sup_norm(const HermitianMetric& h) const;
};

HitchinSimpsonCurvature hitchin_simpson_curvature(const HiggsBundleState& state);

struct DegreeSlope {
  double degree = 0.0;
  double slope = 0.0;
  double lambda = 0.0;
};

DegreeSlope degree_slope_lambda(const HiggsBundleState& state);
/// Same from an already computed Chern curvature.
DegreeSlope degree_slope_lambda(const FormField& chern11);

void save_state(std::ostream& os, const HiggsBundleState& state);
HiggsBundleState load_state(std::istream& is);

}  // namespace higgsflow
