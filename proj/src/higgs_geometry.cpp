#include "higgsflow/higgs_geometry.hpp"

#include <cmath>
#include <numbers>

#include "higgsflow/snapshot.hpp"

namespace higgsflow {

HiggsStructure::HiggsStructure(FormField a_, FormField phi_) : a(std::move(a_)), phi(std::move(phi_)) {
  if (!(a.degree() == Bidegree{0, 1})) throw InvalidInput("higgs structure: a must be a (0,1)-form");
  if (!(phi.degree() == Bidegree{1, 0})) throw InvalidInput("higgs structure: phi must be a (1,0)-form");
  if (!a.square() || !phi.square() || a.rows() != phi.rows())
    throw InvalidInput("higgs structure: a and phi must be endomorphisms of the same rank");
  if (!(a.base() == phi.base())) throw InvalidInput("higgs structure: a and phi live on different grids");
}

HiggsStructure HiggsStructure::trivial(const TorusBase& base, int rank) {
  return {FormField(base, rank, {0, 1}), FormField(base, rank, {1, 0})};
}

double default_tolerance(const HiggsStructure& s) {
  return 1e-8 * (1.0 + std::max(sup_abs_entry(s.a), sup_abs_entry(s.phi)));
}

ValidityReport validate(const HiggsStructure& s, std::optional<double> tolerance) {
  const HermitianMetric eye = HermitianMetric::identity(s.base(), s.rank());
  ValidityReport r;
  r.tolerance = tolerance.value_or(default_tolerance(s));
  if (s.base().dim() >= 2) {
    r.integrability = sup_norm(dbar_flat(s.a) + wedge(s.a, s.a), eye);
    r.symmetry = sup_norm(wedge(s.phi, s.phi), eye);
  }
  r.holomorphicity = sup_norm(dbar_flat(s.phi) + wedge(s.a, s.phi) + wedge(s.phi, s.a), eye);
  r.valid = r.integrability <= r.tolerance && r.holomorphicity <= r.tolerance && r.symmetry <= r.tolerance;
  return r;
}

HiggsBundleState::HiggsBundleState(HiggsStructure structure, HermitianMetric metric)
    : structure_(std::move(structure)), metric_(std::move(metric)) {
  if (metric_.rank() != structure_.rank()) throw InvalidInput("state: metric rank differs from bundle rank");
  if (!(metric_.base() == structure_.base())) throw InvalidInput("state: metric lives on a different grid");
}

FormField chern_connection(const HermitianMetric& h, const FormField& a) {
  if (!(a.degree() == Bidegree{0, 1})) throw InvalidInput("chern connection: a must be a (0,1)-form");
  return left_multiply(h.inverse_field(), del_flat(h.field())) - form_adjoint(a, h);
}

ChernCurvature chern_curvature(const HermitianMetric& h, const FormField& a) {
  const FormField b = chern_connection(h, a);
  FormField f11 = dbar_flat(b) + del_flat(a) + wedge(a, b) + wedge(b, a);
  FormField f20 = del_or_empty(b) + wedge_or_empty(b, b);
  FormField f02 = dbar_or_empty(a) + wedge_or_empty(a, a);
  return {std::move(f11), std::move(f20), std::move(f02)};
}

FormField higgs_adjoint(const FormField& phi, const HermitianMetric& h) { return form_adjoint(phi, h); }

FormField graded_bracket(const FormField& x, const FormField& y) { return wedge(x, y) + wedge(y, x); }

FormField covariant_dbar(const FormField& x, const FormField& a_row, const FormField& a_col) {
  FormField out = dbar_or_empty(x) + wedge_or_empty(a_row, x);
  const FormField right = wedge_or_empty(x, a_col);
  if (x.degree().total() % 2 == 0)
    out -= right;
  else
    out += right;
  return out;
}

FormField covariant_del(const FormField& x, const FormField& b_row, const FormField& b_col) {
  FormField out = del_or_empty(x) + wedge_or_empty(b_row, x);
  const FormField right = wedge_or_empty(x, b_col);
  if (x.degree().total() % 2 == 0)
    out -= right;
  else
    out += right;
  return out;
}

double HitchinSimpsonCurvature::sup_norm(const HermitianMetric& h) const {
  const FormField f11 = total_11();
  return sup_norm_of_sum({&f11, &del_phi, &dbar_phi_adjoint}, h, h);
}

HitchinSimpsonCurvature hitchin_simpson_curvature(const HiggsBundleState& state) {
  const HermitianMetric& h = state.metric();
  const FormField& a = state.a();
  const FormField& phi = state.phi();
  const FormField b = chern_connection(h, a);
  const FormField phi_adj = higgs_adjoint(phi, h);
  HitchinSimpsonCurvature out{
      dbar_flat(b) + del_flat(a) + wedge(a, b) + wedge(b, a),
      graded_bracket(phi, phi_adj),
      covariant_del(phi, b, b),
      covariant_dbar(phi_adj, a, a),
      del_or_empty(b) + wedge_or_empty(b, b),
      dbar_or_empty(a) + wedge_or_empty(a, a),
  };
  return out;
}

DegreeSlope degree_slope_lambda(const FormField& chern11) {
  const TorusBase& base = chern11.base();
  const auto tr = trace_field(contract_lambda(chern11));
  std::vector<double> density(tr.size());
  // (i/2pi) tr F ^ omega^{n-1}/(n-1)! = (1/2pi) tr(i Lambda F) omega^n/n!
  for (std::size_t i = 0; i < tr.size(); ++i) density[i] = (cplx(0, 1) * tr[i]).real() / (2.0 * std::numbers::pi);
  DegreeSlope d;
  d.degree = integrate(density, base);
  d.slope = d.degree / chern11.rows();
  d.lambda = 2.0 * std::numbers::pi * d.slope / base.volume();
  return d;
}

DegreeSlope degree_slope_lambda(const HiggsBundleState& state) {
  return degree_slope_lambda(curvature(state.metric(), state.a()));
}

void save_state(std::ostream& os, const HiggsBundleState& state) {
  write_sections(os, {{"a", state.a()}, {"phi", state.phi()}, {"H", state.metric().field()}});
}

HiggsBundleState load_state(std::istream& is) {
  auto sections = read_sections(is);
  const FormField* a = nullptr;
  const FormField* phi = nullptr;
  const FormField* h = nullptr;
  for (const auto& [name, f] : sections) {
    if (name == "a") a = &f;
    if (name == "phi") phi = &f;
    if (name == "H") h = &f;
  }
  if (!a || !phi || !h) throw InvalidInput("state snapshot: sections a, phi and H are required");
  return {HiggsStructure(*a, *phi), HermitianMetric(*h)};
}

}  // namespace higgsflow
